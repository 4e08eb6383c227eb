#pragma once

#include <optional>
#include <span>
#include <string>

#include "rmarkov/curve.hpp"

namespace rmarkov {

enum class FitModel { PaperExp, AmpExp, PowerLaw };

std::string to_string(FitModel m);

struct FitFlags {
  /// I2 variance below 1e-14: no decay to fit.
  bool no_decay = false;
  /// c0 ended on an end of the search bracket.
  bool at_bound = false;
  /// xi2 moved by more than 30% when the largest-r point was dropped.
  bool unstable = false;
  /// Amplitude fit did not converge; the unit-amplitude result is reported.
  bool diverged = false;
  /// Power law impossible (nonpositive values after the offset).
  bool unfit = false;

  bool any() const { return no_decay || at_bound || unstable || diverged || unfit; }
  /// '|'-joined flag names, or "ok".
  std::string to_string() const;
};

struct FitResult {
  FitModel model = FitModel::PaperExp;
  double amplitude = 1.0;
  double c0 = 0.0;
  double c1 = 0.0;
  /// 1 / c0 (infinity when c0 = 0).
  double xi2 = 0.0;
  std::optional<double> alpha2;
  /// Root mean square of data minus model, in linear scale.
  double rms_residual = 0.0;
  /// xi2 refit without the largest-r point (NaN with fewer than 4 points).
  double xi2_drop_last = 0.0;
  FitFlags flags;
};

/// Search bracket for the decay rate.
inline constexpr double kMinDecayRate = 1e-3;
inline constexpr double kMaxDecayRate = 10.0;

/// Least squares e^{-c0 r} + c1 with c1 profiled out in closed form and c0
/// found by a bracketed one-dimensional minimization.
FitResult fit_exponential(std::span<const CurvePoint> curve);

struct AmplitudeFit {
  FitResult unit;
  FitResult amplitude;
};

/// a e^{-c0 r} + c1 by damped Gauss-Newton (Levenberg-Marquardt) started from
/// the unit-amplitude solution, returned alongside it.
AmplitudeFit fit_exponential_amplitude(std::span<const CurvePoint> curve);

/// Least squares of ln I2 against ln r. The residual is reported in linear
/// scale so it is comparable with the exponential fits.
FitResult fit_power_law(std::span<const CurvePoint> curve);
/// ln(I2 - offset) against ln r.
FitResult fit_power_law(std::span<const CurvePoint> curve, double offset);

/// Prediction of a fit at r.
double evaluate(const FitResult& fit, double r);

}  // namespace rmarkov
