#include "rmarkov/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

namespace rmarkov {

namespace {

constexpr double kFlatVariance = 1e-14;
constexpr double kStabilityTolerance = 0.3;
constexpr std::size_t kGridPoints = 400;

void check_curve(std::span<const CurvePoint> curve) {
  if (curve.size() < 3) throw std::invalid_argument("fit needs at least 3 points");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!std::isfinite(curve[i].r) || !std::isfinite(curve[i].value))
      throw std::invalid_argument("fit: non-finite sample");
    if (curve[i].r <= 0.0) throw std::invalid_argument("fit: r must be positive");
    if (i > 0 && curve[i].r <= curve[i - 1].r) throw std::invalid_argument("fit: r must increase");
  }
}

double mean_offset(std::span<const CurvePoint> curve, double c0) {
  double sum = 0.0;
  for (const auto& p : curve) sum += p.value - std::exp(-c0 * p.r);
  return sum / static_cast<double>(curve.size());
}

double profile_loss(std::span<const CurvePoint> curve, double c0) {
  const double c1 = mean_offset(curve, c0);
  double loss = 0.0;
  for (const auto& p : curve) {
    const double res = p.value - std::exp(-c0 * p.r) - c1;
    loss += res * res;
  }
  return loss;
}

// Half the derivative of the profile loss in c0 (c1 is stationary).
double profile_slope(std::span<const CurvePoint> curve, double c0) {
  const double c1 = mean_offset(curve, c0);
  double g = 0.0;
  for (const auto& p : curve) {
    const double e = std::exp(-c0 * p.r);
    g += (p.value - e - c1) * p.r * e;
  }
  return g;
}

double variance(std::span<const CurvePoint> curve) {
  double mean = 0.0;
  for (const auto& p : curve) mean += p.value;
  mean /= static_cast<double>(curve.size());
  double v = 0.0;
  for (const auto& p : curve) v += (p.value - mean) * (p.value - mean);
  return v / static_cast<double>(curve.size());
}

double rms(std::span<const CurvePoint> curve, const FitResult& fit) {
  double sum = 0.0;
  for (const auto& p : curve) {
    const double res = p.value - evaluate(fit, p.r);
    sum += res * res;
  }
  return std::sqrt(sum / static_cast<double>(curve.size()));
}

void finish_exponential(std::span<const CurvePoint> curve, FitResult& fit) {
  fit.xi2 = fit.c0 > 0.0 ? 1.0 / fit.c0 : std::numeric_limits<double>::infinity();
  fit.rms_residual = rms(curve, fit);
}

FitResult unit_fit_core(std::span<const CurvePoint> curve) {
  FitResult fit;
  fit.model = FitModel::PaperExp;
  if (variance(curve) < kFlatVariance) {
    fit.c0 = kMinDecayRate;
    fit.c1 = mean_offset(curve, fit.c0);
    fit.flags.no_decay = true;
    fit.flags.at_bound = true;
    finish_exponential(curve, fit);
    return fit;
  }

  std::vector<double> grid(kGridPoints);
  const double log_lo = std::log(kMinDecayRate), log_hi = std::log(kMaxDecayRate);
  for (std::size_t i = 0; i < kGridPoints; ++i)
    grid[i] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(kGridPoints - 1));
  grid.front() = kMinDecayRate;
  grid.back() = kMaxDecayRate;
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kGridPoints; ++i) {
    const double loss = profile_loss(curve, grid[i]);
    if (loss < best_loss) {
      best_loss = loss;
      best = i;
    }
  }
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, kGridPoints - 1)];
  auto loss = [&](double c0) { return profile_loss(curve, c0); };
  double c0 = boost::math::tools::brent_find_minima(loss, lo, hi, std::numeric_limits<double>::digits).first;

  // Polish on the stationarity condition, which resolves c0 far below sqrt(eps).
  auto slope = [&](double x) { return profile_slope(curve, x); };
  const double g_lo = slope(lo), g_hi = slope(hi);
  if (std::isfinite(g_lo) && std::isfinite(g_hi) && g_lo * g_hi < 0.0) {
    boost::uintmax_t iterations = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 2);
    const auto root = boost::math::tools::toms748_solve(slope, lo, hi, g_lo, g_hi, tol, iterations);
    const double candidate = 0.5 * (root.first + root.second);
    if (profile_loss(curve, candidate) <= profile_loss(curve, c0)) c0 = candidate;
  }

  fit.c0 = c0;
  fit.c1 = mean_offset(curve, c0);
  const double span = kMaxDecayRate - kMinDecayRate;
  fit.flags.at_bound = c0 - kMinDecayRate < 1e-9 * span || kMaxDecayRate - c0 < 1e-9 * span;
  finish_exponential(curve, fit);
  return fit;
}

void stability_check(std::span<const CurvePoint> curve, FitResult& fit) {
  fit.xi2_drop_last = std::numeric_limits<double>::quiet_NaN();
  if (curve.size() < 4) return;
  const FitResult shorter = unit_fit_core(curve.first(curve.size() - 1));
  fit.xi2_drop_last = shorter.xi2;
  if (std::isfinite(fit.xi2) && fit.xi2 > 0.0)
    fit.flags.unstable = std::abs(shorter.xi2 - fit.xi2) > kStabilityTolerance * fit.xi2;
}

struct AmplitudeResiduals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  std::span<const CurvePoint> curve;

  int inputs() const { return 3; }
  int values() const { return static_cast<int>(curve.size()); }

  // params = (a, c0, c1)
  int operator()(const Eigen::VectorXd& params, Eigen::VectorXd& out) const {
    for (std::size_t i = 0; i < curve.size(); ++i)
      out[static_cast<Eigen::Index>(i)] =
          params[0] * std::exp(-params[1] * curve[i].r) + params[2] - curve[i].value;
    return 0;
  }

  int df(const Eigen::VectorXd& params, Eigen::MatrixXd& jac) const {
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double e = std::exp(-params[1] * curve[i].r);
      jac(row, 0) = e;
      jac(row, 1) = -params[0] * curve[i].r * e;
      jac(row, 2) = 1.0;
    }
    return 0;
  }
};

}  // namespace

std::string to_string(FitModel m) {
  switch (m) {
    case FitModel::PaperExp: return "paper_exp";
    case FitModel::AmpExp: return "amp_exp";
    case FitModel::PowerLaw: return "power_law";
  }
  return "unknown";
}

std::string FitFlags::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(no_decay, "no_decay");
  add(at_bound, "at_bound");
  add(unstable, "unstable");
  add(diverged, "diverged");
  add(unfit, "unfit");
  return out.empty() ? "ok" : out;
}

double evaluate(const FitResult& fit, double r) {
  if (fit.model == FitModel::PowerLaw) return fit.amplitude * std::pow(r, -fit.alpha2.value_or(0.0)) + fit.c1;
  return fit.amplitude * std::exp(-fit.c0 * r) + fit.c1;
}

FitResult fit_exponential(std::span<const CurvePoint> curve) {
  check_curve(curve);
  FitResult fit = unit_fit_core(curve);
  stability_check(curve, fit);
  return fit;
}

AmplitudeFit fit_exponential_amplitude(std::span<const CurvePoint> curve) {
  AmplitudeFit out;
  out.unit = fit_exponential(curve);
  FitResult fallback = out.unit;
  fallback.flags.diverged = true;

  if (out.unit.flags.no_decay) {
    out.amplitude = fallback;
    out.amplitude.flags.diverged = false;
    return out;
  }

  AmplitudeResiduals functor{curve};
  Eigen::VectorXd params(3);
  params << 1.0, out.unit.c0, out.unit.c1;
  Eigen::LevenbergMarquardt<AmplitudeResiduals> lm(functor);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.parameters.maxfev = 2000;
  const auto status = lm.minimize(params);
  const bool failed = status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
                      status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
                      status == Eigen::LevenbergMarquardtSpace::UserAsked;
  const bool finite = params.allFinite();
  if (failed || !finite || params[1] < kMinDecayRate || params[1] > kMaxDecayRate) {
    out.amplitude = fallback;
    return out;
  }

  FitResult fit;
  fit.model = FitModel::AmpExp;
  fit.amplitude = params[0];
  fit.c0 = params[1];
  fit.c1 = params[2];
  finish_exponential(curve, fit);
  if (fit.rms_residual > out.unit.rms_residual * (1.0 + 1e-12) + 1e-300) {
    out.amplitude = fallback;
    return out;
  }
  fit.xi2_drop_last = std::numeric_limits<double>::quiet_NaN();
  out.amplitude = fit;
  return out;
}

FitResult fit_power_law(std::span<const CurvePoint> curve) { return fit_power_law(curve, 0.0); }

FitResult fit_power_law(std::span<const CurvePoint> curve, double offset) {
  check_curve(curve);
  FitResult fit;
  fit.model = FitModel::PowerLaw;
  fit.c1 = offset;
  fit.c0 = 0.0;
  fit.xi2 = std::numeric_limits<double>::infinity();
  fit.xi2_drop_last = std::numeric_limits<double>::quiet_NaN();

  const auto n = static_cast<Eigen::Index>(curve.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = curve[static_cast<std::size_t>(i)];
    const double shifted = p.value - offset;
    if (!(shifted > 0.0)) {
      fit.flags.unfit = true;
      fit.rms_residual = std::numeric_limits<double>::quiet_NaN();
      fit.amplitude = std::numeric_limits<double>::quiet_NaN();
      return fit;
    }
    design(i, 0) = 1.0;
    design(i, 1) = std::log(p.r);
    target[i] = std::log(shifted);
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(target);
  fit.amplitude = std::exp(coef[0]);
  fit.alpha2 = -coef[1];
  fit.rms_residual = rms(curve, fit);
  return fit;
}

}  // namespace rmarkov
