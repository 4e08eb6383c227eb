#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rmarkov/choi.hpp"
#include "rmarkov/curve.hpp"
#include "rmarkov/dmrg.hpp"

namespace rmarkov {

using SiteSet = std::vector<std::size_t>;

/// Ring layout A | B1 | C | B2 with |A| = n_a and |B1| = |C| = |B2| = r.
/// Every site index is shifted by `offset` modulo the length.
struct Tripartition {
  std::size_t n_a = 4;
  std::size_t r = 1;
  std::size_t offset = 0;

  std::size_t length() const { return n_a + 3 * r; }
  void validate() const;

  SiteSet a() const;
  SiteSet b1() const;
  SiteSet c() const;
  SiteSet b2() const;
  SiteSet b() const;
  SiteSet ab() const;
  SiteSet bc() const;
  SiteSet abc() const;
};

/// Sites of {0..length-1} not in x, ascending.
SiteSet complement(std::span<const std::size_t> x, std::size_t length);

/// S2_X = -ln( d_Xbar <<D rho|D rho>> / Tr(rho)^2 ) with D the depolarizer on Xbar.
double second_renyi_entropy(const ChoiState& rho, std::span<const std::size_t> x);

/// S2_X + S2_Y - S2_{X u Y}; throws if X and Y overlap.
double renyi_mutual_information(const ChoiState& rho, std::span<const std::size_t> x,
                                std::span<const std::size_t> y);

struct CmiTerms {
  double s_ab = 0.0;
  double s_bc = 0.0;
  double s_b = 0.0;
  double s_abc = 0.0;

  double value() const { return s_ab + s_bc - s_b - s_abc; }
};

/// The four entropies, each from its own depolarization of rho.
CmiTerms cmi_terms(const ChoiState& rho, const Tripartition& part);
double cmi(const ChoiState& rho, const Tripartition& part);

/// X-channel strength tied to the ZZ strength: 1/2 - (1/2)(1 - 2 p_zz)^(h_x / J_zz).
double p_x_from_p_zz(double p_zz, double h_x, double j_zz);

/// One CMI pipeline: ground state of `model` at L = n_a + 3r, vectorized,
/// channels applied in order, then the CMI.
struct PipelineSpec {
  ModelSpec model;
  std::vector<ChannelSpec> channels;
  DmrgConfig dmrg;
  TruncationPolicy choi_policy = kChoiPolicy;
  std::size_t n_a = 4;
};

struct CmiPoint {
  std::size_t r = 0;
  std::size_t length = 0;
  CmiTerms terms;
  double i2 = 0.0;
  double energy = 0.0;
  bool dmrg_converged = false;
  double dmrg_delta = 0.0;
  double max_discarded_weight = 0.0;
  double trace_drift = 0.0;
  double wall_seconds = 0.0;
  /// Empty unless the point failed; failed points keep i2 = NaN.
  std::string error;

  bool ok() const { return error.empty(); }
};

struct CmiCurve {
  PipelineSpec pipeline;
  std::vector<CmiPoint> points;

  /// (r, I2) samples of the successful points.
  Curve samples() const;
};

/// Supplies the ground state for a model spec (e.g. from a checkpoint cache).
using GroundStateProvider = std::function<GroundState(const ModelSpec&)>;

/// Channels applied to an already prepared ground state.
ChoiState decohere(const MatrixProductState& psi, std::span<const ChannelSpec> channels,
                   const TruncationPolicy& policy);

CmiPoint cmi_point(const PipelineSpec& pipeline, std::size_t r, const GroundStateProvider& provider = {});

/// Points are independent jobs; jobs = 0 uses every available thread.
CmiCurve cmi_r_sweep(const PipelineSpec& pipeline, std::span<const std::size_t> r_values,
                     const GroundStateProvider& provider = {}, int jobs = 0);

}  // namespace rmarkov
