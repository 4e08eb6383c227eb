#include "rmarkov/renyi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rmarkov/parallel.hpp"

namespace rmarkov {

namespace {

SiteSet range_sites(std::size_t first, std::size_t count, const Tripartition& p) {
  SiteSet out;
  const std::size_t n = p.length();
  for (std::size_t k = 0; k < count; ++k) out.push_back((first + k + p.offset) % n);
  std::sort(out.begin(), out.end());
  return out;
}

SiteSet merged(std::initializer_list<SiteSet> parts) {
  SiteSet out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  std::sort(out.begin(), out.end());
  return out;
}

SiteSet sorted_unique(std::span<const std::size_t> x, std::size_t length) {
  SiteSet s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("repeated site in subsystem");
  if (!s.empty() && s.back() >= length) throw std::out_of_range("subsystem site out of range");
  return s;
}

}  // namespace

void Tripartition::validate() const {
  if (n_a == 0) throw std::invalid_argument("Tripartition: n_a must be positive");
  if (r == 0) throw std::invalid_argument("Tripartition: r must be positive");
}

SiteSet Tripartition::a() const { return range_sites(0, n_a, *this); }
SiteSet Tripartition::b1() const { return range_sites(n_a, r, *this); }
SiteSet Tripartition::c() const { return range_sites(n_a + r, r, *this); }
SiteSet Tripartition::b2() const { return range_sites(n_a + 2 * r, r, *this); }
SiteSet Tripartition::b() const { return merged({b1(), b2()}); }
SiteSet Tripartition::ab() const { return merged({a(), b1(), b2()}); }
SiteSet Tripartition::bc() const { return merged({b1(), c(), b2()}); }
SiteSet Tripartition::abc() const { return range_sites(0, length(), *this); }

SiteSet complement(std::span<const std::size_t> x, std::size_t length) {
  const SiteSet s = sorted_unique(x, length);
  SiteSet out;
  for (std::size_t j = 0; j < length; ++j)
    if (!std::binary_search(s.begin(), s.end(), j)) out.push_back(j);
  return out;
}

double second_renyi_entropy(const ChoiState& rho, std::span<const std::size_t> x) {
  const std::size_t n = rho.length();
  const SiteSet xs = sorted_unique(x, n);
  if (xs.empty()) return 0.0;
  const SiteSet traced = complement(xs, n);
  const SignedLog tr = log_trace_of(rho);
  if (tr.sign <= 0.0) throw std::domain_error("second_renyi_entropy: trace is not positive");
  const ChoiState depolarized = apply_depolarizer(rho, traced);
  const LogComplex norm2 = inner_product(depolarized.state, depolarized.state);
  if (norm2.is_zero() || !std::isfinite(norm2.log_magnitude))
    throw std::domain_error("second_renyi_entropy: norm is not representable");
  const double log_d = static_cast<double>(traced.size()) * std::numbers::ln2;
  return -(log_d + norm2.log_magnitude - 2.0 * tr.log_abs);
}

double renyi_mutual_information(const ChoiState& rho, std::span<const std::size_t> x,
                                std::span<const std::size_t> y) {
  SiteSet xy(x.begin(), x.end());
  xy.insert(xy.end(), y.begin(), y.end());
  std::sort(xy.begin(), xy.end());
  if (std::adjacent_find(xy.begin(), xy.end()) != xy.end())
    throw std::invalid_argument("renyi_mutual_information: subsystems overlap");
  return second_renyi_entropy(rho, x) + second_renyi_entropy(rho, y) - second_renyi_entropy(rho, xy);
}

CmiTerms cmi_terms(const ChoiState& rho, const Tripartition& part) {
  part.validate();
  if (rho.length() != part.length()) throw std::invalid_argument("cmi: state length does not match tripartition");
  const std::array<SiteSet, 4> sets{part.ab(), part.bc(), part.b(), part.abc()};
  std::array<double, 4> s{};
  std::array<std::string, 4> errors;
#pragma omp parallel for schedule(dynamic, 1) if (max_threads() > 1)
  for (int k = 0; k < 4; ++k) {
    try {
      s[k] = second_renyi_entropy(rho, sets[k]);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::domain_error(e);
  return {s[0], s[1], s[2], s[3]};
}

double cmi(const ChoiState& rho, const Tripartition& part) { return cmi_terms(rho, part).value(); }

double p_x_from_p_zz(double p_zz, double h_x, double j_zz) {
  if (!(p_zz >= 0.0 && p_zz <= 0.5)) throw std::invalid_argument("p_zz must lie in [0, 1/2]");
  if (!(j_zz > 0.0) || !(h_x >= 0.0)) throw std::invalid_argument("p_x line needs J_zz > 0 and h_x >= 0");
  return 0.5 - 0.5 * std::pow(1.0 - 2.0 * p_zz, h_x / j_zz);
}

Curve CmiCurve::samples() const {
  Curve out;
  for (const auto& p : points)
    if (p.ok()) out.push_back({static_cast<double>(p.r), p.i2});
  return out;
}

ChoiState decohere(const MatrixProductState& psi, std::span<const ChannelSpec> channels,
                   const TruncationPolicy& policy) {
  ChoiState rho = vectorize_pure(psi, policy);
  for (const auto& ch : channels) rho = apply_channel(std::move(rho), ch, policy);
  return rho;
}

CmiPoint cmi_point(const PipelineSpec& pipeline, std::size_t r, const GroundStateProvider& provider) {
  const auto start = std::chrono::steady_clock::now();
  CmiPoint point;
  point.r = r;
  point.i2 = std::numeric_limits<double>::quiet_NaN();
  try {
    Tripartition part{pipeline.n_a, r, 0};
    part.validate();
    point.length = part.length();
    ModelSpec spec = pipeline.model;
    spec.length = point.length;
    const GroundState gs = provider ? provider(spec) : ground_state(spec, pipeline.dmrg);
    point.energy = gs.energy;
    point.dmrg_converged = gs.converged;
    point.dmrg_delta = gs.last_delta;
    const ChoiState rho = decohere(gs.state, pipeline.channels, pipeline.choi_policy);
    point.max_discarded_weight = std::max(gs.max_discarded_weight, rho.discarded_weight);
    point.trace_drift = rho.trace_drift;
    point.terms = cmi_terms(rho, part);
    point.i2 = point.terms.value();
  } catch (const std::exception& e) {
    point.error = e.what();
  }
  point.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return point;
}

CmiCurve cmi_r_sweep(const PipelineSpec& pipeline, std::span<const std::size_t> r_values,
                     const GroundStateProvider& provider, int jobs) {
  if (r_values.empty()) throw std::invalid_argument("cmi_r_sweep: no r values");
  for (std::size_t k = 1; k < r_values.size(); ++k)
    if (r_values[k] <= r_values[k - 1]) throw std::invalid_argument("cmi_r_sweep: r values must increase");
  for (const auto& ch : pipeline.channels) ch.validate();

  CmiCurve curve;
  curve.pipeline = pipeline;
  curve.points.resize(r_values.size());
  const int threads = jobs > 0 ? jobs : max_threads();
  const auto count = static_cast<std::ptrdiff_t>(r_values.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t k = 0; k < count; ++k) curve.points[k] = cmi_point(pipeline, r_values[k], provider);
  return curve;
}

}  // namespace rmarkov
