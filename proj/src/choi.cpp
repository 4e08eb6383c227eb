#include "rmarkov/choi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rmarkov/mpo_builder.hpp"

namespace rmarkov {

namespace {

constexpr std::size_t kDoubledDim = 4;

// Split a doubled multi-site index into its upper and lower qubit strings.
std::pair<std::size_t, std::size_t> split_doubled(std::size_t index, std::size_t sites) {
  std::size_t upper = 0, lower = 0;
  for (std::size_t k = 0; k < sites; ++k) {
    const std::size_t shift = 2 * (sites - 1 - k);
    const std::size_t local = (index >> shift) & 3u;
    upper = (upper << 1) | (local >> 1);
    lower = (lower << 1) | (local & 1u);
  }
  return {upper, lower};
}

void require_doubled(const ChoiState& rho) {
  rho.state.validate();
  if (rho.state.phys_dim != kDoubledDim) throw std::invalid_argument("Choi state must have phys_dim 4");
}

// Pairs (i, j) of Schmidt indices kept on one bond of psi* (x) psi.
struct PairSelection {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double discarded_weight = 0.0;
};

PairSelection select_pairs(const std::vector<double>& lambda, const TruncationPolicy& policy) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  all.reserve(lambda.size() * lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i)
    for (std::size_t j = 0; j < lambda.size(); ++j) all.emplace_back(i, j);
  std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    return lambda[a.first] * lambda[a.second] > lambda[b.first] * lambda[b.second];
  });
  std::vector<double> weights(all.size());
  for (std::size_t k = 0; k < all.size(); ++k) weights[k] = lambda[all[k].first] * lambda[all[k].second];
  PairSelection sel;
  const std::size_t keep = truncation_rank(weights, policy, &sel.discarded_weight);
  all.resize(keep);
  sel.pairs = std::move(all);
  return sel;
}

}  // namespace

std::string to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::OddZ: return "odd_z";
    case ChannelKind::PairZZ: return "pair_zz";
    case ChannelKind::SingleX: return "single_x";
  }
  return "unknown";
}

void ChannelSpec::validate() const {
  if (!(strength >= 0.0 && strength <= 0.5))
    throw std::invalid_argument("channel strength must lie in [0, 1/2]");
}

DenseTensor doubled_operator(const DenseTensor& kraus) {
  const std::array<DenseTensor, 1> ops{kraus};
  return doubled_channel(ops, 1);
}

DenseTensor doubled_channel(std::span<const DenseTensor> kraus_ops, std::size_t sites) {
  if (sites == 0 || sites > 4) throw std::invalid_argument("doubled_channel supports 1 to 4 sites");
  const std::size_t dim = std::size_t{1} << sites;
  const std::size_t ddim = dim * dim;
  DenseTensor out({ddim, ddim});
  for (const auto& k : kraus_ops) {
    if (k.rank() != 2 || k.extent(0) != dim || k.extent(1) != dim)
      throw std::invalid_argument("Kraus operator dimension does not match the site count");
    for (std::size_t row = 0; row < ddim; ++row) {
      const auto [u_out, l_out] = split_doubled(row, sites);
      for (std::size_t col = 0; col < ddim; ++col) {
        const auto [u_in, l_in] = split_doubled(col, sites);
        out(row, col) += std::conj(k(u_out, u_in)) * k(l_out, l_in);
      }
    }
  }
  return out;
}

DenseTensor depolarizer_operator() {
  const std::array<DenseTensor, 4> kraus{0.5 * pauli::identity(), 0.5 * pauli::x(), 0.5 * pauli::y(),
                                         0.5 * pauli::z()};
  return doubled_channel(kraus, 1);
}

ChoiState vectorize_pure(const MatrixProductState& psi, const TruncationPolicy& policy) {
  psi.validate();
  if (psi.phys_dim != 2) throw std::invalid_argument("vectorize_pure expects a spin-1/2 state");
  policy.validate();
  const std::size_t n = psi.length();

  // Right-canonical tensors whose bond indices are Schmidt indices.
  MatrixProductState mixed = canonicalize(psi, n - 1);
  std::vector<std::vector<double>> lambda(n > 0 ? n - 1 : 0);
  const TruncationPolicy exact{std::numeric_limits<std::size_t>::max(), 0.0};
  const std::array<std::size_t, 1> left_axis{0};
  for (std::size_t j = n - 1; j > 0; --j) {
    SvdSplit split = svd_split(mixed.sites[j], left_axis, exact);
    const double norm = std::sqrt(std::inner_product(split.s.begin(), split.s.end(), split.s.begin(), 0.0));
    for (auto& s : split.s) s /= norm;
    auto um = split.u.as_matrix(split.u.extent(0), split.s.size());
    for (std::size_t i = 0; i < split.s.size(); ++i) um.col(static_cast<Eigen::Index>(i)) *= split.s[i];
    mixed.sites[j] = std::move(split.v);
    mixed.sites[j - 1] = contract(mixed.sites[j - 1], split.u, {{2, 0}});
    lambda[j - 1] = std::move(split.s);
  }
  mixed.sites[0] *= Complex{1.0 / mixed.sites[0].norm(), 0.0};

  ChoiState out;
  std::vector<PairSelection> kept;
  kept.push_back({{{0, 0}}, 0.0});
  for (const auto& l : lambda) {
    kept.push_back(select_pairs(l, policy));
    out.discarded_weight += kept.back().discarded_weight;
  }
  kept.push_back({{{0, 0}}, 0.0});

  MatrixProductState doubled;
  doubled.phys_dim = kDoubledDim;
  for (std::size_t j = 0; j < n; ++j) {
    const DenseTensor& b = mixed.sites[j];
    const auto& lp = kept[j].pairs;
    const auto& rp = kept[j + 1].pairs;
    DenseTensor t({lp.size(), kDoubledDim, rp.size()});
    for (std::size_t a = 0; a < lp.size(); ++a)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t l = 0; l < 2; ++l)
          for (std::size_t c = 0; c < rp.size(); ++c)
            t(a, 2 * u + l, c) =
                std::conj(b(lp[a].first, u, rp[c].first)) * b(lp[a].second, l, rp[c].second);
    doubled.sites.push_back(std::move(t));
  }

  Compressed compressed = compress(std::move(doubled), policy);
  out.state = std::move(compressed.state);
  out.discarded_weight += compressed.discarded_weight;
  const SignedLog tr = log_trace_of(out);
  if (tr.sign <= 0.0) throw std::domain_error("vectorize_pure: nonpositive trace");
  out.state.log_scale -= tr.log_abs;
  return out;
}

ChoiState identity_choi(std::size_t length) {
  if (length == 0) throw std::invalid_argument("identity_choi needs at least one site");
  ChoiState out;
  out.state = MatrixProductState::product(length, {1.0, 0.0, 0.0, 1.0});
  return out;
}

double SignedLog::value() const {
  if (sign == 0.0) return 0.0;
  return sign * std::exp(log_abs);
}

SignedLog log_trace_of(const ChoiState& rho) {
  require_doubled(rho);
  const LogComplex z = inner_product(identity_choi(rho.length()).state, rho.state);
  SignedLog out;
  if (z.is_zero() || z.phase.real() == 0.0) return out;
  out.sign = z.phase.real() > 0.0 ? 1.0 : -1.0;
  out.log_abs = z.log_magnitude + std::log(std::abs(z.phase.real()));
  return out;
}

double trace_of(const ChoiState& rho) { return log_trace_of(rho).value(); }

ChoiState apply_channel(ChoiState rho, const ChannelSpec& spec, const TruncationPolicy& policy,
                        bool renormalize) {
  spec.validate();
  require_doubled(rho);
  policy.validate();
  const double before = trace_of(rho);
  const std::size_t n = rho.length();
  const double p = spec.strength;
  const DenseTensor id = pauli::identity();

  MatrixProductState& s = rho.state;
  if (spec.kind == ChannelKind::OddZ || spec.kind == ChannelKind::SingleX) {
    const DenseTensor pauli_op = spec.kind == ChannelKind::OddZ ? pauli::z() : pauli::x();
    const std::array<DenseTensor, 2> kraus{std::sqrt(1.0 - p) * id, std::sqrt(p) * pauli_op};
    const DenseTensor op = doubled_channel(kraus, 1);
    const std::size_t start = spec.kind == ChannelKind::OddZ ? 1 : 0;
    const std::size_t step = spec.kind == ChannelKind::OddZ ? 2 : 1;
    for (std::size_t j = start; j < n; j += step) s = apply_site_operator(std::move(s), j, op);
    Compressed c = compress(std::move(s), policy);
    s = std::move(c.state);
    rho.discarded_weight += c.discarded_weight;
  } else {
    const DenseTensor zz = kron(pauli::z(), pauli::z());
    const std::array<DenseTensor, 2> kraus{std::sqrt(1.0 - p) * kron(id, id), std::sqrt(p) * zz};
    const DenseTensor gate = doubled_channel(kraus, 2);
    for (std::size_t j = 0; j + 1 < n; ++j) {
      Compressed c = apply_two_site_gate(std::move(s), j, gate, policy);
      s = std::move(c.state);
      rho.discarded_weight += c.discarded_weight;
    }
    // Wrap bond (n-1, 0) as a bond-2 MPO: (1-p) 1 + p (ZZ)_{0} (ZZ)_{n-1}.
    const DenseTensor zz_doubled = doubled_operator(pauli::z());
    std::vector<OperatorTerm> terms;
    terms.push_back({1.0 - p, {{0, DenseTensor::identity(kDoubledDim)}}});
    terms.push_back({p, {{0, zz_doubled}, {n - 1, zz_doubled}}});
    const MatrixProductOperator wrap = build_mpo(n, kDoubledDim, std::move(terms));
    Compressed c = apply_mpo(s, wrap, policy);
    s = std::move(c.state);
    rho.discarded_weight += c.discarded_weight;
  }

  const SignedLog after = log_trace_of(rho);
  rho.trace_drift = std::max(rho.trace_drift, std::abs(after.value() - before));
  if (renormalize) {
    if (after.sign <= 0.0) throw std::domain_error("apply_channel: trace is not positive");
    s.log_scale -= after.log_abs;
  }
  rho.history.push_back(spec);
  return rho;
}

ChoiState apply_depolarizer(ChoiState rho, std::span<const std::size_t> sites) {
  require_doubled(rho);
  for (auto j : sites)
    if (j >= rho.length()) throw std::out_of_range("depolarizer site out of range");
  static const DenseTensor op = depolarizer_operator();
  for (auto j : sites) rho.state = apply_site_operator(std::move(rho.state), j, op);
  return rho;
}

double log_purity(const ChoiState& rho) {
  require_doubled(rho);
  const SignedLog tr = log_trace_of(rho);
  if (tr.sign <= 0.0) throw std::domain_error("purity: trace is numerically zero or negative");
  const LogComplex norm2 = inner_product(rho.state, rho.state);
  return norm2.log_magnitude - 2.0 * tr.log_abs;
}

double purity(const ChoiState& rho) { return std::exp(log_purity(rho)); }

std::string describe_history(const ChoiState& rho) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < rho.history.size(); ++i) {
    if (i > 0) os << ';';
    os << to_string(rho.history[i].kind) << ':' << rho.history[i].strength;
  }
  return os.str();
}

}  // namespace rmarkov
