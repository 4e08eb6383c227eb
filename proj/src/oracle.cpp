#include "rmarkov/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rmarkov/parallel.hpp"

namespace rmarkov::ed {

namespace {

using Index = std::uint64_t;

Index site_bit(std::size_t site, std::size_t n) { return Index{1} << (n - 1 - site); }

double z_sign(Index state, std::size_t site, std::size_t n) { return (state & site_bit(site, n)) ? -1.0 : 1.0; }

void check_size(std::size_t n) {
  if (n == 0 || n > kMaxSites) throw std::invalid_argument("ED oracle supports 1 to 12 sites");
}

// Basis offsets contributed by each configuration of the listed sites.
std::vector<Index> offsets(std::span<const std::size_t> sites, std::size_t n) {
  const std::size_t k = sites.size();
  std::vector<Index> out(std::size_t{1} << k, 0);
  for (Index c = 0; c < out.size(); ++c)
    for (std::size_t i = 0; i < k; ++i)
      if (c & (Index{1} << (k - 1 - i))) out[c] |= site_bit(sites[i], n);
  return out;
}

std::vector<std::size_t> checked_sites(std::span<const std::size_t> x, std::size_t n) {
  std::vector<std::size_t> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("repeated site");
  if (!s.empty() && s.back() >= n) throw std::out_of_range("site out of range");
  return s;
}

// (1 - p) rho + p P rho P with P = X^xmask Z^zmask.
void pauli_mixture(DenseDensityMatrix& rho, Index xmask, Index zmask, double p) {
  const auto dim = rho.rows();
  DenseDensityMatrix out(dim, dim);
#pragma omp parallel for schedule(static) if (dim >= 256)
  for (Eigen::Index b = 0; b < dim; ++b) {
    const Index d = static_cast<Index>(b) ^ xmask;
    const double sb = (std::popcount(d & zmask) & 1) ? -1.0 : 1.0;
    for (Eigen::Index a = 0; a < dim; ++a) {
      const Index c = static_cast<Index>(a) ^ xmask;
      const double sa = (std::popcount(c & zmask) & 1) ? -1.0 : 1.0;
      out(a, b) = (1.0 - p) * rho(a, b) +
                  p * sa * sb * rho(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d));
    }
  }
  rho = std::move(out);
}

double entropy_from_reduced_purity(const DenseDensityMatrix& reduced) {
  return -std::log(reduced.cwiseAbs2().sum());
}

}  // namespace

std::size_t qubit_count(Eigen::Index dim) {
  const auto d = static_cast<std::uint64_t>(dim);
  if (d == 0 || !std::has_single_bit(d)) throw std::invalid_argument("dimension is not a power of two");
  return static_cast<std::size_t>(std::countr_zero(d));
}

Eigen::MatrixXd hamiltonian_matrix(const ModelSpec& spec) {
  spec.validate();
  const std::size_t n = spec.length;
  check_size(n);
  const Index dim = Index{1} << n;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Index s = 0; s < dim; ++s) {
    const auto col = static_cast<Eigen::Index>(s);
    for (std::size_t j = 0; j < n; ++j) {
      const auto flipped = static_cast<Eigen::Index>(s ^ site_bit(j, n));
      if (spec.model == Model::Cluster) {
        const bool edge = j == 0 || j + 1 == n;
        if (spec.periodic || !edge)
          h(flipped, col) -= z_sign(s, (j + n - 1) % n, n) * z_sign(s, (j + 1) % n, n);
        h(flipped, col) += spec.h_x;
      } else {
        if (spec.periodic || j + 1 < n) h(col, col) -= spec.j_zz * z_sign(s, j, n) * z_sign(s, (j + 1) % n, n);
        h(flipped, col) -= spec.h_x;
      }
    }
  }
  return h;
}

DenseGroundState ed_ground_state(const ModelSpec& spec) {
  const Eigen::MatrixXd h = hamiltonian_matrix(spec);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("ED eigensolver failed");
  Eigen::VectorXd v = solver.eigenvectors().col(0);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-10) {
      if (v[i] < 0.0) v = -v;
      break;
    }
  }
  return {v.cast<Complex>(), solver.eigenvalues()[0]};
}

DenseDensityMatrix pure_density(const DenseState& psi) { return psi * psi.adjoint(); }

DenseDensityMatrix ed_apply_channel(const DenseDensityMatrix& rho, const ChannelSpec& spec) {
  spec.validate();
  const std::size_t n = qubit_count(rho.rows());
  check_size(n);
  DenseDensityMatrix out = rho;
  const double p = spec.strength;
  if (p == 0.0) return out;
  for (std::size_t j = 0; j < n; ++j) {
    switch (spec.kind) {
      case ChannelKind::OddZ:
        if (j % 2 == 1) pauli_mixture(out, 0, site_bit(j, n), p);
        break;
      case ChannelKind::PairZZ:
        pauli_mixture(out, 0, site_bit(j, n) | site_bit((j + 1) % n, n), p);
        break;
      case ChannelKind::SingleX:
        pauli_mixture(out, site_bit(j, n), 0, p);
        break;
    }
  }
  return out;
}

DenseDensityMatrix ed_partial_trace(const DenseDensityMatrix& rho, std::span<const std::size_t> x) {
  const std::size_t n = qubit_count(rho.rows());
  const auto kept = checked_sites(x, n);
  const auto traced = complement(kept, n);
  const auto ko = offsets(kept, n);
  const auto to = offsets(traced, n);
  const auto dk = static_cast<Eigen::Index>(ko.size());
  DenseDensityMatrix out = DenseDensityMatrix::Zero(dk, dk);
  for (Eigen::Index b = 0; b < dk; ++b)
    for (Eigen::Index a = 0; a < dk; ++a) {
      Complex sum = 0.0;
      for (Index t : to)
        sum += rho(static_cast<Eigen::Index>(ko[a] | t), static_cast<Eigen::Index>(ko[b] | t));
      out(a, b) = sum;
    }
  return out;
}

DenseDensityMatrix ed_depolarize(const DenseDensityMatrix& rho, std::span<const std::size_t> traced) {
  const std::size_t n = qubit_count(rho.rows());
  const auto gone = checked_sites(traced, n);
  const auto kept = complement(gone, n);
  const DenseDensityMatrix reduced = ed_partial_trace(rho, kept);
  const auto ko = offsets(kept, n);
  const auto to = offsets(gone, n);
  const double scale = 1.0 / static_cast<double>(to.size());
  DenseDensityMatrix out = DenseDensityMatrix::Zero(rho.rows(), rho.cols());
  for (std::size_t a = 0; a < ko.size(); ++a)
    for (std::size_t b = 0; b < ko.size(); ++b)
      for (Index t : to)
        out(static_cast<Eigen::Index>(ko[a] | t), static_cast<Eigen::Index>(ko[b] | t)) =
            scale * reduced(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return out;
}

double ed_second_renyi(const DenseDensityMatrix& rho, std::span<const std::size_t> x) {
  if (x.empty()) return 0.0;
  return entropy_from_reduced_purity(ed_partial_trace(rho, x));
}

double ed_von_neumann(const DenseDensityMatrix& rho, std::span<const std::size_t> x) {
  if (x.empty()) return 0.0;
  const DenseDensityMatrix reduced = ed_partial_trace(rho, x);
  Eigen::SelfAdjointEigenSolver<DenseDensityMatrix> solver(reduced, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double lambda = solver.eigenvalues()[i];
    if (lambda > 1e-14) s -= lambda * std::log(lambda);
  }
  return s;
}

CmiTerms ed_cmi_terms_renyi2(const DenseDensityMatrix& rho, const Tripartition& part) {
  part.validate();
  if (qubit_count(rho.rows()) != part.length()) throw std::invalid_argument("ED cmi: length mismatch");
  return {ed_second_renyi(rho, part.ab()), ed_second_renyi(rho, part.bc()), ed_second_renyi(rho, part.b()),
          ed_second_renyi(rho, part.abc())};
}

double ed_cmi_renyi2(const DenseDensityMatrix& rho, const Tripartition& part) {
  return ed_cmi_terms_renyi2(rho, part).value();
}

CmiTerms ed_cmi_terms_von_neumann(const DenseDensityMatrix& rho, const Tripartition& part) {
  part.validate();
  if (qubit_count(rho.rows()) != part.length()) throw std::invalid_argument("ED cmi: length mismatch");
  return {ed_von_neumann(rho, part.ab()), ed_von_neumann(rho, part.bc()), ed_von_neumann(rho, part.b()),
          ed_von_neumann(rho, part.abc())};
}

double ed_cmi_von_neumann(const DenseDensityMatrix& rho, const Tripartition& part) {
  return ed_cmi_terms_von_neumann(rho, part).value();
}

Eigen::VectorXcd ed_choi_vector(const DenseDensityMatrix& rho) {
  const std::size_t n = qubit_count(rho.rows());
  const Index dim = Index{1} << n;
  Eigen::VectorXcd out(static_cast<Eigen::Index>(dim * dim));
  for (Index u = 0; u < dim; ++u)
    for (Index l = 0; l < dim; ++l) {
      Index index = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const Index ub = (u >> (n - 1 - j)) & 1u, lb = (l >> (n - 1 - j)) & 1u;
        index = index * 4 + 2 * ub + lb;
      }
      out[static_cast<Eigen::Index>(index)] = rho(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(u));
    }
  return out;
}

DenseDensityMatrix ed_decohered_state(const ModelSpec& spec, std::span<const ChannelSpec> channels) {
  DenseDensityMatrix rho = pure_density(ed_ground_state(spec).state);
  for (const auto& ch : channels) rho = ed_apply_channel(rho, ch);
  return rho;
}

}  // namespace rmarkov::ed
