#include "rmarkov/dmrg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rmarkov {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

DenseTensor unit_env() {
  DenseTensor e({1, 1, 1});
  e(0, 0, 0) = 1.0;
  return e;
}

// Environment of sites 0..j after absorbing site j: (bra, mpo, ket).
DenseTensor extend_left(const DenseTensor& env, const DenseTensor& a, const DenseTensor& w) {
  DenseTensor y = contract(env, a, {{2, 0}});          // lb w s rk
  y = contract(y, w, {{1, 0}, {2, 2}});                // lb rk t w2
  y = contract(a.conj(), y, {{0, 0}, {1, 2}});         // rb rk w2
  const std::array<std::size_t, 3> perm{0, 2, 1};
  return y.permuted(perm);
}

// Environment of sites j..L-1 after absorbing site j: (bra, mpo, ket).
DenseTensor extend_right(const DenseTensor& env, const DenseTensor& a, const DenseTensor& w) {
  DenseTensor y = contract(a, env, {{2, 2}});          // lk s rb w2
  y = contract(w, y, {{2, 1}, {3, 3}});                // w t lk rb
  return contract(a.conj(), y, {{1, 1}, {2, 3}});      // lb w lk
}

DenseTensor apply_effective(const DenseTensor& left, const DenseTensor& w1, const DenseTensor& w2,
                            const DenseTensor& right, const DenseTensor& theta) {
  DenseTensor x = contract(left, theta, {{2, 0}});     // lb w s1 s2 r
  x = contract(x, w1, {{1, 0}, {2, 2}});               // lb s2 r t1 w'
  x = contract(x, w2, {{4, 0}, {1, 2}});               // lb r t1 t2 w''
  return contract(x, right, {{1, 2}, {4, 1}});         // lb t1 t2 rb
}

Eigen::VectorXcd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = {normal(rng), 0.0};
  return v.normalized();
}

}  // namespace

std::string to_string(Model m) { return m == Model::Cluster ? "cluster" : "tfim"; }

Model parse_model(const std::string& name) {
  if (name == "cluster") return Model::Cluster;
  if (name == "tfim") return Model::Tfim;
  throw std::invalid_argument("unsupported model tag: " + name);
}

void ModelSpec::validate() const {
  if (length < 6) throw std::invalid_argument("model length must be at least 6");
  if (!std::isfinite(h_x) || !std::isfinite(j_zz)) throw std::invalid_argument("non-finite model parameter");
  if (model != Model::Cluster && model != Model::Tfim) throw std::invalid_argument("unsupported model tag");
}

std::vector<OperatorTerm> hamiltonian_terms(const ModelSpec& spec) {
  spec.validate();
  const std::size_t n = spec.length;
  const DenseTensor x = pauli::x(), z = pauli::z();
  std::vector<OperatorTerm> terms;
  if (spec.model == Model::Cluster) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!spec.periodic && (j == 0 || j + 1 == n)) continue;
      terms.push_back({-1.0, {{(j + n - 1) % n, z}, {j, x}, {(j + 1) % n, z}}});
    }
    if (spec.h_x != 0.0)
      for (std::size_t j = 0; j < n; ++j) terms.push_back({spec.h_x, {{j, x}}});
  } else {
    if (spec.j_zz != 0.0)
      for (std::size_t j = 0; j < n; ++j) {
        if (!spec.periodic && j + 1 == n) continue;
        terms.push_back({-spec.j_zz, {{j, z}, {(j + 1) % n, z}}});
      }
    if (spec.h_x != 0.0)
      for (std::size_t j = 0; j < n; ++j) terms.push_back({-spec.h_x, {{j, x}}});
  }
  if (terms.empty()) terms.push_back({0.0, {{0, x}}});
  return terms;
}

MatrixProductOperator build_hamiltonian_mpo(const ModelSpec& spec) {
  return build_mpo(spec.length, 2, hamiltonian_terms(spec));
}

void DmrgConfig::validate() const {
  policy.validate();
  if (max_sweeps == 0) throw std::invalid_argument("max_sweeps must be positive");
  if (!(energy_tol > 0.0)) throw std::invalid_argument("energy_tol must be positive");
  if (initial_chi == 0) throw std::invalid_argument("initial_chi must be positive");
}

EigenPair lanczos_lowest(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
                         Eigen::VectorXcd start, const LanczosConfig& config) {
  const Eigen::Index n = start.size();
  if (n == 0) throw std::invalid_argument("lanczos: empty vector");
  if (start.norm() == 0.0) start = random_vector(n, 7);
  start.normalize();
  const Eigen::Index m = std::min<Eigen::Index>(static_cast<Eigen::Index>(config.krylov_dim), n);

  EigenPair best{0.0, start};
  for (std::size_t attempt = 0; attempt <= config.restarts; ++attempt) {
    Eigen::MatrixXcd basis(n, m);
    basis.col(0) = best.vector;
    std::vector<double> alpha, beta;
    Eigen::VectorXd ritz;
    double theta = 0.0;
    bool done = false;
    Eigen::Index used = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
      Eigen::VectorXcd w = apply(basis.col(k));
      const double a = basis.col(k).dot(w).real();
      alpha.push_back(a);
      w -= a * basis.col(k);
      if (k > 0) w -= beta[static_cast<std::size_t>(k - 1)] * basis.col(k - 1);
      for (int pass = 0; pass < 2; ++pass)
        w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).adjoint() * w);
      const double b = w.norm();
      used = k + 1;

      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(used, used);
      for (Eigen::Index i = 0; i < used; ++i) {
        t(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < used) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      theta = es.eigenvalues()[0];
      ritz = es.eigenvectors().col(0);
      const double residual = b * std::abs(ritz[used - 1]);
      if (residual < config.tolerance || b < 1e-14 || k + 1 == m) {
        done = residual < config.tolerance || b < 1e-14;
        break;
      }
      beta.push_back(b);
      basis.col(k + 1) = w / b;
    }
    Eigen::VectorXcd v = basis.leftCols(used) * ritz.cast<Complex>();
    best.vector = v.normalized();
    best.value = theta;
    if (done) break;
  }
  return best;
}

GroundState ground_state(const ModelSpec& spec, const DmrgConfig& config) {
  return ground_state(build_hamiltonian_mpo(spec), config);
}

GroundState ground_state(const MatrixProductOperator& hamiltonian, const DmrgConfig& config,
                         std::optional<MatrixProductState> initial) {
  config.validate();
  hamiltonian.validate();
  const std::size_t n = hamiltonian.length();
  if (n < 2) throw std::invalid_argument("DMRG needs at least two sites");
  MatrixProductState psi = initial ? std::move(*initial)
                                   : MatrixProductState::random(n, hamiltonian.phys_dim, config.initial_chi,
                                                                config.seed, false);
  if (psi.length() != n || psi.phys_dim != hamiltonian.phys_dim)
    throw std::invalid_argument("initial state does not match the Hamiltonian");
  psi = canonicalize(std::move(psi), 0);
  psi.log_scale = 0.0;

  const auto& w = hamiltonian.sites;
  std::vector<DenseTensor> left(n), right(n);
  left[0] = unit_env();
  right[n - 1] = unit_env();
  for (std::size_t j = n - 1; j-- > 0;) right[j] = extend_right(right[j + 1], psi.sites[j + 1], w[j + 1]);

  GroundState out;
  const std::array<std::size_t, 2> split_axes{0, 1};
  double previous = std::numeric_limits<double>::infinity();
  std::size_t chi = config.initial_chi;

  LanczosConfig lanczos = config.lanczos;
  auto optimize = [&](std::size_t j) {
    DenseTensor theta = contract(psi.sites[j], psi.sites[j + 1], {{2, 0}});
    const Shape shape = theta.shape();
    const auto size = static_cast<Eigen::Index>(theta.size());
    auto apply = [&](const Eigen::VectorXcd& v) {
      DenseTensor t(shape, std::vector<Complex>(v.data(), v.data() + size));
      DenseTensor r = apply_effective(left[j], w[j], w[j + 1], right[j + 1], t);
      return Eigen::VectorXcd(Eigen::Map<const Eigen::VectorXcd>(r.data().data(), size));
    };
    Eigen::VectorXcd start = Eigen::Map<const Eigen::VectorXcd>(theta.data().data(), size);
    EigenPair pair = lanczos_lowest(apply, start, lanczos);
    std::copy(pair.vector.data(), pair.vector.data() + size, theta.data().begin());
    return std::make_pair(std::move(theta), pair.value);
  };

  for (std::size_t sweep = 0; sweep < config.max_sweeps; ++sweep) {
    chi = std::min(config.policy.chi_max, chi * 2);
    const TruncationPolicy policy{chi, config.policy.cutoff};
    // Early sweeps need only rough local solves; the final ones run at the configured tolerance.
    if (std::isfinite(previous) && sweep > 1)
      lanczos.tolerance = std::max(config.lanczos.tolerance, std::min(1e-4, 1e-2 * out.last_delta));
    else
      lanczos.tolerance = std::max(config.lanczos.tolerance, 1e-4);
    double energy = 0.0;
    double sweep_discarded = 0.0;

    for (std::size_t j = 0; j + 1 < n; ++j) {
      auto [theta, e] = optimize(j);
      energy = e;
      SvdSplit split = svd_split(theta, split_axes, policy);
      sweep_discarded = std::max(sweep_discarded, split.discarded_weight);
      const std::size_t k = split.s.size();
      auto vm = split.v.as_matrix(k, split.v.size() / k);
      for (std::size_t i = 0; i < k; ++i) vm.row(static_cast<Eigen::Index>(i)) *= split.s[i];
      psi.sites[j] = std::move(split.u);
      psi.sites[j + 1] = std::move(split.v);
      psi.sites[j + 1] *= Complex{1.0 / psi.sites[j + 1].norm(), 0.0};
      left[j + 1] = extend_left(left[j], psi.sites[j], w[j]);
    }
    for (std::size_t j = n - 1; j-- > 0;) {
      auto [theta, e] = optimize(j);
      energy = e;
      SvdSplit split = svd_split(theta, split_axes, policy);
      sweep_discarded = std::max(sweep_discarded, split.discarded_weight);
      const std::size_t k = split.s.size();
      auto um = split.u.as_matrix(split.u.size() / k, k);
      for (std::size_t i = 0; i < k; ++i) um.col(static_cast<Eigen::Index>(i)) *= split.s[i];
      psi.sites[j] = std::move(split.u);
      psi.sites[j] *= Complex{1.0 / psi.sites[j].norm(), 0.0};
      psi.sites[j + 1] = std::move(split.v);
      right[j] = extend_right(right[j + 1], psi.sites[j + 1], w[j + 1]);
    }

    out.sweeps = sweep + 1;
    out.max_discarded_weight = sweep_discarded;
    out.energy = energy;
    out.last_delta = std::abs(energy - previous);
    previous = energy;
    if (chi == config.policy.chi_max && sweep > 0 && out.last_delta < config.energy_tol &&
        lanczos.tolerance <= config.lanczos.tolerance) {
      out.converged = true;
      break;
    }
  }
  psi.center = 0;
  psi.log_scale = 0.0;
  out.state = std::move(psi);
  return out;
}

std::string ground_state_metadata(const ModelSpec& spec, const DmrgConfig& config, const GroundState& gs) {
  std::ostringstream os;
  os << "model=" << to_string(spec.model) << '\n'
     << "L=" << spec.length << '\n'
     << "h_x=" << fmt17(spec.h_x) << '\n'
     << "J_zz=" << fmt17(spec.j_zz) << '\n'
     << "periodic=" << (spec.periodic ? 1 : 0) << '\n'
     << "chi_max=" << config.policy.chi_max << '\n'
     << "cutoff=" << fmt17(config.policy.cutoff) << '\n'
     << "max_sweeps=" << config.max_sweeps << '\n'
     << "energy_tol=" << fmt17(config.energy_tol) << '\n'
     << "seed=" << config.seed << '\n'
     << "energy=" << fmt17(gs.energy) << '\n'
     << "sweeps=" << gs.sweeps << '\n'
     << "converged=" << (gs.converged ? 1 : 0) << '\n'
     << "last_delta=" << fmt17(gs.last_delta) << '\n'
     << "max_discarded_weight=" << fmt17(gs.max_discarded_weight) << '\n';
  return os.str();
}

}  // namespace rmarkov
