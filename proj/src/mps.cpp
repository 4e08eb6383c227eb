#include "rmarkov/mps.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace rmarkov {

namespace {

// Rescale t to unit Frobenius norm and add the log of the removed factor.
void absorb_norm(DenseTensor& t, double& log_scale) {
  const double n = t.norm();
  if (n > 0.0 && std::isfinite(n)) {
    t *= Complex{1.0 / n, 0.0};
    log_scale += std::log(n);
  }
}

void move_right(MatrixProductState& s, std::size_t j) {
  const std::array<std::size_t, 2> left{0, 1};
  auto [q, r] = qr_split(s.sites[j], left);
  s.sites[j] = std::move(q);
  s.sites[j + 1] = contract(r, s.sites[j + 1], {{1, 0}});
  absorb_norm(s.sites[j + 1], s.log_scale);
}

void move_left(MatrixProductState& s, std::size_t j) {
  const std::array<std::size_t, 1> left{0};
  auto [l, q] = lq_split(s.sites[j], left);
  s.sites[j] = std::move(q);
  s.sites[j - 1] = contract(s.sites[j - 1], l, {{2, 0}});
  absorb_norm(s.sites[j - 1], s.log_scale);
}

void check_site(const MatrixProductState& s, std::size_t site) {
  if (site >= s.length()) throw std::out_of_range("site index out of range");
}

void write_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t read_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

}  // namespace

Complex LogComplex::value() const {
  if (is_zero()) return {0.0, 0.0};
  return phase * std::exp(log_magnitude);
}

std::size_t MatrixProductState::max_bond_dim() const {
  std::size_t chi = 1;
  for (const auto& t : sites) chi = std::max({chi, t.extent(0), t.extent(2)});
  return chi;
}

void MatrixProductState::validate() const {
  if (sites.empty()) throw std::invalid_argument("MPS has no sites");
  if (phys_dim == 0) throw std::invalid_argument("MPS physical dimension must be positive");
  for (std::size_t j = 0; j < sites.size(); ++j) {
    const auto& t = sites[j];
    if (t.rank() != 3) throw std::invalid_argument("MPS site tensors must have rank 3");
    if (t.extent(1) != phys_dim) throw std::invalid_argument("non-uniform physical dimension");
    if (j + 1 < sites.size() && t.extent(2) != sites[j + 1].extent(0))
      throw std::invalid_argument("adjacent MPS bonds do not match");
  }
  if (sites.front().extent(0) != 1 || sites.back().extent(2) != 1)
    throw std::invalid_argument("MPS boundary bonds must be 1");
  if (center && *center >= sites.size()) throw std::invalid_argument("canonical center out of range");
}

MatrixProductState MatrixProductState::product(const std::vector<std::vector<Complex>>& local_states) {
  if (local_states.empty()) throw std::invalid_argument("product state needs at least one site");
  MatrixProductState s;
  s.phys_dim = local_states.front().size();
  for (const auto& v : local_states) {
    if (v.size() != s.phys_dim) throw std::invalid_argument("non-uniform local dimension");
    s.sites.emplace_back(Shape{1, s.phys_dim, 1}, v);
  }
  s.validate();
  return s;
}

MatrixProductState MatrixProductState::product(std::size_t length, const std::vector<Complex>& local_state) {
  return product(std::vector<std::vector<Complex>>(length, local_state));
}

MatrixProductState MatrixProductState::random(std::size_t length, std::size_t phys_dim, std::size_t chi,
                                              std::uint64_t seed, bool complex_entries) {
  if (length == 0 || phys_dim == 0 || chi == 0) throw std::invalid_argument("invalid random MPS size");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto bond = [&](std::size_t b) {  // bond between b and b + 1
    double left = std::pow(static_cast<double>(phys_dim), static_cast<double>(b + 1));
    double right = std::pow(static_cast<double>(phys_dim), static_cast<double>(length - b - 1));
    return static_cast<std::size_t>(std::min({static_cast<double>(chi), left, right}));
  };
  MatrixProductState s;
  s.phys_dim = phys_dim;
  for (std::size_t j = 0; j < length; ++j) {
    const std::size_t l = j == 0 ? 1 : bond(j - 1);
    const std::size_t r = j + 1 == length ? 1 : bond(j);
    DenseTensor t({l, phys_dim, r});
    for (auto& z : t.data()) {
      const double re = normal(rng);
      const double im = complex_entries ? normal(rng) : 0.0;
      z = {re, im};
    }
    s.sites.push_back(std::move(t));
  }
  return s;
}

std::size_t MatrixProductOperator::max_bond_dim() const {
  std::size_t w = 1;
  for (const auto& t : sites) w = std::max({w, t.extent(0), t.extent(3)});
  return w;
}

void MatrixProductOperator::validate() const {
  if (sites.empty()) throw std::invalid_argument("MPO has no sites");
  for (std::size_t j = 0; j < sites.size(); ++j) {
    const auto& t = sites[j];
    if (t.rank() != 4) throw std::invalid_argument("MPO site tensors must have rank 4");
    if (t.extent(1) != phys_dim || t.extent(2) != phys_dim)
      throw std::invalid_argument("non-uniform MPO physical dimension");
    if (j + 1 < sites.size() && t.extent(3) != sites[j + 1].extent(0))
      throw std::invalid_argument("adjacent MPO bonds do not match");
  }
  if (sites.front().extent(0) != 1 || sites.back().extent(3) != 1)
    throw std::invalid_argument("MPO boundary bonds must be 1");
}

MatrixProductState canonicalize(MatrixProductState state, std::size_t center) {
  state.validate();
  check_site(state, center);
  if (state.center) {
    for (std::size_t j = *state.center; j < center; ++j) move_right(state, j);
    for (std::size_t j = *state.center; j > center; --j) move_left(state, j);
  } else {
    for (std::size_t j = 0; j < center; ++j) move_right(state, j);
    for (std::size_t j = state.length() - 1; j > center; --j) move_left(state, j);
  }
  absorb_norm(state.sites[center], state.log_scale);
  state.center = center;
  return state;
}

Compressed compress(MatrixProductState state, const TruncationPolicy& policy) {
  policy.validate();
  state = canonicalize(std::move(state), 0);
  Compressed out;
  const std::array<std::size_t, 2> left{0, 1};
  for (std::size_t j = 0; j + 1 < state.length(); ++j) {
    SvdSplit split = svd_split(state.sites[j], left, policy);
    out.discarded_weight += split.discarded_weight;
    DenseTensor& v = split.v;
    const std::size_t k = split.s.size();
    const std::size_t cols = v.size() / k;
    auto vm = v.as_matrix(k, cols);
    for (std::size_t i = 0; i < k; ++i) vm.row(static_cast<Eigen::Index>(i)) *= split.s[i];
    state.sites[j] = std::move(split.u);
    state.sites[j + 1] = contract(v, state.sites[j + 1], {{1, 0}});
    absorb_norm(state.sites[j + 1], state.log_scale);
  }
  state.center = state.length() - 1;
  out.state = std::move(state);
  return out;
}

MatrixProductState apply_site_operator(MatrixProductState state, std::size_t site, const DenseTensor& op) {
  check_site(state, site);
  if (op.rank() != 2 || op.extent(0) != state.phys_dim || op.extent(1) != state.phys_dim)
    throw std::invalid_argument("site operator dimension does not match phys_dim");
  DenseTensor t = contract(op, state.sites[site], {{1, 1}});  // (s', l, r)
  const std::array<std::size_t, 3> perm{1, 0, 2};
  state.sites[site] = t.permuted(perm);
  if (state.center != site) state.center.reset();
  return state;
}

Compressed apply_two_site_gate(MatrixProductState state, std::size_t site, const DenseTensor& gate,
                               const TruncationPolicy& policy) {
  if (site + 1 >= state.length()) throw std::out_of_range("two-site gate needs sites j and j + 1");
  const std::size_t d = state.phys_dim;
  if (gate.rank() != 2 || gate.extent(0) != d * d || gate.extent(1) != d * d)
    throw std::invalid_argument("two-site gate dimension does not match phys_dim^2");
  state = canonicalize(std::move(state), site);
  const DenseTensor theta = contract(state.sites[site], state.sites[site + 1], {{2, 0}});  // l s1 s2 r
  const DenseTensor g = gate.reshaped({d, d, d, d});
  const DenseTensor applied = contract(g, theta, {{2, 1}, {3, 2}});  // o1 o2 l r
  const std::array<std::size_t, 4> perm{2, 0, 1, 3};
  const std::array<std::size_t, 2> left{0, 1};
  SvdSplit split = svd_split(applied.permuted(perm), left, policy);
  const std::size_t k = split.s.size();
  auto vm = split.v.as_matrix(k, split.v.size() / k);
  for (std::size_t i = 0; i < k; ++i) vm.row(static_cast<Eigen::Index>(i)) *= split.s[i];
  state.sites[site] = std::move(split.u);
  state.sites[site + 1] = std::move(split.v);
  absorb_norm(state.sites[site + 1], state.log_scale);
  state.center = site + 1;
  return {std::move(state), split.discarded_weight};
}

Compressed apply_mpo(const MatrixProductState& state, const MatrixProductOperator& mpo,
                     const TruncationPolicy& policy) {
  state.validate();
  mpo.validate();
  if (mpo.length() != state.length() || mpo.phys_dim != state.phys_dim)
    throw std::invalid_argument("MPO does not match the state");
  MatrixProductState out;
  out.phys_dim = state.phys_dim;
  out.log_scale = state.log_scale;
  const std::array<std::size_t, 5> perm{3, 0, 1, 4, 2};
  for (std::size_t j = 0; j < state.length(); ++j) {
    const auto& w = mpo.sites[j];
    const auto& a = state.sites[j];
    DenseTensor t = contract(w, a, {{2, 1}}).permuted(perm);  // l wl o r wr
    t = std::move(t).reshaped({a.extent(0) * w.extent(0), state.phys_dim, a.extent(2) * w.extent(3)});
    absorb_norm(t, out.log_scale);
    out.sites.push_back(std::move(t));
  }
  return compress(std::move(out), policy);
}

LogComplex inner_product(const MatrixProductState& a, const MatrixProductState& b) {
  a.validate();
  b.validate();
  if (a.length() != b.length() || a.phys_dim != b.phys_dim)
    throw std::invalid_argument("inner_product: states differ in length or phys_dim");
  DenseTensor env({1, 1});
  env(0, 0) = 1.0;
  double log_acc = 0.0;
  for (std::size_t j = 0; j < a.length(); ++j) {
    const DenseTensor t = contract(env, b.sites[j], {{1, 0}});          // al s br
    env = contract(a.sites[j].conj(), t, {{0, 0}, {1, 1}});             // ar br
    double biggest = 0.0;
    for (const auto& z : env.data()) biggest = std::max(biggest, std::abs(z));
    if (biggest == 0.0) return {};
    env *= Complex{1.0 / biggest, 0.0};
    log_acc += std::log(biggest);
  }
  const Complex z = env(0, 0);
  if (std::abs(z) == 0.0) return {};
  LogComplex out;
  out.phase = z / std::abs(z);
  out.log_magnitude = log_acc + std::log(std::abs(z)) + a.log_scale + b.log_scale;
  return out;
}

double log_norm(const MatrixProductState& state) {
  const LogComplex n2 = inner_product(state, state);
  return 0.5 * n2.log_magnitude;
}

Complex expectation(const MatrixProductState& state, const MatrixProductOperator& mpo) {
  state.validate();
  mpo.validate();
  if (mpo.length() != state.length() || mpo.phys_dim != state.phys_dim)
    throw std::invalid_argument("MPO does not match the state");
  DenseTensor env({1, 1, 1});
  env(0, 0, 0) = 1.0;
  double log_acc = 0.0;
  const std::array<std::size_t, 3> perm{0, 2, 1};
  for (std::size_t j = 0; j < state.length(); ++j) {
    DenseTensor t = contract(env, state.sites[j], {{2, 0}});      // al w s br
    t = contract(t, mpo.sites[j], {{1, 0}, {2, 2}});               // al br o wr
    env = contract(state.sites[j].conj(), t, {{0, 0}, {1, 2}}).permuted(perm);  // ar wr br
    double biggest = 0.0;
    for (const auto& z : env.data()) biggest = std::max(biggest, std::abs(z));
    if (biggest == 0.0) return {0.0, 0.0};
    env *= Complex{1.0 / biggest, 0.0};
    log_acc += std::log(biggest);
  }
  MatrixProductState plain = state;
  plain.log_scale = 0.0;
  const LogComplex norm2 = inner_product(plain, plain);
  if (norm2.is_zero()) throw std::domain_error("expectation value of the zero state");
  return env(0, 0, 0) / norm2.phase * std::exp(log_acc - norm2.log_magnitude);
}

MatrixProductState normalized(MatrixProductState state) {
  const std::size_t c = state.center.value_or(0);
  state = canonicalize(std::move(state), c);
  state.log_scale = 0.0;
  return state;
}

double left_orthonormality_error(const DenseTensor& site) {
  const std::size_t r = site.extent(2);
  const auto m = site.as_matrix(site.size() / r, r);
  const RowMatrix g = m.adjoint() * m;
  return (g - RowMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double right_orthonormality_error(const DenseTensor& site) {
  const std::size_t l = site.extent(0);
  const auto m = site.as_matrix(l, site.size() / l);
  const RowMatrix g = m * m.adjoint();
  return (g - RowMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double canonical_error(const MatrixProductState& state) {
  if (!state.center) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t j = 0; j < *state.center; ++j)
    worst = std::max(worst, left_orthonormality_error(state.sites[j]));
  for (std::size_t j = *state.center + 1; j < state.length(); ++j)
    worst = std::max(worst, right_orthonormality_error(state.sites[j]));
  return worst;
}

void write_checkpoint(std::ostream& out, const MatrixProductState& state) {
  state.validate();
  out.write("MPS1", 4);
  write_u64(out, state.length());
  write_u64(out, state.phys_dim);
  for (const auto& t : state.sites) {
    write_u64(out, t.extent(0));
    write_u64(out, t.extent(2));
    for (const auto& z : t.data()) {
      write_f64(out, z.real());
      write_f64(out, z.imag());
    }
  }
  write_f64(out, state.log_scale);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

MatrixProductState read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::memcmp(magic.data(), "MPS1", 4) != 0) throw std::runtime_error("checkpoint: bad magic");
  MatrixProductState s;
  const std::uint64_t length = read_u64(in);
  s.phys_dim = read_u64(in);
  if (length == 0 || length > (1u << 20) || s.phys_dim == 0 || s.phys_dim > 1024)
    throw std::runtime_error("checkpoint: implausible header");
  for (std::uint64_t j = 0; j < length; ++j) {
    const std::uint64_t l = read_u64(in);
    const std::uint64_t r = read_u64(in);
    if (l == 0 || r == 0 || l > (1u << 16) || r > (1u << 16))
      throw std::runtime_error("checkpoint: implausible bond extent");
    DenseTensor t({l, s.phys_dim, r});
    for (auto& z : t.data()) {
      const double re = read_f64(in);
      const double im = read_f64(in);
      z = {re, im};
    }
    s.sites.push_back(std::move(t));
  }
  s.log_scale = read_f64(in);
  s.validate();
  return s;
}

void save_checkpoint(const std::string& path, const MatrixProductState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  write_checkpoint(out, state);
}

MatrixProductState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace rmarkov
