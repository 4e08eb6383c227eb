#include "rmarkov/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rmarkov/parallel.hpp"

namespace rmarkov {

namespace {

using ColMatrix = Eigen::MatrixXcd;

constexpr std::size_t kParallelThreshold = std::size_t{1} << 14;

Shape strides_of(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
  return strides;
}

void check_permutation(std::span<const std::size_t> perm, std::size_t rank) {
  if (perm.size() != rank) throw std::invalid_argument("permutation length does not match rank");
  std::vector<bool> seen(rank, false);
  for (auto p : perm) {
    if (p >= rank || seen[p]) throw std::invalid_argument("invalid axis permutation");
    seen[p] = true;
  }
}

bool is_identity(std::span<const std::size_t> perm) {
  for (std::size_t k = 0; k < perm.size(); ++k)
    if (perm[k] != k) return false;
  return true;
}

struct ContractionPlan {
  std::vector<std::size_t> free_a, paired_a, paired_b, free_b;
  Shape result_shape;
  std::size_t m = 1, k = 1, n = 1;
};

ContractionPlan plan_contraction(const DenseTensor& a, const DenseTensor& b,
                                 std::span<const AxisPair> pairs) {
  ContractionPlan plan;
  std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank())
      throw std::invalid_argument("contract: axis index out of range");
    if (used_a[ia] || used_b[ib]) throw std::invalid_argument("contract: axis paired twice");
    if (a.extent(ia) != b.extent(ib))
      throw std::invalid_argument("contract: extent mismatch on axes (" + std::to_string(ia) +
                                  ", " + std::to_string(ib) + ")");
    used_a[ia] = used_b[ib] = true;
    plan.paired_a.push_back(ia);
    plan.paired_b.push_back(ib);
    plan.k *= a.extent(ia);
  }
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (!used_a[i]) {
      plan.free_a.push_back(i);
      plan.result_shape.push_back(a.extent(i));
      plan.m *= a.extent(i);
    }
  for (std::size_t i = 0; i < b.rank(); ++i)
    if (!used_b[i]) {
      plan.free_b.push_back(i);
      plan.result_shape.push_back(b.extent(i));
      plan.n *= b.extent(i);
    }
  return plan;
}

// Order axes as first ++ second and permute if needed.
DenseTensor arrange(const DenseTensor& t, const std::vector<std::size_t>& first,
                    const std::vector<std::size_t>& second) {
  std::vector<std::size_t> perm(first);
  perm.insert(perm.end(), second.begin(), second.end());
  if (is_identity(perm)) return t;
  return t.permuted(perm);
}

bool is_block(const std::vector<std::size_t>& axes, std::size_t start) {
  for (std::size_t i = 0; i < axes.size(); ++i)
    if (axes[i] != start + i) return false;
  return true;
}

ColMatrix matricize(const DenseTensor& t, std::span<const std::size_t> left_axes,
                    Shape& left_shape, Shape& right_shape) {
  if (left_axes.empty() || left_axes.size() >= t.rank())
    throw std::invalid_argument("left_axes must be a nonempty proper subset of the axes");
  std::vector<bool> is_left(t.rank(), false);
  for (auto ax : left_axes) {
    if (ax >= t.rank() || is_left[ax]) throw std::invalid_argument("invalid left axis set");
    is_left[ax] = true;
  }
  std::vector<std::size_t> right;
  for (std::size_t i = 0; i < t.rank(); ++i)
    if (!is_left[i]) right.push_back(i);
  std::vector<std::size_t> left(left_axes.begin(), left_axes.end());
  left_shape.clear();
  right_shape.clear();
  std::size_t rows = 1, cols = 1;
  for (auto ax : left) {
    left_shape.push_back(t.extent(ax));
    rows *= t.extent(ax);
  }
  for (auto ax : right) {
    right_shape.push_back(t.extent(ax));
    cols *= t.extent(ax);
  }
  DenseTensor arranged = arrange(t, left, right);
  return ColMatrix(arranged.as_matrix(rows, cols));
}

DenseTensor with_bond_last(const RowMatrix& m, Shape shape) {
  shape.push_back(static_cast<std::size_t>(m.cols()));
  DenseTensor out(std::move(shape));
  out.as_matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())) = m;
  return out;
}

DenseTensor with_bond_first(const RowMatrix& m, const Shape& shape) {
  Shape full{static_cast<std::size_t>(m.rows())};
  full.insert(full.end(), shape.begin(), shape.end());
  DenseTensor out(std::move(full));
  out.as_matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())) = m;
  return out;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  for (auto e : shape_)
    if (e == 0) throw std::invalid_argument("tensor extents must be positive");
  data_.assign(shape_size(shape_), Complex{0.0, 0.0});
}

DenseTensor::DenseTensor(Shape shape, std::vector<Complex> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto e : shape_)
    if (e == 0) throw std::invalid_argument("tensor extents must be positive");
  if (data_.size() != shape_size(shape_))
    throw std::invalid_argument("entry count does not match the product of extents");
}

DenseTensor DenseTensor::from_matrix(const RowMatrix& m) {
  DenseTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.as_matrix(t.extent(0), t.extent(1)) = m;
  return t;
}

DenseTensor DenseTensor::identity(std::size_t n) {
  DenseTensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t DenseTensor::offset(std::initializer_list<std::size_t> idx) const {
  std::size_t off = 0;
  std::size_t k = 0;
  for (auto i : idx) {
    off = off * shape_[k] + i;
    ++k;
  }
  return off;
}

DenseTensor DenseTensor::reshaped(Shape shape) const& {
  DenseTensor copy(*this);
  return std::move(copy).reshaped(std::move(shape));
}

DenseTensor DenseTensor::reshaped(Shape shape) && {
  if (shape_size(shape) != data_.size()) throw std::invalid_argument("reshape changes entry count");
  for (auto e : shape)
    if (e == 0) throw std::invalid_argument("tensor extents must be positive");
  shape_ = std::move(shape);
  return std::move(*this);
}

DenseTensor DenseTensor::permuted(std::span<const std::size_t> perm) const {
  check_permutation(perm, rank());
  const std::size_t n = rank();
  if (n <= 1 || is_identity(perm)) return *this;

  Shape out_shape(n);
  for (std::size_t k = 0; k < n; ++k) out_shape[k] = shape_[perm[k]];
  const Shape in_strides = strides_of(shape_);
  Shape src_strides(n);
  for (std::size_t k = 0; k < n; ++k) src_strides[k] = in_strides[perm[k]];

  DenseTensor out(out_shape);
  const std::size_t inner = out_shape[n - 1];
  const std::size_t inner_stride = src_strides[n - 1];
  const std::size_t rows = data_.size() / inner;
  const Complex* src = data_.data();
  Complex* dst = out.data_.data();

#pragma omp parallel for schedule(static) if (data_.size() >= kParallelThreshold)
  for (std::ptrdiff_t row = 0; row < static_cast<std::ptrdiff_t>(rows); ++row) {
    std::size_t rem = static_cast<std::size_t>(row);
    std::size_t base = 0;
    for (std::size_t k = n - 1; k-- > 0;) {
      base += (rem % out_shape[k]) * src_strides[k];
      rem /= out_shape[k];
    }
    Complex* d = dst + static_cast<std::size_t>(row) * inner;
    for (std::size_t i = 0; i < inner; ++i) d[i] = src[base + i * inner_stride];
  }
  return out;
}

DenseTensor DenseTensor::conj() const {
  DenseTensor out(*this);
  for (auto& z : out.data_) z = std::conj(z);
  return out;
}

Eigen::Map<const RowMatrix> DenseTensor::as_matrix(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) throw std::invalid_argument("matrix view size mismatch");
  return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<RowMatrix> DenseTensor::as_matrix(std::size_t rows, std::size_t cols) {
  if (rows * cols != data_.size()) throw std::invalid_argument("matrix view size mismatch");
  return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

DenseTensor& DenseTensor::operator*=(Complex alpha) {
  for (auto& z : data_) z *= alpha;
  return *this;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  if (other.shape_ != shape_) throw std::invalid_argument("shape mismatch in tensor sum");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

double DenseTensor::norm() const {
  double acc = 0.0;
  for (const auto& z : data_) acc += std::norm(z);
  return std::sqrt(acc);
}

bool DenseTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

DenseTensor operator*(Complex alpha, DenseTensor t) {
  t *= alpha;
  return t;
}

DenseTensor operator+(DenseTensor a, const DenseTensor& b) {
  a += b;
  return a;
}

DenseTensor operator-(DenseTensor a, const DenseTensor& b) {
  a += Complex{-1.0, 0.0} * b;
  return a;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::span<const AxisPair> pairs) {
  const ContractionPlan plan = plan_contraction(a, b, pairs);
  DenseTensor out(plan.result_shape);
  auto c = out.as_matrix(plan.m, plan.n);
  const auto m = static_cast<Eigen::Index>(plan.m);
  const auto k = static_cast<Eigen::Index>(plan.k);
  const auto n = static_cast<Eigen::Index>(plan.n);

  // Paired axes as a trailing block of a (or leading block of b) need no copy;
  // a leading block of a (trailing block of b) is read through a transpose.
  const bool a_direct = is_block(plan.free_a, 0) && is_block(plan.paired_a, plan.free_a.size());
  const bool a_trans = is_block(plan.paired_a, 0) && is_block(plan.free_a, plan.paired_a.size());
  const bool b_direct = is_block(plan.paired_b, 0) && is_block(plan.free_b, plan.paired_b.size());
  const bool b_trans = is_block(plan.free_b, 0) && is_block(plan.paired_b, plan.free_b.size());

  DenseTensor a_buf, b_buf;
  const Complex* a_ptr = a.data().data();
  const Complex* b_ptr = b.data().data();
  bool a_t = false, b_t = false;
  if (a_direct) {
  } else if (a_trans) {
    a_t = true;
  } else {
    a_buf = arrange(a, plan.free_a, plan.paired_a);
    a_ptr = a_buf.data().data();
  }
  if (b_direct) {
  } else if (b_trans) {
    b_t = true;
  } else {
    b_buf = arrange(b, plan.paired_b, plan.free_b);
    b_ptr = b_buf.data().data();
  }

  using CMap = Eigen::Map<const RowMatrix>;
  if (!a_t && !b_t) {
    c.noalias() = CMap(a_ptr, m, k) * CMap(b_ptr, k, n);
  } else if (a_t && !b_t) {
    c.noalias() = CMap(a_ptr, k, m).transpose() * CMap(b_ptr, k, n);
  } else if (!a_t && b_t) {
    c.noalias() = CMap(a_ptr, m, k) * CMap(b_ptr, n, k).transpose();
  } else {
    c.noalias() = CMap(a_ptr, k, m).transpose() * CMap(b_ptr, n, k).transpose();
  }
  return out;
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::initializer_list<AxisPair> pairs) {
  return contract(a, b, std::span<const AxisPair>(pairs.begin(), pairs.size()));
}

DenseTensor kron(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw std::invalid_argument("kron expects matrices");
  const std::size_t ar = a.extent(0), ac = a.extent(1), br = b.extent(0), bc = b.extent(1);
  DenseTensor out({ar * br, ac * bc});
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t j = 0; j < ac; ++j)
      for (std::size_t k = 0; k < br; ++k)
        for (std::size_t l = 0; l < bc; ++l) out(i * br + k, j * bc + l) = a(i, j) * b(k, l);
  return out;
}

void TruncationPolicy::validate() const {
  if (chi_max < 1) throw std::invalid_argument("chi_max must be at least 1");
  if (!(cutoff >= 0.0 && cutoff < 1.0)) throw std::invalid_argument("cutoff must lie in [0, 1)");
}

std::size_t truncation_rank(std::span<const double> s, const TruncationPolicy& policy,
                            double* discarded_weight) {
  policy.validate();
  if (s.empty()) throw std::invalid_argument("no singular values");
  double total = 0.0;
  for (double x : s) total += x * x;
  std::size_t keep = 0;
  const double floor = kSingularValueFloor * s[0];
  while (keep < s.size() && s[keep] > floor) ++keep;
  keep = std::min(keep, policy.chi_max);
  // Drop trailing values while the discarded fraction stays within cutoff.
  double tail = 0.0;
  for (std::size_t i = keep; i < s.size(); ++i) tail += s[i] * s[i];
  while (keep > 1 && total > 0.0) {
    const double next = tail + s[keep - 1] * s[keep - 1];
    if (next / total > policy.cutoff) break;
    tail = next;
    --keep;
  }
  keep = std::max<std::size_t>(keep, 1);
  if (discarded_weight != nullptr) {
    double d = 0.0;
    for (std::size_t i = keep; i < s.size(); ++i) d += s[i] * s[i];
    *discarded_weight = total > 0.0 ? d / total : 0.0;
  }
  return keep;
}

SvdSplit svd_split(const DenseTensor& t, std::span<const std::size_t> left_axes,
                   const TruncationPolicy& policy) {
  policy.validate();
  if (!t.all_finite()) throw std::domain_error("svd_split: non-finite tensor entries");
  Shape left_shape, right_shape;
  const ColMatrix mat = matricize(t, left_axes, left_shape, right_shape);

  Eigen::BDCSVD<ColMatrix> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::domain_error("svd_split: factorization failed");
  const Eigen::VectorXd& sv = svd.singularValues();
  std::vector<double> s(sv.data(), sv.data() + sv.size());

  SvdSplit out;
  const std::size_t keep = truncation_rank(s, policy, &out.discarded_weight);
  s.resize(keep);
  out.s = std::move(s);
  const auto k = static_cast<Eigen::Index>(keep);
  RowMatrix u = svd.matrixU().leftCols(k);
  RowMatrix vh = svd.matrixV().leftCols(k).adjoint();
  out.u = with_bond_last(u, left_shape);
  out.v = with_bond_first(vh, right_shape);
  return out;
}

SvdSplit svd_split(const DenseTensor& t, std::initializer_list<std::size_t> left_axes,
                   const TruncationPolicy& policy) {
  return svd_split(t, std::span<const std::size_t>(left_axes.begin(), left_axes.size()), policy);
}

QrSplit qr_split(const DenseTensor& t, std::span<const std::size_t> left_axes) {
  Shape left_shape, right_shape;
  const ColMatrix mat = matricize(t, left_axes, left_shape, right_shape);
  const Eigen::Index k = std::min(mat.rows(), mat.cols());
  Eigen::HouseholderQR<ColMatrix> qr(mat);
  RowMatrix q = qr.householderQ() * ColMatrix::Identity(mat.rows(), k);
  RowMatrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return {with_bond_last(q, left_shape), with_bond_first(r, right_shape)};
}

LqSplit lq_split(const DenseTensor& t, std::span<const std::size_t> left_axes) {
  Shape left_shape, right_shape;
  const ColMatrix mat = matricize(t, left_axes, left_shape, right_shape);
  const ColMatrix adj = mat.adjoint();
  const Eigen::Index k = std::min(mat.rows(), mat.cols());
  Eigen::HouseholderQR<ColMatrix> qr(adj);
  ColMatrix q = qr.householderQ() * ColMatrix::Identity(adj.rows(), k);
  ColMatrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  RowMatrix l = r.adjoint();
  RowMatrix qh = q.adjoint();
  return {with_bond_last(l, left_shape), with_bond_first(qh, right_shape)};
}

namespace reference {

DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> perm) {
  check_permutation(perm, t.rank());
  Shape out_shape(t.rank());
  for (std::size_t k = 0; k < t.rank(); ++k) out_shape[k] = t.extent(perm[k]);
  DenseTensor out(out_shape);
  const Shape in_strides = strides_of(t.shape());
  std::vector<std::size_t> idx(t.rank(), 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t rem = flat, src = 0;
    for (std::size_t k = t.rank(); k-- > 0;) {
      idx[k] = rem % out_shape[k];
      rem /= out_shape[k];
      src += idx[k] * in_strides[perm[k]];
    }
    out.data()[flat] = t.data()[src];
  }
  return out;
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::span<const AxisPair> pairs) {
  const ContractionPlan plan = plan_contraction(a, b, pairs);
  DenseTensor out(plan.result_shape);
  const Shape sa = strides_of(a.shape());
  const Shape sb = strides_of(b.shape());
  Shape paired_shape;
  for (auto ax : plan.paired_a) paired_shape.push_back(a.extent(ax));

  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    // Decode the free indices of a and b from the output index.
    std::size_t rem = flat, base_a = 0, base_b = 0;
    for (std::size_t q = plan.free_b.size(); q-- > 0;) {
      const std::size_t ax = plan.free_b[q];
      base_b += (rem % b.extent(ax)) * sb[ax];
      rem /= b.extent(ax);
    }
    for (std::size_t q = plan.free_a.size(); q-- > 0;) {
      const std::size_t ax = plan.free_a[q];
      base_a += (rem % a.extent(ax)) * sa[ax];
      rem /= a.extent(ax);
    }
    Complex acc{0.0, 0.0};
    for (std::size_t p = 0; p < plan.k; ++p) {
      std::size_t r2 = p, off_a = base_a, off_b = base_b;
      for (std::size_t q = plan.paired_a.size(); q-- > 0;) {
        const std::size_t i = r2 % paired_shape[q];
        r2 /= paired_shape[q];
        off_a += i * sa[plan.paired_a[q]];
        off_b += i * sb[plan.paired_b[q]];
      }
      acc += a.data()[off_a] * b.data()[off_b];
    }
    out.data()[flat] = acc;
  }
  return out;
}

}  // namespace reference

}  // namespace rmarkov
