#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rmarkov {

using Complex = std::complex<double>;
using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense complex tensor with row-major storage: the last axis varies fastest,
/// i.e. entry (i0, ..., i_{n-1}) lives at sum_k i_k * prod_{m>k} extent_m.
/// A rank-0 tensor (empty shape) holds a single scalar.
class DenseTensor {
 public:
  DenseTensor() : data_(1, Complex{0.0, 0.0}) {}
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<Complex> data);

  static DenseTensor from_matrix(const RowMatrix& m);
  static DenseTensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const Complex> data() const { return data_; }
  std::span<Complex> data() { return data_; }

  template <class... Idx>
  Complex& operator()(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... Idx>
  const Complex& operator()(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Same entries, new shape with the same total size.
  DenseTensor reshaped(Shape shape) const&;
  DenseTensor reshaped(Shape shape) &&;

  /// Result axis k is input axis perm[k].
  DenseTensor permuted(std::span<const std::size_t> perm) const;
  DenseTensor conj() const;

  /// View as a rows x cols row-major matrix (rows * cols == size()).
  Eigen::Map<const RowMatrix> as_matrix(std::size_t rows, std::size_t cols) const;
  Eigen::Map<RowMatrix> as_matrix(std::size_t rows, std::size_t cols);

  DenseTensor& operator*=(Complex alpha);
  DenseTensor& operator+=(const DenseTensor& other);

  /// Frobenius norm, accumulated in storage order.
  double norm() const;
  bool all_finite() const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<Complex> data_;
};

DenseTensor operator*(Complex alpha, DenseTensor t);
DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);

std::size_t shape_size(const Shape& shape);

/// Maximum absolute entry difference; shapes must agree.
double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

using AxisPair = std::pair<std::size_t, std::size_t>;

/// Sum over paired axes (axis of a, axis of b). Result axes are the unpaired
/// axes of a in order followed by the unpaired axes of b in order.
/// Throws std::invalid_argument on extent mismatch or out-of-range axes.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::span<const AxisPair> pairs);
DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::initializer_list<AxisPair> pairs);

/// Kronecker product of two matrices given as rank-2 tensors.
DenseTensor kron(const DenseTensor& a, const DenseTensor& b);

/// Bond truncation controls for SVD-based compression.
struct TruncationPolicy {
  std::size_t chi_max = 128;
  /// Relative discard threshold on squared singular values.
  double cutoff = 1e-10;

  void validate() const;
};

/// Singular values below this fraction of the largest are always dropped.
inline constexpr double kSingularValueFloor = 1e-14;

struct SvdSplit {
  DenseTensor u;  // left axes..., k
  std::vector<double> s;
  DenseTensor v;  // k, right axes...
  /// Discarded squared singular values divided by their total.
  double discarded_weight = 0.0;
};

/// Matricize t with left_axes (in the given order) as rows and the remaining
/// axes (in original order) as columns, then take a truncated SVD.
/// Throws std::invalid_argument for bad axis sets and std::domain_error for
/// non-finite input.
SvdSplit svd_split(const DenseTensor& t, std::span<const std::size_t> left_axes,
                   const TruncationPolicy& policy);
SvdSplit svd_split(const DenseTensor& t, std::initializer_list<std::size_t> left_axes,
                   const TruncationPolicy& policy);

/// Number of singular values kept by the policy (at least one).
std::size_t truncation_rank(std::span<const double> s, const TruncationPolicy& policy,
                            double* discarded_weight = nullptr);

struct QrSplit {
  DenseTensor q;  // left axes..., k (orthonormal columns)
  DenseTensor r;  // k, right axes...
};

/// Thin QR of the matricization with left_axes as rows.
QrSplit qr_split(const DenseTensor& t, std::span<const std::size_t> left_axes);

/// Thin LQ of the matricization with left_axes as rows: t = l * q with q
/// having orthonormal rows.
struct LqSplit {
  DenseTensor l;
  DenseTensor q;
};
LqSplit lq_split(const DenseTensor& t, std::span<const std::size_t> left_axes);

namespace reference {

/// Serial index-loop implementations kept as independent checks for the
/// parallel kernels.
DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> perm);
DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::span<const AxisPair> pairs);

}  // namespace reference

}  // namespace rmarkov
