#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rmarkov/tensor.hpp"

namespace rmarkov {

/// Open-boundary matrix product state. Site tensors are (left bond, physical,
/// right bond); the represented vector is exp(log_scale) times the full
/// contraction, which keeps exponentially small norms representable.
struct MatrixProductState {
  std::vector<DenseTensor> sites;
  std::size_t phys_dim = 2;
  double log_scale = 0.0;
  /// Set when every tensor left of the center is left-orthonormal and every
  /// tensor right of it is right-orthonormal.
  std::optional<std::size_t> center;

  std::size_t length() const { return sites.size(); }
  /// Extent of the bond between site b and b + 1.
  std::size_t bond_dim(std::size_t b) const { return sites.at(b).extent(2); }
  std::size_t max_bond_dim() const;

  /// Throws std::invalid_argument if bonds, ranks or physical dims are inconsistent.
  void validate() const;

  static MatrixProductState product(const std::vector<std::vector<Complex>>& local_states);
  static MatrixProductState product(std::size_t length, const std::vector<Complex>& local_state);
  /// Random state with bond dimension capped at chi; entries drawn from a
  /// seeded normal distribution (real-valued unless complex_entries).
  static MatrixProductState random(std::size_t length, std::size_t phys_dim, std::size_t chi,
                                   std::uint64_t seed, bool complex_entries = true);
};

/// Matrix product operator with site tensors (left bond, phys out, phys in, right bond).
struct MatrixProductOperator {
  std::vector<DenseTensor> sites;
  std::size_t phys_dim = 2;

  std::size_t length() const { return sites.size(); }
  std::size_t max_bond_dim() const;
  void validate() const;
};

/// Complex number stored as phase times exp(log_magnitude). A zero value has
/// log_magnitude == -infinity and phase 0.
struct LogComplex {
  Complex phase{0.0, 0.0};
  double log_magnitude = -std::numeric_limits<double>::infinity();

  bool is_zero() const { return log_magnitude == -std::numeric_limits<double>::infinity(); }
  /// Linear-scale value (may underflow or overflow).
  Complex value() const;
};

MatrixProductState canonicalize(MatrixProductState state, std::size_t center);

struct Compressed {
  MatrixProductState state;
  double discarded_weight = 0.0;
};

/// SVD sweep bringing every bond within policy. The result is the projection of
/// the input onto the kept subspace (not renormalized); the discarded weight is
/// summed over bonds.
Compressed compress(MatrixProductState state, const TruncationPolicy& policy);

/// Apply a phys_dim x phys_dim matrix (out, in) to one site; bonds are unchanged.
MatrixProductState apply_site_operator(MatrixProductState state, std::size_t site, const DenseTensor& op);

/// Apply a (d^2 x d^2) gate, row index out1 * d + out2, to sites (site, site + 1)
/// and split it back with one truncated SVD.
Compressed apply_two_site_gate(MatrixProductState state, std::size_t site, const DenseTensor& gate,
                               const TruncationPolicy& policy);

/// Exact MPO application followed by compression.
Compressed apply_mpo(const MatrixProductState& state, const MatrixProductOperator& mpo,
                     const TruncationPolicy& policy);

/// <a|b> with a conjugated, including both log scales.
LogComplex inner_product(const MatrixProductState& a, const MatrixProductState& b);

/// log ||state||; -infinity for the zero vector.
double log_norm(const MatrixProductState& state);

/// <state|mpo|state> / <state|state>.
Complex expectation(const MatrixProductState& state, const MatrixProductOperator& mpo);

/// Unit-norm copy (log_scale 0, canonical form with the norm removed).
MatrixProductState normalized(MatrixProductState state);

/// Largest deviation from the identity of the left (A^dag A) or right (A A^dag)
/// orthonormality condition of one site tensor.
double left_orthonormality_error(const DenseTensor& site);
double right_orthonormality_error(const DenseTensor& site);
/// Largest orthonormality error over all sites relative to the recorded center.
double canonical_error(const MatrixProductState& state);

// Checkpoint format, little-endian throughout:
//   "MPS1" | u64 L | u64 phys_dim | per site: u64 left, u64 right, then
//   left*phys*right (real, imag) f64 pairs in row-major (left, phys, right)
//   order | f64 log_scale
void write_checkpoint(std::ostream& out, const MatrixProductState& state);
MatrixProductState read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const MatrixProductState& state);
MatrixProductState load_checkpoint(const std::string& path);

}  // namespace rmarkov
