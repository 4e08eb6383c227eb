#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rmarkov/renyi.hpp"

namespace rmarkov {

/// Pauli string in binary symplectic form, bit j of x/z for qubit j. A qubit
/// with both bits set is Y; the overall phase is i^phase.
class PauliString {
 public:
  explicit PauliString(std::size_t qubits = 0);
  /// Parses e.g. "XZIY" or "-ZZ".
  static PauliString parse(const std::string& text);

  std::size_t size() const { return n_; }
  bool x(std::size_t q) const { return (x_[q / 64] >> (q % 64)) & 1u; }
  bool z(std::size_t q) const { return (z_[q / 64] >> (q % 64)) & 1u; }
  void set_x(std::size_t q, bool on);
  void set_z(std::size_t q, bool on);
  unsigned phase() const { return phase_; }

  bool is_identity() const;
  /// True when the support lies inside the sorted site set.
  bool supported_in(std::span<const std::size_t> sites) const;
  bool commutes_with(const PauliString& other) const;
  PauliString& operator*=(const PauliString& other);
  bool operator==(const PauliString& other) const = default;

  std::string to_string() const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> x_;
  std::vector<std::uint64_t> z_;
  unsigned phase_ = 0;
};

/// Independent, mutually commuting generators on n qubits.
class StabilizerGroup {
 public:
  /// Throws std::invalid_argument unless the generators commute pairwise and
  /// are independent over GF(2).
  StabilizerGroup(std::size_t qubits, std::vector<PauliString> generators);
  static StabilizerGroup parse(const std::vector<std::string>& generators);

  std::size_t qubits() const { return n_; }
  std::size_t rank() const { return generators_.size(); }
  const std::vector<PauliString>& generators() const { return generators_; }

 private:
  std::size_t n_;
  std::vector<PauliString> generators_;
};

/// Rank over GF(2) of bit rows; pivots on the lowest available column.
std::size_t gf2_rank(std::vector<std::vector<std::uint64_t>> rows, std::size_t columns);

/// k minus the GF(2) rank of the generators restricted to the complement of x.
std::size_t restricted_subgroup_dimension(const StabilizerGroup& group, std::span<const std::size_t> x);

/// log2 of the number of the 2^k group elements supported inside x, by
/// enumeration (k <= 20).
std::size_t enumerated_subgroup_dimension(const StabilizerGroup& group, std::span<const std::size_t> x);

/// (|X| - s_X) ln 2.
double stabilizer_renyi_entropy(const StabilizerGroup& group, std::span<const std::size_t> x);

/// CMI in units of ln 2 (an integer), and its value.
long stabilizer_cmi_bits(const StabilizerGroup& group, const Tripartition& part);
double stabilizer_cmi(const StabilizerGroup& group, const Tripartition& part);

/// {Z_{j-1} X_j Z_{j+1}} on the ring.
StabilizerGroup cluster_group(std::size_t length);
/// {prod_j X_j}.
StabilizerGroup swssb_group(std::size_t length);
/// {Z_j}: the all-zero product state.
StabilizerGroup product_group(std::size_t length);

}  // namespace rmarkov
