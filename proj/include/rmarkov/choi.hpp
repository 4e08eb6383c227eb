#pragma once

#include <span>
#include <string>
#include <vector>

#include "rmarkov/mps.hpp"

namespace rmarkov {

// Doubled-space conventions used throughout the project:
//  * |rho>> has components <<u, l|rho>> = rho_{l u} per site, local index 2u + l,
//    u the upper copy and l the lower copy. A pure state maps to |psi*> (x) |psi>.
//  * No 1/sqrt(dim) prefactor, so <<A|B>> = Tr[A^dag B] exactly; the trace is
//    <<I|rho>> and the purity is <<rho|rho>> / Tr(rho)^2.
//  * A Kraus channel {K_a} acts as sum_a conj(K_a) (x) K_a on (u, l).

enum class ChannelKind { OddZ, PairZZ, SingleX };

std::string to_string(ChannelKind k);

/// Pauli decoherence layer of strength p in [0, 1/2]:
///  OddZ:    rho -> (1-p) rho + p Z_j rho Z_j on odd sites j
///  PairZZ:  rho -> (1-p) rho + p Z_j Z_{j+1} rho Z_j Z_{j+1} on every ring bond
///  SingleX: rho -> (1-p) rho + p X_j rho X_j on every site
struct ChannelSpec {
  ChannelKind kind = ChannelKind::OddZ;
  double strength = 0.0;

  void validate() const;
};

/// Default bond policy for doubled-space states.
inline constexpr TruncationPolicy kChoiPolicy{128, 1e-16};

struct ChoiState {
  MatrixProductState state;  // phys_dim 4
  std::vector<ChannelSpec> history;
  /// Summed relative discarded weight of all truncations so far.
  double discarded_weight = 0.0;
  /// Largest |Tr(after) - Tr(before)| seen across channel layers.
  double trace_drift = 0.0;

  std::size_t length() const { return state.length(); }
};

/// Doubled-space image of conj(K) (x) K for a single-site Kraus operator on
/// (u, l), i.e. a 4 x 4 matrix in the 2u + l basis.
DenseTensor doubled_operator(const DenseTensor& kraus);
/// sum_a conj(K_a) (x) K_a for a list of single- or two-site Kraus operators.
/// For two-site operators the result acts on (site j, site j+1) with combined
/// row index 4 * (2u_j + l_j) + (2u_{j+1} + l_{j+1}).
DenseTensor doubled_channel(std::span<const DenseTensor> kraus_ops, std::size_t sites);

/// 4 x 4 maximal depolarizer (1/4)[II + XX - YY + ZZ]; equals |I>><<I| / 2.
DenseTensor depolarizer_operator();

/// |psi>> of a pure state. The bond pairs (i, j) of psi* (x) psi are kept in
/// order of their Schmidt weight lambda_i lambda_j and then compressed with
/// the policy.
ChoiState vectorize_pure(const MatrixProductState& psi, const TruncationPolicy& policy = kChoiPolicy);

/// The unnormalized identity operator: local vector (1, 0, 0, 1).
ChoiState identity_choi(std::size_t length);

/// Signed value stored as sign * exp(log_abs).
struct SignedLog {
  double sign = 0.0;
  double log_abs = -std::numeric_limits<double>::infinity();
  double value() const;
};

SignedLog log_trace_of(const ChoiState& rho);
/// Tr(rho) in linear scale.
double trace_of(const ChoiState& rho);

/// Apply one channel layer and compress. With renormalize the log scale is
/// shifted afterwards so that Tr(rho) = 1.
ChoiState apply_channel(ChoiState rho, const ChannelSpec& spec, const TruncationPolicy& policy = kChoiPolicy,
                        bool renormalize = true);

/// Maximal depolarization of the listed sites. Bonds never grow.
ChoiState apply_depolarizer(ChoiState rho, std::span<const std::size_t> sites);

/// Tr[(rho / Tr rho)^2] and its logarithm.
double log_purity(const ChoiState& rho);
double purity(const ChoiState& rho);

/// Readable channel history for metadata sidecars, e.g. "odd_z:0.1;pair_zz:0.2".
std::string describe_history(const ChoiState& rho);

}  // namespace rmarkov
