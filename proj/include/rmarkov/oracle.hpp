#pragma once

#include <span>

#include <Eigen/Dense>

#include "rmarkov/choi.hpp"
#include "rmarkov/dmrg.hpp"
#include "rmarkov/renyi.hpp"

// Dense reference pipeline. Basis states are bit strings with site 0 the most
// significant bit, matching the order of a fully contracted MPS.
namespace rmarkov::ed {

inline constexpr std::size_t kMaxSites = 12;

using DenseState = Eigen::VectorXcd;
using DenseDensityMatrix = Eigen::MatrixXcd;

struct DenseGroundState {
  DenseState state;
  double energy = 0.0;
};

/// Real symmetric Hamiltonian built directly from the Pauli strings.
Eigen::MatrixXd hamiltonian_matrix(const ModelSpec& spec);

/// Lowest eigenpair, phase fixed so the first nonzero amplitude is real positive.
DenseGroundState ed_ground_state(const ModelSpec& spec);

DenseDensityMatrix pure_density(const DenseState& psi);

/// rho -> (1-p) rho + p P rho P for every Pauli string P of the layer.
DenseDensityMatrix ed_apply_channel(const DenseDensityMatrix& rho, const ChannelSpec& spec);

/// Reduced density matrix on x (kept sites in ascending order).
DenseDensityMatrix ed_partial_trace(const DenseDensityMatrix& rho, std::span<const std::size_t> x);

/// (1_Xbar / d_Xbar) (x) Tr_Xbar rho, embedded back into the full space.
DenseDensityMatrix ed_depolarize(const DenseDensityMatrix& rho, std::span<const std::size_t> traced);

double ed_second_renyi(const DenseDensityMatrix& rho, std::span<const std::size_t> x);
double ed_von_neumann(const DenseDensityMatrix& rho, std::span<const std::size_t> x);

CmiTerms ed_cmi_terms_renyi2(const DenseDensityMatrix& rho, const Tripartition& part);
double ed_cmi_renyi2(const DenseDensityMatrix& rho, const Tripartition& part);
CmiTerms ed_cmi_terms_von_neumann(const DenseDensityMatrix& rho, const Tripartition& part);
double ed_cmi_von_neumann(const DenseDensityMatrix& rho, const Tripartition& part);

/// Doubled-space vector of rho: entry sum_j (2u_j + l_j) 4^(L-1-j) holds rho_{l u}.
Eigen::VectorXcd ed_choi_vector(const DenseDensityMatrix& rho);

/// Number of qubits of a 2^L dimensional operator.
std::size_t qubit_count(Eigen::Index dim);

/// Full decohered pipeline: ground state, pure density matrix, channels.
DenseDensityMatrix ed_decohered_state(const ModelSpec& spec, std::span<const ChannelSpec> channels);

}  // namespace rmarkov::ed
