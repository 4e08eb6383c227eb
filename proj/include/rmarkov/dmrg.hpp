#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rmarkov/mpo_builder.hpp"
#include "rmarkov/mps.hpp"

namespace rmarkov {

enum class Model { Cluster, Tfim };

std::string to_string(Model m);
Model parse_model(const std::string& name);

/// Cluster:  H = sum_j [ -Z_{j-1} X_j Z_{j+1} + h_x X_j ]
/// TFIM:     H = -sum_j [ J_zz Z_j Z_{j+1} + h_x X_j ]
/// Sums run over the ring when periodic.
struct ModelSpec {
  Model model = Model::Tfim;
  std::size_t length = 8;
  double h_x = 1.0;
  double j_zz = 0.0;
  bool periodic = true;

  void validate() const;
};

/// The Hamiltonian as a list of Pauli-string terms (shared by the MPO builder
/// and by anything that wants the explicit sum).
std::vector<OperatorTerm> hamiltonian_terms(const ModelSpec& spec);

MatrixProductOperator build_hamiltonian_mpo(const ModelSpec& spec);

struct LanczosConfig {
  std::size_t krylov_dim = 40;
  std::size_t restarts = 3;
  double tolerance = 1e-10;
};

struct DmrgConfig {
  TruncationPolicy policy{64, 1e-12};
  std::size_t max_sweeps = 30;
  double energy_tol = 1e-10;
  /// Bond dimension of the random starting state; sweeps double it until
  /// policy.chi_max is reached.
  std::size_t initial_chi = 8;
  std::uint64_t seed = 20240611;
  LanczosConfig lanczos{};

  void validate() const;
};

struct GroundState {
  MatrixProductState state;  // unit norm, log_scale 0
  double energy = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
  /// |E_last - E_previous| at termination.
  double last_delta = 0.0;
  /// Largest truncation weight of the final sweep.
  double max_discarded_weight = 0.0;
};

/// Two-site DMRG with a Lanczos local eigensolver. Stops when the sweep
/// energy changes by less than energy_tol at full bond dimension or after
/// max_sweeps; `converged` and `last_delta` report which.
GroundState ground_state(const ModelSpec& spec, const DmrgConfig& config);
GroundState ground_state(const MatrixProductOperator& hamiltonian, const DmrgConfig& config,
                         std::optional<MatrixProductState> initial = std::nullopt);

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXcd vector;
};

/// Lowest eigenpair of a Hermitian operator given by its action; full
/// reorthogonalization, restarted from the current Ritz vector.
EigenPair lanczos_lowest(const std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>& apply,
                         Eigen::VectorXcd start, const LanczosConfig& config);

/// key=value sidecar written next to a ground-state checkpoint.
std::string ground_state_metadata(const ModelSpec& spec, const DmrgConfig& config, const GroundState& gs);

}  // namespace rmarkov
