#include <gtest/gtest.h>

#include "dense_helpers.hpp"
#include "rmarkov/choi.hpp"
#include "rmarkov/dmrg.hpp"
#include "rmarkov/oracle.hpp"
#include "rmarkov/renyi.hpp"

using namespace rmarkov;
using testing_dense::to_density;

namespace {

constexpr TruncationPolicy kExact{4096, 0.0};

double overlap(const ChoiState& a, const ChoiState& b) {
  const LogComplex lc = inner_product(a.state, b.state);
  return std::exp(lc.log_magnitude - log_norm(a.state) - log_norm(b.state));
}

MatrixProductState test_state(std::size_t length, std::uint64_t seed) {
  return normalized(MatrixProductState::random(length, 2, 4, seed));
}

GroundState cluster_ground(std::size_t length, double h) {
  DmrgConfig cfg;
  cfg.policy = {32, 1e-12};
  return ground_state({Model::Cluster, length, h, 0.0, true}, cfg);
}

}  // namespace

TEST(Doubled, SingleSiteOperatorConvention) {
  // conj(K) (x) K on (u, l): for K = sigma_y the doubled map is conj(Y) (x) Y.
  const DenseTensor d = doubled_operator(pauli::y());
  const DenseTensor expect = kron(pauli::y().conj(), pauli::y());
  EXPECT_EQ(max_abs_diff(d, expect), 0.0);
}

TEST(Doubled, DepolarizerIsProjectorOntoIdentity) {
  const DenseTensor d = depolarizer_operator();
  const RowMatrix m = d.as_matrix(4, 4);
  Eigen::Vector4cd id(1, 0, 0, 1);
  const Eigen::Matrix4cd expect = id * id.adjoint() / 2.0;
  EXPECT_LT((Eigen::Matrix4cd(m) - expect).norm(), 1e-15);
  EXPECT_LT((Eigen::Matrix4cd(m * m) - Eigen::Matrix4cd(m)).norm(), 1e-15);
}

TEST(Vectorize, MatchesDenseChoiVector) {
  const auto psi = test_state(5, 3);
  const ChoiState rho = vectorize_pure(psi, kExact);
  const Eigen::VectorXcd v = testing_dense::to_dense(psi);
  const Eigen::MatrixXcd dense = v * v.adjoint();
  const Eigen::VectorXcd expect = ed::ed_choi_vector(dense);
  const Eigen::VectorXcd got = testing_dense::to_dense(rho.state);
  EXPECT_LT((got - expect).norm(), 1e-11);
  EXPECT_NEAR(trace_of(rho), 1.0, 1e-12);
  EXPECT_NEAR(purity(rho), 1.0, 1e-12);
}

TEST(Vectorize, IdentityState) {
  const ChoiState id = identity_choi(4);
  const Eigen::MatrixXcd dense = to_density(id);
  EXPECT_LT((dense - Eigen::MatrixXcd::Identity(16, 16)).norm(), 1e-15);
  EXPECT_NEAR(trace_of(id), 16.0, 1e-12);
  EXPECT_NEAR(purity(id), 1.0 / 16.0, 1e-15);
}

class ChannelVsDense : public ::testing::TestWithParam<std::tuple<ChannelKind, double>> {};

TEST_P(ChannelVsDense, MatchesKrausSum) {
  const auto [kind, p] = GetParam();
  const auto psi = test_state(5, 11);
  const ChoiState rho = apply_channel(vectorize_pure(psi, kExact), {kind, p}, kExact);
  const Eigen::VectorXcd v = testing_dense::to_dense(psi);
  const Eigen::MatrixXcd expect = ed::ed_apply_channel(v * v.adjoint(), {kind, p});
  EXPECT_LT((to_density(rho) - expect).norm(), 1e-11);
  EXPECT_LE(rho.trace_drift, 1e-8);
  ASSERT_EQ(rho.history.size(), 1u);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ChannelVsDense,
                         ::testing::Combine(::testing::Values(ChannelKind::OddZ, ChannelKind::PairZZ,
                                                              ChannelKind::SingleX),
                                            ::testing::Values(0.07, 0.3, 0.5)));

TEST(Channel, ZeroStrengthIsIdentity) {
  const auto psi = test_state(6, 21);
  const ChoiState rho = vectorize_pure(psi, kExact);
  for (ChannelKind k : {ChannelKind::OddZ, ChannelKind::PairZZ, ChannelKind::SingleX}) {
    const ChoiState out = apply_channel(rho, {k, 0.0});
    EXPECT_NEAR(overlap(out, rho), 1.0, 1e-12) << to_string(k);
  }
}

TEST(Channel, TracePreservedAlongPipeline) {
  // Bond cap above any bond the pipeline reaches: only the relative cutoff truncates.
  DmrgConfig cfg;
  cfg.policy = {8, 1e-12};
  const GroundState gs = ground_state({Model::Cluster, 12, 1.0, 0.0, true}, cfg);
  const TruncationPolicy policy{4096, 1e-12};
  ChoiState rho = vectorize_pure(gs.state, policy);
  for (const ChannelSpec& ch :
       {ChannelSpec{ChannelKind::OddZ, 0.1}, {ChannelKind::PairZZ, 0.2}, {ChannelKind::SingleX, 0.3}}) {
    const double before = trace_of(rho);
    rho = apply_channel(std::move(rho), ch, policy, false);
    EXPECT_LE(std::abs(trace_of(rho) - before), 1e-8) << to_string(ch.kind);
  }
  EXPECT_LE(rho.trace_drift, 1e-8);
  EXPECT_EQ(describe_history(rho), "odd_z:0.10000000000000001;pair_zz:0.20000000000000001;single_x:0.29999999999999999");
}

TEST(Channel, ZzAndXCommute) {
  const GroundState gs = ground_state({Model::Tfim, 10, 1.0, 0.8, true}, DmrgConfig{});
  const ChoiState rho = vectorize_pure(gs.state);
  const ChannelSpec zz{ChannelKind::PairZZ, 0.19}, x{ChannelKind::SingleX, p_x_from_p_zz(0.19, 1.0, 0.8)};
  const ChoiState a = apply_channel(apply_channel(rho, zz), x);
  const ChoiState b = apply_channel(apply_channel(rho, x), zz);
  EXPECT_NEAR(overlap(a, b), 1.0, 1e-9);
}

TEST(Channel, PurityNeverIncreases) {
  const GroundState gs = cluster_ground(10, 0.9);
  ChoiState rho = vectorize_pure(gs.state);
  double last = purity(rho);
  for (const ChannelSpec& ch : {ChannelSpec{ChannelKind::OddZ, 0.05}, {ChannelKind::OddZ, 0.2},
                                {ChannelKind::PairZZ, 0.1}, {ChannelKind::SingleX, 0.4}, {ChannelKind::OddZ, 0.5}}) {
    rho = apply_channel(std::move(rho), ch);
    const double now = purity(rho);
    EXPECT_LE(now, last + 1e-9);
    last = now;
  }
}

TEST(Channel, RejectsBadStrength) {
  const ChoiState rho = identity_choi(3);
  EXPECT_THROW(apply_channel(rho, {ChannelKind::OddZ, 0.6}), std::invalid_argument);
  EXPECT_THROW(apply_channel(rho, {ChannelKind::OddZ, -0.1}), std::invalid_argument);
}

TEST(Depolarizer, Idempotent) {
  const GroundState gs = cluster_ground(8, 1.0);
  const ChoiState rho = apply_channel(vectorize_pure(gs.state), {ChannelKind::OddZ, 0.1});
  const std::vector<std::size_t> sites{1, 2, 5};
  const ChoiState once = apply_depolarizer(rho, sites);
  const ChoiState twice = apply_depolarizer(once, sites);
  EXPECT_NEAR(overlap(once, twice), 1.0, 1e-12);
  EXPECT_NEAR(log_norm(once.state), log_norm(twice.state), 1e-12);
}

TEST(Depolarizer, DenseReconstructionAtSixSites) {
  const ModelSpec spec{Model::Tfim, 6, 1.0, 0.8, true};
  const std::vector<ChannelSpec> channels{{ChannelKind::PairZZ, 0.2}, {ChannelKind::SingleX, 0.1}};
  const Eigen::MatrixXcd dense = ed::ed_decohered_state(spec, channels);
  DmrgConfig cfg;
  cfg.policy = {16, 1e-14};
  cfg.energy_tol = 1e-13;
  cfg.lanczos.tolerance = 1e-13;
  ChoiState rho = vectorize_pure(ground_state(spec, cfg).state, kExact);
  for (const auto& ch : channels) rho = apply_channel(std::move(rho), ch, kExact);
  for (const std::vector<std::size_t>& gone : {std::vector<std::size_t>{0}, {1, 3}, {2, 3, 4}, {0, 5}}) {
    const ChoiState d = apply_depolarizer(rho, gone);
    const Eigen::MatrixXcd expect = ed::ed_depolarize(dense, gone);
    EXPECT_LT((to_density(d) - expect).cwiseAbs().maxCoeff(), 1e-10);
    const auto kept = complement(gone, 6);
    EXPECT_NEAR(second_renyi_entropy(rho, kept), ed::ed_second_renyi(dense, kept), 1e-10);
  }
}
