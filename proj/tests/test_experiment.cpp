#include <gtest/gtest.h>

#include <fstream>
#include <numbers>
#include <sstream>

#include "rmarkov/experiment.hpp"
#include "rmarkov/oracle.hpp"

using namespace rmarkov;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rmarkov_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json minimal() {
  return nlohmann::json::parse(R"({
    "schema_version": 1,
    "model": {"name": "tfim", "h_x": 1.0, "J_zz": 0.8},
    "tripartition": {"N_A": 4, "r": [1, 2, 3]},
    "sweep": {"axis": "p_zz", "values": [0.11, 0.19]}
  })");
}

CmiRow synthetic_row(double r, double value, double h_x) {
  CmiRow row;
  row.model = "cluster";
  row.engine = "mps";
  row.r = static_cast<std::size_t>(r);
  row.n_a = 4;
  row.length = 4 + 3 * row.r;
  row.h_x = h_x;
  row.p_z = 0.1;
  row.i2 = value;
  return row;
}

}  // namespace

TEST(Config, ParsesAndExpandsSweep) {
  const RunConfig cfg = parse_config(minimal());
  EXPECT_EQ(cfg.model.model, Model::Tfim);
  EXPECT_EQ(cfg.r_values, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(cfg.axis, SweepAxis::PZZ);
  const auto points = sweep_points(cfg);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(channel_strength(points[1].channels, ChannelKind::PairZZ), 0.19);
  EXPECT_EQ(channel_strength(points[1].channels, ChannelKind::SingleX), p_x_from_p_zz(0.19, 1.0, 0.8));
  EXPECT_EQ(channel_strength(points[1].channels, ChannelKind::OddZ), 0.0);
}

TEST(Config, RoundTripsThroughJson) {
  const RunConfig cfg = parse_config(minimal());
  const RunConfig back = parse_config(to_json(cfg));
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto bad = minimal();
  bad["model"]["pzz"] = 0.1;
  EXPECT_THROW(parse_config(bad), std::invalid_argument);
  bad = minimal();
  bad["extra"] = 1;
  EXPECT_THROW(parse_config(bad), std::invalid_argument);
  bad = minimal();
  bad["schema_version"] = 2;
  EXPECT_THROW(parse_config(bad), std::invalid_argument);
  bad = minimal();
  bad.erase("schema_version");
  EXPECT_THROW(parse_config(bad), std::invalid_argument);
  bad = minimal();
  bad["tripartition"]["r"] = nlohmann::json::array();
  EXPECT_THROW(parse_config(bad), std::invalid_argument);
  bad = minimal();
  bad["sweep"]["values"] = {0.6};
  EXPECT_THROW(parse_config(bad), std::invalid_argument);
  bad = minimal();
  bad["model"]["h_x"] = "one";
  EXPECT_THROW(parse_config(bad), std::invalid_argument);
  bad = minimal();
  bad["channels"] = {{{"kind", "odd_z"}, {"p", 0.1}}};
  EXPECT_THROW(parse_config(bad), std::invalid_argument);  // the p_zz axis owns the channels
}

TEST(Csv, DoublesRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, std::numbers::ln2, 1e-300, -2.5e17, 0.0}) {
    const std::string s = format_double(v);
    EXPECT_EQ(parse_double(s), v) << s;
  }
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_TRUE(std::isnan(parse_double(format_double(std::nan("")))));
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
}

TEST(Csv, HeaderAndRowsRoundTrip) {
  std::vector<CmiRow> rows{synthetic_row(1, 0.5, 1.0), synthetic_row(2, 0.25, 1.0)};
  rows[1].error = "dmrg, \"odd\" failure";
  rows[1].terms = {0.1, 0.2, 0.3, 1.0 / 7.0};
  std::stringstream buf;
  write_cmi_csv(buf, rows);
  std::string header;
  std::getline(std::stringstream(buf.str()), header);
  EXPECT_EQ(header,
            "model,engine,L,N_A,r,h_x,J_zz,p_z,p_zz,p_x,S2_AB,S2_BC,S2_B,S2_ABC,I2,max_discarded_weight,"
            "trace_drift,wall_seconds,error");
  const auto back = read_cmi_csv(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].error, rows[1].error);
  EXPECT_EQ(back[1].terms.s_abc, 1.0 / 7.0);
  EXPECT_EQ(back[0].i2, 0.5);
  EXPECT_EQ(back[1].length, 10u);
}

TEST(Csv, RejectsForeignHeader) {
  std::stringstream buf("a,b,c\n1,2,3\n");
  EXPECT_THROW(read_cmi_csv(buf), std::invalid_argument);
}

TEST(Metadata, Parses) {
  std::stringstream in("# comment\nmodel=tfim\nenergy=-1.5\n");
  const auto m = parse_metadata(in);
  EXPECT_EQ(m.at("model"), "tfim");
  EXPECT_EQ(m.at("energy"), "-1.5");
  std::stringstream bad("novalue\n");
  EXPECT_THROW(parse_metadata(bad), std::invalid_argument);
}

TEST(Fit, SyntheticCsvRecoversXi) {
  const fs::path dir = scratch("fit");
  std::vector<CmiRow> rows;
  for (int r = 1; r <= 8; ++r) rows.push_back(synthetic_row(r, std::exp(-r / 3.0) + 0.1, 1.0));
  for (int r = 1; r <= 8; ++r) rows.push_back(synthetic_row(r, std::numbers::ln2, 1.2));
  {
    std::ofstream out(dir / "cmi_mps.csv");
    write_cmi_csv(out, rows);
  }
  const FitReport report = run_fit(dir / "cmi_mps.csv", dir);
  ASSERT_EQ(report.groups.size(), 2u);
  EXPECT_NEAR(report.groups[0].fit.xi2, 3.0, 1e-4);
  EXPECT_TRUE(report.groups[1].fit.flags.no_decay);
  EXPECT_TRUE(fs::exists(dir / "fit_report.txt"));
  std::ifstream in(dir / "fit.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_NE(header.find(",error,c0,c1,xi2,rms_residual,xi2_drop_last,fit_flags,alpha2,power_rms"), std::string::npos);
  EXPECT_EQ(std::count(first.begin(), first.end(), ','), std::count(header.begin(), header.end(), ','));
}

TEST(Fit, TooFewPointsIsReportedNotThrown) {
  std::vector<CmiRow> rows{synthetic_row(1, 0.5, 1.0), synthetic_row(2, 0.3, 1.0)};
  const FitReport report = fit_rows(rows);
  ASSERT_EQ(report.groups.size(), 1u);
  EXPECT_FALSE(report.groups[0].fitted);
  EXPECT_FALSE(report.groups[0].error.empty());
}

TEST(GroundCache, ParamagnetCheckpointAndIdempotence) {
  const fs::path dir = scratch("ground");
  RunConfig cfg = parse_config(nlohmann::json::parse(R"({
    "schema_version": 1,
    "model": {"name": "tfim", "h_x": 0.7, "J_zz": 0.0},
    "tripartition": {"N_A": 4, "r": [1, 2]},
    "dmrg": {"chi_max": 8}
  })"));
  cfg.out_dir = dir;
  const auto first = run_ground(cfg, {false, 1});
  ASSERT_EQ(first.size(), 2u);
  for (const auto& g : first) {
    EXPECT_TRUE(g.computed);
    const GroundState reloaded{load_checkpoint(g.checkpoint.string())};
    const auto mpo = build_hamiltonian_mpo(g.spec);
    EXPECT_NEAR(expectation(reloaded.state, mpo).real(), -0.7 * static_cast<double>(g.spec.length), 1e-9);
    EXPECT_TRUE(fs::exists(g.checkpoint.string() + ".meta"));
  }
  const auto stamp = fs::last_write_time(first[0].checkpoint);
  const auto second = run_ground(cfg, {false, 1});
  for (const auto& g : second) EXPECT_FALSE(g.computed);
  EXPECT_EQ(fs::last_write_time(first[0].checkpoint), stamp);
  const auto forced = run_ground(cfg, {true, 1});
  for (const auto& g : forced) EXPECT_TRUE(g.computed);
}

TEST(GroundCache, MismatchedMetadataIsRecomputed) {
  const fs::path dir = scratch("meta");
  DmrgConfig dmrg;
  dmrg.policy = {8, 1e-12};
  const ModelSpec spec{Model::Tfim, 7, 0.5, 0.0, true};
  {
    GroundStateCache cache(dir, dmrg);
    (void)cache.get(spec);
    EXPECT_FALSE(cache.was_cached(spec));
  }
  const fs::path meta = GroundStateCache(dir, dmrg).checkpoint_path(spec).string() + ".meta";
  {
    std::ofstream out(meta);
    out << "model=cluster\nL=7\nh_x=0.5\nJ_zz=0\nperiodic=1\nchi_max=8\n";
  }
  GroundStateCache cache(dir, dmrg);
  const GroundState gs = cache.get(spec);
  EXPECT_FALSE(cache.was_cached(spec));
  EXPECT_NEAR(gs.energy, -3.5, 1e-9);
  GroundStateCache again(dir, dmrg);
  (void)again.get(spec);
  EXPECT_TRUE(again.was_cached(spec));
}

TEST(GroundStateCache, ResumesUnconvergedCheckpoint) {
  const fs::path dir = scratch("resume");
  const ModelSpec spec{Model::Tfim, 10, 1.0, 0.8, true};
  DmrgConfig short_run;
  short_run.policy = {16, 1e-12};
  short_run.max_sweeps = 2;
  {
    GroundStateCache cache(dir, short_run);
    EXPECT_FALSE(cache.get(spec).converged);
  }
  DmrgConfig full = short_run;
  full.max_sweeps = 40;
  GroundStateCache cache(dir, full);
  const GroundState gs = cache.get(spec);
  EXPECT_TRUE(gs.converged);
  EXPECT_GT(gs.sweeps, 2u);
  EXPECT_FALSE(cache.was_cached(spec));
  EXPECT_NEAR(gs.energy, ed::ed_ground_state(spec).energy, 1e-6);
  GroundStateCache again(dir, full);
  EXPECT_EQ(again.get(spec).sweeps, gs.sweeps);
  EXPECT_TRUE(again.was_cached(spec));
}

TEST(RunCmi, EdAndMpsRowsAgree) {
  const fs::path dir = scratch("cmi");
  RunConfig cfg = parse_config(nlohmann::json::parse(R"({
    "schema_version": 1,
    "model": {"name": "cluster", "h_x": 0.9},
    "tripartition": {"N_A": 4, "r": [1]},
    "choi": {"chi_max": 1024, "cutoff": 0},
    "dmrg": {"chi_max": 32, "cutoff": 1e-14, "energy_tol": 1e-12},
    "sweep": {"axis": "p_z", "values": [0.0, 0.2]}
  })"));
  cfg.out_dir = dir;
  const auto mps = run_cmi(cfg, {false, 1});
  cfg.engine = Engine::Ed;
  const auto ed = run_cmi(cfg, {false, 1});
  ASSERT_EQ(mps.size(), 2u);
  ASSERT_EQ(ed.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(mps[i].error.empty()) << mps[i].error;
    EXPECT_NEAR(mps[i].i2, ed[i].i2, 1e-7);
    EXPECT_NEAR(mps[i].terms.s_ab, ed[i].terms.s_ab, 1e-7);
  }
  EXPECT_NEAR(mps[0].terms.s_abc, 0.0, 1e-8);
  EXPECT_TRUE(fs::exists(dir / "cmi_mps.csv"));
  EXPECT_TRUE(fs::exists(dir / "cmi_ed.csv"));
  EXPECT_EQ(read_cmi_csv(dir / "cmi_ed.csv").size(), 2u);
}

TEST(RunCmi, EdFailuresAreRowsNotExceptions) {
  RunConfig cfg = parse_config(minimal());
  cfg.engine = Engine::Ed;
  cfg.r_values = {3};  // L = 13 exceeds the dense limit
  cfg.out_dir = scratch("edfail");
  const auto rows = run_cmi(cfg, {false, 1});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_TRUE(std::isnan(rows[0].i2));
}

TEST(StabilizerCheck, Passes) {
  const StabilizerCheck check = run_stabilizer_check();
  EXPECT_TRUE(check.passed);
  EXPECT_GE(check.lines.size(), 10u);
}
