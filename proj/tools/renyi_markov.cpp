// renyi_markov: batch runner for ground states, Renyi CMI curves, fits and checks.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 a check failed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rmarkov/experiment.hpp"
#include "rmarkov/parallel.hpp"

namespace {

using namespace rmarkov;

struct CommonFlags {
  std::string config;
  std::string out;
  bool force = false;
  std::string engine;
  int jobs = 0;
  int ed_jobs = 0;
  std::size_t chi_max = 0;
  std::optional<double> cutoff;
  std::size_t dmrg_chi_max = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (overrides output.dir)");
  cmd->add_flag("--force", f.force, "recompute ground states even when checkpoints exist");
  cmd->add_option("--engine", f.engine, "mps or ed")->check(CLI::IsMember({"mps", "ed"}));
  cmd->add_option("--jobs", f.jobs, "parallel jobs (0: all cores)")->envname("RENYI_MARKOV_JOBS")->check(
      CLI::NonNegativeNumber);
  cmd->add_option("--ed-jobs", f.ed_jobs, "cap on concurrent ED jobs (memory budget)")->check(CLI::PositiveNumber);
  cmd->add_option("--chi-max", f.chi_max, "bond cap of the doubled-space state")->check(CLI::PositiveNumber);
  cmd->add_option("--cutoff", f.cutoff, "relative discard threshold of the doubled-space state")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--dmrg-chi-max", f.dmrg_chi_max, "bond cap of the ground-state search")
      ->check(CLI::PositiveNumber);
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.engine.empty()) cfg.engine = parse_engine(f.engine);
  if (f.jobs > 0) cfg.jobs = f.jobs;
  if (f.ed_jobs > 0) cfg.ed_jobs = f.ed_jobs;
  if (f.chi_max > 0) cfg.choi_policy.chi_max = f.chi_max;
  if (f.cutoff) cfg.choi_policy.cutoff = *f.cutoff;
  if (f.dmrg_chi_max > 0) cfg.dmrg.policy.chi_max = f.dmrg_chi_max;
  cfg.validate();
  return cfg;
}

RunOptions options_for(const CommonFlags& f, const RunConfig& cfg) { return {f.force, cfg.jobs}; }

void print_ground(const std::vector<GroundSummary>& rows) {
  for (const auto& g : rows)
    std::printf("%s L=%zu h_x=%s J_zz=%s energy=%s %s%s -> %s\n", to_string(g.spec.model).c_str(), g.spec.length,
                format_double(g.spec.h_x).c_str(), format_double(g.spec.j_zz).c_str(),
                format_double(g.energy).c_str(), g.computed ? "computed" : "cached",
                g.converged ? "" : " (not converged)", g.checkpoint.string().c_str());
}

std::size_t print_cmi(const std::vector<CmiRow>& rows, const RunConfig& cfg) {
  std::size_t failed = 0;
  for (const auto& r : rows) {
    std::printf("L=%zu r=%zu h_x=%s I2=%s%s%s\n", r.length, r.r, format_double(r.h_x).c_str(),
                format_double(r.i2).c_str(), r.error.empty() ? "" : " error: ", r.error.c_str());
    if (!r.error.empty()) ++failed;
  }
  std::printf("wrote %s\n", (cfg.out_dir / ("cmi_" + to_string(cfg.engine) + ".csv")).string().c_str());
  return failed;
}

void print_fit(const FitReport& report, const std::filesystem::path& out) {
  write_fit_report(std::cout, report);
  std::printf("wrote %s and %s\n", (out / "fit.csv").string().c_str(), (out / "fit_report.txt").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Second Renyi conditional mutual information of decohered spin chains"};
  app.require_subcommand(1);

  CommonFlags ground_f, cmi_f, fit_f, oracle_f, sweep_f;
  auto* ground = app.add_subcommand("ground", "compute and checkpoint ground states");
  add_common(ground, ground_f);
  auto* cmi_cmd = app.add_subcommand("cmi", "evaluate I2(A:C|B) for every sweep point and r");
  add_common(cmi_cmd, cmi_f);
  auto* fit = app.add_subcommand("fit", "fit exp(-c0 r) + c1 to a CMI CSV");
  add_common(fit, fit_f);
  std::string fit_csv;
  fit->add_option("csv", fit_csv, "CMI CSV (default: <out>/cmi_<engine>.csv)");
  auto* oracle = app.add_subcommand("oracle", "compare the MPS pipeline with exact diagonalization");
  add_common(oracle, oracle_f);
  auto* stab = app.add_subcommand("stabilizer-check", "closed-form stabilizer entropy checks");
  auto* sweep = app.add_subcommand("sweep", "ground, cmi and fit in one run");
  add_common(sweep, sweep_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ground->parsed()) {
      const RunConfig cfg = resolve(ground_f);
      set_max_threads(cfg.jobs);
      print_ground(run_ground(cfg, options_for(ground_f, cfg)));
      return 0;
    }
    if (cmi_cmd->parsed()) {
      const RunConfig cfg = resolve(cmi_f);
      print_cmi(run_cmi(cfg, options_for(cmi_f, cfg)), cfg);
      return 0;
    }
    if (fit->parsed()) {
      const RunConfig cfg = resolve(fit_f);
      const std::filesystem::path csv =
          fit_csv.empty() ? cfg.out_dir / ("cmi_" + to_string(cfg.engine) + ".csv") : std::filesystem::path(fit_csv);
      print_fit(run_fit(csv, cfg.out_dir), cfg.out_dir);
      return 0;
    }
    if (oracle->parsed()) {
      const RunConfig cfg = resolve(oracle_f);
      const OracleComparison cmp = run_oracle(cfg, options_for(oracle_f, cfg));
      for (std::size_t i = 0; i < cmp.mps.size(); ++i) {
        const auto& a = cmp.mps[i];
        const auto& b = cmp.ed[i];
        std::printf("%s L=%zu r=%zu p_z=%s p_zz=%s mps=%s ed=%s%s%s%s\n", a.model.c_str(), a.length, a.r,
                    format_double(a.p_z).c_str(), format_double(a.p_zz).c_str(), format_double(a.i2).c_str(),
                    format_double(b.i2).c_str(), a.error.empty() ? "" : " mps error: ", a.error.c_str(),
                    b.error.empty() ? "" : (" ed error: " + b.error).c_str());
      }
      std::printf("max |difference| = %s (tolerance %s): %s\n", format_double(cmp.max_abs_difference).c_str(),
                  format_double(kOracleTolerance).c_str(), cmp.passed ? "PASS" : "FAIL");
      return cmp.passed ? 0 : 2;
    }
    if (stab->parsed()) {
      const StabilizerCheck check = run_stabilizer_check();
      for (const auto& line : check.lines) std::puts(line.c_str());
      return check.passed ? 0 : 2;
    }
    if (sweep->parsed()) {
      const RunConfig cfg = resolve(sweep_f);
      const RunOptions opts = options_for(sweep_f, cfg);
      if (cfg.engine == Engine::Mps) print_ground(run_ground(cfg, opts));
      print_cmi(run_cmi(cfg, RunOptions{false, opts.jobs}), cfg);
      print_fit(run_fit(cfg.out_dir / ("cmi_" + to_string(cfg.engine) + ".csv"), cfg.out_dir), cfg.out_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
