// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--cache DIR] [--only 1,7,12] [--jobs N]
//
// Ground states are cached as checkpoints under the cache directory, so a
// rerun only repeats the doubled-space stage.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dense_helpers.hpp"
#include "random_stabilizer.hpp"
#include "rmarkov/experiment.hpp"
#include "rmarkov/oracle.hpp"
#include "rmarkov/stabilizer.hpp"

using namespace rmarkov;
namespace fs = std::filesystem;

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr TruncationPolicy kProductionChoi{256, 1e-16};
constexpr TruncationPolicy kExact{4096, 0.0};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path cache_dir;
  int jobs = 1;
  std::unique_ptr<GroundStateCache> cache;
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

DmrgConfig production_dmrg() {
  DmrgConfig c;
  c.policy = {64, 1e-12};
  c.max_sweeps = 60;
  return c;
}

// CMI rows for one model over a channel axis and an r list, through the cached pipeline.
std::vector<CmiRow> rows_for(Context& ctx, const ModelSpec& model, SweepAxis axis, std::vector<double> values,
                             std::vector<std::size_t> r_values, const std::string& tag) {
  RunConfig cfg;
  cfg.model = model;
  cfg.axis = axis;
  cfg.axis_values = std::move(values);
  cfg.r_values = std::move(r_values);
  cfg.choi_policy = kProductionChoi;
  cfg.dmrg = production_dmrg();
  cfg.out_dir = ctx.cache_dir;
  auto rows = compute_cmi_rows(cfg, {false, ctx.jobs}, ctx.cache.get());
  std::ofstream out(ctx.cache_dir / ("criterion_" + tag + ".csv"));
  write_cmi_csv(out, rows);
  return rows;
}

// Rows that could not be used at all. Sweep-limited DMRG runs are kept and listed by notes().
std::string failures(const std::vector<CmiRow>& rows) {
  std::set<std::string> seen;
  std::string out;
  for (const auto& r : rows) {
    const std::string item = " [L=" + std::to_string(r.length) + ": " + r.error + "]";
    if (!row_usable(r) && seen.insert(item).second) out += item;
  }
  return out;
}

std::string notes(const std::vector<CmiRow>& rows) {
  std::set<std::string> seen;
  std::string out;
  for (const auto& r : rows) {
    const std::string item = " {L=" + std::to_string(r.length) + " h_x=" + fmt(r.h_x) + ": " + r.error + "}";
    if (row_usable(r) && !r.error.empty() && seen.insert(item).second) out += item;
  }
  return out;
}

Curve curve_of(const std::vector<CmiRow>& rows, std::function<bool(const CmiRow&)> keep) {
  Curve c;
  for (const auto& r : rows)
    if (keep(r)) c.push_back({static_cast<double>(r.r), r.i2});
  std::sort(c.begin(), c.end(), [](auto a, auto b) { return a.r < b.r; });
  return c;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * target; }

double overlap(const ChoiState& a, const ChoiState& b) {
  const LogComplex lc = inner_product(a.state, b.state);
  return std::exp(lc.log_magnitude - log_norm(a.state) - log_norm(b.state));
}

// ---- criteria -------------------------------------------------------------------------

Outcome criterion1(Context&) {
  const auto start = std::chrono::steady_clock::now();
  bool exact = true;
  for (std::size_t r = 1; r <= 10; ++r) {
    const Tripartition part{4, r, 0};
    exact = exact && stabilizer_cmi(swssb_group(part.length()), part) == kLn2;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {exact && secs < 1.0, std::string("CMI == ln 2 bit-exact for r=1..10: ") + (exact ? "yes" : "no") +
                                   ", runtime " + fmt(secs, 3) + " s"};
}

Outcome criterion2(Context& ctx) {
  const auto rows = rows_for(ctx, {Model::Tfim, 0, 1.0, 0.8, true}, SweepAxis::PZZ, {0.5}, {1, 2, 3, 4, 5}, "2");
  double worst = 0.0;
  bool ok = true;
  for (const auto& r : rows) {
    ok = ok && row_usable(r);
    worst = std::max(worst, std::abs(r.i2 - kLn2));
  }
  ok = ok && worst <= 0.02;
  return {ok, "max |I2 - ln 2| over r=1..5 = " + fmt(worst) + " (tolerance 0.02)" + failures(rows) + notes(rows)};
}

struct ClusterFits {
  std::map<std::pair<double, double>, FitResult> fits;  // (p_z, h_x)
  std::map<std::pair<double, double>, FitResult> amp;   // free-amplitude diagnostic
  std::string errors;
  std::string notes;
};

ClusterFits& cluster_fits(Context& ctx) {
  static std::optional<ClusterFits> cached;
  if (cached) return *cached;
  cached.emplace();
  const std::vector<double> fields{0.78, 1.0, 1.22};
  const std::vector<std::size_t> rs{1, 2, 3, 4, 5, 6, 7, 8};
  for (double h : fields) {
    const auto rows = rows_for(ctx, {Model::Cluster, 0, h, 0.0, true}, SweepAxis::PZ, {0.1, 0.2, 0.3}, rs,
                               "3_4_h" + fmt(h));
    cached->errors += failures(rows);
    cached->notes += notes(rows);
    for (double p : {0.1, 0.2, 0.3}) {
      const Curve c = curve_of(rows, [&](const CmiRow& r) { return r.p_z == p && row_usable(r); });
      try {
        const AmplitudeFit both = fit_exponential_amplitude(c);
        cached->fits[{p, h}] = both.unit;
        cached->amp[{p, h}] = both.amplitude;
      } catch (const std::exception& e) {
        cached->errors += std::string(" [fit p_z=") + fmt(p) + " h_x=" + fmt(h) + ": " + e.what() + "]";
      }
    }
  }
  return *cached;
}

std::string describe(const FitResult& f) {
  return fmt(f.xi2, 5) + (f.flags.any() ? "(" + f.flags.to_string() + ")" : "");
}

// Free-amplitude xi2 for the same curves, reported next to the unit-amplitude fit.
std::string describe_amp(const ClusterFits& cf, double p) {
  std::string out = " [free-amplitude xi2: ";
  for (double h : {0.78, 1.0, 1.22}) out += (h == 0.78 ? "" : ", ") + describe(cf.amp.at({p, h}));
  return out + "]";
}

Outcome criterion3(Context& ctx) {
  auto& cf = cluster_fits(ctx);
  if (cf.fits.size() < 9) return {false, "missing fits" + cf.errors};
  const FitResult& lo = cf.fits[{0.1, 0.78}];
  const FitResult& mid = cf.fits[{0.1, 1.0}];
  const FitResult& hi = cf.fits[{0.1, 1.22}];
  const bool dominance = mid.xi2 > 2.0 * std::max(lo.xi2, hi.xi2);
  const bool near_lo = within(lo.xi2, 2.801, 0.2), near_hi = within(hi.xi2, 2.881, 0.2);
  return {dominance && cf.errors.empty(),
          "xi2(0.78, 1.0, 1.22) = " + describe(lo) + ", " + describe(mid) + ", " + describe(hi) +
              "; peak > 2x others: " + (dominance ? "yes" : "no") + "; best-effort 20% bands (2.801, 2.881): " +
              (near_lo ? "in" : "out") + ", " + (near_hi ? "in" : "out") + describe_amp(cf, 0.1) + cf.errors + cf.notes};
}

Outcome criterion4(Context& ctx) {
  auto& cf = cluster_fits(ctx);
  if (cf.fits.size() < 9) return {false, "missing fits" + cf.errors};
  bool ordering = true;
  std::string detail;
  const std::map<double, double> targets{{0.2, 7.011}, {0.3, 5.960}};
  for (auto [p, target] : targets) {
    const FitResult& lo = cf.fits[{p, 0.78}];
    const FitResult& mid = cf.fits[{p, 1.0}];
    const FitResult& hi = cf.fits[{p, 1.22}];
    const bool peak = mid.xi2 > lo.xi2 && mid.xi2 > hi.xi2;
    ordering = ordering && peak;
    detail += "p_z=" + fmt(p) + ": xi2 = " + describe(lo) + ", " + describe(mid) + ", " + describe(hi) +
              " peak " + (peak ? "yes" : "no") + ", best-effort 20% band of " + fmt(target) + ": " +
              (within(mid.xi2, target, 0.2) ? "in" : "out") + describe_amp(cf, p) + "; ";
  }
  return {ordering && cf.errors.empty(), detail + cf.errors + cf.notes};
}

Outcome criterion5(Context& ctx) {
  const std::vector<double> strengths{0.11, 0.19, 0.28};
  const std::vector<double> targets{1.580, 1.954, 3.825};
  const auto rows = rows_for(ctx, {Model::Tfim, 0, 1.0, 0.8, true}, SweepAxis::PZZ, strengths,
                             {1, 2, 3, 4, 5, 6, 7, 8}, "5");
  std::vector<FitResult> fits;
  std::string detail;
  bool ok = failures(rows).empty();
  for (std::size_t i = 0; i < strengths.size(); ++i) {
    const Curve c = curve_of(rows, [&](const CmiRow& r) { return r.p_zz == strengths[i] && row_usable(r); });
    double amp_xi = std::nan("");
    try {
      const AmplitudeFit both = fit_exponential_amplitude(c);
      fits.push_back(both.unit);
      amp_xi = both.amplitude.xi2;
    } catch (const std::exception& e) {
      return {false, std::string("fit failed: ") + e.what() + failures(rows)};
    }
    const bool near = within(fits.back().xi2, targets[i], 0.25);
    ok = ok && near;
    detail += "p_zz=" + fmt(strengths[i]) + ": xi2=" + describe(fits.back()) + " (target " + fmt(targets[i]) +
              (near ? ", in 25%" : ", outside 25%") + ") c1=" + fmt(fits.back().c1) +
              " [free-amplitude xi2 " + fmt(amp_xi, 5) + "]; ";
  }
  const bool xi_up = fits[0].xi2 < fits[1].xi2 && fits[1].xi2 < fits[2].xi2;
  const bool c1_up = fits[0].c1 < fits[1].c1 && fits[1].c1 < fits[2].c1;
  ok = ok && xi_up && c1_up;
  return {ok, detail + "xi2 increasing: " + (xi_up ? "yes" : "no") + ", c1 increasing: " + (c1_up ? "yes" : "no") +
                  failures(rows) + notes(rows)};
}

Outcome criterion6(Context& ctx) {
  const std::vector<double> grid{0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  RunConfig cfg;
  cfg.model = {Model::Cluster, 0, 1.0, 0.0, true};
  cfg.channels = {{ChannelKind::OddZ, 0.1}};
  cfg.axis = SweepAxis::HX;
  cfg.axis_values = grid;
  cfg.r_values = {2, 4, 6};
  cfg.choi_policy = kProductionChoi;
  cfg.dmrg = production_dmrg();
  cfg.out_dir = ctx.cache_dir;
  const auto rows = compute_cmi_rows(cfg, {false, ctx.jobs}, ctx.cache.get());
  {
    std::ofstream out(ctx.cache_dir / "criterion_6.csv");
    write_cmi_csv(out, rows);
  }
  bool ok = failures(rows).empty();
  std::string detail;
  for (std::size_t r : {2u, 4u, 6u}) {
    double best = -1.0, arg = 0.0;
    for (const auto& row : rows)
      if (row.r == r && row_usable(row) && row.i2 > best) {
        best = row.i2;
        arg = row.h_x;
      }
    const bool central = std::abs(arg - 0.9) < 1e-9 || std::abs(arg - 1.0) < 1e-9 || std::abs(arg - 1.1) < 1e-9;
    ok = ok && central;
    detail += "r=" + std::to_string(r) + ": argmax h_x=" + fmt(arg) + " (I2=" + fmt(best) + "); ";
  }
  return {ok, detail + failures(rows) + notes(rows)};
}

Outcome criterion7(Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.out_dir = ctx.cache_dir / "oracle";
  cfg.dmrg = production_dmrg();
  cfg.dmrg.policy.cutoff = 1e-14;
  cfg.dmrg.energy_tol = 1e-12;
  const OracleComparison cmp = run_oracle(cfg, {false, ctx.jobs});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string errors;
  for (const auto& r : cmp.mps)
    if (!r.error.empty()) errors += " [" + r.error + "]";
  return {cmp.passed && secs < 300.0, std::to_string(cmp.mps.size()) + " cases, max |difference| over S2 terms and I2 = " +
                                          fmt(cmp.max_abs_difference, 3) + " (tolerance 1e-7), runtime " +
                                          fmt(secs, 3) + " s" + errors};
}

Outcome criterion8(Context&) {
  double worst_cmi = 0.0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::vector<MatrixProductState> products{MatrixProductState::product(10, {1.0, 0.0}),
                                           MatrixProductState::product(10, {std::sqrt(0.5), std::sqrt(0.5)})};
  for (int k = 0; k < 3; ++k) {
    std::vector<std::vector<Complex>> local;
    for (int j = 0; j < 10; ++j) {
      const double t = angle(rng), f = 2 * angle(rng);
      local.push_back({std::cos(t / 2), std::polar(std::sin(t / 2), f)});
    }
    products.push_back(MatrixProductState::product(local));
  }
  for (std::size_t i = 0; i < products.size(); ++i)
    for (ChannelKind kind : {ChannelKind::OddZ, ChannelKind::SingleX, ChannelKind::PairZZ}) {
      if (kind == ChannelKind::PairZZ && i != 0) continue;
      for (double p : {0.0, 0.2, 0.5}) {
        const ChoiState rho = apply_channel(vectorize_pure(products[i]), {kind, p});
        worst_cmi = std::max(worst_cmi, std::abs(cmi(rho, {4, 2, 0})));
      }
    }

  // Pure states with a modest bond so the doubled state is kept without truncation.
  double worst_pure = 0.0;
  for (auto [model, h] : {std::pair{Model::Cluster, 1.0}, std::pair{Model::Tfim, 1.0}, std::pair{Model::Cluster, 0.6}}) {
    DmrgConfig cfg = production_dmrg();
    cfg.policy = {12, 1e-14};
    const GroundState gs = ground_state({model, 13, h, 0.8, true}, cfg);
    worst_pure = std::max(worst_pure, std::abs(cmi_terms(vectorize_pure(gs.state, kExact), {4, 3, 0}).s_abc));
  }

  double worst_identity = 0.0;
  const GroundState gs = ground_state({Model::Cluster, 10, 0.9, 0.0, true}, production_dmrg());
  const ChoiState rho = vectorize_pure(gs.state);
  for (ChannelKind kind : {ChannelKind::OddZ, ChannelKind::SingleX, ChannelKind::PairZZ})
    worst_identity = std::max(worst_identity, std::abs(1.0 - overlap(apply_channel(rho, {kind, 0.0}), rho)));

  const bool ok = worst_cmi <= 1e-8 && worst_pure <= 1e-9 && worst_identity <= 1e-12;
  return {ok, "product max |CMI| = " + fmt(worst_cmi, 3) + " (1e-8), pure max |S2_ABC| = " + fmt(worst_pure, 3) +
                  " (1e-9), p=0 max |1 - overlap| = " + fmt(worst_identity, 3) + " (1e-12)"};
}

Outcome criterion9(Context&) {
  const GroundState gs = ground_state({Model::Cluster, 12, 1.0, 0.0, true}, production_dmrg());
  const ChoiState rho = apply_channel(vectorize_pure(gs.state), {ChannelKind::OddZ, 0.2});
  double worst_idem = 0.0;
  for (const std::vector<std::size_t>& sites : {std::vector<std::size_t>{0}, {2, 3, 7}, {1, 4, 5, 6, 10, 11}}) {
    const ChoiState once = apply_depolarizer(rho, sites);
    const ChoiState twice = apply_depolarizer(once, sites);
    worst_idem = std::max(worst_idem, std::abs(1.0 - overlap(once, twice)));
  }

  const ModelSpec spec{Model::Tfim, 6, 1.0, 0.8, true};
  const std::vector<ChannelSpec> channels{{ChannelKind::PairZZ, 0.19},
                                          {ChannelKind::SingleX, p_x_from_p_zz(0.19, 1.0, 0.8)}};
  DmrgConfig cfg = production_dmrg();
  cfg.policy.cutoff = 1e-14;
  cfg.energy_tol = 1e-13;
  ChoiState small = vectorize_pure(ground_state(spec, cfg).state, kExact);
  for (const auto& ch : channels) small = apply_channel(std::move(small), ch, kExact);
  const Eigen::MatrixXcd dense = ed::ed_decohered_state(spec, channels);
  double worst_dense = 0.0;
  for (unsigned mask = 1; mask < 63; ++mask) {
    std::vector<std::size_t> gone;
    for (std::size_t q = 0; q < 6; ++q)
      if (mask & (1u << q)) gone.push_back(q);
    const Eigen::MatrixXcd got = testing_dense::to_density(apply_depolarizer(small, gone));
    worst_dense = std::max(worst_dense, (got - ed::ed_depolarize(dense, gone)).cwiseAbs().maxCoeff());
  }
  const bool ok = worst_idem <= 1e-12 && worst_dense <= 1e-10;
  return {ok, "idempotence max |1 - overlap| = " + fmt(worst_idem, 3) + " (1e-12), L=6 dense reconstruction over 62 "
              "subsystems max entry error = " + fmt(worst_dense, 3) + " (1e-10)"};
}

Outcome criterion10(Context&) {
  // Bond cap above anything reached here: only the relative cutoff truncates. The
  // production cutoff decides the outcome; the looser 1e-12 cutoff is reported.
  const TruncationPolicy policy{4096, kProductionChoi.cutoff};
  const TruncationPolicy loose{4096, 1e-12};
  DmrgConfig cfg = production_dmrg();
  cfg.policy = {8, 1e-12};
  double drift = 0.0, loose_drift = 0.0, commute = 0.0, monotone = 0.0;
  const GroundState tfim = ground_state({Model::Tfim, 16, 1.0, 0.8, true}, cfg);
  const GroundState cluster = ground_state({Model::Cluster, 16, 1.0, 0.0, true}, cfg);
  const std::vector<ChannelSpec> layers{
      {ChannelKind::OddZ, 0.1}, {ChannelKind::PairZZ, 0.19}, {ChannelKind::SingleX, 0.3}, {ChannelKind::OddZ, 0.5}};
  for (const GroundState* gs : {&tfim, &cluster}) {
    ChoiState rho = vectorize_pure(gs->state, policy);
    ChoiState rho_loose = vectorize_pure(gs->state, loose);
    double last = purity(rho);
    for (const ChannelSpec& ch : layers) {
      const double before = trace_of(rho);
      rho = apply_channel(std::move(rho), ch, policy, false);
      drift = std::max(drift, std::abs(trace_of(rho) - before));
      const double now = purity(rho);
      monotone = std::max(monotone, now - last);
      last = now;
      const double before_loose = trace_of(rho_loose);
      rho_loose = apply_channel(std::move(rho_loose), ch, loose, false);
      loose_drift = std::max(loose_drift, std::abs(trace_of(rho_loose) - before_loose));
    }
    const ChoiState base = vectorize_pure(gs->state, policy);
    const ChannelSpec zz{ChannelKind::PairZZ, 0.19}, x{ChannelKind::SingleX, p_x_from_p_zz(0.19, 1.0, 0.8)};
    const ChoiState a = apply_channel(apply_channel(base, zz, policy), x, policy);
    const ChoiState b = apply_channel(apply_channel(base, x, policy), zz, policy);
    commute = std::max(commute, std::abs(1.0 - overlap(a, b)));
  }
  const bool ok = drift <= 1e-8 && commute <= 1e-9 && monotone <= 1e-9;
  return {ok, "max trace drift = " + fmt(drift, 3) + " (1e-8; " + fmt(loose_drift, 3) +
                  " at cutoff 1e-12), ZZ/X max |1 - overlap| = " + fmt(commute, 3) +
                  " (1e-9), max purity increase = " + fmt(monotone, 3) + " (1e-9 slack)"};
}

Outcome criterion11(Context&) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> size(1, 8);
  std::size_t checks = 0, mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = size(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const StabilizerGroup g = testing_stabilizer::random_group(n, k, rng);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<std::size_t> x;
      for (std::size_t q = 0; q < n; ++q)
        if (mask & (1u << q)) x.push_back(q);
      ++checks;
      if (restricted_subgroup_dimension(g, x) != enumerated_subgroup_dimension(g, x)) ++mismatches;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 60.0, "200 groups, " + std::to_string(checks) + " subsystems, " +
                                              std::to_string(mismatches) + " mismatches, runtime " + fmt(secs, 3) + " s"};
}

Outcome criterion12(Context&) {
  double worst = 0.0;
  for (double xi : {1.0, 3.0, 10.0})
    for (double c1 : {0.0, 0.1, kLn2}) {
      Curve c;
      for (int r = 1; r <= 8; ++r) c.push_back({static_cast<double>(r), std::exp(-r / xi) + c1});
      worst = std::max(worst, std::abs(fit_exponential(c).xi2 - xi) / xi);
    }
  Curve flat;
  for (int r = 1; r <= 8; ++r) flat.push_back({static_cast<double>(r), kLn2});
  const bool flagged = fit_exponential(flat).flags.no_decay;
  return {worst <= 1e-4 && flagged, "max relative xi error over 9 curves = " + fmt(worst, 3) +
                                        " (1e-4), flat curve no_decay flag: " + (flagged ? "set" : "missing")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string cache = "acceptance_cache";
  std::vector<int> only;
  int jobs = 1;
  app.add_option("--cache", cache, "directory for ground-state checkpoints and CSVs");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--jobs", jobs, "parallel jobs")->envname("RENYI_MARKOV_JOBS");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.cache_dir = cache;
  ctx.jobs = jobs;
  fs::create_directories(ctx.cache_dir);
  ctx.cache = std::make_unique<GroundStateCache>(ctx.cache_dir / "checkpoints", production_dmrg());

  const std::vector<std::function<Outcome(Context&)>> criteria{
      criterion1, criterion2, criterion3, criterion4,  criterion5,  criterion6,
      criterion7, criterion8, criterion9, criterion10, criterion11, criterion12};
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i](ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
