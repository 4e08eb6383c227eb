#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmarkov/fitter.hpp"
#include "rmarkov/renyi.hpp"

namespace rmarkov {

enum class Engine { Mps, Ed };
std::string to_string(Engine e);
Engine parse_engine(const std::string& name);

ChannelKind parse_channel_kind(const std::string& name);

/// Parameter varied across sweep points. PZ replaces the channel list by one
/// odd_z layer; PZZ replaces it by pair_zz followed by single_x on the p_x line.
enum class SweepAxis { None, HX, PZ, PZZ };
std::string to_string(SweepAxis a);
SweepAxis parse_axis(const std::string& name);

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  ModelSpec model;
  std::vector<ChannelSpec> channels;
  std::size_t n_a = 4;
  std::vector<std::size_t> r_values{1, 2, 3};
  TruncationPolicy choi_policy = kChoiPolicy;
  DmrgConfig dmrg;
  SweepAxis axis = SweepAxis::None;
  std::vector<double> axis_values;
  std::filesystem::path out_dir = "out";
  Engine engine = Engine::Mps;
  int jobs = 0;
  int ed_jobs = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Strict parse: unknown keys, a missing or wrong schema_version, and type
/// mismatches throw std::invalid_argument.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// One point of the sweep axis with its model and channel list.
struct SweepPoint {
  ModelSpec model;
  std::vector<ChannelSpec> channels;
};

std::vector<SweepPoint> sweep_points(const RunConfig& config);

/// Strength of the first channel of the given kind, 0 if absent.
double channel_strength(std::span<const ChannelSpec> channels, ChannelKind kind);

// ---- CSV ------------------------------------------------------------------

struct CmiRow {
  std::string model;
  std::string engine;
  std::size_t length = 0;
  std::size_t n_a = 0;
  std::size_t r = 0;
  double h_x = 0.0;
  double j_zz = 0.0;
  double p_z = 0.0;
  double p_zz = 0.0;
  double p_x = 0.0;
  CmiTerms terms;
  double i2 = 0.0;
  double max_discarded_weight = 0.0;
  double trace_drift = 0.0;
  double wall_seconds = 0.0;
  std::string error;
};

/// Finite I2 computed to the end. DMRG runs stopped by the sweep limit still
/// count; their last energy delta stays in the error column.
bool row_usable(const CmiRow& r);

/// Fixed column order of the CMI CSV.
const std::vector<std::string>& cmi_columns();
/// Columns appended by the fit step.
const std::vector<std::string>& fit_columns();

/// %.17g, with "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double v);
double parse_double(const std::string& text);

void write_cmi_csv(std::ostream& out, const std::vector<CmiRow>& rows);
std::vector<CmiRow> read_cmi_csv(std::istream& in);
std::vector<CmiRow> read_cmi_csv(const std::filesystem::path& path);

/// Splits one CSV record; fields may be double-quoted with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_field(const std::string& text);

// ---- ground-state checkpoints ----------------------------------------------

/// key=value sidecar parsing.
std::map<std::string, std::string> parse_metadata(std::istream& in);

/// Ground states on disk (MPS1 checkpoint + .meta sidecar) with an in-memory
/// layer. Safe to call concurrently for different specs.
class GroundStateCache {
 public:
  GroundStateCache(std::filesystem::path dir, DmrgConfig config, bool force = false);

  /// Loaded when a matching checkpoint exists (and force is off), else computed and saved.
  GroundState get(const ModelSpec& spec);
  /// Whether the last get() for this spec was served from disk or memory.
  bool was_cached(const ModelSpec& spec) const;

  std::filesystem::path checkpoint_path(const ModelSpec& spec) const;
  const DmrgConfig& config() const { return config_; }

 private:
  std::string key(const ModelSpec& spec) const;
  std::optional<GroundState> load(const ModelSpec& spec) const;

  std::filesystem::path dir_;
  DmrgConfig config_;
  bool force_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<GroundState>> memory_;
  std::map<std::string, bool> cached_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
};

// ---- runners -----------------------------------------------------------------

struct RunOptions {
  bool force = false;
  int jobs = 0;
};

struct GroundSummary {
  ModelSpec spec;
  std::filesystem::path checkpoint;
  bool computed = false;
  double energy = 0.0;
  bool converged = false;
};

std::vector<GroundSummary> run_ground(const RunConfig& config, const RunOptions& options);

/// Evaluates every (sweep point, r) pair with config.engine and writes
/// <out>/cmi_<engine>.csv. Failed points carry an error string.
std::vector<CmiRow> run_cmi(const RunConfig& config, const RunOptions& options);
std::vector<CmiRow> compute_cmi_rows(const RunConfig& config, const RunOptions& options,
                                     GroundStateCache* cache);

struct FitGroup {
  std::vector<std::size_t> rows;
  Curve curve;
  FitResult fit;
  FitResult power;
  bool fitted = false;
  std::string error;
};

struct FitReport {
  std::vector<CmiRow> rows;
  std::vector<FitGroup> groups;
};

/// Groups rows by everything except r, fits each group, writes <out>/fit.csv
/// (input columns plus fit columns) and <out>/fit_report.txt.
FitReport run_fit(const std::filesystem::path& csv, const std::filesystem::path& out_dir);
FitReport fit_rows(std::vector<CmiRow> rows);
void write_fit_csv(std::ostream& out, const FitReport& report);
void write_fit_report(std::ostream& out, const FitReport& report);

struct OracleComparison {
  std::vector<CmiRow> mps;
  std::vector<CmiRow> ed;
  double max_abs_difference = 0.0;
  bool passed = false;
};

inline constexpr double kOracleTolerance = 1e-7;

/// The ED test matrix: cluster L=7 (r=1) and TFIM L=7, 10 (r=1, 2) at three
/// channel strengths each. policy controls the MPS side.
OracleComparison run_oracle(const RunConfig& config, const RunOptions& options);

struct StabilizerCheck {
  std::vector<std::string> lines;
  bool passed = true;
};

StabilizerCheck run_stabilizer_check();

}  // namespace rmarkov
