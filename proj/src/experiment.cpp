#include "rmarkov/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rmarkov/oracle.hpp"
#include "rmarkov/parallel.hpp"
#include "rmarkov/stabilizer.hpp"

namespace rmarkov {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw std::invalid_argument(where + ": unknown key '" + k + "'");
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_opt(const json& obj, const std::string& key, const std::string& where, T& target) {
  if (obj.contains(key)) target = get_as<T>(obj, key, where);
}

std::string channel_name(ChannelKind k) { return to_string(k); }

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

int thread_count(int requested) { return requested > 0 ? requested : max_threads(); }

CmiRow base_row(const SweepPoint& point, Engine engine, std::size_t n_a, std::size_t r) {
  CmiRow row;
  row.model = to_string(point.model.model);
  row.engine = to_string(engine);
  row.n_a = n_a;
  row.r = r;
  row.length = n_a + 3 * r;
  row.h_x = point.model.h_x;
  row.j_zz = point.model.j_zz;
  row.p_z = channel_strength(point.channels, ChannelKind::OddZ);
  row.p_zz = channel_strength(point.channels, ChannelKind::PairZZ);
  row.p_x = channel_strength(point.channels, ChannelKind::SingleX);
  return row;
}

CmiRow ed_row(const SweepPoint& point, std::size_t n_a, std::size_t r) {
  const auto start = std::chrono::steady_clock::now();
  CmiRow row = base_row(point, Engine::Ed, n_a, r);
  row.i2 = std::numeric_limits<double>::quiet_NaN();
  try {
    if (row.length > ed::kMaxSites) throw std::invalid_argument("L exceeds the ED limit of 12 sites");
    ModelSpec spec = point.model;
    spec.length = row.length;
    const auto rho = ed::ed_decohered_state(spec, point.channels);
    row.trace_drift = std::abs(rho.trace().real() - 1.0);
    row.terms = ed::ed_cmi_terms_renyi2(rho, Tripartition{n_a, r, 0});
    row.i2 = row.terms.value();
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

CmiRow mps_row(const SweepPoint& point, const RunConfig& config, std::size_t r, GroundStateCache& cache,
               const TruncationPolicy& policy) {
  PipelineSpec pipeline{point.model, point.channels, config.dmrg, policy, config.n_a};
  const CmiPoint p = cmi_point(pipeline, r, [&](const ModelSpec& s) { return cache.get(s); });
  CmiRow row = base_row(point, Engine::Mps, config.n_a, r);
  row.terms = p.terms;
  row.i2 = p.i2;
  row.max_discarded_weight = p.max_discarded_weight;
  row.trace_drift = p.trace_drift;
  row.wall_seconds = p.wall_seconds;
  row.error = p.error;
  if (row.error.empty() && !p.dmrg_converged)
    row.error = "dmrg not converged (last delta " + format_double(p.dmrg_delta) + ")";
  return row;
}

std::string group_key(const CmiRow& r) {
  return r.model + '|' + r.engine + '|' + std::to_string(r.n_a) + '|' + format_double(r.h_x) + '|' +
         format_double(r.j_zz) + '|' + format_double(r.p_z) + '|' + format_double(r.p_zz) + '|' +
         format_double(r.p_x);
}

}  // namespace

bool row_usable(const CmiRow& r) {
  return std::isfinite(r.i2) && (r.error.empty() || r.error.rfind("dmrg not converged", 0) == 0);
}

std::string to_string(Engine e) { return e == Engine::Mps ? "mps" : "ed"; }

Engine parse_engine(const std::string& name) {
  if (name == "mps") return Engine::Mps;
  if (name == "ed") return Engine::Ed;
  throw std::invalid_argument("unknown engine: " + name);
}

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "odd_z") return ChannelKind::OddZ;
  if (name == "pair_zz") return ChannelKind::PairZZ;
  if (name == "single_x") return ChannelKind::SingleX;
  throw std::invalid_argument("unknown channel kind: " + name);
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::HX: return "h_x";
    case SweepAxis::PZ: return "p_z";
    case SweepAxis::PZZ: return "p_zz";
  }
  return "none";
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "none") return SweepAxis::None;
  if (name == "h_x") return SweepAxis::HX;
  if (name == "p_z") return SweepAxis::PZ;
  if (name == "p_zz") return SweepAxis::PZZ;
  throw std::invalid_argument("unknown sweep axis: " + name);
}

void RunConfig::validate() const {
  ModelSpec probe = model;
  probe.length = n_a + 3 * (r_values.empty() ? 1 : r_values.front());
  if (probe.length < 6) probe.length = 6;
  probe.validate();
  if (r_values.empty()) throw std::invalid_argument("config: r list must not be empty");
  for (std::size_t k = 0; k < r_values.size(); ++k) {
    if (r_values[k] == 0) throw std::invalid_argument("config: r values must be positive");
    if (k > 0 && r_values[k] <= r_values[k - 1]) throw std::invalid_argument("config: r values must increase");
  }
  if (n_a == 0) throw std::invalid_argument("config: N_A must be positive");
  for (const auto& ch : channels) ch.validate();
  choi_policy.validate();
  dmrg.validate();
  if (axis != SweepAxis::None && axis_values.empty())
    throw std::invalid_argument("config: sweep axis given without values");
  if (axis == SweepAxis::PZ || axis == SweepAxis::PZZ) {
    if (!channels.empty()) throw std::invalid_argument("config: p_z / p_zz sweeps generate their own channels");
    for (double p : axis_values)
      if (!(p >= 0.0 && p <= 0.5)) throw std::invalid_argument("config: strength out of [0, 1/2]");
  }
  if (axis == SweepAxis::PZZ && !(model.j_zz > 0.0))
    throw std::invalid_argument("config: p_zz sweep needs J_zz > 0");
  if (ed_jobs <= 0) throw std::invalid_argument("config: ed_jobs must be positive");
}

RunConfig parse_config(const json& doc) {
  check_keys(doc, {"schema_version", "model", "channels", "tripartition", "choi", "dmrg", "sweep", "output",
                   "parallel", "engine", "seed"},
             "config");
  if (!doc.contains("schema_version")) throw std::invalid_argument("config: missing schema_version");
  const int version = get_as<int>(doc, "schema_version", "config");
  if (version != kConfigSchemaVersion)
    throw std::invalid_argument("config: unsupported schema_version " + std::to_string(version));

  RunConfig cfg;
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    check_keys(m, {"name", "h_x", "J_zz", "periodic"}, "model");
    cfg.model.model = parse_model(get_as<std::string>(m, "name", "model"));
    read_opt(m, "h_x", "model", cfg.model.h_x);
    read_opt(m, "J_zz", "model", cfg.model.j_zz);
    read_opt(m, "periodic", "model", cfg.model.periodic);
  }
  if (doc.contains("channels")) {
    const json& list = doc.at("channels");
    if (!list.is_array()) throw std::invalid_argument("channels: expected an array");
    for (const auto& c : list) {
      check_keys(c, {"kind", "p"}, "channels[]");
      cfg.channels.push_back({parse_channel_kind(get_as<std::string>(c, "kind", "channels[]")),
                              get_as<double>(c, "p", "channels[]")});
    }
  }
  if (doc.contains("tripartition")) {
    const json& t = doc.at("tripartition");
    check_keys(t, {"N_A", "r"}, "tripartition");
    read_opt(t, "N_A", "tripartition", cfg.n_a);
    read_opt(t, "r", "tripartition", cfg.r_values);
  }
  if (doc.contains("choi")) {
    const json& c = doc.at("choi");
    check_keys(c, {"chi_max", "cutoff"}, "choi");
    read_opt(c, "chi_max", "choi", cfg.choi_policy.chi_max);
    read_opt(c, "cutoff", "choi", cfg.choi_policy.cutoff);
  }
  if (doc.contains("dmrg")) {
    const json& d = doc.at("dmrg");
    check_keys(d, {"chi_max", "cutoff", "max_sweeps", "energy_tol", "initial_chi", "seed", "lanczos_tol"}, "dmrg");
    read_opt(d, "chi_max", "dmrg", cfg.dmrg.policy.chi_max);
    read_opt(d, "cutoff", "dmrg", cfg.dmrg.policy.cutoff);
    read_opt(d, "max_sweeps", "dmrg", cfg.dmrg.max_sweeps);
    read_opt(d, "energy_tol", "dmrg", cfg.dmrg.energy_tol);
    read_opt(d, "initial_chi", "dmrg", cfg.dmrg.initial_chi);
    read_opt(d, "seed", "dmrg", cfg.dmrg.seed);
    read_opt(d, "lanczos_tol", "dmrg", cfg.dmrg.lanczos.tolerance);
  }
  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    check_keys(s, {"axis", "values"}, "sweep");
    cfg.axis = parse_axis(get_as<std::string>(s, "axis", "sweep"));
    read_opt(s, "values", "sweep", cfg.axis_values);
  }
  if (doc.contains("output")) {
    const json& o = doc.at("output");
    check_keys(o, {"dir"}, "output");
    cfg.out_dir = get_as<std::string>(o, "dir", "output");
  }
  if (doc.contains("parallel")) {
    const json& p = doc.at("parallel");
    check_keys(p, {"jobs", "ed_jobs"}, "parallel");
    read_opt(p, "jobs", "parallel", cfg.jobs);
    read_opt(p, "ed_jobs", "parallel", cfg.ed_jobs);
  }
  if (doc.contains("engine")) cfg.engine = parse_engine(get_as<std::string>(doc, "engine", "config"));
  read_opt(doc, "seed", "config", cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json channels = json::array();
  for (const auto& ch : c.channels) channels.push_back({{"kind", channel_name(ch.kind)}, {"p", ch.strength}});
  return {
      {"schema_version", kConfigSchemaVersion},
      {"model", {{"name", to_string(c.model.model)}, {"h_x", c.model.h_x}, {"J_zz", c.model.j_zz},
                 {"periodic", c.model.periodic}}},
      {"channels", channels},
      {"tripartition", {{"N_A", c.n_a}, {"r", c.r_values}}},
      {"choi", {{"chi_max", c.choi_policy.chi_max}, {"cutoff", c.choi_policy.cutoff}}},
      {"dmrg", {{"chi_max", c.dmrg.policy.chi_max}, {"cutoff", c.dmrg.policy.cutoff},
                {"max_sweeps", c.dmrg.max_sweeps}, {"energy_tol", c.dmrg.energy_tol},
                {"initial_chi", c.dmrg.initial_chi}, {"seed", c.dmrg.seed},
                {"lanczos_tol", c.dmrg.lanczos.tolerance}}},
      {"sweep", {{"axis", to_string(c.axis)}, {"values", c.axis_values}}},
      {"output", {{"dir", c.out_dir.string()}}},
      {"parallel", {{"jobs", c.jobs}, {"ed_jobs", c.ed_jobs}}},
      {"engine", to_string(c.engine)},
      {"seed", c.seed},
  };
}

double channel_strength(std::span<const ChannelSpec> channels, ChannelKind kind) {
  for (const auto& ch : channels)
    if (ch.kind == kind) return ch.strength;
  return 0.0;
}

std::vector<SweepPoint> sweep_points(const RunConfig& config) {
  std::vector<SweepPoint> points;
  if (config.axis == SweepAxis::None) {
    points.push_back({config.model, config.channels});
    return points;
  }
  for (double v : config.axis_values) {
    SweepPoint p{config.model, config.channels};
    switch (config.axis) {
      case SweepAxis::HX: p.model.h_x = v; break;
      case SweepAxis::PZ: p.channels = {{ChannelKind::OddZ, v}}; break;
      case SweepAxis::PZZ:
        p.channels = {{ChannelKind::PairZZ, v},
                      {ChannelKind::SingleX, p_x_from_p_zz(v, config.model.h_x, config.model.j_zz)}};
        break;
      case SweepAxis::None: break;
    }
    points.push_back(std::move(p));
  }
  return points;
}

// ---- CSV ----------------------------------------------------------------------

const std::vector<std::string>& cmi_columns() {
  static const std::vector<std::string> cols{
      "model",  "engine", "L",      "N_A",    "r",  "h_x",   "J_zz", "p_z",
      "p_zz",   "p_x",    "S2_AB",  "S2_BC",  "S2_B", "S2_ABC", "I2", "max_discarded_weight",
      "trace_drift", "wall_seconds", "error"};
  return cols;
}

const std::vector<std::string>& fit_columns() {
  static const std::vector<std::string> cols{"c0",     "c1",        "xi2",  "rms_residual", "xi2_drop_last",
                                             "fit_flags", "alpha2", "power_rms"};
  return cols;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("malformed number: " + text);
  return v;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

std::string join_row(const CmiRow& r) {
  const std::vector<std::string> f{
      csv_field(r.model), csv_field(r.engine), std::to_string(r.length), std::to_string(r.n_a), std::to_string(r.r),
      format_double(r.h_x), format_double(r.j_zz), format_double(r.p_z), format_double(r.p_zz),
      format_double(r.p_x), format_double(r.terms.s_ab), format_double(r.terms.s_bc), format_double(r.terms.s_b),
      format_double(r.terms.s_abc), format_double(r.i2), format_double(r.max_discarded_weight),
      format_double(r.trace_drift), format_double(r.wall_seconds), csv_field(r.error)};
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i > 0) out += ',';
    out += f[i];
  }
  return out;
}

std::string header(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i > 0) out += ',';
    out += cols[i];
  }
  return out;
}

}  // namespace

void write_cmi_csv(std::ostream& out, const std::vector<CmiRow>& rows) {
  out << header(cmi_columns()) << '\n';
  for (const auto& r : rows) out << join_row(r) << '\n';
}

std::vector<CmiRow> read_cmi_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("CSV is empty");
  const auto head = split_csv_line(line);
  const auto& cols = cmi_columns();
  if (head.size() < cols.size() || !std::equal(cols.begin(), cols.end(), head.begin()))
    throw std::invalid_argument("CSV header does not match the CMI schema");
  std::vector<CmiRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != head.size()) throw std::invalid_argument("CSV line " + std::to_string(lineno) + ": wrong field count");
    try {
      CmiRow r;
      r.model = f[0];
      r.engine = f[1];
      r.length = std::stoul(f[2]);
      r.n_a = std::stoul(f[3]);
      r.r = std::stoul(f[4]);
      r.h_x = parse_double(f[5]);
      r.j_zz = parse_double(f[6]);
      r.p_z = parse_double(f[7]);
      r.p_zz = parse_double(f[8]);
      r.p_x = parse_double(f[9]);
      r.terms = {parse_double(f[10]), parse_double(f[11]), parse_double(f[12]), parse_double(f[13])};
      r.i2 = parse_double(f[14]);
      r.max_discarded_weight = parse_double(f[15]);
      r.trace_drift = parse_double(f[16]);
      r.wall_seconds = parse_double(f[17]);
      r.error = f[18];
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::invalid_argument("CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<CmiRow> read_cmi_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_cmi_csv(in);
}

// ---- checkpoints ----------------------------------------------------------------

std::map<std::string, std::string> parse_metadata(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("metadata line without '=': " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

GroundStateCache::GroundStateCache(fs::path dir, DmrgConfig config, bool force)
    : dir_(std::move(dir)), config_(std::move(config)), force_(force) {
  config_.validate();
}

std::string GroundStateCache::key(const ModelSpec& spec) const {
  return to_string(spec.model) + "_L" + std::to_string(spec.length) + "_hx" + format_double(spec.h_x) + "_jzz" +
         format_double(spec.j_zz) + (spec.periodic ? "_pbc" : "_obc") + "_chi" +
         std::to_string(config_.policy.chi_max) + "_seed" + std::to_string(config_.seed);
}

fs::path GroundStateCache::checkpoint_path(const ModelSpec& spec) const { return dir_ / (key(spec) + ".mps"); }

std::optional<GroundState> GroundStateCache::load(const ModelSpec& spec) const {
  const fs::path path = checkpoint_path(spec);
  const fs::path meta_path = path.string() + ".meta";
  if (!fs::exists(path) || !fs::exists(meta_path)) return std::nullopt;
  std::ifstream meta_in(meta_path);
  const auto meta = parse_metadata(meta_in);
  auto field = [&](const std::string& k) -> const std::string& {
    const auto it = meta.find(k);
    if (it == meta.end()) throw std::runtime_error("metadata " + meta_path.string() + " lacks " + k);
    return it->second;
  };
  if (field("model") != to_string(spec.model) || std::stoul(field("L")) != spec.length ||
      parse_double(field("h_x")) != spec.h_x || parse_double(field("J_zz")) != spec.j_zz ||
      (field("periodic") == "1") != spec.periodic || std::stoul(field("chi_max")) != config_.policy.chi_max)
    return std::nullopt;
  GroundState gs;
  gs.state = load_checkpoint(path.string());
  gs.energy = parse_double(field("energy"));
  gs.sweeps = std::stoul(field("sweeps"));
  gs.converged = field("converged") == "1";
  gs.last_delta = parse_double(field("last_delta"));
  gs.max_discarded_weight = parse_double(field("max_discarded_weight"));
  return gs;
}

GroundState GroundStateCache::get(const ModelSpec& spec) {
  const std::string k = key(spec);
  std::shared_ptr<std::mutex> lock;
  {
    std::lock_guard<std::mutex> guard(mutex_);
    if (auto it = memory_.find(k); it != memory_.end()) {
      cached_[k] = true;
      return *it->second;
    }
    auto& slot = key_locks_[k];
    if (!slot) slot = std::make_shared<std::mutex>();
    lock = slot;
  }
  std::lock_guard<std::mutex> key_guard(*lock);
  {
    std::lock_guard<std::mutex> guard(mutex_);
    if (auto it = memory_.find(k); it != memory_.end()) {
      cached_[k] = true;
      return *it->second;
    }
  }
  std::optional<GroundState> gs = force_ ? std::nullopt : load(spec);
  bool from_disk = gs.has_value();
  if (gs && !gs->converged && gs->sweeps < config_.max_sweeps) {
    // Resume an unconverged checkpoint with the remaining sweep budget at full bond dimension.
    DmrgConfig resume = config_;
    resume.max_sweeps = config_.max_sweeps - gs->sweeps;
    resume.initial_chi = config_.policy.chi_max;
    const std::size_t done = gs->sweeps;
    GroundState more = ground_state(build_hamiltonian_mpo(spec), resume, std::move(gs->state));
    more.sweeps += done;
    gs = std::move(more);
    from_disk = false;
  }
  if (!from_disk) {
    if (!gs) gs = ground_state(spec, config_);
    ensure_dir(dir_);
    const fs::path path = checkpoint_path(spec);
    const fs::path tmp = path.string() + ".tmp";
    save_checkpoint(tmp.string(), gs->state);
    fs::rename(tmp, path);
    write_text_atomic(path.string() + ".meta", ground_state_metadata(spec, config_, *gs));
  }
  std::lock_guard<std::mutex> guard(mutex_);
  memory_[k] = std::make_shared<GroundState>(*gs);
  cached_[k] = from_disk;
  return *gs;
}

bool GroundStateCache::was_cached(const ModelSpec& spec) const {
  std::lock_guard<std::mutex> guard(mutex_);
  const auto it = cached_.find(key(spec));
  return it != cached_.end() && it->second;
}

// ---- runners ----------------------------------------------------------------------

std::vector<GroundSummary> run_ground(const RunConfig& config, const RunOptions& options) {
  config.validate();
  GroundStateCache cache(config.out_dir / "checkpoints", config.dmrg, options.force);
  std::vector<ModelSpec> specs;
  std::set<std::string> seen;
  for (const auto& point : sweep_points(config))
    for (std::size_t r : config.r_values) {
      ModelSpec s = point.model;
      s.length = config.n_a + 3 * r;
      if (seen.insert(cache.checkpoint_path(s).string()).second) specs.push_back(s);
    }
  std::vector<GroundSummary> out(specs.size());
  std::vector<std::string> errors(specs.size());
  const int threads = thread_count(options.jobs);
  const auto count = static_cast<std::ptrdiff_t>(specs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      const GroundState gs = cache.get(specs[i]);
      out[i] = {specs[i], cache.checkpoint_path(specs[i]), !cache.was_cached(specs[i]), gs.energy, gs.converged};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  return out;
}

std::vector<CmiRow> compute_cmi_rows(const RunConfig& config, const RunOptions& options, GroundStateCache* cache) {
  config.validate();
  const auto points = sweep_points(config);
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (std::size_t r : config.r_values) jobs.emplace_back(p, r);
  std::vector<CmiRow> rows(jobs.size());

  std::unique_ptr<GroundStateCache> own;
  if (config.engine == Engine::Mps && cache == nullptr) {
    own = std::make_unique<GroundStateCache>(config.out_dir / "checkpoints", config.dmrg, options.force);
    cache = own.get();
  }
  int threads = thread_count(options.jobs);
  if (config.engine == Engine::Ed) threads = std::min(threads, config.ed_jobs);
  const auto count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto& [p, r] = jobs[i];
    rows[i] = config.engine == Engine::Ed ? ed_row(points[p], config.n_a, r)
                                          : mps_row(points[p], config, r, *cache, config.choi_policy);
  }
  return rows;
}

std::vector<CmiRow> run_cmi(const RunConfig& config, const RunOptions& options) {
  std::vector<CmiRow> rows = compute_cmi_rows(config, options, nullptr);
  ensure_dir(config.out_dir);
  std::ostringstream os;
  write_cmi_csv(os, rows);
  write_text_atomic(config.out_dir / ("cmi_" + to_string(config.engine) + ".csv"), os.str());
  return rows;
}

FitReport fit_rows(std::vector<CmiRow> rows) {
  FitReport report;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string k = group_key(rows[i]);
    auto [it, inserted] = index.emplace(k, report.groups.size());
    if (inserted) report.groups.emplace_back();
    report.groups[it->second].rows.push_back(i);
  }
  for (auto& g : report.groups) {
    std::vector<std::size_t> order = g.rows;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a].r < rows[b].r; });
    for (auto i : order)
      if (row_usable(rows[i])) g.curve.push_back({static_cast<double>(rows[i].r), rows[i].i2});
    try {
      g.fit = fit_exponential(g.curve);
      g.power = fit_power_law(g.curve);
      g.fitted = true;
    } catch (const std::exception& e) {
      g.error = e.what();
    }
  }
  report.rows = std::move(rows);
  return report;
}

void write_fit_csv(std::ostream& out, const FitReport& report) {
  std::vector<std::string> cols = cmi_columns();
  cols.insert(cols.end(), fit_columns().begin(), fit_columns().end());
  out << header(cols) << '\n';
  std::vector<const FitGroup*> owner(report.rows.size(), nullptr);
  for (const auto& g : report.groups)
    for (auto i : g.rows) owner[i] = &g;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const FitGroup& g = *owner[i];
    out << join_row(report.rows[i]);
    if (g.fitted) {
      out << ',' << format_double(g.fit.c0) << ',' << format_double(g.fit.c1) << ',' << format_double(g.fit.xi2)
          << ',' << format_double(g.fit.rms_residual) << ',' << format_double(g.fit.xi2_drop_last) << ','
          << g.fit.flags.to_string() << ',' << format_double(g.power.alpha2.value_or(nan)) << ','
          << format_double(g.power.rms_residual) << '\n';
    } else {
      out << ",nan,nan,nan,nan,nan," << csv_field("unfit: " + g.error) << ",nan,nan\n";
    }
  }
}

void write_fit_report(std::ostream& out, const FitReport& report) {
  out << "fit: I2(r) = exp(-c0 r) + c1, xi2 = 1/c0\n";
  for (const auto& g : report.groups) {
    const CmiRow& r = report.rows[g.rows.front()];
    out << "model=" << r.model << " engine=" << r.engine << " N_A=" << r.n_a << " h_x=" << format_double(r.h_x)
        << " J_zz=" << format_double(r.j_zz) << " p_z=" << format_double(r.p_z) << " p_zz=" << format_double(r.p_zz)
        << " p_x=" << format_double(r.p_x) << " points=" << g.curve.size() << '\n';
    if (!g.fitted) {
      out << "  unfit: " << g.error << '\n';
      continue;
    }
    out << "  exp:   c0=" << format_double(g.fit.c0) << " c1=" << format_double(g.fit.c1)
        << " xi2=" << format_double(g.fit.xi2) << " rms=" << format_double(g.fit.rms_residual)
        << " xi2_drop_last=" << format_double(g.fit.xi2_drop_last) << " flags=" << g.fit.flags.to_string() << '\n';
    out << "  power: alpha2=" << format_double(g.power.alpha2.value_or(std::numeric_limits<double>::quiet_NaN()))
        << " offset=" << format_double(g.power.c1) << " rms=" << format_double(g.power.rms_residual)
        << " flags=" << g.power.flags.to_string() << '\n';
  }
}

FitReport run_fit(const fs::path& csv, const fs::path& out_dir) {
  FitReport report = fit_rows(read_cmi_csv(csv));
  ensure_dir(out_dir);
  std::ostringstream table, text;
  write_fit_csv(table, report);
  write_fit_report(text, report);
  write_text_atomic(out_dir / "fit.csv", table.str());
  write_text_atomic(out_dir / "fit_report.txt", text.str());
  return report;
}

OracleComparison run_oracle(const RunConfig& config, const RunOptions& options) {
  struct Case {
    ModelSpec model;
    std::size_t r;
    std::vector<ChannelSpec> channels;
  };
  std::vector<Case> cases;
  for (double p : {0.1, 0.2, 0.3})
    cases.push_back({{Model::Cluster, 7, 0.5, 0.0, true}, 1, {{ChannelKind::OddZ, p}}});
  for (std::size_t r : {1u, 2u})
    for (double p : {0.11, 0.19, 0.28})
      cases.push_back({{Model::Tfim, 4 + 3 * r, 1.0, 0.8, true},
                       r,
                       {{ChannelKind::PairZZ, p}, {ChannelKind::SingleX, p_x_from_p_zz(p, 1.0, 0.8)}}});

  OracleComparison out;
  out.mps.resize(cases.size());
  out.ed.resize(cases.size());
  // The comparison needs an untruncated MPS side: 4^5 covers every bond at L <= 10.
  const TruncationPolicy exact{std::max<std::size_t>(config.choi_policy.chi_max, 1024), 0.0};
  GroundStateCache cache(config.out_dir / "checkpoints", config.dmrg, options.force);
  RunConfig local = config;
  local.n_a = 4;
  const int threads = thread_count(options.jobs);
  const auto count = static_cast<std::ptrdiff_t>(cases.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const SweepPoint point{cases[i].model, cases[i].channels};
    out.mps[i] = mps_row(point, local, cases[i].r, cache, exact);
    out.ed[i] = ed_row(point, 4, cases[i].r);
  }
  out.passed = true;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& a = out.mps[i];
    const auto& b = out.ed[i];
    if (!a.error.empty() || !b.error.empty()) {
      out.passed = false;
      continue;
    }
    for (double d : {a.terms.s_ab - b.terms.s_ab, a.terms.s_bc - b.terms.s_bc, a.terms.s_b - b.terms.s_b,
                     a.terms.s_abc - b.terms.s_abc, a.i2 - b.i2})
      out.max_abs_difference = std::max(out.max_abs_difference, std::abs(d));
  }
  if (!(out.max_abs_difference <= kOracleTolerance)) out.passed = false;
  ensure_dir(config.out_dir);
  std::vector<CmiRow> all = out.mps;
  all.insert(all.end(), out.ed.begin(), out.ed.end());
  std::ostringstream os;
  write_cmi_csv(os, all);
  write_text_atomic(config.out_dir / "oracle.csv", os.str());
  return out;
}

StabilizerCheck run_stabilizer_check() {
  StabilizerCheck out;
  auto record = [&](bool ok, const std::string& what) {
    out.lines.push_back((ok ? "PASS " : "FAIL ") + what);
    out.passed = out.passed && ok;
  };
  for (std::size_t r = 1; r <= 10; ++r) {
    const Tripartition part{4, r, 0};
    const double v = stabilizer_cmi(swssb_group(part.length()), part);
    record(v == std::numbers::ln2, "swssb L=" + std::to_string(part.length()) + " r=" + std::to_string(r) +
                                       " CMI=" + format_double(v) + " (ln 2 exactly)");
  }
  for (std::size_t r = 1; r <= 3; ++r) {
    const Tripartition part{4, r, 0};
    const double v = stabilizer_cmi(product_group(part.length()), part);
    record(v == 0.0, "product L=" + std::to_string(part.length()) + " CMI=" + format_double(v));
  }
  {
    const Tripartition part{4, 1, 0};
    const auto group = cluster_group(part.length());
    const double v = stabilizer_cmi(group, part);
    record(v >= 0.0, "cluster L=7 r=1 CMI=" + format_double(v));
  }
  const auto ghz = StabilizerGroup::parse({"ZZII", "IZZI", "IIZZ", "XXXX"});
  const std::vector<std::size_t> pair{0, 1};
  const double s = stabilizer_renyi_entropy(ghz, pair);
  record(s == std::numbers::ln2, "GHZ4 S2({0,1})=" + format_double(s));
  bool all_match = true;
  for (unsigned mask = 0; mask < 16; ++mask) {
    std::vector<std::size_t> x;
    for (std::size_t q = 0; q < 4; ++q)
      if (mask & (1u << q)) x.push_back(q);
    all_match = all_match && restricted_subgroup_dimension(ghz, x) == enumerated_subgroup_dimension(ghz, x);
  }
  record(all_match, "GHZ4 rank method equals enumeration on all 16 subsystems");
  return out;
}

}  // namespace rmarkov
