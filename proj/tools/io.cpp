#include "io.hpp"

#include "ergocov/error.hpp"

#include <openssl/evp.h>

#include <unistd.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace ergocov::cli {
namespace fs = std::filesystem;

namespace {

const json& empty_object() {
  static const json obj = json::object();
  return obj;
}

// Typed, key-checked view of one config object.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidArgument("config key '" + display() + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& item : j_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || item.key() == k;
      if (!known) throw InvalidArgument("unknown config key '" + key(item.key()) + "'");
    }
  }

  bool has(const char* k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  Section child(const char* k) const { return Section(has(k) ? j_.at(k) : empty_object(), key(k)); }

  double number(const char* k, double fallback) const { return has(k) ? as_number(k) : fallback; }
  std::optional<double> optional_number(const char* k) const {
    return has(k) ? std::optional<double>(as_number(k)) : std::nullopt;
  }
  long long integer(const char* k, long long fallback) const {
    if (!has(k)) return fallback;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) throw InvalidArgument("config key '" + key(k) + "' must be an integer");
    return v.get<long long>();
  }
  bool boolean(const char* k, bool fallback) const {
    if (!has(k)) return fallback;
    const json& v = j_.at(k);
    if (!v.is_boolean()) throw InvalidArgument("config key '" + key(k) + "' must be true or false");
    return v.get<bool>();
  }
  std::string string(const char* k, const std::string& fallback) const {
    if (!has(k)) return fallback;
    const json& v = j_.at(k);
    if (!v.is_string()) throw InvalidArgument("config key '" + key(k) + "' must be a string");
    return v.get<std::string>();
  }
  std::optional<Vec> vector(const char* k) const {
    if (!has(k)) return std::nullopt;
    const json& v = j_.at(k);
    if (!v.is_array()) throw InvalidArgument("config key '" + key(k) + "' must be an array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw InvalidArgument("config key '" + key(k) + "' must be an array of numbers");
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }
  std::vector<std::string> strings(const char* k, std::vector<std::string> fallback) const {
    if (!has(k)) return fallback;
    const json& v = j_.at(k);
    std::vector<std::string> out;
    if (!v.is_array()) throw InvalidArgument("config key '" + key(k) + "' must be an array of strings");
    for (const auto& e : v) {
      if (!e.is_string()) throw InvalidArgument("config key '" + key(k) + "' must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  template <typename F>
  auto parse_enum(const char* k, F&& from_string, decltype(from_string(std::string())) fallback) const {
    if (!has(k)) return fallback;
    try {
      return from_string(string(k, ""));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config key '" + key(k) + "': " + e.what());
    }
  }

 private:
  double as_number(const char* k) const {
    const json& v = j_.at(k);
    if (!v.is_number()) throw InvalidArgument("config key '" + key(k) + "' must be a number");
    return v.get<double>();
  }
  std::string display() const { return path_.empty() ? "<root>" : path_; }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json& j_;
  std::string path_;
};

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec json_to_vec(const json& a, const std::string& what) {
  if (!a.is_array()) throw ParseError(what, 0, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ParseError(what, 0, "expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& source, std::size_t line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ParseError(source, line, "malformed number '" + t + "'");
  return v;
}

}  // namespace

double RunConfig::radius() const {
  return coverage_radius ? *coverage_radius : std::sqrt(solver.annealing.h_phys_star);
}

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  const Section root(doc, "");
  root.allow({"schema_version", "domain", "model", "solver", "seed", "coverage_radius", "output", "bench"});
  if (!root.has("schema_version")) throw InvalidArgument("config is missing schema_version");
  const long long version = root.integer("schema_version", 0);
  if (version != kSchemaVersion)
    throw InvalidArgument("unsupported config schema_version " + std::to_string(version) + " (expected " +
                          std::to_string(kSchemaVersion) + ")");

  RunConfig cfg;
  const Section domain = root.child("domain");
  domain.allow({"file", "format", "dim"});
  if (!domain.has("file")) throw InvalidArgument("config key 'domain.file' is required");
  const fs::path file = domain.string("file", "");
  cfg.domain_file = (file.is_absolute() ? file : base_dir / file).lexically_normal();
  if (domain.has("format")) {
    const std::string f = domain.string("format", "");
    if (f == "csv") cfg.domain_format = SampleFormat::csv;
    else if (f == "obj") cfg.domain_format = SampleFormat::obj;
    else if (f == "ply") cfg.domain_format = SampleFormat::ply;
    else throw InvalidArgument("config key 'domain.format' must be csv, obj or ply");
  }
  if (domain.has("dim")) cfg.domain_dim = static_cast<int>(domain.integer("dim", 0));

  const Section model = root.child("model");
  model.allow({"kind", "v_max", "a_max", "L_max", "T_max", "dt_min", "dt_max", "velocity_bound", "initial_state",
               "final_state"});
  DynamicsModel& m = cfg.model;
  m.kind = model.parse_enum("kind", dynamics_kind_from_string, m.kind);
  m.v_max = model.number("v_max", m.v_max);
  m.a_max = model.optional_number("a_max");
  m.L_max = model.optional_number("L_max");
  m.T_max = model.optional_number("T_max");
  m.dt_min = model.number("dt_min", m.dt_min);
  m.dt_max = model.number("dt_max", m.dt_max);
  m.velocity_bound = model.parse_enum("velocity_bound", velocity_bound_from_string, m.velocity_bound);
  m.initial_state = model.vector("initial_state");
  m.final_state = model.vector("final_state");

  const Section solver = root.child("solver");
  solver.allow({"horizon", "h0", "h_phys_star", "K", "objective", "normalize_domain", "anneal", "fixed_bandwidth",
                "seed_strategy", "al", "inner"});
  SolverConfig& s = cfg.solver;
  s.horizon = static_cast<Eigen::Index>(solver.integer("horizon", s.horizon));
  s.annealing.h0 = solver.number("h0", s.annealing.h0);
  s.annealing.h_phys_star = solver.number("h_phys_star", s.annealing.h_phys_star);
  s.annealing.K = static_cast<int>(solver.integer("K", s.annealing.K));
  s.objective = solver.parse_enum("objective", objective_kind_from_string, s.objective);
  s.normalize_domain = solver.boolean("normalize_domain", s.normalize_domain);
  s.anneal = solver.boolean("anneal", s.anneal);
  s.fixed_bandwidth = solver.optional_number("fixed_bandwidth");
  s.seed_strategy = solver.parse_enum("seed_strategy", seed_strategy_from_string, s.seed_strategy);

  const Section al = solver.child("al");
  al.allow({"mu0", "gamma", "mu_max", "rounds_per_stage", "final_rounds", "eps_eq", "eps_ineq",
            "required_reduction"});
  s.al.mu0 = al.number("mu0", s.al.mu0);
  s.al.gamma = al.number("gamma", s.al.gamma);
  s.al.mu_max = al.number("mu_max", s.al.mu_max);
  s.al.rounds_per_stage = static_cast<int>(al.integer("rounds_per_stage", s.al.rounds_per_stage));
  s.al.final_rounds = static_cast<int>(al.integer("final_rounds", s.al.final_rounds));
  s.al.eps_eq = al.number("eps_eq", s.al.eps_eq);
  s.al.eps_ineq = al.number("eps_ineq", s.al.eps_ineq);
  s.al.required_reduction = al.number("required_reduction", s.al.required_reduction);

  const Section inner = solver.child("inner");
  inner.allow({"max_iterations", "grad_tol", "value_tol", "armijo", "backtrack", "max_backtracks", "quasi_newton",
               "memory", "eliminate_rates"});
  s.inner.max_iterations = static_cast<int>(inner.integer("max_iterations", s.inner.max_iterations));
  s.inner.grad_tol = inner.number("grad_tol", s.inner.grad_tol);
  s.inner.value_tol = inner.number("value_tol", s.inner.value_tol);
  s.inner.armijo = inner.number("armijo", s.inner.armijo);
  s.inner.backtrack = inner.number("backtrack", s.inner.backtrack);
  s.inner.max_backtracks = static_cast<int>(inner.integer("max_backtracks", s.inner.max_backtracks));
  s.inner.quasi_newton = inner.boolean("quasi_newton", s.inner.quasi_newton);
  s.inner.memory = static_cast<int>(inner.integer("memory", s.inner.memory));
  s.inner.eliminate_rates = inner.boolean("eliminate_rates", s.inner.eliminate_rates);

  const long long seed = root.integer("seed", 0);
  if (seed < 0) throw InvalidArgument("config key 'seed' must be nonnegative");
  s.rng_seed = static_cast<std::uint64_t>(seed);
  cfg.coverage_radius = root.optional_number("coverage_radius");

  const Section output = root.child("output");
  output.allow({"dir", "prefix"});
  const fs::path out_dir = output.string("dir", cfg.output_dir.string());
  cfg.output_dir = (out_dir.is_absolute() ? out_dir : base_dir / out_dir).lexically_normal();
  cfg.output_prefix = output.string("prefix", cfg.output_prefix);

  const Section bench = root.child("bench");
  bench.allow({"scales", "repeats", "methods", "emmd_bandwidth"});
  if (const auto scales = bench.vector("scales")) cfg.bench.scales.assign(scales->begin(), scales->end());
  cfg.bench.repeats = static_cast<int>(bench.integer("repeats", cfg.bench.repeats));
  cfg.bench.methods = bench.strings("methods", cfg.bench.methods);
  cfg.bench.emmd_bandwidth = bench.optional_number("emmd_bandwidth");

  // The model is validated once the domain fixes pos_dim.
  s.validate();
  if (cfg.coverage_radius && !(*cfg.coverage_radius > 0.0))
    throw InvalidArgument("config key 'coverage_radius' must be positive");
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return parse_config(doc, path.parent_path());
}

json config_to_json(const RunConfig& c) {
  const DynamicsModel& m = c.model;
  const SolverConfig& s = c.solver;
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json domain;
  domain["file"] = c.domain_file.string();
  domain["format"] = c.domain_format ? json(to_string(*c.domain_format)) : json(nullptr);
  domain["dim"] = c.domain_dim ? json(*c.domain_dim) : json(nullptr);
  doc["domain"] = domain;

  json model;
  model["kind"] = to_string(m.kind);
  model["v_max"] = m.v_max;
  model["a_max"] = optional_to_json(m.a_max);
  model["L_max"] = optional_to_json(m.L_max);
  model["T_max"] = optional_to_json(m.T_max);
  model["dt_min"] = m.dt_min;
  model["dt_max"] = m.dt_max;
  model["velocity_bound"] = to_string(m.velocity_bound);
  model["initial_state"] = m.initial_state ? vec_to_json(*m.initial_state) : json(nullptr);
  model["final_state"] = m.final_state ? vec_to_json(*m.final_state) : json(nullptr);
  doc["model"] = model;

  json solver;
  solver["horizon"] = s.horizon;
  solver["h0"] = s.annealing.h0;
  solver["h_phys_star"] = s.annealing.h_phys_star;
  solver["K"] = s.annealing.K;
  solver["objective"] = to_string(s.objective);
  solver["normalize_domain"] = s.normalize_domain;
  solver["anneal"] = s.anneal;
  solver["fixed_bandwidth"] = optional_to_json(s.fixed_bandwidth);
  solver["seed_strategy"] = to_string(s.seed_strategy);
  solver["al"] = {{"mu0", s.al.mu0},
                  {"gamma", s.al.gamma},
                  {"mu_max", s.al.mu_max},
                  {"rounds_per_stage", s.al.rounds_per_stage},
                  {"final_rounds", s.al.final_rounds},
                  {"eps_eq", s.al.eps_eq},
                  {"eps_ineq", s.al.eps_ineq},
                  {"required_reduction", s.al.required_reduction}};
  solver["inner"] = {{"max_iterations", s.inner.max_iterations},
                     {"grad_tol", s.inner.grad_tol},
                     {"value_tol", s.inner.value_tol},
                     {"armijo", s.inner.armijo},
                     {"backtrack", s.inner.backtrack},
                     {"max_backtracks", s.inner.max_backtracks},
                     {"quasi_newton", s.inner.quasi_newton},
                     {"memory", s.inner.memory},
                     {"eliminate_rates", s.inner.eliminate_rates}};
  doc["solver"] = solver;
  doc["seed"] = s.rng_seed;
  doc["coverage_radius"] = optional_to_json(c.coverage_radius);
  doc["output"] = {{"dir", c.output_dir.string()}, {"prefix", c.output_prefix}};
  json scales = json::array();
  for (double v : c.bench.scales) scales.push_back(v);
  doc["bench"] = {{"scales", scales},
                  {"repeats", c.bench.repeats},
                  {"methods", c.bench.methods},
                  {"emmd_bandwidth", optional_to_json(c.bench.emmd_bandwidth)}};
  return doc;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string k = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (k.empty()) throw InvalidArgument("override key '" + path + "' is malformed");
    if (!node->is_object()) throw InvalidArgument("override key '" + path + "' does not name an object member");
    if (dot == std::string::npos) {
      (*node)[k] = value;
      return;
    }
    if (!node->contains(k)) (*node)[k] = json::object();
    node = &(*node)[k];
    start = dot + 1;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw InvalidArgument("failed writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string trajectory_csv(const DynamicsModel& model, const Trajectory& traj) {
  std::ostringstream os;
  const Eigen::Index T = traj.horizon();
  const int n = model.state_dim();
  os << "# ergocov trajectory dynamics=" << to_string(model.kind) << " pos_dim=" << model.pos_dim
     << " units=m,s\n";
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x_" << i;
  os << ",dt\n";
  const Vec dt = traj.dt();
  double t = 0.0;
  for (Eigen::Index k = 0; k < T; ++k) {
    os << format_double(t);
    for (int i = 0; i < n; ++i) os << ',' << format_double(traj.states(i, k));
    os << ',';
    if (k + 1 < T) {
      os << format_double(dt(k));
      t += dt(k);
    }
    os << '\n';
  }
  return os.str();
}

json trajectory_json(const DynamicsModel& model, const Trajectory& traj, double extent, const Vec& offset) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "trajectory";
  doc["units"] = {{"length", "m"}, {"time", "s"}, {"velocity", "m/s"}, {"acceleration", "m/s^2"}};
  doc["dynamics"] = to_string(model.kind);
  doc["pos_dim"] = model.pos_dim;
  doc["state_dim"] = model.state_dim();
  doc["horizon"] = traj.horizon();
  doc["normalization"] = {{"extent", extent}, {"offset", vec_to_json(offset)}};
  const Vec dt = traj.dt();
  json time = json::array();
  double t = 0.0;
  for (Eigen::Index k = 0; k < traj.horizon(); ++k) {
    time.push_back(t);
    if (k + 1 < traj.horizon()) t += dt(k);
  }
  doc["time"] = time;
  doc["dt"] = vec_to_json(dt);
  json states = json::array();
  for (Eigen::Index k = 0; k < traj.horizon(); ++k) states.push_back(vec_to_json(traj.states.col(k)));
  doc["states"] = states;
  return doc;
}

Trajectory trajectory_from_json(const json& doc, DynamicsModel& model) {
  const std::string what = "<trajectory json>";
  if (!doc.is_object() || doc.value("kind", "") != "trajectory") throw ParseError(what, 0, "not a trajectory");
  if (doc.value("schema_version", 0) != kSchemaVersion) throw ParseError(what, 0, "unsupported schema_version");
  if (!doc.contains("units") || doc["units"].value("length", "") != "m")
    throw InvalidArgument("trajectory length unit is not meters");
  model.kind = dynamics_kind_from_string(doc.at("dynamics").get<std::string>());
  model.pos_dim = doc.at("pos_dim").get<int>();
  const json& states = doc.at("states");
  if (!states.is_array() || states.size() < 2) throw ParseError(what, 0, "trajectory needs at least two states");
  Trajectory traj;
  traj.states.resize(model.state_dim(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Vec x = json_to_vec(states[k], what);
    if (x.size() != model.state_dim()) throw ParseError(what, 0, "state size does not match dynamics");
    traj.states.col(static_cast<Eigen::Index>(k)) = x;
  }
  const Vec dt = json_to_vec(doc.at("dt"), what);
  if (dt.size() != traj.horizon() - 1 || (dt.array() <= 0.0).any())
    throw ParseError(what, 0, "dt must hold T-1 positive entries");
  traj.log_dt = dt.array().log().matrix();
  return traj;
}

std::string polyline_csv(const Points& polyline) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < polyline.rows(); ++i) os << (i ? "," : "") << "x_" << i + 1;
  os << '\n';
  for (Eigen::Index k = 0; k < polyline.cols(); ++k) {
    for (Eigen::Index i = 0; i < polyline.rows(); ++i) os << (i ? "," : "") << format_double(polyline(i, k));
    os << '\n';
  }
  return os.str();
}

LoadedPolyline load_polyline(const fs::path& path) {
  const std::string text = read_file(path);
  const std::string source = path.string();
  LoadedPolyline out;
  if (path.extension() == ".json") {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source, 0, e.what());
    }
    // A solver report embeds its trajectory.
    if (doc.is_object() && doc.contains("trajectory") && doc["trajectory"].is_object()) doc = doc["trajectory"];
    DynamicsModel model;
    const Trajectory traj = trajectory_from_json(doc, model);
    out.positions = traj.positions(model.pos_dim);
    const json& norm = doc.at("normalization");
    out.extent = norm.at("extent").get<double>();
    out.offset = json_to_vec(norm.at("offset"), source);
    return out;
  }

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::optional<int> pos_dim;
  bool trajectory_layout = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto at = t.find("pos_dim=");
      if (at != std::string::npos) pos_dim = std::atoi(t.c_str() + at + 8);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(t.front()))) {
      trajectory_layout = t.rfind("t,", 0) == 0;
      continue;
    }
    const auto cells = split(t, ',');
    std::vector<double> row;
    const std::size_t first = trajectory_layout ? 1 : 0;
    const std::size_t last = trajectory_layout ? cells.size() - 1 : cells.size();
    for (std::size_t c = first; c < last; ++c) row.push_back(parse_number(cells[c], source, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(source, line_no, "inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.size() < 1) throw EmptyInput("'" + source + "' holds no trajectory rows");
  std::size_t d = rows.front().size();
  if (trajectory_layout) {
    if (!pos_dim) throw ParseError(source, 1, "trajectory CSV lacks the pos_dim header comment");
    if (*pos_dim < 1 || static_cast<std::size_t>(*pos_dim) > d) throw ParseError(source, 1, "invalid pos_dim");
    d = static_cast<std::size_t>(*pos_dim);
  }
  out.positions.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t i = 0; i < d; ++i)
      out.positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[k][i];
  return out;
}

json coverage_json(const CoverageResult& r) {
  json doc;
  std::size_t covered = 0;
  json mask = json::array();
  for (bool b : r.per_sample_covered) {
    covered += b ? 1 : 0;
    mask.push_back(b ? 1 : 0);
  }
  doc["covered_fraction"] = r.covered_fraction;
  doc["covered_count"] = covered;
  doc["sample_count"] = r.per_sample_covered.size();
  doc["radius_phys"] = r.radius_phys;
  doc["path_length"] = r.path_length;
  doc["per_sample_covered"] = mask;
  return doc;
}

json report_json(const SolverReport& report, const DynamicsModel& model, const RunConfig& config,
                 const CoverageResult& coverage) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "solver_report";
  doc["config"] = config_to_json(config);
  doc["converged"] = report.converged;
  doc["message"] = report.message;
  doc["final_objective"] = report.final_objective;
  doc["final_penalty"] = report.final_penalty;
  doc["evaluations"] = report.evaluations;
  doc["wall_time_sec"] = report.wall_time;
  doc["normalization"] = {{"extent", report.extent}, {"offset", vec_to_json(report.offset)}};
  doc["residuals"] = {{"scale", "normalized"},
                      {"max_equality", report.residuals.max_eq_violation},
                      {"max_inequality", report.residuals.max_ineq_violation}};
  const bool normalized = config.solver.normalize_domain;
  const double e2 = report.extent * report.extent;
  json h = json::array(), h_phys = json::array();
  for (double v : report.schedule) {
    h.push_back(v);
    h_phys.push_back(normalized ? v * e2 : v);
  }
  doc["schedule"] = {{"bandwidth", h}, {"bandwidth_units", normalized ? "normalized" : "m^2"}, {"h_phys", h_phys}};
  json trace = {{"stage", json::array()},           {"bandwidth", json::array()}, {"al_round", json::array()},
                {"inner_iteration", json::array()}, {"objective", json::array()}, {"al_value", json::array()}};
  for (const auto& t : report.trace) {
    trace["stage"].push_back(t.stage);
    trace["bandwidth"].push_back(t.bandwidth);
    trace["al_round"].push_back(t.al_round);
    trace["inner_iteration"].push_back(t.inner_iteration);
    trace["objective"].push_back(t.objective);
    trace["al_value"].push_back(t.al_value);
  }
  doc["trace"] = trace;
  json cov = coverage_json(coverage);
  cov.erase("per_sample_covered");
  doc["coverage"] = cov;
  doc["trajectory"] = trajectory_json(model, report.trajectory, report.extent, report.offset);
  return doc;
}

}  // namespace ergocov::cli
