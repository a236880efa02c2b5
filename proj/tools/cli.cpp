#include "cli.hpp"

#include "io.hpp"

#include "ergocov/diagnostics.hpp"
#include "ergocov/error.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <sstream>

namespace ergocov::cli {
namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string output_dir;
  int verbose = 0;
};

struct PlanOptions {
  std::vector<std::string> overrides;
};

struct BenchOptions {
  std::vector<std::string> overrides;
  std::vector<std::string> imports;
};

struct EvalOptions {
  std::string trajectory;
  std::string domain;
  double radius = 0.0;
  std::optional<int> dim;
};

struct ExportOptions {
  std::string report;
};

RunConfig resolve_config(const GlobalOptions& g, const std::vector<std::string>& overrides) {
  if (g.config.empty()) throw InvalidArgument("--config is required for this command");
  const fs::path path = g.config;
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (g.seed) doc["seed"] = *g.seed;
  RunConfig cfg = parse_config(doc, fs::absolute(path).parent_path());
  if (!g.output_dir.empty()) cfg.output_dir = fs::absolute(g.output_dir);
  return cfg;
}

DomainSamples load_domain(const RunConfig& cfg) {
  if (!fs::exists(cfg.domain_file)) throw InvalidArgument("domain file '" + cfg.domain_file.string() + "' not found");
  if (cfg.domain_format) return load_samples(cfg.domain_file, *cfg.domain_format, cfg.domain_dim);
  const auto fmt = format_from_path(cfg.domain_file);
  if (!fmt) throw InvalidArgument("cannot infer the format of '" + cfg.domain_file.string() + "'");
  return load_samples(cfg.domain_file, *fmt, cfg.domain_dim);
}

json file_entry(const fs::path& path, const std::string& content) {
  return {{"path", path.string()}, {"sha256", sha256_hex(content)}};
}

json manifest(const std::string& command, const RunConfig& cfg, const json& inputs, const json& outputs,
              const std::string& started) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "run_manifest";
  doc["tool"] = "ergocov";
  doc["version"] = ERGOCOV_VERSION;
  doc["command"] = command;
  doc["rng_seed"] = cfg.solver.rng_seed;
  doc["config"] = config_to_json(cfg);
  doc["inputs"] = inputs;
  doc["outputs"] = outputs;
  doc["started_utc"] = started;
  doc["finished_utc"] = utc_timestamp();
  return doc;
}

int cmd_plan(const GlobalOptions& g, const PlanOptions& o, std::ostream& out, std::ostream& err) {
  const std::string started = utc_timestamp();
  const RunConfig cfg = resolve_config(g, o.overrides);
  const std::string domain_text = read_file(cfg.domain_file);
  const DomainSamples samples = load_domain(cfg);
  const NormalizedDomain domain(samples);
  // The position dimension always follows the domain.
  DynamicsModel model = cfg.model;
  model.pos_dim = static_cast<int>(domain.dim());
  model.validate();

  const SolverReport report = solve(domain, model, cfg.solver);
  const CoverageResult cov = coverage(model, report.trajectory, samples, cfg.radius());

  const fs::path dir = cfg.output_dir;
  const std::string p = cfg.output_prefix;
  const std::vector<std::pair<fs::path, std::string>> files = {
      {dir / (p + "_trajectory.csv"), trajectory_csv(model, report.trajectory)},
      {dir / (p + "_trajectory.json"), trajectory_json(model, report.trajectory, report.extent, report.offset).dump(2) + "\n"},
      {dir / (p + "_report.json"), report_json(report, model, cfg, cov).dump(2) + "\n"},
  };
  json outputs = json::array();
  for (const auto& [path, content] : files) {
    write_atomic(path, content);
    outputs.push_back(file_entry(path, content));
  }
  json inputs = json::array();
  inputs.push_back(file_entry(fs::absolute(g.config), read_file(g.config)));
  inputs.push_back(file_entry(cfg.domain_file, domain_text));
  const fs::path manifest_path = dir / (p + "_manifest.json");
  write_atomic(manifest_path, manifest("plan", cfg, inputs, outputs, started).dump(2) + "\n");

  out << "coverage " << 100.0 * cov.covered_fraction << "% path_length " << cov.path_length << " m, "
      << report.evaluations << " evaluations, " << report.message << "\n";
  for (const auto& [path, content] : files) out << "wrote " << path.string() << "\n";
  out << "wrote " << manifest_path.string() << "\n";
  if (!report.converged) {
    err << "not converged: max equality violation " << report.residuals.max_eq_violation
        << ", max inequality violation " << report.residuals.max_ineq_violation << " (tolerances "
        << cfg.solver.al.eps_eq << ", " << cfg.solver.al.eps_ineq << ")\n";
    return kNotConverged;
  }
  return kOk;
}

int cmd_bench(const GlobalOptions& g, const BenchOptions& o, std::ostream& out, std::ostream&) {
  const std::string started = utc_timestamp();
  const RunConfig cfg = resolve_config(g, o.overrides);
  const std::string domain_text = read_file(cfg.domain_file);
  SweepConfig sweep;
  sweep.samples = load_domain(cfg);
  sweep.model = cfg.model;
  sweep.model.pos_dim = static_cast<int>(sweep.samples->dim());
  sweep.model.validate();
  sweep.solver = cfg.solver;
  sweep.coverage_radius = cfg.radius();
  sweep.emmd_bandwidth = cfg.bench.emmd_bandwidth;
  sweep.methods = cfg.bench.methods;
  sweep.jobs = g.jobs;
  std::vector<BenchmarkRow> imported;
  for (const auto& path : o.imports) {
    auto rows = parse_benchmark_csv(read_file(path));
    imported.insert(imported.end(), rows.begin(), rows.end());
  }

  const auto runs = run_scale_sweep_runs(sweep, cfg.bench.scales, cfg.bench.repeats);
  auto rows = summarize_runs(runs);
  rows.insert(rows.end(), imported.begin(), imported.end());
  const std::string table = benchmark_table(rows);

  const fs::path dir = cfg.output_dir;
  const std::vector<std::pair<fs::path, std::string>> files = {
      {dir / "benchmark.csv", benchmark_runs_csv(runs)},
      {dir / "benchmark_summary.csv", benchmark_csv(rows)},
      {dir / "benchmark_timing.csv", benchmark_timing_csv(runs)},
      {dir / "benchmark_table.txt", table},
  };
  json outputs = json::array();
  for (const auto& [path, content] : files) {
    write_atomic(path, content);
    outputs.push_back(file_entry(path, content));
  }
  json inputs = json::array();
  inputs.push_back(file_entry(fs::absolute(g.config), read_file(g.config)));
  inputs.push_back(file_entry(cfg.domain_file, domain_text));
  write_atomic(dir / "benchmark_manifest.json", manifest("bench", cfg, inputs, outputs, started).dump(2) + "\n");
  out << table;
  return kOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  if (!(o.radius > 0.0) || !std::isfinite(o.radius)) throw InvalidArgument("--radius must be positive");
  const fs::path domain_path = o.domain;
  if (!fs::exists(domain_path)) throw InvalidArgument("domain file '" + o.domain + "' not found");
  const auto fmt = format_from_path(domain_path);
  if (!fmt) throw InvalidArgument("cannot infer the format of '" + o.domain + "'");
  const DomainSamples samples = load_samples(domain_path, *fmt, o.dim);
  const LoadedPolyline poly = load_polyline(o.trajectory);
  if (poly.positions.rows() != samples.dim())
    throw InvalidArgument("unit metadata mismatch: trajectory has " + std::to_string(poly.positions.rows()) +
                          " position coordinates, domain has " + std::to_string(samples.dim()));
  if (poly.extent) {
    const NormalizedDomain domain(samples);
    const double tol = 1e-9 * std::max(1.0, domain.extent());
    const bool same = std::abs(*poly.extent - domain.extent()) <= tol && poly.offset &&
                      poly.offset->size() == domain.offset().size() &&
                      (*poly.offset - domain.offset()).lpNorm<Eigen::Infinity>() <= tol;
    if (!same)
      throw InvalidArgument("unit metadata mismatch: trajectory normalization record does not match the domain");
  }
  const CoverageResult c = coverage(poly.positions, samples, o.radius);
  out << coverage_json(c).dump(2) << "\n";
  return kOk;
}

int cmd_export(const GlobalOptions& g, const ExportOptions& o, std::ostream& out) {
  const fs::path report_path = o.report;
  json doc;
  try {
    doc = json::parse(read_file(report_path));
  } catch (const json::parse_error& e) {
    throw ParseError(report_path.string(), 0, e.what());
  }
  if (!doc.is_object() || doc.value("kind", "") != "solver_report")
    throw InvalidArgument("'" + o.report + "' is not a solver report");
  if (doc.value("schema_version", -1) != kSchemaVersion)
    throw InvalidArgument("report schema_version " + doc.value("schema_version", json(nullptr)).dump() +
                          " does not match the supported version " + std::to_string(kSchemaVersion));
  const RunConfig cfg = parse_config(doc.at("config"), fs::absolute(report_path).parent_path());
  DynamicsModel model;
  const Trajectory traj = trajectory_from_json(doc.at("trajectory"), model);
  const Points polyline = traj.positions(model.pos_dim);
  const DomainSamples samples = load_domain(cfg);
  if (samples.dim() != model.pos_dim) throw InvalidArgument("report trajectory does not match its domain");
  const CoverageResult cov = coverage(polyline, samples, cfg.radius());

  const json& trace = doc.at("trace");
  std::ostringstream tr;
  tr << "evaluation,stage,bandwidth,al_round,inner_iteration,objective,al_value\n";
  for (std::size_t i = 0; i < trace.at("stage").size(); ++i)
    tr << i << ',' << trace["stage"][i].get<int>() << ',' << format_double(trace["bandwidth"][i].get<double>())
       << ',' << trace["al_round"][i].get<int>() << ',' << trace["inner_iteration"][i].get<int>() << ','
       << format_double(trace["objective"][i].is_null() ? NAN : trace["objective"][i].get<double>()) << ','
       << format_double(trace["al_value"][i].is_null() ? NAN : trace["al_value"][i].get<double>()) << '\n';

  const json& sched = doc.at("schedule");
  std::ostringstream sc;
  sc << "k,bandwidth,h_phys\n";
  for (std::size_t k = 0; k < sched.at("bandwidth").size(); ++k)
    sc << k << ',' << format_double(sched["bandwidth"][k].get<double>()) << ','
       << format_double(sched["h_phys"][k].get<double>()) << '\n';

  std::ostringstream mask;
  mask << "index";
  for (Eigen::Index i = 0; i < samples.dim(); ++i) mask << ",x_" << i + 1;
  mask << ",weight,covered\n";
  for (Eigen::Index j = 0; j < samples.size(); ++j) {
    mask << j;
    for (Eigen::Index i = 0; i < samples.dim(); ++i) mask << ',' << format_double(samples.points()(i, j));
    mask << ',' << format_double(samples.weights()(j)) << ',' << (cov.per_sample_covered[j] ? 1 : 0) << '\n';
  }

  const fs::path dir = g.output_dir.empty() ? fs::absolute(report_path).parent_path() : fs::path(g.output_dir);
  const std::vector<std::pair<fs::path, std::string>> files = {
      {dir / "trace.csv", tr.str()},
      {dir / "schedule.csv", sc.str()},
      {dir / "polyline.csv", polyline_csv(polyline)},
      {dir / "coverage_mask.csv", mask.str()},
  };
  for (const auto& [path, content] : files) {
    write_atomic(path, content);
    out << "wrote " << path.string() << "\n";
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scale-invariant ergodic coverage planning"};
  app.set_version_flag("--version", std::string(ERGOCOV_VERSION));
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration (schema_version 1)");
  app.add_option("--seed", g.seed, "Override the configured RNG seed");
  app.add_option("--jobs", g.jobs, "Concurrent benchmark cells")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", g.output_dir, "Directory for written files");
  app.add_flag("-v,--verbose", g.verbose, "Diagnostics on stderr; repeat for debug detail");

  PlanOptions plan;
  auto* plan_cmd = app.add_subcommand("plan", "Solve one coverage trajectory");
  plan_cmd->add_option("--set", plan.overrides, "Config override key=value (dotted keys)");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run the multi-scale benchmark sweep");
  bench_cmd->add_option("--set", bench.overrides, "Config override key=value (dotted keys)");
  bench_cmd->add_option("--import", bench.imports, "External summary rows (benchmark_summary.csv layout)");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Coverage of a trajectory over a sample set");
  eval_cmd->add_option("--trajectory", ev.trajectory, "Trajectory JSON/CSV or polyline CSV")->required();
  eval_cmd->add_option("--domain", ev.domain, "Sample file (csv, obj, ply)")->required();
  eval_cmd->add_option("--radius", ev.radius, "Covering radius in meters")->required();
  eval_cmd->add_option("--dim", ev.dim, "Point dimension for 3-column CSV samples");

  ExportOptions ex;
  auto* export_cmd = app.add_subcommand("export-plotdata", "Write plot-ready CSV files from a solver report");
  export_cmd->add_option("--report", ex.report, "Solver report JSON")->required();

  for (auto* sub : {plan_cmd, bench_cmd, eval_cmd, export_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kInputError;
  }

  set_verbosity(g.verbose >= 2 ? Verbosity::debug : g.verbose == 1 ? Verbosity::info : Verbosity::quiet);
  set_diagnostic_sink([&err](Verbosity level, const std::string& msg) {
    if (static_cast<int>(level) <= static_cast<int>(verbosity())) err << "[ergocov] " << msg << "\n";
  });
  struct SinkReset {
    ~SinkReset() { set_diagnostic_sink(nullptr); }
  } reset;

  try {
    if (*plan_cmd) return cmd_plan(g, plan, out, err);
    if (*bench_cmd) return cmd_bench(g, bench, out, err);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*export_cmd) return cmd_export(g, ex, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace ergocov::cli
