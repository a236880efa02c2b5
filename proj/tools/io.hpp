#pragma once

#include "ergocov/domain.hpp"
#include "ergocov/dynamics.hpp"
#include "ergocov/eval.hpp"
#include "ergocov/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ergocov::cli {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct BenchSettings {
  std::vector<double> scales = {1.0, 100.0, 10000.0};
  int repeats = 3;
  std::vector<std::string> methods = {"si_emmd", "emmd", "tsp"};
  std::optional<double> emmd_bandwidth;
};

/// Versioned JSON run configuration. Relative paths resolve against the
/// directory of the config file.
struct RunConfig {
  std::filesystem::path domain_file;
  std::optional<SampleFormat> domain_format;
  std::optional<int> domain_dim;
  DynamicsModel model;
  SolverConfig solver;
  std::optional<double> coverage_radius;  // m; default sqrt(h_phys_star)
  std::filesystem::path output_dir = "out";
  std::string output_prefix = "plan";
  BenchSettings bench;

  double radius() const;
};

/// Throws InvalidArgument naming the offending key for unknown keys, wrong
/// types, or a schema_version other than kSchemaVersion.
RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration, defaults included.
json config_to_json(const RunConfig& config);

/// Applies a `dotted.key=value` override to a config document; the value is
/// parsed as JSON and falls back to a plain string.
void apply_override(json& doc, const std::string& assignment);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string sha256_hex(const std::string& data);
std::string utc_timestamp();

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Rows (t, x_1..x_n, dt) with t the knot time; the last row has an empty dt.
std::string trajectory_csv(const DynamicsModel& model, const Trajectory& traj);
json trajectory_json(const DynamicsModel& model, const Trajectory& traj, double extent, const Vec& offset);
/// Inverse of trajectory_json; the model carries kind and pos_dim only.
Trajectory trajectory_from_json(const json& doc, DynamicsModel& model);
std::string polyline_csv(const Points& polyline);

/// Positions read from a trajectory JSON, trajectory CSV or polyline CSV,
/// with the normalization record when the file carries one.
struct LoadedPolyline {
  Points positions;
  std::optional<double> extent;
  std::optional<Vec> offset;
};
LoadedPolyline load_polyline(const std::filesystem::path& path);

json coverage_json(const CoverageResult& result);
json report_json(const SolverReport& report, const DynamicsModel& model, const RunConfig& config,
                 const CoverageResult& coverage);

}  // namespace ergocov::cli
