#pragma once

#include "ergocov/domain.hpp"
#include "ergocov/dynamics.hpp"
#include "ergocov/solver.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ergocov {

struct CoverageResult {
  double covered_fraction = 0.0;  // weighted share of covered samples
  double radius_phys = 0.0;
  std::vector<bool> per_sample_covered;
  double path_length = 0.0;
};

double point_segment_distance(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& a,
                              const Eigen::Ref<const Vec>& b);

double path_length(const Points& polyline);

/// A sample is covered when some polyline segment passes within radius_phys.
CoverageResult coverage(const Points& polyline, const DomainSamples& samples, double radius_phys);
CoverageResult coverage(const DynamicsModel& model, const Trajectory& traj, const DomainSamples& samples,
                        double radius_phys);

/// Greedy nearest-neighbour tour from `start`, truncated before the cumulative
/// length would exceed L_max. Ties go to the lexicographically smallest point.
/// The returned sequence begins with `start`.
Points tsp_nearest_neighbor(const DomainSamples& samples, const Vec& start,
                            std::optional<double> L_max = std::nullopt);

/// Seeded uniform subsample of `count` sample points (all points if count >= M).
DomainSamples subsample(const DomainSamples& samples, Eigen::Index count, std::uint64_t seed);

struct BenchmarkRow {
  std::string method;
  double scale = 1.0;
  double coverage_percent = 0.0;
  double time_mean = 0.0;
  double time_std = 0.0;
  bool converged = false;
  int repeats = 0;
  double path_length = 0.0;
};

/// One execution of one method at one scale.
struct BenchmarkRun {
  std::string method;
  double scale = 1.0;
  int repeat = 0;
  double coverage_percent = 0.0;
  double seconds = 0.0;
  bool converged = false;
  double path_length = 0.0;
};

/// Methods understood by the sweep harness.
const std::vector<std::string>& benchmark_methods();

struct SweepConfig {
  std::optional<DomainSamples> samples;  // scale-1 target
  DynamicsModel model;                   // scale-1 physical model
  SolverConfig solver;                   // annealing.h_phys_star at scale 1
  std::optional<double> coverage_radius; // scale 1; default sqrt(h_phys_star)
  std::optional<double> emmd_bandwidth;  // fixed physical bandwidth of the raw baseline
  std::vector<std::string> methods = {"si_emmd", "emmd", "tsp"};
  int jobs = 1;
  // Called after every solver-based run (may run on worker threads when jobs > 1).
  std::function<void(const std::string& method, double scale, const SolverReport&)> on_solve;
};

/// Problem instance at physical scale s: lengths times s, bandwidth times s^2.
struct ScaledProblem {
  DomainSamples samples;
  DynamicsModel model;
  SolverConfig solver;
  double coverage_radius;
};

ScaledProblem scale_problem(const SweepConfig& base, double scale);

/// Runs every (method, scale) cell `repeats` times. Method failures become
/// runs with converged = false; results are ordered method, scale, repeat.
/// Unknown method names throw InvalidArgument before anything runs.
std::vector<BenchmarkRun> run_scale_sweep_runs(const SweepConfig& base, const std::vector<double>& scales,
                                               int repeats);
/// Aggregates runs per (method, scale): coverage of the last repeat (runs are
/// deterministic), wall-time mean and sample std.
std::vector<BenchmarkRow> summarize_runs(const std::vector<BenchmarkRun>& runs);
std::vector<BenchmarkRow> run_scale_sweep(const SweepConfig& base, const std::vector<double>& scales, int repeats);

/// Per-run CSV without timings, so reruns are byte-identical.
std::string benchmark_runs_csv(const std::vector<BenchmarkRun>& runs);
std::string benchmark_timing_csv(const std::vector<BenchmarkRun>& runs);

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);
std::vector<BenchmarkRow> parse_benchmark_csv(const std::string& text);
/// Human-readable table: one block per method, one column per scale.
std::string benchmark_table(const std::vector<BenchmarkRow>& rows);

struct DtComparison {
  SolverReport adaptive;
  SolverReport fixed;
  CoverageResult adaptive_coverage;
  CoverageResult fixed_coverage;
  double fixed_dt = 0.0;
};

/// Solves twice with the same seed and budget: free time steps, then
/// dt_min = dt_max = fixed_dt (default L_max / ((T - 1) v_max)).
DtComparison fixed_vs_adaptive_dt(const NormalizedDomain& domain, const DynamicsModel& model,
                                  const SolverConfig& config, double radius_phys,
                                  std::optional<double> fixed_dt = std::nullopt);

}  // namespace ergocov
