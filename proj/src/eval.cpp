#include "ergocov/eval.hpp"

#include "ergocov/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace ergocov {

double point_segment_distance(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& a,
                              const Eigen::Ref<const Vec>& b) {
  const Vec ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

double path_length(const Points& polyline) {
  double L = 0.0;
  for (Eigen::Index t = 0; t + 1 < polyline.cols(); ++t) L += (polyline.col(t + 1) - polyline.col(t)).norm();
  return L;
}

CoverageResult coverage(const Points& polyline, const DomainSamples& samples, double radius_phys) {
  if (!(radius_phys > 0.0)) throw InvalidArgument("coverage radius must be positive");
  if (polyline.rows() != samples.dim()) throw InvalidArgument("trajectory and samples differ in dimension");
  if (polyline.cols() < 1) throw InvalidArgument("trajectory is empty");

  CoverageResult out;
  out.radius_phys = radius_phys;
  out.path_length = path_length(polyline);
  out.per_sample_covered.assign(static_cast<std::size_t>(samples.size()), false);
  const Points& pts = samples.points();
  double covered = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    bool hit = false;
    if (polyline.cols() == 1) {
      hit = (pts.col(i) - polyline.col(0)).norm() <= radius_phys;
    } else {
      for (Eigen::Index t = 0; t + 1 < polyline.cols() && !hit; ++t)
        hit = point_segment_distance(pts.col(i), polyline.col(t), polyline.col(t + 1)) <= radius_phys;
    }
    out.per_sample_covered[static_cast<std::size_t>(i)] = hit;
    if (hit) covered += samples.weights()(i);
  }
  out.covered_fraction = std::clamp(covered, 0.0, 1.0);
  if (std::all_of(out.per_sample_covered.begin(), out.per_sample_covered.end(), [](bool b) { return b; }))
    out.covered_fraction = 1.0;
  return out;
}

CoverageResult coverage(const DynamicsModel& model, const Trajectory& traj, const DomainSamples& samples,
                        double radius_phys) {
  return coverage(traj.positions(model.pos_dim), samples, radius_phys);
}

Points tsp_nearest_neighbor(const DomainSamples& samples, const Vec& start, std::optional<double> L_max) {
  if (start.size() != samples.dim()) throw InvalidArgument("start point dimension does not match samples");
  const Points& pts = samples.points();
  const Eigen::Index M = pts.cols();
  std::vector<bool> visited(static_cast<std::size_t>(M), false);
  std::vector<Vec> order{start};
  Vec cur = start;
  double used = 0.0;

  auto lex_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < pts.rows(); ++k) {
      if (pts(k, a) < pts(k, b)) return true;
      if (pts(k, a) > pts(k, b)) return false;
    }
    return a < b;
  };

  for (Eigen::Index step = 0; step < M; ++step) {
    Eigen::Index best = -1;
    double best_d = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) {
      if (visited[static_cast<std::size_t>(i)]) continue;
      const double dist = (pts.col(i) - cur).norm();
      if (best < 0 || dist < best_d || (dist == best_d && lex_less(i, best))) {
        best = i;
        best_d = dist;
      }
    }
    if (L_max && used + best_d > *L_max) break;
    used += best_d;
    visited[static_cast<std::size_t>(best)] = true;
    cur = pts.col(best);
    order.push_back(cur);
  }

  Points out(samples.dim(), static_cast<Eigen::Index>(order.size()));
  for (std::size_t k = 0; k < order.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = order[k];
  return out;
}

DomainSamples subsample(const DomainSamples& samples, Eigen::Index count, std::uint64_t seed) {
  const Eigen::Index M = samples.size();
  if (count >= M) return samples;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(M));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; std::shuffle is not portable across libraries.
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, M - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  Points pts(samples.dim(), count);
  Vec w(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    pts.col(i) = samples.points().col(idx[static_cast<std::size_t>(i)]);
    w(i) = samples.weights()(idx[static_cast<std::size_t>(i)]);
  }
  return DomainSamples(std::move(pts), std::move(w));
}

const std::vector<std::string>& benchmark_methods() {
  static const std::vector<std::string> methods{"si_emmd", "emmd", "tsp", "tsp_unconstrained"};
  return methods;
}

ScaledProblem scale_problem(const SweepConfig& base, double s) {
  if (!base.samples) throw InvalidArgument("sweep configuration has no samples");
  if (!(s > 0.0)) throw InvalidArgument("scales must be positive");
  ScaledProblem p{DomainSamples(base.samples->points() * s, base.samples->weights()), base.model, base.solver, 0.0};
  p.model.v_max *= s;
  if (p.model.a_max) *p.model.a_max *= s;
  if (p.model.L_max) *p.model.L_max *= s;
  if (p.model.initial_state) *p.model.initial_state *= s;
  if (p.model.final_state) *p.model.final_state *= s;
  p.solver.annealing.h_phys_star *= s * s;
  const double r = base.coverage_radius ? *base.coverage_radius : std::sqrt(base.solver.annealing.h_phys_star);
  p.coverage_radius = r * s;
  return p;
}

namespace {

struct CellResult {
  double coverage = 0.0;
  double seconds = 0.0;
  bool converged = false;
  double length = 0.0;
};

Vec tsp_start(const ScaledProblem& p) {
  if (p.model.initial_state) return p.model.initial_state->head(p.model.pos_dim);
  return p.samples.points().col(0);
}

CellResult run_cell(const SweepConfig& base, const std::string& method, double scale) {
  const ScaledProblem p = scale_problem(base, scale);
  CellResult r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (method == "si_emmd" || method == "emmd") {
      SolverConfig cfg = p.solver;
      if (method == "emmd") {
        cfg.objective = ObjectiveKind::raw_emmd;
        cfg.normalize_domain = false;
        cfg.anneal = false;
        cfg.fixed_bandwidth = base.emmd_bandwidth ? *base.emmd_bandwidth : base.solver.annealing.h_phys_star;
      }
      const NormalizedDomain domain(p.samples);
      const SolverReport rep = solve(domain, p.model, cfg);
      if (base.on_solve) base.on_solve(method, scale, rep);
      const CoverageResult c = coverage(p.model, rep.trajectory, p.samples, p.coverage_radius);
      r.coverage = c.covered_fraction;
      r.length = c.path_length;
      r.converged = rep.converged;
    } else if (method == "tsp" || method == "tsp_unconstrained") {
      Points tour;
      if (method == "tsp") {
        tour = tsp_nearest_neighbor(p.samples, tsp_start(p), p.model.L_max);
      } else {
        const DomainSamples sub = subsample(p.samples, p.solver.horizon, p.solver.rng_seed);
        tour = tsp_nearest_neighbor(sub, tsp_start(p), std::nullopt);
      }
      const CoverageResult c = coverage(tour, p.samples, p.coverage_radius);
      r.coverage = c.covered_fraction;
      r.length = c.path_length;
      r.converged = true;
    } else {
      throw InvalidArgument("unknown benchmark method '" + method + "'");
    }
  } catch (const InvalidArgument&) {
    throw;
  } catch (const Error&) {
    r.converged = false;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

std::vector<BenchmarkRun> run_scale_sweep_runs(const SweepConfig& base, const std::vector<double>& scales,
                                               int repeats) {
  if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
  for (const auto& m : base.methods)
    if (std::find(benchmark_methods().begin(), benchmark_methods().end(), m) == benchmark_methods().end()) {
      std::string valid;
      for (const auto& v : benchmark_methods()) valid += (valid.empty() ? "" : ", ") + v;
      throw InvalidArgument("unknown benchmark method '" + m + "' (valid: " + valid + ")");
    }
  for (double s : scales)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("scales must be positive and finite");

  std::vector<BenchmarkRun> runs;
  for (const auto& m : base.methods)
    for (double s : scales)
      for (int r = 0; r < repeats; ++r) runs.push_back({m, s, r, 0.0, 0.0, false, 0.0});

  auto fill = [&](BenchmarkRun& run) {
    const CellResult c = run_cell(base, run.method, run.scale);
    run.coverage_percent = 100.0 * c.coverage;
    run.seconds = c.seconds;
    run.converged = c.converged;
    run.path_length = c.length;
  };
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, base.jobs));
  for (std::size_t begin = 0; begin < runs.size(); begin += jobs) {
    const std::size_t end = std::min(runs.size(), begin + jobs);
    if (jobs == 1) {
      fill(runs[begin]);
      continue;
    }
    std::vector<std::future<void>> futures;
    for (std::size_t c = begin; c < end; ++c) futures.push_back(std::async(std::launch::async, fill, std::ref(runs[c])));
    for (auto& f : futures) f.get();
  }
  return runs;
}

std::vector<BenchmarkRow> summarize_runs(const std::vector<BenchmarkRun>& runs) {
  std::vector<BenchmarkRow> rows;
  std::vector<std::vector<double>> times;
  for (const auto& run : runs) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const BenchmarkRow& r) { return r.method == run.method && r.scale == run.scale; });
    if (it == rows.end()) {
      BenchmarkRow row;
      row.method = run.method;
      row.scale = run.scale;
      row.converged = true;
      rows.push_back(row);
      times.emplace_back();
      it = rows.end() - 1;
    }
    auto& t = times[static_cast<std::size_t>(it - rows.begin())];
    t.push_back(run.seconds);
    it->repeats = static_cast<int>(t.size());
    it->converged = it->converged && run.converged;
    it->coverage_percent = run.coverage_percent;
    it->path_length = run.path_length;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& t = times[i];
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
    double var = 0.0;
    for (double x : t) var += (x - mean) * (x - mean);
    rows[i].time_mean = mean;
    rows[i].time_std = t.size() > 1 ? std::sqrt(var / static_cast<double>(t.size() - 1)) : 0.0;
  }
  return rows;
}

std::vector<BenchmarkRow> run_scale_sweep(const SweepConfig& base, const std::vector<double>& scales, int repeats) {
  return summarize_runs(run_scale_sweep_runs(base, scales, repeats));
}

std::string benchmark_runs_csv(const std::vector<BenchmarkRun>& runs) {
  std::ostringstream os;
  os << "method,scale,repeat,coverage_percent,converged,path_length\n" << std::setprecision(10);
  for (const auto& r : runs)
    os << r.method << ',' << r.scale << ',' << r.repeat << ',' << r.coverage_percent << ',' << (r.converged ? 1 : 0)
       << ',' << r.path_length << '\n';
  return os.str();
}

std::string benchmark_timing_csv(const std::vector<BenchmarkRun>& runs) {
  std::ostringstream os;
  os << "method,scale,repeat,seconds\n" << std::setprecision(10);
  for (const auto& r : runs) os << r.method << ',' << r.scale << ',' << r.repeat << ',' << r.seconds << '\n';
  return os.str();
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream os;
  os << "method,scale,coverage_percent,time_mean,time_std,converged,repeats,path_length\n";
  os << std::setprecision(10);
  for (const auto& r : rows)
    os << r.method << ',' << r.scale << ',' << r.coverage_percent << ',' << r.time_mean << ',' << r.time_std << ','
       << (r.converged ? 1 : 0) << ',' << r.repeats << ',' << r.path_length << '\n';
  return os.str();
}

std::vector<BenchmarkRow> parse_benchmark_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<BenchmarkRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("method,", 0) == 0 || line.front() == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 6) throw ParseError("<benchmark csv>", line_no, "expected at least 6 columns");
    try {
      BenchmarkRow r;
      r.method = f[0];
      r.scale = std::stod(f[1]);
      r.coverage_percent = std::stod(f[2]);
      r.time_mean = std::stod(f[3]);
      r.time_std = std::stod(f[4]);
      r.converged = f[5] == "1" || f[5] == "true";
      r.repeats = f.size() > 6 ? std::stoi(f[6]) : 0;
      r.path_length = f.size() > 7 ? std::stod(f[7]) : 0.0;
      rows.push_back(r);
    } catch (const std::exception&) {
      throw ParseError("<benchmark csv>", line_no, "malformed numeric field");
    }
  }
  return rows;
}

std::string benchmark_table(const std::vector<BenchmarkRow>& rows) {
  std::vector<std::string> methods;
  std::vector<double> scales;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (std::find(scales.begin(), scales.end(), r.scale) == scales.end()) scales.push_back(r.scale);
  }
  std::ostringstream os;
  os << std::left << std::setw(22) << "Metric";
  for (double s : scales) {
    std::ostringstream h;
    h << "Scale " << s;
    os << std::setw(20) << h.str();
  }
  os << '\n';
  for (const auto& m : methods) {
    os << m << '\n';
    std::ostringstream cov, time;
    cov << std::left << std::setw(22) << "  Coverage (%)";
    time << std::left << std::setw(22) << "  Comp. Time (sec)";
    for (double s : scales) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const BenchmarkRow& r) { return r.method == m && r.scale == s; });
      std::ostringstream c, t;
      if (it != rows.end()) {
        c << std::fixed << std::setprecision(2) << it->coverage_percent << (it->converged ? "" : "*");
        t << std::fixed << std::setprecision(3) << it->time_mean << " +/- " << it->time_std;
      } else {
        c << "-";
        t << "-";
      }
      cov << std::setw(20) << c.str();
      time << std::setw(20) << t.str();
    }
    os << cov.str() << '\n' << time.str() << '\n';
  }
  os << "(* = did not converge)\n";
  return os.str();
}

DtComparison fixed_vs_adaptive_dt(const NormalizedDomain& domain, const DynamicsModel& model,
                                  const SolverConfig& config, double radius_phys, std::optional<double> fixed_dt) {
  DtComparison out;
  out.adaptive = solve(domain, model, config);
  out.adaptive_coverage = coverage(model, out.adaptive.trajectory, domain.source(), radius_phys);

  double dt = 0.0;
  if (fixed_dt) {
    dt = *fixed_dt;
  } else if (model.L_max) {
    dt = *model.L_max / (static_cast<double>(config.horizon - 1) * model.v_max);
  } else {
    const Trajectory seed = seed_trajectory(model, domain, config.horizon, config.seed_strategy, config.rng_seed);
    dt = std::exp(seed.log_dt(0));
  }
  DynamicsModel fixed_model = model;
  fixed_model.dt_min = fixed_model.dt_max = dt;
  out.fixed_dt = dt;
  out.fixed = solve(domain, fixed_model, config);
  out.fixed_coverage = coverage(fixed_model, out.fixed.trajectory, domain.source(), radius_phys);
  return out;
}

}  // namespace ergocov
