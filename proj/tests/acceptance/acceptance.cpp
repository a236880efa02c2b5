// Acceptance gate: one PASS/FAIL line per criterion. Tolerances and runtime
// limits are pinned below.
#include "cli.hpp"
#include "io.hpp"

#include "ergocov/error.hpp"
#include "ergocov/eval.hpp"
#include "ergocov/solver.hpp"
#include "testing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace ergocov;
namespace fs = std::filesystem;

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kGradRelTol = 1e-5;
constexpr double kNonnegTol = 1e-10;
constexpr double kZeroValueTol = 1e-8;
constexpr double kZeroGradTol = 1e-6;
constexpr double kBoundSlack = 1e-9;
constexpr double kScaleRelTol = 1e-9;
constexpr double kSpreadPoints = 1.0;
constexpr double kRawCoverageMax = 5.0;
constexpr double kTspMargin = 20.0;
constexpr double kScheduleRelTol = 1e-12;
constexpr double kFeasTol = 1e-6;
constexpr int kDtMinWins = 4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Reports collected from the end-to-end criteria for the feasibility check.
struct Collected {
  std::mutex mutex;
  std::vector<std::pair<std::string, SolverReport>> reports;
  void add(std::string label, const SolverReport& r) {
    std::lock_guard<std::mutex> lock(mutex);
    reports.emplace_back(std::move(label), r);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double rel_norm_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

Vec flat(const Eigen::MatrixXd& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

ErgodicTarget uniform_target(const Points& p) { return ErgodicTarget(p, Vec::Constant(p.cols(), 1.0 / p.cols())); }

double diameter(const Points& a, const Points& b) {
  Points all(a.rows(), a.cols() + b.cols());
  all << a, b;
  double d = 0.0;
  for (Eigen::Index i = 0; i < all.cols(); ++i)
    for (Eigen::Index j = i + 1; j < all.cols(); ++j) d = std::max(d, (all.col(i) - all.col(j)).norm());
  return d;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<int> Tdist(4, 16), Mdist(8, 64), ddist(2, 3);
  std::uniform_real_distribution<double> hdist(0.05, 0.5), mudist(1.0, 10.0), dtdist(-0.7, 0.3);
  double worst_emmd = 0.0, worst_log = 0.0, worst_jac = 0.0, worst_al = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int T = Tdist(rng), M = Mdist(rng), d = ddist(rng);
    const Points x = testing::random_points(rng, d, T), w = testing::random_points(rng, d, M);
    const auto target = uniform_target(w);
    const auto k = KernelConfig::squared_euclidean(hdist(rng));

    auto fd_raw = testing::central_difference([&](const Eigen::MatrixXd& p) { return emmd(p, target, k).value; }, x,
                                              kFdStep);
    worst_emmd = std::max(worst_emmd, rel_norm_error(emmd(x, target, k).grad_omegas, fd_raw));
    auto fd_log = testing::central_difference(
        [&](const Eigen::MatrixXd& p) { return log_emmd(p, target, k).value; }, x, kFdStep);
    worst_log = std::max(worst_log, rel_norm_error(log_emmd(x, target, k).grad_omegas, fd_log));

    DynamicsModel m;
    m.pos_dim = d;
    m.kind = inst % 2 ? DynamicsKind::double_integrator : DynamicsKind::single_integrator;
    m.velocity_bound = VelocityBound::both;
    m.v_max = 0.4;
    m.L_max = 1.5;
    m.T_max = 6.0;
    if (m.kind == DynamicsKind::double_integrator) m.a_max = 0.8;
    m.initial_state = Vec::Constant(d, 0.1);
    m.final_state = Vec::Constant(m.state_dim(), 0.3);
    Trajectory traj;
    traj.states = testing::random_points(rng, m.state_dim(), T, -1.0, 1.0);
    traj.states.topRows(d) = x;
    traj.log_dt = Vec::NullaryExpr(T - 1, [&] { return dtdist(rng); });
    const Vec z = pack(traj);

    auto jac_fd = [&](bool eq) {
      const Vec r0 = eq ? equality_residuals(m, traj) : inequality_residuals(m, traj);
      Eigen::MatrixXd fd(r0.size(), z.size());
      Vec zz = z;
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        zz(j) = z(j) + kFdStep;
        const Trajectory tp = unpack(m, T, zz);
        const Vec rp = eq ? equality_residuals(m, tp) : inequality_residuals(m, tp);
        zz(j) = z(j) - kFdStep;
        const Trajectory tm = unpack(m, T, zz);
        const Vec rm = eq ? equality_residuals(m, tm) : inequality_residuals(m, tm);
        zz(j) = z(j);
        fd.col(j) = (rp - rm) / (2.0 * kFdStep);
      }
      return fd;
    };
    worst_jac = std::max(worst_jac, rel_norm_error(Eigen::MatrixXd(equality_jacobian(m, traj)), jac_fd(true)));
    worst_jac = std::max(worst_jac, rel_norm_error(Eigen::MatrixXd(inequality_jacobian(m, traj)), jac_fd(false)));

    Multipliers mult = Multipliers::zeros(m, T);
    mult.equality = Vec::NullaryExpr(mult.equality.size(), [&] { return std::normal_distribution<double>()(rng); });
    mult.inequality = flat(testing::random_points(rng, mult.inequality.size(), 1));
    ObjectiveContext ctx;
    ctx.target = &target;
    ctx.kernel = k;
    const double mu = mudist(rng);
    auto al = augmented_lagrangian_value_and_grad(m, traj, mult, mu, ctx);
    Vec analytic(z.size());
    analytic << flat(al.grad_states), al.grad_log_dt;
    auto fd_al = testing::central_difference(
        [&](const Eigen::MatrixXd& zz) {
          return augmented_lagrangian_value_and_grad(m, unpack(m, T, Vec(zz)), mult, mu, ctx).value;
        },
        Eigen::MatrixXd(z), kFdStep);
    worst_al = std::max(worst_al, rel_norm_error(analytic, fd_al));
  }
  const double worst = std::max({worst_emmd, worst_log, worst_jac, worst_al});
  return {worst < kGradRelTol, "50 instances, max rel err emmd " + fmt(worst_emmd) + ", log_emmd " + fmt(worst_log) +
                                   ", residual jacobians " + fmt(worst_jac) + ", AL " + fmt(worst_al)};
}

Outcome surrogate_nonnegativity() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> Tdist(1, 24), Mdist(1, 48), ddist(2, 3);
  std::uniform_real_distribution<double> loghdist(std::log(1e-3), std::log(2.0));
  double min_value = 1e300;
  for (int inst = 0; inst < 1000; ++inst) {
    const int d = ddist(rng);
    const Points x = testing::random_points(rng, d, Tdist(rng)), w = testing::random_points(rng, d, Mdist(rng));
    Vec pi = flat(testing::random_points(rng, w.cols(), 1)).array() + 0.05;
    const ErgodicTarget target = inst % 2 ? uniform_target(w) : ErgodicTarget(w, pi / pi.sum());
    const auto k = KernelConfig::squared_euclidean(std::exp(loghdist(rng)));
    min_value = std::min(min_value, log_emmd(x, target, k).value);
  }
  double max_zero_value = 0.0, max_zero_grad = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int d = ddist(rng);
    const Points w = testing::random_points(rng, d, Mdist(rng));
    const auto k = KernelConfig::squared_euclidean(std::exp(loghdist(rng)));
    const auto e = log_emmd(w, uniform_target(w), k);
    max_zero_value = std::max(max_zero_value, std::abs(e.value));
    max_zero_grad = std::max(max_zero_grad, e.grad_omegas.norm());
  }
  const bool pass = min_value >= -kNonnegTol && max_zero_value < kZeroValueTol && max_zero_grad < kZeroGradTol;
  return {pass, "min over 1000 instances " + fmt(min_value) + "; at trajectory = samples |value| <= " +
                    fmt(max_zero_value) + ", |grad| <= " + fmt(max_zero_grad)};
}

// Largest ratio ||grad_s|| / (6 D / h) over points, plus the two partial bounds.
struct BoundCheck {
  double ratio = 0.0;
  bool ok = true;
};

void check_bound(const Points& x, const Points& w, double h, BoundCheck& acc) {
  const auto e = log_emmd(x, uniform_target(w), KernelConfig::squared_euclidean(h));
  const double D = diameter(x, w);
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    const double g = e.grad_omegas.col(s).norm();
    acc.ratio = std::max(acc.ratio, g / (6.0 * D / h));
    if (g > 6.0 * D / h + kBoundSlack) acc.ok = false;
    if (e.grad_log_f_xmu.col(s).norm() > 2.0 * D / h + kBoundSlack) acc.ok = false;
    if (e.grad_log_f_xx.col(s).norm() > 4.0 * D / h + kBoundSlack) acc.ok = false;
  }
}

Outcome gradient_bound() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> Tdist(1, 30), Mdist(1, 60), ddist(2, 3);
  std::uniform_real_distribution<double> loghdist(std::log(1e-3), std::log(1.0)), span(0.1, 10.0);
  BoundCheck random;
  for (int inst = 0; inst < 1000; ++inst) {
    const int d = ddist(rng);
    const double L = span(rng);
    check_bound(testing::random_points(rng, d, Tdist(rng), 0.0, L), testing::random_points(rng, d, Mdist(rng), 0.0, L),
                std::exp(loghdist(rng)), random);
  }
  // Fixed geometry, growing sizes: the same constant must hold.
  std::string sizes;
  bool sizes_ok = true;
  for (auto [T, M] : {std::pair{10, 20}, std::pair{100, 20}, std::pair{10, 2000}, std::pair{100, 2000}}) {
    std::mt19937_64 g(5);
    BoundCheck c;
    check_bound(testing::random_points(g, 2, T), testing::random_points(g, 2, M), 0.01, c);
    sizes_ok = sizes_ok && c.ok;
    sizes += " T=" + std::to_string(T) + ",M=" + std::to_string(M) + ":" + fmt(c.ratio);
  }
  return {random.ok && sizes_ok, "max |grad|/(6D/h) random " + fmt(random.ratio) + ";" + sizes};
}

Outcome objective_scale_invariance() {
  std::mt19937_64 rng(4);
  const Points P = testing::random_points(rng, 3, 60, -0.3, 1.7);
  const Points Q = testing::random_points(rng, 3, 25, -0.2, 1.5);
  const double h_phys = 0.02;
  double worst_value = 0.0, worst_grad = 0.0;
  ObjectiveEval ref;
  bool first = true;
  for (double s : {1.0, 1e2, 1e4}) {
    const NormalizedDomain dom{DomainSamples(Points(P * s))};
    AnnealingSchedule sched;
    sched.h_phys_star = h_phys * s * s;
    sched.extent = dom.extent();
    const auto e = log_emmd(dom.normalize_points(Q * s), ErgodicTarget(dom), KernelConfig::squared_euclidean(sched.h_norm_star()));
    if (first) {
      ref = e;
      first = false;
      continue;
    }
    worst_value = std::max(worst_value, std::abs(e.value - ref.value) / std::abs(ref.value));
    worst_grad = std::max(worst_grad, rel_norm_error(e.grad_omegas, ref.grad_omegas));
  }
  const bool pass = worst_value <= kScaleRelTol && worst_grad <= kScaleRelTol;
  return {pass, "scales 1, 1e2, 1e4: max rel diff value " + fmt(worst_value) + ", gradient " + fmt(worst_grad)};
}

Outcome scale_sweep(Collected& collected) {
  SweepConfig base;
  base.samples = load_samples(testing::data_path("lumpy_surface.obj"));
  base.model.pos_dim = 3;
  base.model.v_max = 1.0;
  base.model.L_max = 10.0;
  base.model.initial_state = Vec(base.samples->points().col(0));
  base.solver.horizon = 200;
  base.solver.annealing.h_phys_star = 0.01;
  base.coverage_radius = 0.1;
  base.methods = {"si_emmd", "emmd", "tsp"};
  base.on_solve = [&](const std::string& method, double scale, const SolverReport& r) {
    collected.add("scale sweep " + method + " x" + fmt(scale), r);
  };
  const std::vector<double> scales = {1.0, 1e2, 1e4};
  const auto rows = run_scale_sweep(base, scales, 1);
  auto cov = [&](const std::string& m, double s) {
    for (const auto& r : rows)
      if (r.method == m && r.scale == s) return r.coverage_percent;
    return std::nan("");
  };
  double si_min = 1e300, si_max = -1e300, tsp_max = -1e300;
  std::string si, raw, tsp;
  for (double s : scales) {
    si_min = std::min(si_min, cov("si_emmd", s));
    si_max = std::max(si_max, cov("si_emmd", s));
    tsp_max = std::max(tsp_max, cov("tsp", s));
    si += " " + fmt(cov("si_emmd", s), 4);
    raw += " " + fmt(cov("emmd", s), 4);
    tsp += " " + fmt(cov("tsp", s), 4);
  }
  const bool a = si_max - si_min <= kSpreadPoints;
  const bool b = cov("emmd", 1e4) < kRawCoverageMax;
  const bool c = si_min - tsp_max >= kTspMargin;
  return {a && b && c, std::string("coverage % at 1/1e2/1e4: si_emmd") + si + "; emmd" + raw + "; tsp" + tsp +
                           " (spread " + (a ? "ok" : "FAIL") + ", raw@1e4 " + (b ? "ok" : "FAIL") + ", margin " +
                           (c ? "ok" : "FAIL") + ")"};
}

Outcome annealing_schedule(Collected& collected) {
  const AnnealingSchedule fig{0.05, 1.5, 10, 1000.0};
  const auto h = anneal_sequence(fig);
  bool ok = std::abs(h.front() - 0.05) <= kScheduleRelTol * 0.05 &&
            std::abs(h.back() - 1.5e-6) <= kScheduleRelTol * 1.5e-6;
  double ratio_dev = 0.0;
  for (std::size_t k = 1; k + 1 < h.size(); ++k)
    ratio_dev = std::max(ratio_dev, std::abs((h[k + 1] / h[k]) / (h[1] / h[0]) - 1.0));
  ok = ok && ratio_dev <= kScheduleRelTol;

  // Desk-scale mesh stretched to a 1000 m extent, h_norm* = 1.5e-6.
  const auto mesh = load_samples(testing::data_path("lumpy_surface.obj"));
  const double s = 1000.0 / compute_extent(mesh);
  const NormalizedDomain dom{DomainSamples(Points(mesh.points() * s))};
  DynamicsModel m;
  m.pos_dim = 3;
  m.v_max = s;
  m.L_max = 10.0 * s;
  m.initial_state = Vec(dom.source().points().col(0));
  SolverConfig c;
  c.horizon = 64;
  c.inner.max_iterations = 100;
  c.annealing.h0 = 0.05;
  c.annealing.h_phys_star = 1.5e-6 * dom.extent() * dom.extent();
  const auto r = solve(dom, m, c);
  collected.add("annealing e=1000", r);
  const bool feasible = r.converged && r.residuals.max_eq_violation <= kFeasTol &&
                        r.residuals.max_ineq_violation <= kFeasTol;
  const bool endpoints = std::abs(r.schedule.front() - 0.05) <= kScheduleRelTol * 0.05 &&
                         std::abs(r.schedule.back() / 1.5e-6 - 1.0) <= kScheduleRelTol;
  return {ok && feasible && endpoints,
          "ends " + fmt(h.front(), 6) + " .. " + fmt(h.back(), 6) + ", ratio dev " + fmt(ratio_dev) + "; e=" +
              fmt(dom.extent(), 6) + " solve " + (r.converged ? "converged" : "not converged") + ", eq " +
              fmt(r.residuals.max_eq_violation) + ", ineq " + fmt(r.residuals.max_ineq_violation)};
}

Outcome adaptive_dt(Collected& collected) {
  const NormalizedDomain dom(load_samples(testing::data_path("two_clusters.csv")));
  DynamicsModel m;
  m.v_max = 1.0;
  m.L_max = 20.0;
  SolverConfig c;
  c.horizon = 40;
  c.annealing.h_phys_star = 1.5 * 0.1 * 0.1;
  int wins = 0;
  std::string detail = "adaptive/fixed %:";
  for (int seed = 1; seed <= 5; ++seed) {
    c.rng_seed = static_cast<std::uint64_t>(seed);
    const auto cmp = fixed_vs_adaptive_dt(dom, m, c, 0.1);
    collected.add("adaptive dt seed " + std::to_string(seed), cmp.adaptive);
    collected.add("fixed dt seed " + std::to_string(seed), cmp.fixed);
    const double a = cmp.adaptive_coverage.covered_fraction, f = cmp.fixed_coverage.covered_fraction;
    if (a >= f) ++wins;
    detail += " " + fmt(100 * a, 3) + "/" + fmt(100 * f, 3);
  }
  return {wins >= kDtMinWins, detail + "; adaptive wins or ties " + std::to_string(wins) + "/5"};
}

Outcome feasibility(Collected& collected) {
  // Add the small fixtures so every bundled domain is exercised.
  for (const char* name : {"unit_square_grid.csv", "tight_cluster.csv"}) {
    const NormalizedDomain dom(load_samples(testing::data_path(name)));
    DynamicsModel m;
    m.L_max = 3.0 * dom.extent();
    m.v_max = dom.extent();
    SolverConfig c;
    c.horizon = 48;
    c.annealing.h_phys_star = 1.5e-2 * dom.extent() * dom.extent();
    collected.add(name, solve(dom, m, c));
  }
  int converged = 0, bad = 0, total = 0;
  double worst_eq = 0.0, worst_ineq = 0.0;
  std::string failures;
  for (const auto& [label, r] : collected.reports) {
    ++total;
    const bool dt_ok = (r.trajectory.dt().array() > 0.0).all();
    if (!dt_ok) {
      ++bad;
      failures += " " + label + "(dt)";
    }
    if (!r.converged) continue;
    ++converged;
    worst_eq = std::max(worst_eq, r.residuals.max_eq_violation);
    worst_ineq = std::max(worst_ineq, r.residuals.max_ineq_violation);
    if (r.residuals.max_eq_violation > kFeasTol || r.residuals.max_ineq_violation > kFeasTol) {
      ++bad;
      failures += " " + label;
    }
  }
  return {bad == 0 && converged > 0,
          std::to_string(converged) + "/" + std::to_string(total) + " solves converged; worst eq " + fmt(worst_eq) +
              ", ineq " + fmt(worst_ineq) + (failures.empty() ? "" : "; violations:" + failures)};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("ergocov_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  cli::json doc = {{"schema_version", cli::kSchemaVersion},
                   {"domain", {{"file", testing::data_path("two_clusters.csv")}}},
                   {"model", {{"v_max", 1.0}, {"L_max", 15.0}}},
                   {"solver", {{"horizon", 48}, {"h_phys_star", 0.015}}},
                   {"seed", 11}};
  cli::write_atomic(cfg, doc.dump(2));
  std::string files[2];
  for (int run = 0; run < 2; ++run) {
    const std::string out = (dir / ("run" + std::to_string(run))).string();
    const std::string cfg_s = cfg.string();
    const char* argv[] = {"ergocov", "--config", cfg_s.c_str(), "--jobs", "1", "--output-dir", out.c_str(), "plan"};
    std::ostringstream o, e;
    const int code = cli::run_cli(8, argv, o, e);
    if (code == cli::kInputError) return {false, "plan failed: " + e.str()};
    files[run] = cli::read_file(fs::path(out) / "plan_trajectory.csv");
  }
  fs::remove_all(dir);
  const bool same = !files[0].empty() && files[0] == files[1];
  return {same, "two plan runs, trajectory CSV " + std::to_string(files[0].size()) + " bytes, sha256 " +
                    cli::sha256_hex(files[0]).substr(0, 16) + (same ? " identical" : " DIFFERENT")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_sec;
    std::function<Outcome()> run;
  };
  Collected collected;
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 30.0, gradient_correctness},
      {2, "surrogate nonnegativity and shared minimum", 10.0, surrogate_nonnegativity},
      {3, "gradient bound 6D/h", 60.0, gradient_bound},
      {4, "objective scale invariance", 5.0, objective_scale_invariance},
      {5, "end-to-end scale sweep", 300.0, [&] { return scale_sweep(collected); }},
      {6, "annealing schedule", 60.0, [&] { return annealing_schedule(collected); }},
      {7, "adaptive vs fixed dt", 120.0, [&] { return adaptive_dt(collected); }},
      {8, "constraint feasibility", 120.0, [&] { return feasibility(collected); }},
      {9, "determinism", 60.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = seconds_since(t0);
    const bool in_time = sec <= c.limit_sec;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::cout << "criterion " << c.id << " " << (pass ? "PASS" : "FAIL") << " " << c.name << ": " << o.detail
              << " [" << fmt(sec, 3) << " s, limit " << fmt(c.limit_sec, 4) << " s" << (in_time ? "" : ", TOO SLOW")
              << "]" << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : "acceptance: all criteria pass")
            << std::endl;
  return failed ? 1 : 0;
}
