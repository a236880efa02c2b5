#include "ergocov/solver.hpp"

#include "ergocov/diagnostics.hpp"
#include "ergocov/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <sstream>

namespace ergocov {

std::vector<double> anneal_sequence(const AnnealingSchedule& s) {
  if (s.K < 2) throw InvalidSchedule("annealing needs K >= 2 stages");
  if (!(s.h0 > 0.0) || !(s.h_phys_star > 0.0) || !(s.extent > 0.0) || !std::isfinite(s.h0) ||
      !std::isfinite(s.h_phys_star))
    throw InvalidSchedule("annealing parameters must be positive and finite");
  const double target = s.h_norm_star();
  if (!(target > 0.0)) throw InvalidSchedule("target normalized bandwidth underflows");
  std::vector<double> h(static_cast<std::size_t>(s.K));
  const double log_ratio = std::log(target / s.h0);
  for (int k = 0; k < s.K; ++k) h[k] = s.h0 * std::exp(log_ratio * k / (s.K - 1));
  h.front() = s.h0;
  h.back() = target;
  return h;
}

std::string to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::log_surrogate ? "log_surrogate" : "raw_emmd";
}

ObjectiveKind objective_kind_from_string(const std::string& name) {
  if (name == "log_surrogate") return ObjectiveKind::log_surrogate;
  if (name == "raw_emmd") return ObjectiveKind::raw_emmd;
  throw InvalidArgument("unknown objective '" + name + "' (expected log_surrogate or raw_emmd)");
}

std::string to_string(InnerStatus status) {
  switch (status) {
    case InnerStatus::converged: return "converged";
    case InnerStatus::max_iterations: return "max_iterations";
    case InnerStatus::line_search_stall: return "line_search_stall";
    case InnerStatus::non_finite: return "non_finite";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (horizon < 2) throw InvalidArgument("horizon must be at least 2");
  if (!(al.mu0 > 0.0)) throw InvalidArgument("initial penalty must be positive");
  if (!(al.gamma > 1.0)) throw InvalidArgument("penalty growth must exceed 1");
  if (!(al.eps_eq > 0.0) || !(al.eps_ineq > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (al.rounds_per_stage < 1) throw InvalidArgument("at least one AL round per stage is required");
  if (inner.max_iterations < 1 || !(inner.grad_tol > 0.0) || !(inner.value_tol >= 0.0)) throw InvalidArgument("invalid inner parameters");
  if (!(inner.armijo > 0.0 && inner.armijo < 1.0) || !(inner.backtrack > 0.0 && inner.backtrack < 1.0))
    throw InvalidArgument("line-search parameters must lie in (0, 1)");
  if (anneal) {
    (void)anneal_sequence(annealing);
  } else if (!fixed_bandwidth || !(*fixed_bandwidth > 0.0)) {
    throw InvalidArgument("a positive fixed_bandwidth is required when annealing is off");
  }
}

Multipliers Multipliers::zeros(const DynamicsModel& model, Eigen::Index horizon) {
  return {Vec::Zero(static_cast<Eigen::Index>(equality_count(model, horizon))),
          Vec::Zero(static_cast<Eigen::Index>(inequality_count(model, horizon)))};
}

AugmentedLagrangianEval augmented_lagrangian_value_and_grad(const DynamicsModel& model, const Trajectory& traj,
                                                            const Multipliers& mult, double penalty,
                                                            const ObjectiveContext& ctx) {
  if (!ctx.target) throw InvalidArgument("objective context has no target");
  if (penalty < 0.0) throw InvalidArgument("penalty must be nonnegative");
  check_trajectory(model, traj);
  const Eigen::Index T = traj.horizon();

  AugmentedLagrangianEval out;
  const Vec offset = ctx.offset.size() ? ctx.offset : Vec::Zero(model.pos_dim);
  const Points omegas = (traj.positions(model.pos_dim).colwise() - offset) / ctx.extent;
  const ObjectiveEval obj = ctx.kind == ObjectiveKind::log_surrogate
                                ? log_emmd(omegas, *ctx.target, ctx.kernel, ctx.include_constant)
                                : emmd(omegas, *ctx.target, ctx.kernel);
  out.objective = obj.value;
  out.grad_states = pullback_position_gradient(model, obj.grad_omegas, 1.0 / ctx.extent);
  out.grad_log_dt = Vec::Zero(T - 1);

  out.residual = evaluate_constraints(model, traj);
  const Vec& f = out.residual.equality;
  const Vec& h = out.residual.inequality;
  if (mult.equality.size() != f.size() || mult.inequality.size() != h.size())
    throw InvalidArgument("multipliers are not sized to the constraints");

  double value = obj.value + mult.equality.dot(f) + 0.5 * penalty * f.squaredNorm();
  const Vec eq_weights = mult.equality + penalty * f;

  Vec ineq_weights(h.size());
  if (penalty > 0.0) {
    const Vec shifted = (mult.inequality + penalty * h).cwiseMax(0.0);
    value += (shifted.squaredNorm() - mult.inequality.squaredNorm()) / (2.0 * penalty);
    ineq_weights = shifted;
  } else {
    for (Eigen::Index j = 0; j < h.size(); ++j) {
      const bool active = mult.inequality(j) > 0.0;
      ineq_weights(j) = active ? mult.inequality(j) : 0.0;
      if (active) value += mult.inequality(j) * h(j);
    }
  }
  out.value = value;

  Vec grad = Vec::Zero(decision_size(model, T));
  if (f.size()) grad += equality_jacobian(model, traj).transpose() * eq_weights;
  if (h.size()) grad += inequality_jacobian(model, traj).transpose() * ineq_weights;
  out.grad_states += Eigen::Map<const Eigen::MatrixXd>(grad.data(), model.state_dim(), T);
  out.grad_log_dt += grad.tail(T - 1);
  return out;
}

InnerResult inner_minimize(const ValueAndGradient& f, Vec x0, const InnerParams& p) {
  InnerResult res;
  res.x = std::move(x0);
  Vec g(res.x.size());
  double fx = f(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(fx) || !g.allFinite()) {
    res.value = fx;
    res.status = InnerStatus::non_finite;
    return res;
  }
  res.accepted_values.push_back(fx);

  std::deque<std::pair<Vec, Vec>> history;  // (s, y)
  double last_step = 0.0;
  Vec g_new(res.x.size());

  for (int it = 0; it < p.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= p.grad_tol) {
      res.status = InnerStatus::converged;
      break;
    }

    Vec d;
    if (p.quasi_newton && !history.empty()) {
      // L-BFGS two-loop recursion.
      Vec q = g;
      std::vector<double> a(history.size());
      for (std::size_t i = history.size(); i-- > 0;) {
        const auto& [s, y] = history[i];
        a[i] = s.dot(q) / y.dot(s);
        q -= a[i] * y;
      }
      const auto& [s_last, y_last] = history.back();
      q *= s_last.dot(y_last) / y_last.squaredNorm();
      for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& [s, y] = history[i];
        const double b = y.dot(q) / y.dot(s);
        q += (a[i] - b) * s;
      }
      d = -q;
    } else {
      d = -g;
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
      history.clear();
    }

    double alpha;
    if (p.quasi_newton && !history.empty()) {
      alpha = 1.0;
    } else if (last_step > 0.0) {
      alpha = std::min(1.0, 2.0 * last_step);
    } else {
      alpha = std::min(1.0, 1e-2 / d.lpNorm<Eigen::Infinity>());
    }

    bool accepted = false;
    Vec x_new;
    double f_new = 0.0;
    for (int bt = 0; bt < p.max_backtracks; ++bt) {
      x_new = res.x + alpha * d;
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= fx + p.armijo * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= p.backtrack;
    }
    if (!accepted) {
      res.status = InnerStatus::line_search_stall;
      break;
    }

    Vec s = x_new - res.x;
    Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(history.size()) > p.memory) history.pop_front();
    }
    last_step = (p.quasi_newton && !history.empty()) ? 0.0 : alpha;
    res.x = std::move(x_new);
    const bool flat = fx - f_new <= p.value_tol * std::max({std::abs(fx), std::abs(f_new), 1.0});
    fx = f_new;
    g = g_new;
    res.accepted_values.push_back(fx);
    res.iterations = it + 1;
    if (flat && g.lpNorm<Eigen::Infinity>() <= std::sqrt(p.grad_tol)) {
      res.status = InnerStatus::converged;
      break;
    }
    if (it + 1 == p.max_iterations) res.status = InnerStatus::max_iterations;
  }
  res.value = fx;
  return res;
}

bool has_rate_inequalities(const DynamicsModel& model) {
  return model.velocity_bound != VelocityBound::step_length ||
         (model.kind == DynamicsKind::double_integrator && model.a_max);
}

void eliminate_rates(const DynamicsModel& model, Trajectory& traj, const Vec& lambda, double penalty) {
  if (!(penalty > 0.0)) throw InvalidArgument("rate elimination needs a positive penalty");
  const Eigen::Index T = traj.horizon();
  const int n = model.state_dim(), d = model.pos_dim;
  const Vec f = equality_residuals(model, traj);
  if (f.size() == 0) return;
  if (lambda.size() != f.size()) throw InvalidArgument("multipliers are not sized to the constraints");
  const Eigen::SparseMatrix<double> J = equality_jacobian(model, traj);

  // Column selection of the rate entries of the packed vector.
  const Eigen::Index nr = static_cast<Eigen::Index>(n - d) * T;
  std::vector<Eigen::Triplet<double>> sel;
  sel.reserve(static_cast<std::size_t>(nr));
  Eigen::Index k = 0;
  for (Eigen::Index t = 0; t < T; ++t)
    for (int r = d; r < n; ++r) sel.emplace_back(t * n + r, k++, 1.0);
  Eigen::SparseMatrix<double> S(J.cols(), nr);
  S.setFromTriplets(sel.begin(), sel.end());
  const Eigen::SparseMatrix<double> JR = J * S;

  // f is affine in the rates, so one least-squares solve is exact. The tiny
  // ridge pins rates that no defect touches.
  Eigen::SparseMatrix<double> A = JR.transpose() * JR;
  for (Eigen::Index i = 0; i < nr; ++i) A.coeffRef(i, i) += 1e-12;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NumericalError("rate elimination system is singular");
  const Vec step = ldlt.solve(-(JR.transpose() * (f + lambda / penalty)));
  k = 0;
  for (Eigen::Index t = 0; t < T; ++t)
    for (int r = d; r < n; ++r) traj.states(r, t) += step(k++);
}

Trajectory normalize_trajectory(const DynamicsModel& model, const Trajectory& traj, double extent,
                                const Vec& offset) {
  Trajectory out = traj;
  const int d = model.pos_dim;
  out.states.topRows(d) = ((traj.states.topRows(d).colwise() - offset) / extent).unaryExpr(&snap_coordinate);
  out.states.bottomRows(model.state_dim() - d) =
      (traj.states.bottomRows(model.state_dim() - d) / extent).unaryExpr(&snap_relative);
  out.log_dt = traj.log_dt.unaryExpr(&snap_coordinate);
  return out;
}

Trajectory denormalize_trajectory(const DynamicsModel& model, const Trajectory& traj, double extent,
                                  const Vec& offset) {
  Trajectory out = traj;
  const int d = model.pos_dim;
  out.states.topRows(d) = (traj.states.topRows(d) * extent).colwise() + offset;
  out.states.bottomRows(model.state_dim() - d) *= extent;
  return out;
}

SolverReport solve(const NormalizedDomain& domain, const DynamicsModel& model, const SolverConfig& config) {
  config.validate();
  model.validate();
  const Trajectory seed = seed_trajectory(model, domain, config.horizon, config.seed_strategy, config.rng_seed);
  return solve_from(domain, model, config, seed);
}

namespace {

double violation(const ConstraintResidual& r) { return std::max(r.max_eq_violation, r.max_ineq_violation); }

Vec variable_scaling(const DynamicsModel& model, Eigen::Index horizon, double dt_ref) {
  const int d = model.pos_dim;
  Eigen::MatrixXd s = Eigen::MatrixXd::Ones(model.state_dim(), horizon);
  s.middleRows(d, d).setConstant(1.0 / dt_ref);
  if (model.kind == DynamicsKind::double_integrator) s.middleRows(2 * d, d).setConstant(1.0 / (dt_ref * dt_ref));
  Vec out(decision_size(model, horizon));
  out.head(s.size()) = Eigen::Map<const Vec>(s.data(), s.size());
  out.tail(horizon - 1).setOnes();
  return out;
}

}  // namespace

SolverReport solve_from(const NormalizedDomain& domain, const DynamicsModel& model, const SolverConfig& config,
                        const Trajectory& initial) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  model.validate();
  check_trajectory(model, initial);
  if (model.pos_dim != domain.dim()) throw InvalidArgument("model position dimension does not match domain");

  // Decision variables always live on the normalized domain. The objective
  // sees normalized positions, or physical ones for the unnormalized baseline.
  const NormalizedDomain work = config.normalize_domain ? domain : NormalizedDomain::identity(domain.source());
  const double extent = domain.extent();
  const Vec offset = domain.offset();
  const DynamicsModel nmodel = model.normalized(extent, offset);
  const ErgodicTarget target(work);
  const Eigen::Index T = initial.horizon();

  SolverReport report;
  report.extent = extent;
  report.offset = offset;
  if (config.anneal) {
    AnnealingSchedule sched = config.annealing;
    sched.extent = work.extent();
    report.schedule = anneal_sequence(sched);
  } else {
    report.schedule = {*config.fixed_bandwidth};
  }

  Trajectory traj = normalize_trajectory(model, initial, extent, offset);
  const bool fixed_dt = nmodel.fixed_dt();
  if (fixed_dt) traj.log_dt.setConstant(std::log(nmodel.dt_min));

  Multipliers mult = Multipliers::zeros(nmodel, T);
  double mu = config.al.mu0;
  ObjectiveContext ctx;
  ctx.target = &target;
  ctx.kind = config.objective;
  // omega = (x - ctx.offset) / ctx.extent maps the normalized iterate into
  // the objective's coordinates.
  ctx.extent = work.extent() / extent;
  ctx.offset = (work.offset() - offset) / extent;

  // Diagonal variable scaling: rates are measured in units of a reference
  // step so every block of the dynamics defects has unit sensitivity.
  const double dt_ref = std::exp(traj.log_dt.mean());
  const Vec scaling = variable_scaling(nmodel, T, dt_ref);
  const bool reduced = config.inner.eliminate_rates && !has_rate_inequalities(nmodel);
  const int d = nmodel.pos_dim;
  const Eigen::Index np = static_cast<Eigen::Index>(d) * T;

  // Rates carried between evaluations in reduced mode; the elimination only
  // overwrites rates that some defect constrains.
  Trajectory carrier = traj;
  auto expand = [&](const Vec& z) -> Trajectory {
    if (!reduced) return unpack(nmodel, T, scaling.cwiseProduct(z));
    Trajectory t = carrier;
    t.states.topRows(d) = Eigen::Map<const Eigen::MatrixXd>(z.data(), d, T);
    t.log_dt = z.tail(T - 1);
    eliminate_rates(nmodel, t, mult.equality, mu);
    return t;
  };
  auto contract = [&](const Trajectory& t) -> Vec {
    if (!reduced) return pack(t).cwiseQuotient(scaling);
    Vec z(np + T - 1);
    Eigen::Map<Eigen::MatrixXd>(z.data(), d, T) = t.states.topRows(d);
    z.tail(T - 1) = t.log_dt;
    return z;
  };

  int stage = 0, round = 0;
  auto evaluate = [&](const Vec& z, Vec& grad) -> double {
    AugmentedLagrangianEval e;
    try {
      if (!z.allFinite()) throw InvalidArgument("non-finite iterate");
      e = augmented_lagrangian_value_and_grad(nmodel, expand(z), mult, mu, ctx);
    } catch (const Error&) {
      // Non-finite trial points surface as a failed evaluation.
      grad = Vec::Constant(z.size(), std::numeric_limits<double>::quiet_NaN());
      return std::numeric_limits<double>::quiet_NaN();
    }
    grad.resize(z.size());
    if (reduced) {
      const Eigen::MatrixXd gp = e.grad_states.topRows(d);
      grad.head(np) = Eigen::Map<const Vec>(gp.data(), np);
    } else {
      grad.head(e.grad_states.size()) = Eigen::Map<const Vec>(e.grad_states.data(), e.grad_states.size());
    }
    grad.tail(T - 1) = fixed_dt ? Vec::Zero(T - 1) : e.grad_log_dt;
    if (!reduced) grad.array() *= scaling.array();
    report.trace.push_back({stage, ctx.kernel.bandwidth(), round, 0, e.objective, e.value});
    return e.value;
  };

  Vec x = contract(traj);
  double prev_violation = violation(evaluate_constraints(nmodel, traj));
  bool aborted = false;
  const int K = static_cast<int>(report.schedule.size());
  for (stage = 0; stage < K && !aborted; ++stage) {
    ctx.kernel = KernelConfig::squared_euclidean(report.schedule[stage]);
    const bool last = stage + 1 == K;
    const int max_rounds = config.al.rounds_per_stage + (last ? config.al.final_rounds : 0);
    for (round = 0; round < max_rounds; ++round) {
      const std::size_t trace_begin = report.trace.size();
      InnerResult inner = inner_minimize(evaluate, x, config.inner);
      for (std::size_t i = trace_begin, k = 0; i < report.trace.size(); ++i, ++k)
        report.trace[i].inner_iteration = static_cast<int>(k);
      if (inner.status == InnerStatus::non_finite) {
        // Retry once from the current iterate with a halved penalty.
        mu = std::max(config.al.mu0, 0.5 * mu);
        inner = inner_minimize(evaluate, x, config.inner);
        if (inner.status == InnerStatus::non_finite) {
          report.message = "objective became non-finite at stage " + std::to_string(stage);
          diagnose(Verbosity::info, report.message);
          aborted = true;
          break;
        }
      }
      x = inner.x;

      const Trajectory cur = expand(x);
      carrier = cur;
      const ConstraintResidual res = evaluate_constraints(nmodel, cur);
      mult.equality += mu * res.equality;
      mult.inequality = (mult.inequality + mu * res.inequality).cwiseMax(0.0);
      const double viol = violation(res);
      const bool within_tol = res.max_eq_violation <= config.al.eps_eq && res.max_ineq_violation <= config.al.eps_ineq;
      if (!within_tol && viol > config.al.required_reduction * prev_violation) mu = std::min(config.al.gamma * mu, config.al.mu_max);
      prev_violation = viol;

      std::ostringstream msg;
      msg << "stage " << stage << " h=" << ctx.kernel.bandwidth() << " round " << round << " inner "
          << to_string(inner.status) << " it=" << inner.iterations << " L=" << inner.value << " viol=" << viol
          << " mu=" << mu;
      diagnose(Verbosity::debug, msg.str());

      if (last && round + 1 >= config.al.rounds_per_stage && within_tol) break;
    }
  }

  const Trajectory final_norm = reduced ? carrier : unpack(nmodel, T, scaling.cwiseProduct(x));
  report.residuals = evaluate_constraints(nmodel, final_norm);
  report.converged = !aborted && report.residuals.max_eq_violation <= config.al.eps_eq &&
                     report.residuals.max_ineq_violation <= config.al.eps_ineq;
  {
    ctx.kernel = KernelConfig::squared_euclidean(report.schedule.back());
    const Points omegas = (final_norm.positions(nmodel.pos_dim).colwise() - ctx.offset) / ctx.extent;
    report.final_objective = config.objective == ObjectiveKind::log_surrogate
                                 ? log_emmd(omegas, target, ctx.kernel).value
                                 : emmd(omegas, target, ctx.kernel).value;
  }
  report.final_penalty = mu;
  report.trajectory = denormalize_trajectory(model, final_norm, extent, offset);
  report.evaluations = static_cast<long>(report.trace.size());
  if (report.message.empty())
    report.message = report.converged ? "converged" : "constraint tolerances not met";
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace ergocov
