#pragma once

#include "ergocov/dynamics.hpp"
#include "ergocov/objective.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ergocov {

/// Geometric bandwidth continuation from h0 to h_phys_star / extent^2.
struct AnnealingSchedule {
  double h0 = 0.05;
  double h_phys_star = 1.0;  // m^2, squared-distance units
  int K = 10;
  double extent = 1.0;

  double h_norm_star() const { return h_phys_star / (extent * extent); }
};

/// h_k = h0 * (h_norm_star / h0)^(k / (K - 1)), endpoints exact.
std::vector<double> anneal_sequence(const AnnealingSchedule& schedule);

struct AugmentedLagrangianParams {
  double mu0 = 10.0;
  double gamma = 10.0;
  double mu_max = 1e12;
  int rounds_per_stage = 4;
  // Extra rounds allowed at the final bandwidth while still infeasible.
  int final_rounds = 30;
  double eps_eq = 1e-6;
  double eps_ineq = 1e-6;
  // The penalty grows unless the violation shrank by at least this factor.
  double required_reduction = 0.25;
};

struct InnerParams {
  int max_iterations = 200;
  double grad_tol = 1e-8;
  double value_tol = 1e-10;  // stop when the relative decrease of one step falls below this
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  bool quasi_newton = true;  // L-BFGS directions instead of steepest descent
  int memory = 10;
  // Minimize exactly over velocity/acceleration states (they enter the
  // Lagrangian only through affine dynamics defects) when no inequality
  // involves them; the line search then runs over positions and log dt.
  bool eliminate_rates = true;
};

enum class ObjectiveKind { log_surrogate, raw_emmd };

std::string to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(const std::string& name);

struct SolverConfig {
  Eigen::Index horizon = 64;
  AnnealingSchedule annealing;
  AugmentedLagrangianParams al;
  InnerParams inner;
  ObjectiveKind objective = ObjectiveKind::log_surrogate;
  bool normalize_domain = true;
  bool anneal = true;
  // Bandwidth used when annealing is off, in the objective's coordinates
  // (normalized when normalize_domain, physical m^2 otherwise).
  std::optional<double> fixed_bandwidth;
  SeedStrategy seed_strategy = SeedStrategy::random_jitter;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Everything the objective needs besides the trajectory. Model positions are
/// mapped to objective coordinates by (p - offset) / extent.
struct ObjectiveContext {
  const ErgodicTarget* target = nullptr;
  KernelConfig kernel = KernelConfig::squared_euclidean(1.0);
  ObjectiveKind kind = ObjectiveKind::log_surrogate;
  bool include_constant = true;
  double extent = 1.0;
  Vec offset;
};

struct Multipliers {
  Vec equality;    // lambda
  Vec inequality;  // sigma >= 0

  static Multipliers zeros(const DynamicsModel& model, Eigen::Index horizon);
};

struct AugmentedLagrangianEval {
  double value = 0.0;
  double objective = 0.0;
  Eigen::MatrixXd grad_states;
  Vec grad_log_dt;
  ConstraintResidual residual;
};

/// L = E + lambda'f + (mu/2)|f|^2 + (1/(2 mu)) (|max(0, sigma + mu h)|^2 - |sigma|^2).
/// At mu = 0 the inequality part reduces to its limit sigma'h over sigma > 0.
AugmentedLagrangianEval augmented_lagrangian_value_and_grad(const DynamicsModel& model, const Trajectory& traj,
                                                            const Multipliers& multipliers, double penalty,
                                                            const ObjectiveContext& context);

using ValueAndGradient = std::function<double(const Vec& x, Vec& grad)>;

enum class InnerStatus { converged, max_iterations, line_search_stall, non_finite };

std::string to_string(InnerStatus status);

struct InnerResult {
  Vec x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  InnerStatus status = InnerStatus::max_iterations;
  std::vector<double> accepted_values;  // includes the starting value
};

/// Gradient descent (or L-BFGS) with Armijo backtracking. Accepted values are
/// monotone non-increasing.
InnerResult inner_minimize(const ValueAndGradient& f, Vec x0, const InnerParams& params);

struct TraceEntry {
  int stage = 0;
  double bandwidth = 0.0;
  int al_round = 0;
  int inner_iteration = 0;
  double objective = 0.0;
  double al_value = 0.0;
};

struct SolverReport {
  Trajectory trajectory;  // physical units
  std::vector<TraceEntry> trace;  // one entry per objective evaluation
  std::vector<double> schedule;
  ConstraintResidual residuals;  // normalized residual scale
  bool converged = false;
  double final_objective = 0.0;
  double final_penalty = 0.0;
  double wall_time = 0.0;
  long evaluations = 0;
  double extent = 1.0;
  Vec offset;
  std::string message;
};

SolverReport solve(const NormalizedDomain& domain, const DynamicsModel& model, const SolverConfig& config);

/// Same as solve() but starting from a caller-provided physical trajectory.
SolverReport solve_from(const NormalizedDomain& domain, const DynamicsModel& model, const SolverConfig& config,
                        const Trajectory& initial);

/// True when some inequality constraint depends on velocity or acceleration
/// states (state-speed or acceleration bounds).
bool has_rate_inequalities(const DynamicsModel& model);

/// Replaces the velocity/acceleration states by the minimizer of
/// lambda'f + (mu/2)|f|^2 over them, positions and time steps held fixed.
void eliminate_rates(const DynamicsModel& model, Trajectory& traj, const Vec& lambda, double penalty);

/// Physical <-> normalized state conversion for a model (positions shifted and
/// scaled, rates scaled, time steps unchanged).
Trajectory normalize_trajectory(const DynamicsModel& model, const Trajectory& traj, double extent, const Vec& offset);
Trajectory denormalize_trajectory(const DynamicsModel& model, const Trajectory& traj, double extent,
                                  const Vec& offset);

}  // namespace ergocov
