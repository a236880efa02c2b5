#pragma once

#include "ergocov/domain.hpp"
#include "ergocov/objective.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <optional>
#include <string>

namespace ergocov {

enum class DynamicsKind { single_integrator, double_integrator };

/// Which velocity bound to emit: the step-length bound
/// |p_{t+1} - p_t| <= v_max * dt_t, the state-speed bound |v_t| <= v_max, or both.
enum class VelocityBound { step_length, state_speed, both };

std::string to_string(DynamicsKind kind);
std::string to_string(VelocityBound bound);
DynamicsKind dynamics_kind_from_string(const std::string& name);
VelocityBound velocity_bound_from_string(const std::string& name);

/// Euler-integrated point-mass models. States stack [p, v] (single integrator)
/// or [p, v, a] (double integrator); positions are the first `pos_dim` entries.
struct DynamicsModel {
  DynamicsKind kind = DynamicsKind::single_integrator;
  int pos_dim = 2;
  double v_max = 1.0;
  std::optional<double> a_max;
  std::optional<double> L_max;
  std::optional<double> T_max;  // total-time budget, off by default
  double dt_min = 1e-3;
  double dt_max = 1e3;
  VelocityBound velocity_bound = VelocityBound::step_length;
  // A boundary vector of size pos_dim fixes the position only; of size
  // state_dim() it fixes the whole state.
  std::optional<Vec> initial_state;
  std::optional<Vec> final_state;

  int state_dim() const { return kind == DynamicsKind::single_integrator ? 2 * pos_dim : 3 * pos_dim; }
  bool fixed_dt() const { return dt_min == dt_max; }
  void validate() const;

  /// Model expressed in normalized units: lengths divided by `extent`,
  /// boundary positions shifted by `offset`. Times are unchanged.
  DynamicsModel normalized(double extent, const Vec& offset) const;
};

struct Trajectory {
  Eigen::MatrixXd states;  // state_dim x T
  Vec log_dt;              // T - 1

  Eigen::Index horizon() const { return states.cols(); }
  Vec dt() const { return log_dt.array().exp().matrix(); }
  Points positions(int pos_dim) const { return states.topRows(pos_dim); }
};

void check_trajectory(const DynamicsModel& model, const Trajectory& traj);

/// Decision-vector layout: column-major states followed by log_dt.
Eigen::Index decision_size(const DynamicsModel& model, Eigen::Index horizon);
Vec pack(const Trajectory& traj);
Trajectory unpack(const DynamicsModel& model, Eigen::Index horizon, const Vec& x);

struct ConstraintResidual {
  Vec equality;
  Vec inequality;
  double max_eq_violation = 0.0;
  double max_ineq_violation = 0.0;
};

std::size_t equality_count(const DynamicsModel& model, Eigen::Index horizon);
std::size_t inequality_count(const DynamicsModel& model, Eigen::Index horizon);

/// Dynamics defects per step followed by fixed-boundary defects.
Vec equality_residuals(const DynamicsModel& model, const Trajectory& traj);
/// Values h(x) with h <= 0 feasible: velocity bounds, log-dt bounds, then the
/// optional length, time, speed and acceleration budgets.
Vec inequality_residuals(const DynamicsModel& model, const Trajectory& traj);
ConstraintResidual evaluate_constraints(const DynamicsModel& model, const Trajectory& traj);

/// Jacobians with respect to the packed decision vector.
Eigen::SparseMatrix<double> equality_jacobian(const DynamicsModel& model, const Trajectory& traj);
Eigen::SparseMatrix<double> inequality_jacobian(const DynamicsModel& model, const Trajectory& traj);

/// Normalized positions and the (constant) Jacobian scale 1/e of the map
/// state -> normalized position.
struct SearchSpaceProjection {
  TrajectoryPoints omegas;
  double jacobian_scale;
};

SearchSpaceProjection project_to_search_space(const DynamicsModel& model, const Trajectory& traj,
                                              const NormalizedDomain& domain);

/// Chain rule: maps d/d(omega) (pos_dim x T) to d/d(states) (state_dim x T).
Eigen::MatrixXd pullback_position_gradient(const DynamicsModel& model, const Points& grad_omegas,
                                           double jacobian_scale);

enum class SeedStrategy { line, lawnmower_2d, random_jitter };

std::string to_string(SeedStrategy s);
SeedStrategy seed_strategy_from_string(const std::string& name);

/// Deterministic initial guess inside the sample bounding box, in physical units.
Trajectory seed_trajectory(const DynamicsModel& model, const NormalizedDomain& domain, Eigen::Index horizon,
                           SeedStrategy strategy, std::uint64_t rng_seed);

}  // namespace ergocov
