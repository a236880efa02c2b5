#include "ergocov/dynamics.hpp"

#include "ergocov/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace ergocov {

std::string to_string(DynamicsKind kind) {
  return kind == DynamicsKind::single_integrator ? "single_integrator" : "double_integrator";
}

std::string to_string(VelocityBound bound) {
  switch (bound) {
    case VelocityBound::step_length: return "step_length";
    case VelocityBound::state_speed: return "state_speed";
    case VelocityBound::both: return "both";
  }
  return "unknown";
}

DynamicsKind dynamics_kind_from_string(const std::string& name) {
  if (name == "single_integrator") return DynamicsKind::single_integrator;
  if (name == "double_integrator") return DynamicsKind::double_integrator;
  throw InvalidArgument("unknown dynamics model '" + name + "' (expected single_integrator or double_integrator)");
}

VelocityBound velocity_bound_from_string(const std::string& name) {
  if (name == "step_length") return VelocityBound::step_length;
  if (name == "state_speed") return VelocityBound::state_speed;
  if (name == "both") return VelocityBound::both;
  throw InvalidArgument("unknown velocity bound '" + name + "' (expected step_length, state_speed or both)");
}

void DynamicsModel::validate() const {
  if (pos_dim < 1) throw InvalidArgument("pos_dim must be positive");
  if (!(v_max > 0.0)) throw InvalidArgument("v_max must be positive");
  if (a_max && !(*a_max > 0.0)) throw InvalidArgument("a_max must be positive");
  if (L_max && !(*L_max >= 0.0)) throw InvalidArgument("L_max must be nonnegative");
  if (T_max && !(*T_max > 0.0)) throw InvalidArgument("T_max must be positive");
  if (!(dt_min > 0.0) || !(dt_min <= dt_max) || !std::isfinite(dt_max))
    throw InvalidArgument("dt bounds must satisfy 0 < dt_min <= dt_max < inf");
  auto check_boundary = [&](const std::optional<Vec>& b, const char* what) {
    if (b && b->size() != pos_dim && b->size() != state_dim())
      throw InvalidArgument(std::string(what) + " must have pos_dim or state_dim entries");
    if (b && !b->allFinite()) throw InvalidArgument(std::string(what) + " is not finite");
  };
  check_boundary(initial_state, "initial_state");
  check_boundary(final_state, "final_state");
}

DynamicsModel DynamicsModel::normalized(double extent, const Vec& offset) const {
  if (offset.size() != pos_dim) throw InvalidArgument("offset dimension does not match pos_dim");
  DynamicsModel m = *this;
  m.v_max = snap_relative(v_max / extent);
  if (a_max) m.a_max = snap_relative(*a_max / extent);
  if (L_max) m.L_max = snap_relative(*L_max / extent);
  auto norm_boundary = [&](std::optional<Vec>& b) {
    if (!b) return;
    Vec& v = *b;
    v.head(pos_dim) = ((v.head(pos_dim) - offset) / extent).unaryExpr(&snap_coordinate);
    if (v.size() > pos_dim) v.tail(v.size() - pos_dim) = (v.tail(v.size() - pos_dim) / extent).unaryExpr(&snap_relative);
  };
  norm_boundary(m.initial_state);
  norm_boundary(m.final_state);
  return m;
}

void check_trajectory(const DynamicsModel& model, const Trajectory& traj) {
  if (traj.horizon() < 2) throw InvalidArgument("trajectory needs at least two knots");
  if (traj.states.rows() != model.state_dim()) throw InvalidArgument("state dimension does not match model");
  if (traj.log_dt.size() != traj.horizon() - 1) throw InvalidArgument("log_dt must have T-1 entries");
}

Eigen::Index decision_size(const DynamicsModel& model, Eigen::Index horizon) {
  return model.state_dim() * horizon + (horizon - 1);
}

Vec pack(const Trajectory& traj) {
  Vec x(traj.states.size() + traj.log_dt.size());
  x.head(traj.states.size()) = Eigen::Map<const Vec>(traj.states.data(), traj.states.size());
  x.tail(traj.log_dt.size()) = traj.log_dt;
  return x;
}

Trajectory unpack(const DynamicsModel& model, Eigen::Index horizon, const Vec& x) {
  if (x.size() != decision_size(model, horizon)) throw InvalidArgument("decision vector has the wrong size");
  const Eigen::Index n = model.state_dim();
  Trajectory t;
  t.states = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, horizon);
  t.log_dt = x.tail(horizon - 1);
  return t;
}

namespace {

int boundary_rows(const std::optional<Vec>& b) { return b ? static_cast<int>(b->size()) : 0; }

bool step_bound(const DynamicsModel& m) { return m.velocity_bound != VelocityBound::state_speed; }
bool speed_bound(const DynamicsModel& m) { return m.velocity_bound != VelocityBound::step_length; }

// Builds residuals and, optionally, Jacobian triplets in one pass so the two
// can never disagree on row order.
class ResidualBuilder {
 public:
  ResidualBuilder(const DynamicsModel& model, const Trajectory& traj, bool want_jacobian)
      : m_(model), x_(traj), jac_(want_jacobian), n_(model.state_dim()), T_(traj.horizon()) {
    check_trajectory(model, traj);
    dt_ = traj.dt();
  }

  Eigen::Index state_var(int row, Eigen::Index t) const { return t * n_ + row; }
  Eigen::Index dt_var(Eigen::Index t) const { return n_ * T_ + t; }

  void equality() {
    const int d = m_.pos_dim;
    const int blocks = m_.kind == DynamicsKind::single_integrator ? 1 : 2;
    for (Eigen::Index t = 0; t + 1 < T_; ++t) {
      for (int b = 0; b < blocks; ++b) {
        // block 0: p_{t+1} - p_t - dt v_t; block 1: v_{t+1} - v_t - dt a_t
        const int base = b * d, rate = (b + 1) * d;
        for (int i = 0; i < d; ++i) {
          const double r = x_.states(base + i, t + 1) - x_.states(base + i, t) - dt_(t) * x_.states(rate + i, t);
          const Eigen::Index row = push(r);
          add(row, state_var(base + i, t + 1), 1.0);
          add(row, state_var(base + i, t), -1.0);
          add(row, state_var(rate + i, t), -dt_(t));
          add(row, dt_var(t), -dt_(t) * x_.states(rate + i, t));
        }
      }
    }
    boundary(m_.initial_state, 0);
    boundary(m_.final_state, T_ - 1);
  }

  void inequality() {
    const int d = m_.pos_dim;
    if (step_bound(m_)) {
      for (Eigen::Index t = 0; t + 1 < T_; ++t) {
        const Vec step = x_.states.col(t + 1).head(d) - x_.states.col(t).head(d);
        const double len = step.norm();
        const Eigen::Index row = push(len - m_.v_max * dt_(t));
        if (len > 0.0)
          for (int i = 0; i < d; ++i) {
            add(row, state_var(i, t + 1), step(i) / len);
            add(row, state_var(i, t), -step(i) / len);
          }
        add(row, dt_var(t), -m_.v_max * dt_(t));
      }
    }
    const double log_lo = std::log(m_.dt_min), log_hi = std::log(m_.dt_max);
    for (Eigen::Index t = 0; t + 1 < T_; ++t) add(push(log_lo - x_.log_dt(t)), dt_var(t), -1.0);
    for (Eigen::Index t = 0; t + 1 < T_; ++t) add(push(x_.log_dt(t) - log_hi), dt_var(t), 1.0);

    if (m_.L_max) {
      double total = 0.0;
      std::vector<std::pair<Eigen::Index, double>> grad;
      for (Eigen::Index t = 0; t + 1 < T_; ++t) {
        const Vec step = x_.states.col(t + 1).head(d) - x_.states.col(t).head(d);
        const double len = step.norm();
        total += len;
        if (len > 0.0)
          for (int i = 0; i < d; ++i) {
            grad.emplace_back(state_var(i, t + 1), step(i) / len);
            grad.emplace_back(state_var(i, t), -step(i) / len);
          }
      }
      const Eigen::Index row = push(total - *m_.L_max);
      for (auto& [col, v] : grad) add(row, col, v);
    }
    if (m_.T_max) {
      const Eigen::Index row = push(dt_.sum() - *m_.T_max);
      for (Eigen::Index t = 0; t + 1 < T_; ++t) add(row, dt_var(t), dt_(t));
    }
    if (speed_bound(m_)) norm_bound(d, m_.v_max);
    if (m_.kind == DynamicsKind::double_integrator && m_.a_max) norm_bound(2 * d, *m_.a_max);
  }

  Vec values() const { return Eigen::Map<const Vec>(values_.data(), static_cast<Eigen::Index>(values_.size())); }

  Eigen::SparseMatrix<double> jacobian() const {
    Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(values_.size()), n_ * T_ + (T_ - 1));
    J.setFromTriplets(triplets_.begin(), triplets_.end());
    return J;
  }

 private:
  Eigen::Index push(double value) {
    values_.push_back(value);
    return static_cast<Eigen::Index>(values_.size()) - 1;
  }

  void add(Eigen::Index row, Eigen::Index col, double v) {
    if (jac_) triplets_.emplace_back(row, col, v);
  }

  void boundary(const std::optional<Vec>& b, Eigen::Index t) {
    if (!b) return;
    for (int i = 0; i < boundary_rows(b); ++i) add(push(x_.states(i, t) - (*b)(i)), state_var(i, t), 1.0);
  }

  // |block_t| - bound for every knot, block = rows [offset, offset + pos_dim).
  void norm_bound(int offset, double bound) {
    const int d = m_.pos_dim;
    for (Eigen::Index t = 0; t < T_; ++t) {
      const Vec v = x_.states.col(t).segment(offset, d);
      const double len = v.norm();
      const Eigen::Index row = push(len - bound);
      if (len > 0.0)
        for (int i = 0; i < d; ++i) add(row, state_var(offset + i, t), v(i) / len);
    }
  }

  const DynamicsModel& m_;
  const Trajectory& x_;
  bool jac_;
  Eigen::Index n_, T_;
  Vec dt_;
  std::vector<double> values_;
  std::vector<Eigen::Triplet<double>> triplets_;
};

}  // namespace

std::size_t equality_count(const DynamicsModel& model, Eigen::Index horizon) {
  const std::size_t blocks = model.kind == DynamicsKind::single_integrator ? 1 : 2;
  return blocks * static_cast<std::size_t>(model.pos_dim) * static_cast<std::size_t>(horizon - 1) +
         boundary_rows(model.initial_state) + boundary_rows(model.final_state);
}

std::size_t inequality_count(const DynamicsModel& model, Eigen::Index horizon) {
  const auto steps = static_cast<std::size_t>(horizon - 1);
  std::size_t n = 2 * steps;
  if (step_bound(model)) n += steps;
  if (model.L_max) n += 1;
  if (model.T_max) n += 1;
  if (speed_bound(model)) n += static_cast<std::size_t>(horizon);
  if (model.kind == DynamicsKind::double_integrator && model.a_max) n += static_cast<std::size_t>(horizon);
  return n;
}

Vec equality_residuals(const DynamicsModel& model, const Trajectory& traj) {
  ResidualBuilder b(model, traj, false);
  b.equality();
  return b.values();
}

Vec inequality_residuals(const DynamicsModel& model, const Trajectory& traj) {
  ResidualBuilder b(model, traj, false);
  b.inequality();
  return b.values();
}

ConstraintResidual evaluate_constraints(const DynamicsModel& model, const Trajectory& traj) {
  ConstraintResidual r;
  r.equality = equality_residuals(model, traj);
  r.inequality = inequality_residuals(model, traj);
  r.max_eq_violation = r.equality.size() ? r.equality.cwiseAbs().maxCoeff() : 0.0;
  r.max_ineq_violation = r.inequality.size() ? std::max(0.0, r.inequality.maxCoeff()) : 0.0;
  return r;
}

Eigen::SparseMatrix<double> equality_jacobian(const DynamicsModel& model, const Trajectory& traj) {
  ResidualBuilder b(model, traj, true);
  b.equality();
  return b.jacobian();
}

Eigen::SparseMatrix<double> inequality_jacobian(const DynamicsModel& model, const Trajectory& traj) {
  ResidualBuilder b(model, traj, true);
  b.inequality();
  return b.jacobian();
}

SearchSpaceProjection project_to_search_space(const DynamicsModel& model, const Trajectory& traj,
                                              const NormalizedDomain& domain) {
  if (model.pos_dim != domain.dim()) throw InvalidArgument("model position dimension does not match domain");
  if (traj.states.rows() != model.state_dim()) throw InvalidArgument("state dimension does not match model");
  return {domain.normalize_points(traj.positions(model.pos_dim)), 1.0 / domain.extent()};
}

Eigen::MatrixXd pullback_position_gradient(const DynamicsModel& model, const Points& grad_omegas,
                                           double jacobian_scale) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(model.state_dim(), grad_omegas.cols());
  g.topRows(model.pos_dim) = jacobian_scale * grad_omegas;
  return g;
}

std::string to_string(SeedStrategy s) {
  switch (s) {
    case SeedStrategy::line: return "line";
    case SeedStrategy::lawnmower_2d: return "lawnmower_2d";
    case SeedStrategy::random_jitter: return "random_jitter";
  }
  return "unknown";
}

SeedStrategy seed_strategy_from_string(const std::string& name) {
  if (name == "line") return SeedStrategy::line;
  if (name == "lawnmower_2d") return SeedStrategy::lawnmower_2d;
  if (name == "random_jitter") return SeedStrategy::random_jitter;
  throw InvalidArgument("unknown seed strategy '" + name + "' (expected line, lawnmower_2d or random_jitter)");
}

namespace {

double polyline_length(const Points& p) {
  double L = 0.0;
  for (Eigen::Index t = 0; t + 1 < p.cols(); ++t) L += (p.col(t + 1) - p.col(t)).norm();
  return L;
}

// Resamples a polyline to `count` points evenly spaced in arc length.
Points resample(const Points& poly, Eigen::Index count) {
  std::vector<double> cum(static_cast<std::size_t>(poly.cols()), 0.0);
  for (Eigen::Index i = 1; i < poly.cols(); ++i)
    cum[i] = cum[i - 1] + (poly.col(i) - poly.col(i - 1)).norm();
  const double total = cum.back();
  Points out(poly.rows(), count);
  Eigen::Index seg = 0;
  for (Eigen::Index k = 0; k < count; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(count - 1);
    while (seg + 2 < poly.cols() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double a = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    out.col(k) = (1.0 - a) * poly.col(seg) + a * poly.col(seg + 1);
  }
  return out;
}

}  // namespace

Trajectory seed_trajectory(const DynamicsModel& model, const NormalizedDomain& domain, Eigen::Index horizon,
                           SeedStrategy strategy, std::uint64_t rng_seed) {
  model.validate();
  if (horizon < 2) throw InvalidArgument("horizon must be at least 2");
  if (model.pos_dim != domain.dim()) throw InvalidArgument("model position dimension does not match domain");
  const int d = model.pos_dim;
  const Points& samples = domain.source().points();
  const Vec lo = samples.rowwise().minCoeff();
  const Vec hi = samples.rowwise().maxCoeff();
  const Vec mid = 0.5 * (lo + hi);

  auto inside = [&](const Vec& p) { return ((p.array() >= lo.array()) && (p.array() <= hi.array())).all(); };

  Points pos(d, horizon);
  switch (strategy) {
    case SeedStrategy::line:
    case SeedStrategy::random_jitter: {
      Vec start = lo;
      if (model.initial_state && inside(model.initial_state->head(d))) start = model.initial_state->head(d);
      Vec end = (hi - start).norm() >= (lo - start).norm() ? hi : lo;
      for (Eigen::Index t = 0; t < horizon; ++t) {
        const double a = static_cast<double>(t) / static_cast<double>(horizon - 1);
        pos.col(t) = (1.0 - a) * start + a * end;
      }
      if (strategy == SeedStrategy::random_jitter) {
        std::mt19937_64 rng(rng_seed);
        std::uniform_real_distribution<double> unif(-0.1, 0.1);
        const Vec span = hi - lo;
        for (Eigen::Index t = 1; t < horizon; ++t)
          for (int i = 0; i < d; ++i)
            pos(i, t) = std::clamp(pos(i, t) + unif(rng) * span(i), lo(i), hi(i));
      }
      break;
    }
    case SeedStrategy::lawnmower_2d: {
      const int rows = std::max<int>(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(horizon)) / 2.0)));
      Points poly(d, 2 * rows);
      for (int r = 0; r < rows; ++r) {
        Vec a = mid, b = mid;
        a(0) = lo(0);
        b(0) = hi(0);
        if (d > 1) a(1) = b(1) = lo(1) + (hi(1) - lo(1)) * (r + 0.5) / rows;
        poly.col(2 * r) = (r % 2 == 0) ? a : b;
        poly.col(2 * r + 1) = (r % 2 == 0) ? b : a;
      }
      pos = resample(poly, horizon);
      break;
    }
  }

  // Contract toward the first knot so the seed respects the length budget.
  double L = polyline_length(pos);
  if (model.L_max && L > *model.L_max) {
    const double scale = L > 0.0 ? *model.L_max / L : 0.0;
    const Vec anchor = pos.col(0);
    pos = ((pos.colwise() - anchor) * scale).colwise() + anchor;
    L = polyline_length(pos);
  }

  Trajectory traj;
  traj.states = Eigen::MatrixXd::Zero(model.state_dim(), horizon);
  traj.states.topRows(d) = pos;
  double dt = L > 0.0 ? L / (static_cast<double>(horizon) * model.v_max) : model.dt_min;
  dt = std::clamp(dt, model.dt_min, model.dt_max);
  traj.log_dt = Vec::Constant(horizon - 1, std::log(dt));
  for (Eigen::Index t = 0; t + 1 < horizon; ++t)
    traj.states.col(t).segment(d, d) = (pos.col(t + 1) - pos.col(t)) / dt;
  traj.states.col(horizon - 1).segment(d, d) = traj.states.col(horizon - 2).segment(d, d);
  if (model.kind == DynamicsKind::double_integrator)
    for (Eigen::Index t = 0; t + 1 < horizon; ++t)
      traj.states.col(t).segment(2 * d, d) =
          (traj.states.col(t + 1).segment(d, d) - traj.states.col(t).segment(d, d)) / dt;
  return traj;
}

}  // namespace ergocov
