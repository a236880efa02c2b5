#pragma once

#include "ergocov/domain.hpp"
#include "ergocov/kernel.hpp"

#include <map>
#include <shared_mutex>

namespace ergocov {

/// Normalized trajectory positions, one column per knot.
using TrajectoryPoints = Points;

/// Weighted target samples on the normalized domain together with a cache of
/// the trajectory-independent sample/sample kernel sum, keyed by bandwidth.
class ErgodicTarget {
 public:
  ErgodicTarget(Points normalized_points, Vec weights);
  explicit ErgodicTarget(const NormalizedDomain& domain);

  ErgodicTarget(const ErgodicTarget& other);
  ErgodicTarget& operator=(const ErgodicTarget&) = delete;

  const Points& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  const Vec& log_weights() const { return log_weights_; }
  Eigen::Index size() const { return points_.cols(); }
  Eigen::Index dim() const { return points_.rows(); }

  /// log F_mumu = log(M^2 * sum_ij pi_i pi_j k(w_i, w_j)). Reduces to the plain
  /// double sum for uniform weights.
  double log_f_mumu(const KernelConfig& kernel) const;

 private:
  double compute_log_f_mumu(const KernelConfig& kernel) const;

  Points points_;
  Vec weights_;
  Vec log_weights_;
  mutable std::shared_mutex cache_mutex_;
  mutable std::map<double, double> cache_;
};

struct ObjectiveTerms {
  // Log-domain sums (uniform-weight convention: plain kernel sums).
  double log_f_xx = 0.0;
  double log_f_xmu = 0.0;
  double log_f_mumu = 0.0;
  // Normalized averages A = F_xx/T^2, B = F_xmu/(TM), C = F_mumu/M^2.
  double self_term = 0.0;
  double cross_term = 0.0;
  double target_term = 0.0;
};

struct ObjectiveEval {
  double value = 0.0;
  Points grad_omegas;
  ObjectiveTerms terms;
  // Surrogate only: d log F_xx / d w and d log F_xmu / d w.
  Points grad_log_f_xx;
  Points grad_log_f_xmu;
};

/// Finite-sample ergodic MMD: A - 2B + C with the V-statistic self term.
ObjectiveEval emmd(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel);

/// Log-surrogate ergodic MMD. With the constant: log A - 2 log B + log C >= 0.
/// Without: log F_xx - 2 log F_xmu. The gradient is identical in both modes.
ObjectiveEval log_emmd(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel,
                       bool include_constant = true);

struct AttentionWeights {
  Eigen::MatrixXd alpha;  // T x T, sums to one overall
  Eigen::MatrixXd beta;   // T x M, sums to one overall
};

AttentionWeights attention_weights(const TrajectoryPoints& traj, const ErgodicTarget& target,
                                   const KernelConfig& kernel);

Points log_emmd_gradient(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel);
Points emmd_gradient(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel);

}  // namespace ergocov
