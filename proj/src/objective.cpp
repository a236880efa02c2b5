#include "ergocov/objective.hpp"

#include "ergocov/error.hpp"

#include <cmath>
#include <limits>
#include <mutex>

namespace ergocov {
namespace {

void check_inputs(const TrajectoryPoints& traj, const ErgodicTarget& target) {
  if (traj.cols() < 1) throw InvalidArgument("trajectory has no knots");
  if (traj.rows() != target.dim()) throw InvalidArgument("trajectory and target dimensions differ");
  if (!traj.allFinite()) throw InvalidArgument("trajectory contains non-finite coordinates");
}

// sum_t S_st * grad_u d(w_s, v_t) for every s, where S is |traj| x |others|.
Points weighted_metric_gradients(const KernelConfig& kernel, const Points& w, const Points& others,
                                 const Eigen::MatrixXd& weights) {
  if (kernel.metric() == Metric::squared_euclidean) {
    // 2 * (w_s * rowsum(S)_s - sum_t S_st v_t)
    const Vec row_sums = weights.rowwise().sum();
    return 2.0 * (w * row_sums.asDiagonal() - others * weights.transpose());
  }
  Points g = Points::Zero(w.rows(), w.cols());
  for (Eigen::Index s = 0; s < w.cols(); ++s)
    for (Eigen::Index t = 0; t < others.cols(); ++t)
      if (weights(s, t) != 0.0) g.col(s) += weights(s, t) * kernel.distance_gradient(w.col(s), others.col(t));
  return g;
}

struct LogSums {
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd beta;
  double log_f_xx;
  double log_f_xmu_weighted;  // log sum pi_i k
};

LogSums log_sums(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel) {
  Eigen::MatrixXd log_k_xmu = log_kernel_matrix(kernel, traj, target.points()).entries;
  log_k_xmu.rowwise() += target.log_weights().transpose();
  Softmax xx = softmax(log_kernel_matrix(kernel, traj, traj).entries);
  Softmax xmu = softmax(log_k_xmu);
  return {std::move(xx.weights), std::move(xmu.weights), xx.log_sum, xmu.log_sum};
}

}  // namespace

ErgodicTarget::ErgodicTarget(Points normalized_points, Vec weights)
    : points_(std::move(normalized_points)), weights_(std::move(weights)) {
  if (points_.cols() < 1) throw InvalidArgument("target needs at least one sample");
  if (weights_.size() != points_.cols()) throw InvalidArgument("weight count does not match sample count");
  if (!points_.allFinite()) throw InvalidArgument("target samples contain non-finite coordinates");
  if ((weights_.array() < 0.0).any() || !(weights_.sum() > 0.0))
    throw InvalidArgument("target weights must be nonnegative with positive sum");
  weights_ /= weights_.sum();
  log_weights_ = weights_.array().log().matrix();
}

ErgodicTarget::ErgodicTarget(const NormalizedDomain& domain)
    : ErgodicTarget(domain.normalized_points(), domain.source().weights()) {}

ErgodicTarget::ErgodicTarget(const ErgodicTarget& other)
    : points_(other.points_), weights_(other.weights_), log_weights_(other.log_weights_) {
  std::shared_lock lock(other.cache_mutex_);
  cache_ = other.cache_;
}

double ErgodicTarget::compute_log_f_mumu(const KernelConfig& kernel) const {
  Eigen::MatrixXd lk = log_kernel_matrix(kernel, points_, points_).entries;
  lk.rowwise() += log_weights_.transpose();
  lk.colwise() += log_weights_;
  return logsumexp(lk) + 2.0 * std::log(static_cast<double>(size()));
}

double ErgodicTarget::log_f_mumu(const KernelConfig& kernel) const {
  if (kernel.metric() != Metric::squared_euclidean) return compute_log_f_mumu(kernel);
  const double h = kernel.bandwidth();
  {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(h);
    if (it != cache_.end()) return it->second;
  }
  const double value = compute_log_f_mumu(kernel);
  std::unique_lock lock(cache_mutex_);
  cache_.emplace(h, value);
  return value;
}

ObjectiveEval emmd(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel) {
  check_inputs(traj, target);
  const double T = static_cast<double>(traj.cols());
  const double M = static_cast<double>(target.size());
  const double h = kernel.bandwidth();

  const Eigen::MatrixXd k_xx = exp_entries(log_kernel_matrix(kernel, traj, traj).entries);
  const Eigen::MatrixXd k_xmu = exp_entries(log_kernel_matrix(kernel, traj, target.points()).entries);
  // pi_i k(w_t, w_i)
  const Eigen::MatrixXd wk_xmu = k_xmu * target.weights().asDiagonal();

  ObjectiveEval out;
  out.terms.self_term = k_xx.sum() / (T * T);
  out.terms.cross_term = wk_xmu.sum() / T;
  out.terms.log_f_mumu = target.log_f_mumu(kernel);
  out.terms.target_term = std::exp(out.terms.log_f_mumu - 2.0 * std::log(M));
  out.terms.log_f_xx = std::log(k_xx.sum());
  out.terms.log_f_xmu = std::log(wk_xmu.sum() * M);
  out.value = out.terms.self_term - 2.0 * out.terms.cross_term + out.terms.target_term;

  // dA/dw_s = -(1/(h T^2)) sum_t (k_st + k_ts) grad d(w_s, w_t)
  // -2 dB/dw_s = (2/(h T)) sum_i pi_i k_si grad d(w_s, w_i)
  const Eigen::MatrixXd sym = k_xx + k_xx.transpose();
  out.grad_omegas = -(1.0 / (h * T * T)) * weighted_metric_gradients(kernel, traj, traj, sym) +
                    (2.0 / (h * T)) * weighted_metric_gradients(kernel, traj, target.points(), wk_xmu);
  return out;
}

ObjectiveEval log_emmd(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel,
                       bool include_constant) {
  check_inputs(traj, target);
  const double T = static_cast<double>(traj.cols());
  const double M = static_cast<double>(target.size());
  const double h = kernel.bandwidth();
  const LogSums s = log_sums(traj, target, kernel);

  ObjectiveEval out;
  out.terms.log_f_xx = s.log_f_xx;
  out.terms.log_f_xmu = s.log_f_xmu_weighted + std::log(M);
  out.terms.log_f_mumu = target.log_f_mumu(kernel);
  const double log_a = out.terms.log_f_xx - 2.0 * std::log(T);
  const double log_b = s.log_f_xmu_weighted - std::log(T);
  const double log_c = out.terms.log_f_mumu - 2.0 * std::log(M);
  out.terms.self_term = std::exp(log_a);
  out.terms.cross_term = std::exp(log_b);
  out.terms.target_term = std::exp(log_c);
  out.value = include_constant ? (log_a - 2.0 * log_b + log_c) : (out.terms.log_f_xx - 2.0 * out.terms.log_f_xmu);

  const Eigen::MatrixXd alpha_sym = s.alpha + s.alpha.transpose();

  out.grad_log_f_xx = -(1.0 / h) * weighted_metric_gradients(kernel, traj, traj, alpha_sym);
  out.grad_log_f_xmu = -(1.0 / h) * weighted_metric_gradients(kernel, traj, target.points(), s.beta);
  out.grad_omegas = out.grad_log_f_xx - 2.0 * out.grad_log_f_xmu;
  return out;
}

AttentionWeights attention_weights(const TrajectoryPoints& traj, const ErgodicTarget& target,
                                   const KernelConfig& kernel) {
  check_inputs(traj, target);
  LogSums s = log_sums(traj, target, kernel);
  return {std::move(s.alpha), std::move(s.beta)};
}

Points log_emmd_gradient(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel) {
  return log_emmd(traj, target, kernel).grad_omegas;
}

Points emmd_gradient(const TrajectoryPoints& traj, const ErgodicTarget& target, const KernelConfig& kernel) {
  return emmd(traj, target, kernel).grad_omegas;
}

}  // namespace ergocov
