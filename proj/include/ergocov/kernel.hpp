#pragma once

#include "ergocov/domain.hpp"

#include <functional>
#include <memory>
#include <span>

namespace ergocov {

enum class Metric { squared_euclidean, custom };

/// User-supplied metric: distance d(u, v) >= 0 and its gradient in u.
struct CustomMetric {
  std::function<double(const Vec&, const Vec&)> distance;
  std::function<Vec(const Vec&, const Vec&)> gradient;
};

/// Stationary isotropic kernel k(u, v) = exp(-d(u, v) / h) on normalized
/// coordinates.
class KernelConfig {
 public:
  static KernelConfig squared_euclidean(double bandwidth);
  /// Spot-checks d >= 0, d(u, u) = 0 and symmetry on 16 random pairs of
  /// dimension `dim`; throws InvalidArgument on failure.
  static KernelConfig custom(double bandwidth, CustomMetric metric, int dim, std::uint64_t seed = 7);

  Metric metric() const { return metric_; }
  double bandwidth() const { return bandwidth_; }
  KernelConfig with_bandwidth(double bandwidth) const;

  double distance(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) const;
  Vec distance_gradient(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) const;

 private:
  KernelConfig(Metric metric, double bandwidth, std::shared_ptr<const CustomMetric> custom);

  Metric metric_;
  double bandwidth_;
  std::shared_ptr<const CustomMetric> custom_;
};

/// Entries are log k(U_i, V_j) = -d(U_i, V_j) / h; never exponentiated.
struct LogKernelMatrix {
  Eigen::MatrixXd entries;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

double eval_kernel(const KernelConfig& config, const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v);

/// U and V hold one point per column.
LogKernelMatrix log_kernel_matrix(const KernelConfig& config, const Points& U, const Points& V);

/// Elementwise exp that flushes entries below -700 to exactly zero instead of
/// letting them underflow through denormals.
Eigen::MatrixXd exp_entries(const Eigen::Ref<const Eigen::MatrixXd>& log_values);

/// exp(x - logsumexp(x)) and logsumexp(x) from a single pass of exp.
struct Softmax {
  Eigen::MatrixXd weights;
  double log_sum = 0.0;
};
Softmax softmax(const Eigen::Ref<const Eigen::MatrixXd>& log_values);

/// log(sum(exp(values))) with max-shift; -inf entries allowed, NaN and +inf
/// rejected. Throws EmptyInput for an empty range.
double logsumexp(std::span<const double> values);
double logsumexp(const Eigen::Ref<const Eigen::MatrixXd>& values);

Vec metric_gradient(const KernelConfig& config, const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v);

}  // namespace ergocov
