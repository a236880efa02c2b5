#include "ergocov/kernel.hpp"

#include "ergocov/error.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace ergocov {

KernelConfig::KernelConfig(Metric metric, double bandwidth, std::shared_ptr<const CustomMetric> custom)
    : metric_(metric), bandwidth_(bandwidth), custom_(std::move(custom)) {
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_))
    throw InvalidArgument("kernel bandwidth must be positive and finite");
}

KernelConfig KernelConfig::squared_euclidean(double bandwidth) {
  return KernelConfig(Metric::squared_euclidean, bandwidth, nullptr);
}

KernelConfig KernelConfig::custom(double bandwidth, CustomMetric metric, int dim, std::uint64_t seed) {
  if (!metric.distance || !metric.gradient) throw InvalidArgument("custom metric needs distance and gradient");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int k = 0; k < 16; ++k) {
    Vec u(dim), v(dim);
    for (int i = 0; i < dim; ++i) {
      u(i) = unif(rng);
      v(i) = unif(rng);
    }
    const double duv = metric.distance(u, v);
    const double dvu = metric.distance(v, u);
    const double duu = metric.distance(u, u);
    if (!(duv >= 0.0)) throw InvalidArgument("custom metric returned a negative or NaN distance");
    if (std::abs(duu) > 1e-12) throw InvalidArgument("custom metric violates d(u,u) = 0");
    if (std::abs(duv - dvu) > 1e-12 * std::max(1.0, std::abs(duv)))
      throw InvalidArgument("custom metric is not symmetric");
  }
  return KernelConfig(Metric::custom, bandwidth, std::make_shared<const CustomMetric>(std::move(metric)));
}

KernelConfig KernelConfig::with_bandwidth(double bandwidth) const { return KernelConfig(metric_, bandwidth, custom_); }

double KernelConfig::distance(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) const {
  if (metric_ == Metric::squared_euclidean) return (u - v).squaredNorm();
  return custom_->distance(u, v);
}

Vec KernelConfig::distance_gradient(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) const {
  if (metric_ == Metric::squared_euclidean) return 2.0 * (u - v);
  return custom_->gradient(u, v);
}

double eval_kernel(const KernelConfig& config, const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) {
  if (u.size() != v.size()) throw InvalidArgument("kernel arguments differ in dimension");
  return std::exp(-config.distance(u, v) / config.bandwidth());
}

LogKernelMatrix log_kernel_matrix(const KernelConfig& config, const Points& U, const Points& V) {
  if (U.rows() != V.rows()) throw InvalidArgument("point sets differ in dimension");
  const double inv_h = 1.0 / config.bandwidth();
  LogKernelMatrix out{Eigen::MatrixXd(U.cols(), V.cols())};
  if (config.metric() == Metric::squared_euclidean) {
    for (Eigen::Index j = 0; j < V.cols(); ++j)
      out.entries.col(j) = -(U.colwise() - V.col(j)).colwise().squaredNorm().transpose() * inv_h;
  } else {
    for (Eigen::Index j = 0; j < V.cols(); ++j)
      for (Eigen::Index i = 0; i < U.cols(); ++i) out.entries(i, j) = -config.distance(U.col(i), V.col(j)) * inv_h;
  }
  return out;
}

namespace {

constexpr double kExpFloor = -700.0;

void check_log_values(const Eigen::Ref<const Eigen::ArrayXXd>& a) {
  if (a.size() == 0) throw EmptyInput("logsumexp of an empty sequence");
  if (a.isNaN().any() || (a == std::numeric_limits<double>::infinity()).any())
    throw InvalidArgument("logsumexp input contains NaN or +inf");
}

// exp runs vectorized on the clamped values; the mask is applied afterwards.
Eigen::ArrayXXd flushed_exp(const Eigen::Ref<const Eigen::ArrayXXd>& a) {
  Eigen::ArrayXXd out = a.max(kExpFloor).exp();
  out = (a < kExpFloor).select(0.0, out);
  return out;
}

}  // namespace

Eigen::MatrixXd exp_entries(const Eigen::Ref<const Eigen::MatrixXd>& log_values) {
  return flushed_exp(log_values.array()).matrix();
}

Softmax softmax(const Eigen::Ref<const Eigen::MatrixXd>& log_values) {
  const auto a = log_values.array();
  check_log_values(a);
  const double m = a.maxCoeff();
  Softmax out;
  if (m == -std::numeric_limits<double>::infinity()) {
    out.log_sum = m;
    out.weights = Eigen::MatrixXd::Zero(log_values.rows(), log_values.cols());
    return out;
  }
  Eigen::ArrayXXd e = flushed_exp(a - m);
  const double total = e.sum();
  out.log_sum = m + std::log(total);
  out.weights = (e / total).matrix();
  return out;
}

double logsumexp(std::span<const double> values) {
  const Eigen::Map<const Eigen::ArrayXXd> a(values.data(), static_cast<Eigen::Index>(values.size()), 1);
  check_log_values(a);
  const double m = a.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity() || a.size() == 1) return m;
  return m + std::log(flushed_exp(a - m).sum());
}

double logsumexp(const Eigen::Ref<const Eigen::MatrixXd>& values) {
  if (values.size() == 0) throw EmptyInput("logsumexp of an empty matrix");
  if (values.innerStride() == 1 && values.outerStride() == values.rows())
    return logsumexp(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
  const Eigen::MatrixXd dense = values;
  return logsumexp(std::span<const double>(dense.data(), static_cast<std::size_t>(dense.size())));
}

Vec metric_gradient(const KernelConfig& config, const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) {
  if (u.size() != v.size()) throw InvalidArgument("metric arguments differ in dimension");
  return config.distance_gradient(u, v);
}

}  // namespace ergocov
