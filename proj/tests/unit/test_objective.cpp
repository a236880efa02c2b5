#include "ergocov/objective.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>
#include <thread>

using namespace ergocov;

namespace {
ErgodicTarget uniform(const Points& p) { return ErgodicTarget(p, Vec::Constant(p.cols(), 1.0 / p.cols())); }
}  // namespace

TEST_CASE("emmd and surrogate vanish when the trajectory equals the samples") {
  std::mt19937_64 rng(1);
  const Points w = testing::random_points(rng, 2, 12);
  auto target = uniform(w);
  auto k = KernelConfig::squared_euclidean(0.05);
  CHECK(std::abs(emmd(w, target, k).value) < 1e-12);
  auto s = log_emmd(w, target, k);
  CHECK(std::abs(s.value) < 1e-10);
  CHECK(s.grad_omegas.norm() < 1e-8);
}

TEST_CASE("one by one instance") {
  Points w = Points::Zero(2, 1), t(2, 1);
  t << 1, 0;
  auto target = uniform(t);
  auto k = KernelConfig::squared_euclidean(1.0);
  const double expected = 2.0 * (1.0 - std::exp(-1.0));
  CHECK(emmd(w, target, k).value == doctest::Approx(expected).epsilon(1e-14));
  CHECK(emmd(w, target, k).value == doctest::Approx(1.2642411).epsilon(1e-7));
  CHECK(log_emmd(w, target, k).value == doctest::Approx(2.0).epsilon(1e-14));

  // The hand expansion holds for any separation and bandwidth.
  for (double h : {0.1, 0.7, 3.0}) {
    Points q(2, 1);
    q << 0.3, -0.4;
    auto kh = KernelConfig::squared_euclidean(h);
    CHECK(emmd(w, uniform(q), kh).value == doctest::Approx(2.0 * (1.0 - std::exp(-0.25 / h))).epsilon(1e-13));
  }
}

TEST_CASE("surrogate without the constant") {
  std::mt19937_64 rng(2);
  const Points x = testing::random_points(rng, 2, 6), w = testing::random_points(rng, 2, 9);
  auto target = uniform(w);
  auto k = KernelConfig::squared_euclidean(0.2);
  auto a = log_emmd(x, target, k, true), b = log_emmd(x, target, k, false);
  CHECK(b.value == doctest::Approx(a.terms.log_f_xx - 2.0 * a.terms.log_f_xmu).epsilon(1e-14));
  CHECK((a.grad_omegas - b.grad_omegas).norm() == 0.0);
  CHECK(a.value == doctest::Approx(std::log(a.terms.self_term) - 2.0 * std::log(a.terms.cross_term) +
                                   std::log(a.terms.target_term)));
}

TEST_CASE("attention weights") {
  std::mt19937_64 rng(4);
  auto k = KernelConfig::squared_euclidean(0.1);
  const Points w = testing::random_points(rng, 2, 13);
  auto target = uniform(w);
  auto one = attention_weights(testing::random_points(rng, 2, 1), target, k);
  CHECK(one.alpha(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  const Points x = testing::random_points(rng, 2, 8);
  auto a = attention_weights(x, target, k);
  CHECK(std::abs(a.alpha.sum() - 1.0) < 1e-10);
  CHECK(std::abs(a.beta.sum() - 1.0) < 1e-10);
  CHECK(a.beta.rows() == 8);
  CHECK(a.beta.cols() == 13);

  // Direct evaluation as an oracle.
  double fxx = 0.0;
  for (int t = 0; t < 8; ++t)
    for (int s = 0; s < 8; ++s) fxx += eval_kernel(k, x.col(t), x.col(s));
  CHECK(a.alpha(2, 5) == doctest::Approx(eval_kernel(k, x.col(2), x.col(5)) / fxx).epsilon(1e-12));

  Points grid(2, 9);
  for (int i = 0; i < 9; ++i) grid.col(i) << (i % 3) * 0.5, (i / 3) * 0.5;
  auto g = attention_weights(grid, uniform(grid), k);
  CHECK((g.beta.rowwise().sum().array() > 0.0).all());
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(8);
  const Points x = testing::random_points(rng, 2, 8), w = testing::random_points(rng, 2, 13);
  auto target = uniform(w);
  auto k = KernelConfig::squared_euclidean(0.1);
  auto fd_log = testing::central_difference(
      [&](const Eigen::MatrixXd& p) { return log_emmd(p, target, k).value; }, x);
  CHECK(testing::relative_error(log_emmd_gradient(x, target, k), fd_log) < 1e-5);
  auto fd_raw = testing::central_difference([&](const Eigen::MatrixXd& p) { return emmd(p, target, k).value; }, x);
  CHECK(testing::relative_error(emmd_gradient(x, target, k), fd_raw) < 1e-5);

  // Weighted targets.
  Vec pi = Vec::LinSpaced(13, 1.0, 3.0);
  pi /= pi.sum();
  ErgodicTarget weighted(w, pi);
  auto fd_w = testing::central_difference(
      [&](const Eigen::MatrixXd& p) { return log_emmd(p, weighted, k).value; }, x);
  CHECK(testing::relative_error(log_emmd(x, weighted, k).grad_omegas, fd_w) < 1e-5);
}

TEST_CASE("single coincident pair has zero gradient") {
  Points p(2, 1);
  p << 0.4, 0.2;
  auto k = KernelConfig::squared_euclidean(0.3);
  CHECK(emmd_gradient(p, uniform(p), k).norm() == 0.0);
  CHECK(log_emmd_gradient(p, uniform(p), k).norm() == 0.0);
}

TEST_CASE("raw gradient decays when the instance grows at fixed bandwidth") {
  std::mt19937_64 rng(12);
  const Points x = testing::random_points(rng, 2, 6), w = testing::random_points(rng, 2, 10);
  auto k = KernelConfig::squared_euclidean(0.05);
  const double g1 = emmd_gradient(x, uniform(w), k).norm();
  const double g100 = emmd_gradient(Points(100 * x), uniform(Points(100 * w)), k).norm();
  CHECK(g100 < 1e-6 * g1);
}

TEST_CASE("sample sum cache is shared across threads") {
  std::mt19937_64 rng(6);
  const Points w = testing::random_points(rng, 3, 200);
  ErgodicTarget target = uniform(w);
  auto k = KernelConfig::squared_euclidean(0.02);
  const double ref = ErgodicTarget(target).log_f_mumu(k);
  std::vector<double> got(4);
  std::vector<std::thread> pool;
  for (int i = 0; i < 4; ++i) pool.emplace_back([&, i] { got[i] = target.log_f_mumu(k); });
  for (auto& t : pool) t.join();
  for (double g : got) CHECK(g == ref);

  // Uniform weights reduce to the plain double sum.
  Eigen::MatrixXd K = exp_entries(log_kernel_matrix(k, w, w).entries);
  CHECK(ref == doctest::Approx(std::log(K.sum())).epsilon(1e-12));
}

TEST_CASE("raw and surrogate objectives share their zeros") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Points w = testing::random_points(rng, 2, 5 + trial);
    // A permutation of the samples is the same empirical measure.
    Points x = w;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(w.cols()));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (Eigen::Index j = 0; j < w.cols(); ++j) x.col(j) = w.col(idx[static_cast<std::size_t>(j)]);
    auto k = KernelConfig::squared_euclidean(0.02 + 0.05 * trial);
    const auto target = uniform(w);
    if (emmd(x, target, k).value < 1e-12) CHECK(log_emmd(x, target, k).value < 1e-8);
  }
}
