#include "ergocov/dynamics.hpp"
#include "ergocov/error.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ergocov;

namespace {

Trajectory random_trajectory(const DynamicsModel& m, Eigen::Index T, std::mt19937_64& rng) {
  Trajectory x;
  x.states = testing::random_points(rng, m.state_dim(), T, -1.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 0.5);
  x.log_dt = Vec::NullaryExpr(T - 1, [&] { return u(rng); });
  return x;
}

// Checks a sparse Jacobian against central differences of the residual map.
void check_jacobian(const DynamicsModel& m, const Trajectory& x, bool equality) {
  const Eigen::Index T = x.horizon();
  auto residual = [&](const Vec& z) {
    const Trajectory t = unpack(m, T, z);
    return equality ? equality_residuals(m, t) : inequality_residuals(m, t);
  };
  const Eigen::MatrixXd J =
      Eigen::MatrixXd(equality ? equality_jacobian(m, x) : inequality_jacobian(m, x));
  Vec z = pack(x);
  const double h = 1e-6;
  Eigen::MatrixXd fd(J.rows(), J.cols());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double orig = z(k);
    z(k) = orig + h;
    const Vec rp = residual(z);
    z(k) = orig - h;
    const Vec rm = residual(z);
    z(k) = orig;
    fd.col(k) = (rp - rm) / (2 * h);
  }
  CHECK(testing::relative_error(J, fd) < 1e-6);
}

}  // namespace

TEST_CASE("euler defects") {
  DynamicsModel m;
  Trajectory x;
  x.states.resize(4, 2);
  x.states.col(0) << 0, 0, 1, 0;
  x.states.col(1) << 0.5, 0, 0, 0;
  x.log_dt = Vec::Constant(1, std::log(0.5));
  Vec r = equality_residuals(m, x);
  CHECK(r.cwiseAbs().maxCoeff() < 1e-15);
  x.states(0, 1) = 0.6;
  r = equality_residuals(m, x);
  CHECK(r(0) == doctest::Approx(0.1));
  CHECK(r(1) == 0.0);

  Trajectory still;
  still.states = Eigen::MatrixXd::Zero(4, 5);
  still.states.topRows(2).colwise() = Eigen::Vector2d(0.3, 0.7);
  still.log_dt = Vec::Zero(4);
  CHECK(equality_residuals(m, still).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("inequality values") {
  DynamicsModel m;
  m.v_max = 2.0;
  m.L_max = 10.0;
  Trajectory x;
  x.states = Eigen::MatrixXd::Zero(4, 2);
  x.states(0, 1) = 1.0;
  x.log_dt = Vec::Zero(1);
  CHECK(inequality_residuals(m, x)(0) == doctest::Approx(-1.0));
  x.states(0, 1) = 3.0;
  CHECK(inequality_residuals(m, x)(0) == doctest::Approx(1.0));

  Trajectory still;
  still.states = Eigen::MatrixXd::Zero(4, 6);
  still.log_dt = Vec::Zero(5);
  const Vec h = inequality_residuals(m, still);
  REQUIRE(h.size() == static_cast<Eigen::Index>(inequality_count(m, 6)));
  // step bounds, log-dt lower, log-dt upper, then the length budget
  CHECK(h(3 * 5) == doctest::Approx(-10.0));
}

TEST_CASE("constraint counts and jacobians") {
  std::mt19937_64 rng(21);
  for (auto kind : {DynamicsKind::single_integrator, DynamicsKind::double_integrator})
    for (auto bound : {VelocityBound::step_length, VelocityBound::state_speed, VelocityBound::both}) {
      DynamicsModel m;
      m.kind = kind;
      m.pos_dim = 3;
      m.velocity_bound = bound;
      m.L_max = 2.0;
      m.T_max = 5.0;
      if (kind == DynamicsKind::double_integrator) m.a_max = 3.0;
      m.initial_state = Vec::Constant(3, 0.1);
      m.final_state = Vec::Constant(m.state_dim(), 0.2);
      const Trajectory x = random_trajectory(m, 6, rng);
      CAPTURE(to_string(kind));
      CAPTURE(to_string(bound));
      CHECK(equality_residuals(m, x).size() == static_cast<Eigen::Index>(equality_count(m, 6)));
      CHECK(inequality_residuals(m, x).size() == static_cast<Eigen::Index>(inequality_count(m, 6)));
      check_jacobian(m, x, true);
      check_jacobian(m, x, false);
    }
}

TEST_CASE("pack round trip") {
  std::mt19937_64 rng(2);
  DynamicsModel m;
  m.kind = DynamicsKind::double_integrator;
  const Trajectory x = random_trajectory(m, 7, rng);
  const Vec z = pack(x);
  CHECK(z.size() == decision_size(m, 7));
  const Trajectory y = unpack(m, 7, z);
  CHECK(y.states == x.states);
  CHECK(y.log_dt == x.log_dt);
  CHECK_THROWS_AS(unpack(m, 6, z), InvalidArgument);
}

TEST_CASE("model validation") {
  DynamicsModel m;
  CHECK_NOTHROW(m.validate());
  m.v_max = 0.0;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m = DynamicsModel{};
  m.dt_min = 2.0;
  m.dt_max = 1.0;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m = DynamicsModel{};
  m.initial_state = Vec::Zero(3);
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  CHECK_THROWS_AS(dynamics_kind_from_string("unicycle"), InvalidArgument);
  CHECK(velocity_bound_from_string(to_string(VelocityBound::both)) == VelocityBound::both);
}

TEST_CASE("projection to the search space") {
  Points s(3, 2);
  s << 0, 1000, 0, 10, 0, 10;
  NormalizedDomain dom{DomainSamples(s)};
  DynamicsModel m;
  m.pos_dim = 3;
  Trajectory x;
  x.states = Eigen::MatrixXd::Zero(6, 2);
  x.states(0, 0) = 500;
  x.log_dt = Vec::Zero(1);
  auto p = project_to_search_space(m, x, dom);
  CHECK(p.omegas.col(0).isApprox(Eigen::Vector3d(0.5, 0, 0)));
  CHECK(p.jacobian_scale == doctest::Approx(1e-3));
  auto g = pullback_position_gradient(m, Points::Ones(3, 2), p.jacobian_scale);
  CHECK(g.rows() == 6);
  CHECK(g.bottomRows(3).norm() == 0.0);
  CHECK(g(0, 1) == doctest::Approx(1e-3));
}

TEST_CASE("normalized model") {
  DynamicsModel m;
  m.v_max = 3.0;
  m.L_max = 40.0;
  m.initial_state = Eigen::Vector4d(12, 14, 2, 0);
  auto n = m.normalized(4.0, Eigen::Vector2d(10, 10));
  CHECK(n.v_max == 0.75);
  CHECK(*n.L_max == 10.0);
  CHECK(n.initial_state->isApprox(Eigen::Vector4d(0.5, 1.0, 0.5, 0.0)));
  CHECK(n.dt_min == m.dt_min);
}

TEST_CASE("seed trajectories") {
  Points s(2, 4);
  s << 0, 1, 0, 1, 0, 0, 1, 1;
  NormalizedDomain dom{DomainSamples(s)};
  DynamicsModel m;
  auto line = seed_trajectory(m, dom, 5, SeedStrategy::line, 0);
  REQUIRE(line.horizon() == 5);
  const Points p = line.positions(2);
  for (int t = 0; t + 1 < 5; ++t) CHECK((p.col(t + 1) - p.col(t)).norm() == doctest::Approx((p.col(1) - p.col(0)).norm()));
  CHECK((p.col(4) - p.col(0)).norm() == doctest::Approx(std::sqrt(2.0)));

  auto a = seed_trajectory(m, dom, 20, SeedStrategy::random_jitter, 9);
  auto b = seed_trajectory(m, dom, 20, SeedStrategy::random_jitter, 9);
  CHECK(a.states == b.states);
  CHECK(a.log_dt == b.log_dt);
  auto c = seed_trajectory(m, dom, 20, SeedStrategy::random_jitter, 10);
  CHECK(a.states != c.states);

  auto mow = seed_trajectory(m, dom, 16, SeedStrategy::lawnmower_2d, 0).positions(2);
  CHECK((mow.array() >= -1e-12).all());
  CHECK((mow.array() <= 1.0 + 1e-12).all());

  // Seeds are contracted into the length budget.
  m.L_max = 0.5;
  auto short_seed = seed_trajectory(m, dom, 12, SeedStrategy::random_jitter, 1);
  const Points sp = short_seed.positions(2);
  double len = 0.0;
  for (int t = 0; t + 1 < 12; ++t) len += (sp.col(t + 1) - sp.col(t)).norm();
  CHECK(len <= 0.5 + 1e-12);
  CHECK((short_seed.dt().array() > 0.0).all());
}
