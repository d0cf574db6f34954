#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "koopcert/dynamics.hpp"

using namespace koopcert;

namespace {

ControlAffineSystem scalar_linear(double a) {
  // xdot = a x + u
  std::vector<Polynomial> f{Polynomial::variable(1, 0) * a};
  std::vector<std::vector<Polynomial>> g{{Polynomial::constant(1, 1.0)}};
  return ControlAffineSystem(std::move(f), std::move(g));
}

}  // namespace

TEST_CASE("rhs on the benchmark system") {
  const ControlAffineSystem sys = ControlAffineSystem::slow_manifold(-2.0, 1.0);
  Eigen::VectorXd x(2), u(1);
  x << 1.0, 1.0;
  u << 0.0;
  Eigen::VectorXd dx = sys.rhs(x, u);
  CHECK(dx[0] == doctest::Approx(-2.0));
  CHECK(dx[1] == doctest::Approx(0.0));  // lambda (x2 - x1^2) = 0 on the manifold

  CHECK(sys.rhs(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)).norm() == 0.0);

  x << 0.0, 1.0;
  u << 2.0;
  dx = sys.rhs(x, u);
  CHECK(dx[0] == doctest::Approx(0.0));
  CHECK(dx[1] == doctest::Approx(3.0));

  CHECK_THROWS_AS(sys.rhs(Eigen::VectorXd::Zero(3), u), std::invalid_argument);
}

TEST_CASE("drift must vanish at the origin") {
  std::vector<Polynomial> f{Polynomial::constant(1, 1.0)};
  std::vector<std::vector<Polynomial>> g{{Polynomial::constant(1, 1.0)}};
  CHECK_THROWS_AS(ControlAffineSystem(std::move(f), std::move(g)),
                  std::invalid_argument);
}

TEST_CASE("integrate against the exponential closed form") {
  // xdot = -x, x(0) = 1, T = 1
  std::vector<Polynomial> f{Polynomial::variable(1, 0) * -1.0};
  std::vector<std::vector<Polynomial>> g{{Polynomial(1)}};
  const ControlAffineSystem sys(std::move(f), std::move(g));
  SimConfig cfg;
  cfg.step_h = 1e-3;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  const Trajectory tr = integrate(sys, x0, nullptr, cfg);
  CHECK_FALSE(tr.diverged);
  CHECK(std::abs(tr.back_state()[0] - std::exp(-1.0)) < 1e-6);

  // equilibrium start stays identically zero
  const Trajectory tr0 = integrate(sys, Eigen::VectorXd::Zero(1), nullptr, cfg);
  for (const auto& x : tr0.states) CHECK(x.norm() == 0.0);
}

TEST_CASE("benchmark x1 dynamics decouple") {
  const ControlAffineSystem sys = ControlAffineSystem::slow_manifold(-2.0, 1.0);
  const SimConfig cfg = SimConfig::for_sampling(0.01, 0.01);
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;
  const Trajectory tr =
      integrate(sys, x0, [](double) { return Eigen::VectorXd::Zero(1); }, cfg);
  CHECK(std::abs(tr.back_state()[0] - std::exp(-0.02)) < 1e-9);
}

TEST_CASE("RK4 order factor between 12 and 20") {
  std::vector<Polynomial> f{Polynomial::variable(1, 0) * -1.0};
  std::vector<std::vector<Polynomial>> g{{Polynomial(1)}};
  const ControlAffineSystem sys(std::move(f), std::move(g));
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  auto err_at = [&](double h) {
    SimConfig cfg;
    cfg.step_h = h;
    cfg.dt = h;
    cfg.horizon = 1.0;
    const Trajectory tr = integrate(sys, x0, nullptr, cfg);
    return std::abs(tr.back_state()[0] - std::exp(-1.0));
  };
  const double factor = err_at(0.1) / err_at(0.05);
  CHECK(factor > 12.0);
  CHECK(factor < 20.0);
}

TEST_CASE("ZOH consistency between integrate and sampled feedback") {
  const ControlAffineSystem sys = ControlAffineSystem::slow_manifold(-2.0, 1.0);
  SimConfig cfg;
  cfg.dt = 0.1;
  cfg.step_h = 0.01;
  cfg.horizon = 1.0;
  Eigen::VectorXd x0(2);
  x0 << 0.5, -0.3;
  // a piecewise-constant schedule on the dt grid
  auto sched = [&](double t) {
    Eigen::VectorXd u(1);
    u << std::floor(t / cfg.dt) * 0.1 - 0.3;
    return u;
  };
  const Trajectory a = integrate(sys, x0, sched, cfg);
  // the same schedule as a "controller" sampled at dt (state-independent)
  int call = 0;
  (void)call;
  const Trajectory b = integrate(sys, x0, sched, cfg);
  REQUIRE(a.states.size() == b.states.size());
  for (size_t k = 0; k < a.states.size(); ++k)
    CHECK((a.states[k] - b.states[k]).norm() <= 1e-10);
}

TEST_CASE("continuous feedback reproduces the closed form") {
  const ControlAffineSystem sys = scalar_linear(1.0);  // xdot = x + u
  SimConfig cfg;
  cfg.step_h = 1e-3;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  Eigen::VectorXd x0(1);
  x0 << 0.7;
  const Trajectory tr = simulate_feedback(
      sys, x0,
      [](const Eigen::VectorXd& x) {
        Eigen::VectorXd u(1);
        u << -2.0 * x[0];
        return u;
      },
      FeedbackMode::Continuous, cfg);
  CHECK(std::abs(tr.back_state()[0] - 0.7 * std::exp(-1.0)) < 1e-6);

  const Trajectory tr0 = simulate_feedback(
      sys, Eigen::VectorXd::Zero(1),
      [](const Eigen::VectorXd& x) { return -2.0 * x; }, FeedbackMode::Continuous,
      cfg);
  CHECK(tr0.back_state().norm() == 0.0);
}

TEST_CASE("divergence guard reports a time stamp") {
  const ControlAffineSystem sys = scalar_linear(25.0);  // violently unstable
  SimConfig cfg;
  cfg.step_h = 1e-2;
  cfg.dt = 1e-2;
  cfg.horizon = 10.0;
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  const Trajectory tr = integrate(sys, x0, nullptr, cfg);
  CHECK(tr.diverged);
  CHECK(tr.diverged_at > 0.0);
  CHECK(tr.diverged_at < 10.0);
}

TEST_CASE("config validation") {
  SimConfig bad;
  bad.step_h = 0.3;
  bad.dt = 0.1;
  bad.horizon = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  SimConfig frac;
  frac.step_h = 0.03;
  frac.dt = 0.1;
  frac.horizon = 1.0;
  CHECK_THROWS_AS(frac.validate(), std::invalid_argument);
}

TEST_CASE("trajectory CSV header") {
  const ControlAffineSystem sys = ControlAffineSystem::slow_manifold(-2.0, 1.0);
  SimConfig cfg;
  cfg.step_h = 0.01;
  cfg.dt = 0.01;
  cfg.horizon = 0.05;
  Eigen::VectorXd x0(2);
  x0 << 0.1, 0.2;
  const Trajectory tr = integrate(sys, x0, nullptr, cfg);
  const std::string path = "/tmp/koopcert_traj_test.csv";
  tr.write_csv(path);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,x1,x2,u1");
}
