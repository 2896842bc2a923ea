#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "occplan/bfgs.hpp"
#include "occplan/planner.hpp"

#include <Eigen/LU>

#include <cmath>
#include <random>

using namespace occplan;
using doctest::Approx;

namespace {

Eigen::VectorXd ramp(int n, double x0, double slope, double h) {
  Eigen::VectorXd z(n + 3);
  for (int q = 0; q < n + 3; ++q) z(q) = x0 + slope * (q - 3) * h;
  return z;
}

SupportTrajectory cruise(double x0, double v, int n, double h = 0.25) {
  SupportTrajectory t;
  t.h = h;
  const Eigen::VectorXd z = ramp(n, x0, v, h);
  t.unstack(z);
  return t;
}

}  // namespace

TEST_CASE("finite-difference kinematics") {
  const double h = 0.25;
  const int n = 12;
  Eigen::VectorXd c = Eigen::VectorXd::Constant(n + 3, 7.0);
  auto k = kinematics(c, h);
  CHECK(k.v.cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.a.cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.j.cwiseAbs().maxCoeff() == 0.0);

  k = kinematics(ramp(n, 3.0, 4.0, h), h);
  for (int i = 0; i < n; ++i) {
    CHECK(k.v(i) == Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(k.a(i)) < 1e-9);
  }

  // x = c t^2 / 2 has a = c and zero jerk on any stencil.
  Eigen::VectorXd q(n + 3);
  for (int i = 0; i < n + 3; ++i) q(i) = 0.5 * 3.0 * std::pow((i - 3) * h, 2);
  k = kinematics(q, h);
  for (int i = 0; i < n; ++i) {
    CHECK(k.a(i) == Approx(3.0).epsilon(1e-9));
    CHECK(std::abs(k.j(i)) < 1e-8);
  }

  const auto d = difference_matrices(n, h);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::VectorXd z(n + 3);
  for (int i = 0; i < n + 3; ++i) z(i) = g(rng);
  k = kinematics(z, h);
  CHECK((d.dv * z - k.v).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((d.da * z - k.a).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((d.dj * z - k.j).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("objective terms") {
  const double h = 0.25;
  const int n = 20;
  ObjectiveContext ctx;
  ctx.v_des = 10.0;
  const Objective free(ctx, n, h);
  CHECK(free.comfort<double>(ramp(n, 0.0, 10.0, h)) == Approx(0.0).epsilon(1e-12));
  CHECK(free.comfort<double>(ramp(n, 0.0, 9.0, h)) == Approx(ctx.weights.w_vel * n).epsilon(1e-9));

  SUBCASE("penalty at the bound and deep inside") {
    ObjectiveContext c = ctx;
    c.constraints.k = 0.0;
    // At constant speed 10: stop point = x + 6.25. Put the bound exactly there for index 4.
    const Eigen::VectorXd z = ramp(n, 0.0, 10.0, h);
    c.constraints.bounds = {{4, z(7) + braking_distance(10.0, c.a_dec), 0.0}};
    const double b = c.weights.penalty_sharpness;
    CHECK(Objective(c, n, h).penalty<double>(z) == Approx(c.weights.penalty_weight * std::pow(std::log(2.0) / b, 2)));
    c.constraints.bounds[0].upper += 5.0;
    const double deep = Objective(c, n, h).penalty<double>(z);
    CHECK(deep < 1e-100);
    c.constraints.bounds[0].upper -= 5.5;  // 0.5 m violation
    const double p1 = Objective(c, n, h).penalty<double>(z);
    CHECK(p1 == Approx(c.weights.penalty_weight * 0.25).epsilon(1e-6));
    c.weights.penalty_weight *= 2.0;
    CHECK(Objective(c, n, h).penalty<double>(z) == Approx(2.0 * p1));
  }
  SUBCASE("backward step is penalized") {
    Eigen::VectorXd z = ramp(n, 0.0, 10.0, h);
    z(10) = z(9) - 0.1;
    CHECK(free.penalty<double>(z) == Approx(ctx.weights.penalty_weight * 0.01));
  }
  SUBCASE("follow term vanishes on the headway gap") {
    ObjectiveContext c = ctx;
    c.mode = ModeKind::FollowDrive;
    const Eigen::VectorXd z = ramp(n, 0.0, 10.0, h);
    Eigen::VectorXd lead(n);
    for (int i = 0; i < n; ++i) lead(i) = z(i + 3) + c.s_min + 10.0 * c.headway;
    c.lead_rear = lead;
    CHECK(Objective(c, n, h).comfort<double>(z) == Approx(0.0).epsilon(1e-12));
    lead.array() += 1.0;
    c.lead_rear = lead;
    CHECK(Objective(c, n, h).comfort<double>(z) == Approx(c.weights.w_s * n).epsilon(1e-9));
  }
}

TEST_CASE("analytic gradient against central differences") {
  const double h = 0.25;
  const int n = 16;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    ObjectiveContext c;
    c.sigma_x = 0.3;
    c.sigma_v = 0.2;
    c.sigma_mode = trial % 2 ? SigmaMode::PaperExact : SigmaMode::FirstOrder;
    c.constraints.k = 2.0;
    Eigen::VectorXd z = ramp(n, 0.0, 8.0, h);
    for (int q = 3; q < n + 3; ++q) z(q) += 0.2 * u(rng);
    for (int i = 0; i < 6; ++i) c.constraints.bounds.push_back({i, z(i + 3) + 4.0 + 0.3 * u(rng), 0.04});
    if (trial >= 4) {
      c.mode = ModeKind::FollowDrive;
      Eigen::VectorXd lead(n);
      for (int i = 0; i < n; ++i) lead(i) = 30.0 + 5.0 * i * h;
      c.lead_rear = lead;
    }
    if (trial == 3) c.stop_target = z(n + 2) - 5.0;
    if (trial % 3 == 0) z(8) = z(7) - 0.05;
    const Objective obj(c, n, h);
    Eigen::VectorXd g(z.size());
    obj.value_and_gradient(z, g);
    using LD = long double;
    VecX<LD> zl = z.cast<LD>();
    double worst = 0.0, scale = 1.0;
    for (int q = 0; q < z.size(); ++q) {
      VecX<LD> p = zl, m = zl;
      p(q) += 1e-7L;
      m(q) -= 1e-7L;
      const double fd = static_cast<double>((obj.value<LD>(p) - obj.value<LD>(m)) / 2e-7L);
      worst = std::max(worst, std::abs(fd - g(q)));
      scale = std::max(scale, std::abs(fd));
    }
    CAPTURE(trial);
    CHECK(worst / scale <= 1e-5);
  }
}

TEST_CASE("braking profile and warm start") {
  const auto p = braking_profile(0.0, 10.0, 5.0, 0.25, 12);
  double v = 10.0;
  for (int kk = 0; kk + 1 < 12; ++kk) {
    CHECK(p(kk + 1) - p(kk) == Approx(v * 0.25));
    v = std::max(0.0, v - 1.25);
  }
  CHECK(p(11) == p(9));
  CHECK(p(9) - p(8) == Approx(0.0));
  CHECK(p(8) - p(7) == Approx(1.25 * 0.25));

  TimingModel tm;
  const auto cold = warm_start(std::nullopt, 0.0, 5.0, 10.0, 8.0, tm, 20);
  CHECK(cold.size() == 20);
  CHECK(cold.points(0) == 5.0);
  CHECK(cold.history(2) == Approx(5.0 - 2.5));

  auto prev = cruise(0.0, 10.0, 20);
  prev.t0 = 1.0;
  const auto next = warm_start(prev, 1.75, 0.0, 0.0, 8.0, tm, 20);
  const Eigen::VectorXd zp = prev.stacked(), zn = next.stacked();
  CHECK(zn.head(6) == zp.segment(3, 6));
  CHECK(next.t0 == 1.75);
  // After the copied head the profile brakes from the speed it left with.
  CHECK(zn(6) - zn(5) == Approx(2.5));
  CHECK(zn(7) - zn(6) == Approx(2.0));
}

TEST_CASE("optimizer") {
  PlannerConfig cfg;
  cfg.n_points = 40;
  TimingModel tm;

  SUBCASE("free road reaches the set speed") {
    ObjectiveContext c;
    c.v_des = 12.0;
    const auto r = optimize(cruise(0.0, 12.0, 40), c, cfg);
    CHECK_FALSE(r.diagnostics.fallback);
    for (int i = 0; i < 39; ++i) CHECK(std::abs(r.trajectory.speed(i) - 12.0) < 0.05);

    const auto up = optimize(warm_start(std::nullopt, 0.0, 0.0, 8.0, 8.0, tm, 40), c, cfg);
    CHECK(up.diagnostics.f_final < up.diagnostics.f_init);
    CHECK(up.trajectory.speed(38) > 11.0);
  }
  SUBCASE("visibility bound binds") {
    ObjectiveContext c;
    c.v_des = 13.89;
    c.constraints = free_drive_bounds(0.0, 22.0, 2.0, tm, 0.0);  // cruising at 10 stops at 18.75
    const auto init = cruise(0.0, 10.0, 40);
    const auto r = optimize(init, c, cfg);
    CHECK_FALSE(r.diagnostics.fallback);
    const Objective obj(c, 40, tm.h);
    const auto z = r.trajectory.stacked();
    const auto k = kinematics(r.trajectory);
    double slack = 1e9;
    for (const auto& b : c.constraints.bounds) slack = std::min(slack, -bound_violation(z(b.index + 3), k.v(b.index), b, c));
    CHECK(slack >= -1e-3);
    CHECK(slack <= 0.1);
    for (int i = 0; i + 1 < 40; ++i) CHECK(r.trajectory.points(i + 1) >= r.trajectory.points(i));
  }
  SUBCASE("infeasible pinned window falls back to braking") {
    ObjectiveContext c;
    c.constraints = free_drive_bounds(0.0, 3.0, 2.0, tm, 0.0);
    const auto init = warm_start(std::nullopt, 0.0, 0.0, 13.89, 8.0, tm, 40);
    const auto r = optimize(init, c, cfg);
    CHECK(r.diagnostics.fallback);
    CHECK(r.trajectory.stacked() == init.stacked());
  }
}

TEST_CASE("bfgs on smooth test functions") {
  auto rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    g(0) = -400.0 * x(0) * (x(1) - x(0) * x(0)) - 2.0 * (1.0 - x(0));
    g(1) = 200.0 * (x(1) - x(0) * x(0));
    return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
  };
  BfgsOptions opt;
  opt.max_iterations = 500;
  opt.grad_tol = 1e-10;
  const auto r = bfgs_minimize(rosen, Eigen::Vector2d(-1.2, 1.0), Eigen::Matrix2d::Identity(), opt);
  CHECK(r.converged);
  CHECK(r.x(0) == Approx(1.0).epsilon(1e-6));
  CHECK(r.x(1) == Approx(1.0).epsilon(1e-6));

  Eigen::MatrixXd a(3, 3);
  a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  const Eigen::Vector3d b(1, 2, 3);
  auto quad = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = a * x - b;
    return 0.5 * x.dot(a * x) - b.dot(x);
  };
  const auto q = bfgs_minimize(quad, Eigen::Vector3d::Zero(), a.inverse(), opt);
  CHECK(q.iterations <= 2);
  CHECK((a * q.x - b).norm() < 1e-9);
}
