#include "occplan/planner.hpp"

#include "occplan/bfgs.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace occplan {

Eigen::VectorXd SupportTrajectory::stacked() const {
  Eigen::VectorXd z(points.size() + 3);
  z << history, points;
  return z;
}

void SupportTrajectory::unstack(const Eigen::VectorXd& z) {
  history = z.head<3>();
  points = z.tail(z.size() - 3);
}

double SupportTrajectory::speed(int i) const {
  const int n = size();
  if (n < 2) return 0.0;
  const int c = std::min(i, n - 2);
  return (points(c + 1) - points(c)) / h;
}

Kinematics<double> kinematics(const SupportTrajectory& traj) {
  return kinematics<double>(traj.stacked(), traj.h);
}

DifferenceMatrices difference_matrices(int n, double h) {
  DifferenceMatrices d;
  d.dv = Eigen::MatrixXd::Zero(n, n + 3);
  d.da = Eigen::MatrixXd::Zero(n, n + 3);
  d.dj = Eigen::MatrixXd::Zero(n, n + 3);
  const double h2 = h * h, h3 = h2 * h;
  for (int i = 0; i < n; ++i) {
    const int c = std::min(i, n - 2) + 3;
    d.dv(i, c + 1) = 1.0 / h;
    d.dv(i, c) = -1.0 / h;
    d.da(i, c + 1) = 1.0 / h2;
    d.da(i, c) = -2.0 / h2;
    d.da(i, c - 1) = 1.0 / h2;
    d.dj(i, c + 1) = 1.0 / h3;
    d.dj(i, c) = -3.0 / h3;
    d.dj(i, c - 1) = 3.0 / h3;
    d.dj(i, c - 2) = -1.0 / h3;
  }
  return d;
}

Objective::Objective(ObjectiveContext ctx, int n_points, double h)
    : ctx_(std::move(ctx)), n_(n_points), h_(h), d_(difference_matrices(n_points, h)) {
  for (const auto& b : ctx_.constraints.bounds) {
    if (b.index < 0 || b.index >= n_) throw std::out_of_range("bound index outside the horizon");
  }
  if (ctx_.lead_rear && ctx_.lead_rear->size() != n_) {
    throw std::invalid_argument("lead prediction length does not match the horizon");
  }
}

double Objective::value_and_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const {
  const auto& w = ctx_.weights;
  const Eigen::VectorXd v = d_.dv * z;
  const Eigen::VectorXd a = d_.da * z;
  const Eigen::VectorXd j = d_.dj * z;
  Eigen::VectorXd ev(n_);
  Eigen::VectorXd dref = Eigen::VectorXd::Zero(n_);  // d(reference)/dx_i
  for (int i = 0; i < n_; ++i) {
    const double r = speed_reference(z(i + 3), ctx_);
    ev(i) = v(i) - r;
    if (ctx_.stop_target && r < ctx_.v_des && r > 0.0) {
      const double sig = 1.0 / (1.0 + std::exp(-ctx_.stop_sharpness * (*ctx_.stop_target - z(i + 3))));
      dref(i) = -ctx_.stop_decel * sig / r;
    }
  }

  double f = w.w_vel * ev.squaredNorm() + w.w_acc * a.squaredNorm() + w.w_jerk * j.squaredNorm();
  grad = 2.0 * (w.w_vel * d_.dv.transpose() * ev + w.w_acc * d_.da.transpose() * a +
                w.w_jerk * d_.dj.transpose() * j);
  grad.tail(n_) -= 2.0 * w.w_vel * ev.cwiseProduct(dref);

  if (ctx_.mode == ModeKind::FollowDrive && ctx_.lead_rear) {
    const Eigen::VectorXd e = (ctx_.s_min + ctx_.headway * v.array() + z.tail(n_).array() -
                               ctx_.lead_rear->array()).matrix();
    f += w.w_s * e.squaredNorm();
    grad += 2.0 * w.w_s * ctx_.headway * (d_.dv.transpose() * e);
    grad.tail(n_) += 2.0 * w.w_s * e;
  }

  const double beta = w.penalty_sharpness;
  const double k = ctx_.constraints.k;
  for (const auto& b : ctx_.constraints.bounds) {
    const int i = b.index;
    const double g = bound_violation(z(i + 3), v(i), b, ctx_);
    const double sp = softplus(g, beta);
    const double sig = 1.0 / (1.0 + std::exp(-beta * g));
    f += w.penalty_weight * sp * sp;
    const double dpen = 2.0 * w.penalty_weight * sp * sig;

    double dg_dv = v(i) / ctx_.a_dec;
    if (ctx_.sigma_mode == SigmaMode::FirstOrder && ctx_.sigma_v > 0.0) {
      const double var = ctx_.sigma_x * ctx_.sigma_x + b.extra_variance +
                         braking_distance_variance(v(i), ctx_.sigma_v, ctx_.a_dec, ctx_.sigma_mode);
      if (var > 0.0) {
        const double dvar = 2.0 * v(i) * ctx_.sigma_v * ctx_.sigma_v / (ctx_.a_dec * ctx_.a_dec);
        dg_dv += k * dvar / (2.0 * std::sqrt(var));
      }
    }
    grad(i + 3) += dpen;
    grad += (dpen * dg_dv) * d_.dv.row(i).transpose();
  }

  for (Eigen::Index q = 0; q + 1 < z.size(); ++q) {
    const double back = z(q) - z(q + 1);
    if (back > 0.0) {
      f += w.penalty_weight * back * back;
      grad(q) += 2.0 * w.penalty_weight * back;
      grad(q + 1) -= 2.0 * w.penalty_weight * back;
    }
  }
  grad *= gradient_scale;
  return f;
}

Eigen::MatrixXd Objective::quadratic_hessian() const {
  const auto& w = ctx_.weights;
  Eigen::MatrixXd hq = 2.0 * (w.w_vel * d_.dv.transpose() * d_.dv + w.w_acc * d_.da.transpose() * d_.da +
                              w.w_jerk * d_.dj.transpose() * d_.dj);
  if (ctx_.mode == ModeKind::FollowDrive && ctx_.lead_rear) {
    Eigen::MatrixXd m = ctx_.headway * d_.dv;
    m.rightCols(n_) += Eigen::MatrixXd::Identity(n_, n_);
    hq += 2.0 * w.w_s * m.transpose() * m;
  }
  return hq;
}

double Objective::max_violation(const Eigen::VectorXd& z, int limit) const {
  const Eigen::VectorXd v = d_.dv * z;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : ctx_.constraints.bounds) {
    if (b.index >= limit) continue;
    worst = std::max(worst, bound_violation(z(b.index + 3), v(b.index), b, ctx_));
  }
  return worst;
}

Eigen::VectorXd braking_profile(double x0, double v0, double a_dec, double h, int count) {
  Eigen::VectorXd p(count);
  double x = x0, v = std::max(0.0, v0);
  for (int k = 0; k < count; ++k) {
    p(k) = x;
    x += v * h;
    v = std::max(0.0, v - a_dec * h);
  }
  return p;
}

SupportTrajectory warm_start(const std::optional<SupportTrajectory>& prev, double t0, double x, double v,
                             double a_dec, const TimingModel& timing, int n_points) {
  SupportTrajectory out;
  out.t0 = t0;
  out.h = timing.h;
  out.n_pin = timing.n_pin;
  const int fixed = 3 + timing.n_pin;

  if (prev) {
    const long m = std::lround((t0 - prev->t0) / prev->h);
    const Eigen::VectorXd zp = prev->stacked();
    if (m >= 0 && prev->h == timing.h && m + fixed < zp.size()) {
      Eigen::VectorXd z(n_points + 3);
      z.head(fixed) = zp.segment(m, fixed);
      const double v_start = (zp(m + fixed) - zp(m + fixed - 1)) / timing.h;
      const Eigen::VectorXd tail = braking_profile(z(fixed - 1), v_start, a_dec, timing.h, n_points + 3 - fixed + 1);
      z.tail(n_points + 3 - fixed) = tail.tail(n_points + 3 - fixed);
      out.unstack(z);
      return out;
    }
  }
  out.history << x - 3.0 * v * timing.h, x - 2.0 * v * timing.h, x - v * timing.h;
  out.points = braking_profile(x, v, a_dec, timing.h, n_points);
  return out;
}

PlanResult optimize(const SupportTrajectory& init, const ObjectiveContext& ctx, const PlannerConfig& config,
                    double gradient_scale) {
  const int n = init.size();
  const int fixed = 3 + init.n_pin;
  const int n_free = n + 3 - fixed;
  Objective obj(ctx, n, init.h);
  obj.gradient_scale = gradient_scale;

  const Eigen::VectorXd z0 = init.stacked();
  Eigen::VectorXd g_full(z0.size());
  const double f0 = obj.value_and_gradient(z0, g_full);
  if (!std::isfinite(f0)) throw std::runtime_error("non-finite objective at initialization");

  PlanResult res;
  res.diagnostics.f_init = f0;

  Eigen::VectorXd z = z0;
  auto fg = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    z.tail(n_free) = y;
    const double f = obj.value_and_gradient(z, g_full);
    g = g_full.tail(n_free);
    return f;
  };

  Eigen::MatrixXd hq = obj.quadratic_hessian().bottomRightCorner(n_free, n_free);
  hq.diagonal().array() += 1e-9 * std::max(1.0, hq.diagonal().mean());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hq);
  Eigen::MatrixXd h0 = Eigen::MatrixXd::Identity(n_free, n_free);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) h0 = ldlt.solve(h0);

  BfgsOptions opt;
  opt.max_iterations = config.max_iterations;
  opt.grad_tol = config.grad_tol;
  const BfgsResult br = bfgs_minimize(fg, z0.tail(n_free), h0, opt);

  Eigen::VectorXd zr = z0;
  zr.tail(n_free) = br.x;
  for (Eigen::Index q = fixed; q < zr.size(); ++q) zr(q) = std::max(zr(q), zr(q - 1));
  Eigen::VectorXd g_unused(zr.size());
  double fr = obj.value_and_gradient(zr, g_unused);

  auto& d = res.diagnostics;
  d.iterations = br.iterations;
  d.grad_norm = br.grad_norm;
  d.converged = br.converged;
  if (!(fr <= f0)) {
    zr = z0;
    fr = f0;
  }
  d.pinned_window_violation = obj.max_violation(zr, 2 * init.n_pin);
  if (d.pinned_window_violation > config.fallback_tol) {
    d.fallback = true;
    zr = z0;
    fr = f0;
    d.pinned_window_violation = obj.max_violation(zr, 2 * init.n_pin);
  }
  d.max_violation = obj.max_violation(zr, n);
  d.f_final = fr;
  res.trajectory = init;
  res.trajectory.unstack(zr);
  return res;
}

}  // namespace occplan
