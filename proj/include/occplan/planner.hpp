#pragma once

#include "occplan/safety.hpp"
#include "occplan/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>

namespace occplan {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Arc-length support points on the h-grid. `history` holds the positions at
/// t0-3h, t0-2h, t0-h; `points(0)` is at t0.
struct SupportTrajectory {
  double t0 = 0.0;
  double h = 0.25;
  Eigen::Vector3d history = Eigen::Vector3d::Zero();
  Eigen::VectorXd points;
  int n_pin = 3;

  int size() const { return static_cast<int>(points.size()); }
  double time(int i) const { return t0 + i * h; }

  /// History followed by points, the layout every stencil below works on.
  Eigen::VectorXd stacked() const;
  void unstack(const Eigen::VectorXd& z);

  /// Forward-difference speed at support point i (backward at the last one).
  double speed(int i) const;
};

template <typename Scalar>
struct Kinematics {
  VecX<Scalar> v, a, j;
};

/// Finite-difference velocity, acceleration and jerk at every support point
/// of the stacked vector z (3 history entries, then N points).
template <typename Scalar>
Kinematics<Scalar> kinematics(const VecX<Scalar>& z, double h) {
  const Eigen::Index n = z.size() - 3;
  Kinematics<Scalar> k;
  k.v.resize(n);
  k.a.resize(n);
  k.j.resize(n);
  const Scalar h1(h), h2(h * h), h3(h * h * h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index c = std::min(i, n - 2) + 3;  // stencil anchor, shifted back at the end
    k.v(i) = (z(c + 1) - z(c)) / h1;
    k.a(i) = (z(c + 1) - Scalar(2) * z(c) + z(c - 1)) / h2;
    k.j(i) = (z(c + 1) - Scalar(3) * z(c) + Scalar(3) * z(c - 1) - z(c - 2)) / h3;
  }
  return k;
}

Kinematics<double> kinematics(const SupportTrajectory& traj);

/// Linear operators with kinematics(z) == {Dv z, Da z, Dj z}.
struct DifferenceMatrices {
  Eigen::MatrixXd dv, da, dj;
};

DifferenceMatrices difference_matrices(int n_points, double h);

template <typename Scalar>
Scalar softplus(const Scalar& z, double beta) {
  using std::exp;
  using std::log1p;
  const Scalar bz = Scalar(beta) * z;
  if (bz > Scalar(0)) return z + log1p(exp(-bz)) / Scalar(beta);
  return log1p(exp(bz)) / Scalar(beta);
}

struct ObjectiveContext {
  PlannerWeights weights;
  ModeKind mode = ModeKind::FreeDrive;
  double v_des = 13.89;
  double a_dec = 8.0;
  double sigma_x = 0.0;
  double sigma_v = 0.0;
  SigmaMode sigma_mode = SigmaMode::FirstOrder;
  ConstraintSet constraints;
  double s_min = 2.0;
  double headway = 1.5;
  std::optional<Eigen::VectorXd> lead_rear;  // predicted lead rear per support point (follow mode)
  // While a full-horizon stop bound holds, the speed reference follows a
  // comfortable-deceleration profile into this stop position.
  std::optional<double> stop_target;
  double stop_decel = 2.0;
  double stop_sharpness = 8.0;
};

/// Speed reference at position x: v_des, capped by the stop profile if any.
template <typename Scalar>
Scalar speed_reference(const Scalar& x, const ObjectiveContext& ctx) {
  using std::sqrt;
  if (!ctx.stop_target) return Scalar(ctx.v_des);
  const Scalar room = softplus(Scalar(*ctx.stop_target) - x, ctx.stop_sharpness);
  const Scalar cap = sqrt(Scalar(2.0 * ctx.stop_decel) * room);
  return cap < Scalar(ctx.v_des) ? cap : Scalar(ctx.v_des);
}

/// Stop-point side of a bound: mu_stop + k * sigma_stop - upper.
template <typename Scalar>
Scalar bound_violation(const Scalar& x, const Scalar& v, const Bound& b, const ObjectiveContext& ctx) {
  using std::sqrt;
  const Scalar var = Scalar(ctx.sigma_x * ctx.sigma_x + b.extra_variance) +
                     braking_distance_variance(v, ctx.sigma_v, ctx.a_dec, ctx.sigma_mode);
  const Scalar sigma = var > Scalar(0) ? Scalar(sqrt(var)) : Scalar(0);
  return x + braking_distance(v, ctx.a_dec) + Scalar(ctx.constraints.k) * sigma - Scalar(b.upper);
}

class Objective {
 public:
  Objective(ObjectiveContext ctx, int n_points, double h);

  const ObjectiveContext& context() const { return ctx_; }
  const DifferenceMatrices& matrices() const { return d_; }
  double h() const { return h_; }

  template <typename Scalar>
  Scalar comfort(const VecX<Scalar>& z) const {
    const auto k = kinematics(z, h_);
    const auto& w = ctx_.weights;
    Scalar f(0);
    const Eigen::Index n = k.v.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar dv = k.v(i) - speed_reference(z(i + 3), ctx_);
      f += Scalar(w.w_vel) * dv * dv + Scalar(w.w_acc) * k.a(i) * k.a(i) + Scalar(w.w_jerk) * k.j(i) * k.j(i);
    }
    if (ctx_.mode == ModeKind::FollowDrive && ctx_.lead_rear) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar s = Scalar((*ctx_.lead_rear)(i)) - z(i + 3);
        const Scalar e = Scalar(ctx_.s_min) + k.v(i) * Scalar(ctx_.headway) - s;
        f += Scalar(w.w_s) * e * e;
      }
    }
    return f;
  }

  template <typename Scalar>
  Scalar penalty(const VecX<Scalar>& z) const {
    const auto k = kinematics(z, h_);
    const auto& w = ctx_.weights;
    Scalar f(0);
    for (const auto& b : ctx_.constraints.bounds) {
      const Scalar sp = softplus(bound_violation(z(b.index + 3), k.v(b.index), b, ctx_), w.penalty_sharpness);
      f += Scalar(w.penalty_weight) * sp * sp;
    }
    for (Eigen::Index q = 0; q + 1 < z.size(); ++q) {
      const Scalar back = z(q) - z(q + 1);
      if (back > Scalar(0)) f += Scalar(w.penalty_weight) * back * back;
    }
    return f;
  }

  template <typename Scalar>
  Scalar value(const VecX<Scalar>& z) const {
    return comfort(z) + penalty(z);
  }

  /// Analytic gradient with respect to every entry of the stacked vector.
  double value_and_gradient(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const;

  /// Hessian of the quadratic (comfort and follow) part.
  Eigen::MatrixXd quadratic_hessian() const;

  /// Largest violation over bounds with index below `limit`.
  double max_violation(const Eigen::VectorXd& z, int limit) const;

  /// Negative-control hook: scales the returned gradient.
  double gradient_scale = 1.0;

 private:
  ObjectiveContext ctx_;
  int n_;
  double h_;
  DifferenceMatrices d_;
};

/// Time-aligned copy of the previous solution's history and pinned points,
/// followed by full braking. Without a previous solution the whole profile
/// brakes from (x, v) with a constant-speed history.
SupportTrajectory warm_start(const std::optional<SupportTrajectory>& prev, double t0, double x, double v,
                             double a_dec, const TimingModel& timing, int n_points);

/// Full-braking profile from (x0, v0): v_{k+1} = max(0, v_k - a h).
Eigen::VectorXd braking_profile(double x0, double v0, double a_dec, double h, int count);

struct PlannerDiagnostics {
  int iterations = 0;
  double grad_norm = 0.0;
  double max_violation = 0.0;  // over all bounds at the returned trajectory
  double pinned_window_violation = 0.0;
  bool fallback = false;
  bool converged = false;
  double f_init = 0.0;
  double f_final = 0.0;
};

struct PlanResult {
  SupportTrajectory trajectory;
  PlannerDiagnostics diagnostics;
};

PlanResult optimize(const SupportTrajectory& init, const ObjectiveContext& ctx, const PlannerConfig& config,
                    double gradient_scale = 1.0);

}  // namespace occplan
