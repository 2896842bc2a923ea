#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace occplan {

struct BfgsOptions {
  int max_iterations = 200;
  double grad_tol = 1e-6;  // on the inf-norm, relative to max(1, |f|)
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_evals = 40;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  if (disc < 0.0) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return 0.5 * (a + b);
  return t;
}

}  // namespace detail

/// Dense BFGS with a strong-Wolfe line search. `fg(x, g)` returns f(x) and
/// writes the gradient into g. `h0_inv` seeds the inverse Hessian.
template <typename F>
BfgsResult bfgs_minimize(F&& fg, Eigen::VectorXd x, const Eigen::MatrixXd& h0_inv, const BfgsOptions& opt) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n), g_new(n), x_new(n);
  double f = fg(x, g);
  Eigen::MatrixXd hinv = h0_inv;
  BfgsResult res;

  auto converged = [&](double fv, const Eigen::VectorXd& gv) {
    return gv.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(fv));
  };

  int it = 0;
  for (; it < opt.max_iterations && !converged(f, g); ++it) {
    Eigen::VectorXd p = -hinv * g;
    double d0 = g.dot(p);
    if (!(d0 < 0.0)) {
      hinv.setIdentity();
      hinv *= 1.0 / std::max(1.0, g.norm());
      p = -hinv * g;
      d0 = g.dot(p);
    }

    // Strong-Wolfe search (bracketing then zoom).
    auto phi = [&](double a, Eigen::VectorXd& gout, Eigen::VectorXd& xout) {
      xout = x + a * p;
      return fg(xout, gout);
    };
    double a_prev = 0.0, f_prev = f, d_prev = d0;
    double a = 1.0;
    double a_star = 0.0, f_star = f;
    bool found = false;
    int evals = 0;
    Eigen::VectorXd g_try(n), x_try(n);
    auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi) {
      while (evals < opt.max_line_evals) {
        const double aj = detail::cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi);
        const double fj = phi(aj, g_try, x_try);
        ++evals;
        const double dj = g_try.dot(p);
        if (!std::isfinite(fj) || fj > f + opt.c1 * aj * d0 || fj >= f_lo) {
          hi = aj;
          f_hi = std::isfinite(fj) ? fj : std::numeric_limits<double>::max();
          d_hi = std::isfinite(dj) ? dj : 0.0;
        } else {
          if (std::abs(dj) <= -opt.c2 * d0) {
            a_star = aj;
            f_star = fj;
            g_new = g_try;
            x_new = x_try;
            return true;
          }
          if (dj * (hi - lo) >= 0.0) {
            hi = lo;
            f_hi = f_lo;
            d_hi = d_lo;
          }
          lo = aj;
          f_lo = fj;
          d_lo = dj;
          // Keep the best sufficient-decrease point in case the budget runs out.
          a_star = aj;
          f_star = fj;
          g_new = g_try;
          x_new = x_try;
        }
        if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
      }
      return a_star > 0.0;
    };

    while (evals < opt.max_line_evals) {
      const double fa = phi(a, g_try, x_try);
      ++evals;
      const double da = g_try.dot(p);
      if (!std::isfinite(fa) || fa > f + opt.c1 * a * d0 || (evals > 1 && fa >= f_prev)) {
        found = zoom(a_prev, f_prev, d_prev, a, std::isfinite(fa) ? fa : std::numeric_limits<double>::max(),
                     std::isfinite(da) ? da : 0.0);
        break;
      }
      if (std::abs(da) <= -opt.c2 * d0) {
        a_star = a;
        f_star = fa;
        g_new = g_try;
        x_new = x_try;
        found = true;
        break;
      }
      if (da >= 0.0) {
        found = zoom(a, fa, da, a_prev, f_prev, d_prev);
        break;
      }
      a_prev = a;
      f_prev = fa;
      d_prev = da;
      a_star = a;
      f_star = fa;
      g_new = g_try;
      x_new = x_try;
      a *= 2.0;
    }
    if (!found && !(a_star > 0.0 && f_star < f)) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    x = x_new;
    if (!(f_star < f) && s.lpNorm<Eigen::Infinity>() == 0.0) break;
    f = f_star;
    g = g_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  res.x = x;
  res.f = f;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  res.iterations = it;
  res.converged = converged(f, g);
  return res;
}

}  // namespace occplan
