#pragma once

#include "occplan/scene.hpp"
#include "occplan/types.hpp"
#include "occplan/visibility.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace occplan {

template <typename Scalar>
Scalar braking_distance(const Scalar& v, double a_dec) {
  return v * v / Scalar(2.0 * a_dec);
}

struct StopDistribution {
  double mean = 0.0;
  double std = 0.0;
};

/// Variance of the braking distance at speed `v` given speed std `sigma_v`.
template <typename Scalar>
Scalar braking_distance_variance(const Scalar& v, double sigma_v, double a_dec, SigmaMode mode) {
  if (mode == SigmaMode::PaperExact) return Scalar(4.0 * sigma_v * sigma_v);
  const Scalar r = v / Scalar(a_dec);
  return r * r * Scalar(sigma_v * sigma_v);
}

StopDistribution stop_distribution(const Gaussian1D& pos, const Gaussian1D& speed, double a_dec, SigmaMode mode);

enum class ActiveRange { First2NPin, FullHorizon };

/// One chance constraint: stop_mean(i) + k * sqrt(ego_var(i) + extra_variance) <= upper.
struct Bound {
  int index = 0;
  double upper = 0.0;
  double extra_variance = 0.0;
};

struct ConstraintSet {
  ModeKind mode = ModeKind::FreeDrive;
  std::vector<Bound> bounds;
  ActiveRange active_range = ActiveRange::First2NPin;
  double k = 0.0;

  /// Bound at `index` with the smallest effective upper limit, if any.
  std::optional<Bound> tightest(int index) const;
};

ConstraintSet free_drive_bounds(double x0, double s_vis, double s_min, const TimingModel& timing, double k);

/// `lead_rear` is the measured rear-bumper position of the lead in ego arc
/// coordinates; `ego_sigma` holds the ego's localization stds.
ConstraintSet follow_drive_bounds(const Gaussian1D& lead_rear, const Gaussian1D& lead_speed, double a_dec,
                                  double s_min, const TimingModel& timing, double k, SigmaMode mode);

ConstraintSet intersection_stop_bounds(double x_mp, double s_min, const TimingModel& timing, double k,
                                       ActiveRange range, int n_points);

/// Per-index minimum of two constraint sets.
ConstraintSet compose(const ConstraintSet& a, const ConstraintSet& b);

enum class NoReturnClass { Below, On, Above };

NoReturnClass surface_of_no_return(double x, double v, double x_mp, double s_min, double a_dec);

/// Standard normal quantile: the k for which Pr{Z <= k} = confidence.
double k_from_confidence(double confidence);

struct ConstraintContext {
  const WorldState* world = nullptr;  // perceived snapshot
  const VisibilityResult* vis = nullptr;
  const PlanningMode* mode = nullptr;
  int n_points = 40;
  double snapshot_age = 0.0;  // plan t0 minus snapshot time
  double x0 = 0.0;            // ego state at plan t0
  double v0 = 0.0;
  double x_pinned = 0.0;      // last pinned support point
  double v_pinned = 0.0;
  bool hold_stop = false;     // stop sign not yet served
};

struct AssemblyReport {
  std::string decision = "free";
  bool gap_checked = false;
  bool gap_accepted = false;
  bool committed = false;
  bool visibility_ok = true;
  bool deceleration_ok = true;
  std::optional<double> virtual_lead_rear;  // merge-projected lead, ego arc coordinates
  std::optional<double> virtual_lead_speed;
  std::optional<double> stop_line;  // set when a full-horizon stop bound was added
};

ConstraintSet assemble_constraints(const ConstraintContext& ctx, AssemblyReport* report = nullptr);

}  // namespace occplan
