#include "occplan/safety.hpp"

#include "occplan/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace occplan {

StopDistribution stop_distribution(const Gaussian1D& pos, const Gaussian1D& speed, double a_dec, SigmaMode mode) {
  const double var = pos.std * pos.std + braking_distance_variance(speed.mean, speed.std, a_dec, mode);
  return {pos.mean + braking_distance(speed.mean, a_dec), std::sqrt(var)};
}

std::optional<Bound> ConstraintSet::tightest(int index) const {
  std::optional<Bound> best;
  for (const auto& b : bounds) {
    if (b.index != index) continue;
    const double eff = b.upper - k * std::sqrt(b.extra_variance);
    if (!best || eff < best->upper - k * std::sqrt(best->extra_variance)) best = b;
  }
  return best;
}

namespace {

ConstraintSet range_bounds(ModeKind mode, int from, int to, double upper, double extra, double k,
                           ActiveRange range) {
  ConstraintSet cs;
  cs.mode = mode;
  cs.k = k;
  cs.active_range = range;
  for (int i = from; i < to; ++i) cs.bounds.push_back({i, upper, extra});
  return cs;
}

}  // namespace

ConstraintSet free_drive_bounds(double x0, double s_vis, double s_min, const TimingModel& timing, double k) {
  return range_bounds(ModeKind::FreeDrive, 0, 2 * timing.n_pin, x0 + s_vis - s_min, 0.0, k, ActiveRange::First2NPin);
}

ConstraintSet follow_drive_bounds(const Gaussian1D& lead_rear, const Gaussian1D& lead_speed, double a_dec,
                                  double s_min, const TimingModel& timing, double k, SigmaMode mode) {
  const double upper = lead_rear.mean - s_min + braking_distance(lead_speed.mean, a_dec);
  const double extra = lead_rear.std * lead_rear.std +
                       braking_distance_variance(lead_speed.mean, lead_speed.std, a_dec, mode);
  return range_bounds(ModeKind::FollowDrive, 0, 2 * timing.n_pin, upper, extra, k, ActiveRange::First2NPin);
}

ConstraintSet intersection_stop_bounds(double x_mp, double s_min, const TimingModel& timing, double k,
                                       ActiveRange range, int n_points) {
  const int to = range == ActiveRange::FullHorizon ? n_points : 2 * timing.n_pin;
  return range_bounds(ModeKind::IntersectionGiveWay, 0, to, x_mp - s_min, 0.0, k, range);
}

ConstraintSet compose(const ConstraintSet& a, const ConstraintSet& b) {
  if (a.k != b.k && !a.bounds.empty() && !b.bounds.empty()) {
    throw std::invalid_argument("compose: constraint sets use different k");
  }
  ConstraintSet out;
  out.mode = a.mode;
  out.k = a.bounds.empty() ? b.k : a.k;
  out.active_range = (a.active_range == ActiveRange::FullHorizon || b.active_range == ActiveRange::FullHorizon)
                         ? ActiveRange::FullHorizon
                         : ActiveRange::First2NPin;
  std::map<int, Bound> best;
  for (const auto* cs : {&a, &b}) {
    for (const auto& bd : cs->bounds) {
      auto it = best.find(bd.index);
      const double eff = bd.upper - out.k * std::sqrt(bd.extra_variance);
      if (it == best.end() || eff < it->second.upper - out.k * std::sqrt(it->second.extra_variance)) {
        best[bd.index] = bd;
      }
    }
  }
  for (const auto& [i, bd] : best) out.bounds.push_back(bd);
  return out;
}

NoReturnClass surface_of_no_return(double x, double v, double x_mp, double s_min, double a_dec) {
  const double limit = x_mp - s_min;
  if (x > limit + 1e-9 * std::max(1.0, std::abs(limit))) return NoReturnClass::Above;  // already past the line
  const double v_crit = std::sqrt(2.0 * a_dec * std::max(0.0, limit - x));
  const double eps = 1e-9 * std::max(1.0, v_crit);
  if (v < v_crit - eps) return NoReturnClass::Below;
  if (v <= v_crit + eps) return NoReturnClass::On;
  return NoReturnClass::Above;
}

double k_from_confidence(double c) {
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double cc[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                              -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (c < lo) {
    const double q = std::sqrt(-2.0 * std::log(c));
    x = (((((cc[0] * q + cc[1]) * q + cc[2]) * q + cc[3]) * q + cc[4]) * q + cc[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (c <= 1.0 - lo) {
    const double q = c - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - c));
    x = -(((((cc[0] * q + cc[1]) * q + cc[2]) * q + cc[3]) * q + cc[4]) * q + cc[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - c;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

namespace {

CrossingAgent agent_from(const OtherVehicle& o, double age) {
  CrossingAgent a;
  a.arc = o.state.arc_pos.mean + o.state.speed.mean * age;
  a.v = o.state.speed.mean;
  a.length = o.state.length;
  a.params = o.params;
  return a;
}

CrossingAgent agent_from(const HypotheticalVehicle& h, const DriverParams& params) {
  CrossingAgent a;
  a.arc = h.arc;
  a.v = h.speed;
  a.params = params;
  return a;
}

}  // namespace

ConstraintSet assemble_constraints(const ConstraintContext& ctx, AssemblyReport* report) {
  const WorldState& w = *ctx.world;
  const VisibilityResult& vis = *ctx.vis;
  const PlanningMode& mode = *ctx.mode;
  AssemblyReport local;
  AssemblyReport& rep = report ? *report : local;
  rep = AssemblyReport{};

  const auto& ego = w.ego;
  const double k = w.safety.k;
  const double s_min = ego.params.s_min;
  const double a_dec = ego.params.a_dec;

  ConstraintSet cs = free_drive_bounds(ego.state.arc_pos.mean, vis.s_vis_ego, s_min, w.timing, k);
  cs.mode = mode.kind;

  auto add_follow = [&](double rear, double rear_std, double v, double v_std, double lead_a_dec) {
    auto f = follow_drive_bounds({rear, rear_std}, {v, v_std}, lead_a_dec, s_min, w.timing, k, w.safety.sigma_mode);
    cs = compose(cs, f);
    cs.mode = mode.kind;
  };

  if (mode.kind == ModeKind::FollowDrive && mode.mio && mode.mio->kind == MioRef::Kind::Vehicle) {
    const auto& lead = w.others[mode.mio->index];
    add_follow(lead.state.rear(), lead.state.arc_pos.std, lead.state.speed.mean, lead.state.speed.std,
               lead.params.a_dec);
    rep.decision = "follow";
    return cs;
  }
  if (!mode.merge) return cs;

  const MergePoint& m = *mode.merge;
  const auto& other_route = w.route(m.other_route_id);
  const double x_mp = m.ego_arc;
  const double t_d = w.timing.dead_time();
  const auto vis_it = vis.s_vis_cross.find(m.other_route_id);
  const double vis_cross_raw = vis_it == vis.s_vis_cross.end() ? 0.0 : vis_it->second;
  const double vis_cross = std::max(0.0, vis_cross_raw - other_route.speed_limit * ctx.snapshot_age);
  const HypotheticalVehicle hyp = make_hypothetical(w, m, vis_cross);
  const DriverParams hyp_params = hypothetical_driver(w, other_route);

  VehicleState ego_now = ego.state;
  ego_now.arc_pos.mean = ctx.x0;
  ego_now.speed.mean = ctx.v0;

  rep.committed =
      surface_of_no_return(ctx.x_pinned, ctx.v_pinned, x_mp, s_min, a_dec) == NoReturnClass::Above;

  auto stop = [&](ActiveRange range, const char* why) {
    rep.decision = why;
    if (rep.committed) {
      rep.decision += "+committed";
      return;
    }
    if (range == ActiveRange::FullHorizon) rep.stop_line = x_mp - s_min;
    cs = compose(cs, intersection_stop_bounds(x_mp, s_min, w.timing, k, range, ctx.n_points));
    cs.mode = mode.kind;
  };

  const double horizon = w.prediction.horizon;
  const double dt = w.prediction.dt;

  if (mode.kind == ModeKind::IntersectionGiveWay) {
    if (mode.mandatory_stop && ctx.hold_stop) {
      stop(ActiveRange::FullHorizon, "stop_sign");
      return cs;
    }
    const bool real_mio = mode.mio && mode.mio->kind == MioRef::Kind::Vehicle;
    const CrossingAgent mio = real_mio ? agent_from(w.others[mode.mio->index], ctx.snapshot_age)
                                       : agent_from(hyp, hyp_params);
    rep.gap_checked = true;
    rep.gap_accepted = gap_acceptance(ego_now, ego.params, mio, m, ego.params.politeness, horizon, dt);
    if (rep.gap_accepted) {
      rep.decision = "gap_accepted";
      return cs;
    }
    if (real_mio && mio.v > 0.5) {
      // Merge behind the MIO if its follower (seen or hidden) leaves room once it has passed.
      const double t_clear = std::max(0.0, m.other_arc - (mio.arc - mio.length)) / mio.v;
      CrossingAgent follower;
      if (const auto f = find_follower(w, mode.mio->index)) {
        follower = agent_from(w.others[*f], ctx.snapshot_age);
      } else {
        follower = agent_from(hyp, hyp_params);
      }
      follower.arc += follower.v * t_clear;
      if (follower.arc < mio.arc - mio.length &&
          gap_acceptance(ego_now, ego.params, follower, m, ego.params.politeness, horizon, dt)) {
        const double proj_front = x_mp - (m.other_arc - mio.arc);
        const auto& o = w.others[mode.mio->index];
        rep.virtual_lead_rear = proj_front - mio.length;
        rep.virtual_lead_speed = mio.v;
        add_follow(proj_front - mio.length, o.state.arc_pos.std, mio.v, o.state.speed.std, mio.params.a_dec);
        rep.decision = "merge_behind";
        return cs;
      }
    }
    stop(ActiveRange::FullHorizon, "give_way_stop");
    return cs;
  }

  // Right of way.
  rep.visibility_ok = visibility_compliant(vis_cross, hyp, t_d);
  if (mode.mio && mode.mio->kind == MioRef::Kind::Vehicle) {
    const CrossingAgent mio = agent_from(w.others[mode.mio->index], ctx.snapshot_age);
    rep.deceleration_ok = deceleration_compliant(mio, ego_now, ego.params, m, horizon, dt);
  }
  if (!rep.visibility_ok || !rep.deceleration_ok) {
    stop(ActiveRange::First2NPin, rep.visibility_ok ? "uncompliant_stop" : "visibility_stop");
  } else {
    rep.decision = "right_of_way";
  }
  return cs;
}

}  // namespace occplan
