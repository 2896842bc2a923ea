#include "occplan/prediction.hpp"

#include "occplan/safety.hpp"

#include <algorithm>
#include <cmath>

namespace occplan {

double idm_acceleration_unclamped(const IdmInput& in) {
  if (!(in.gap > 0.0)) throw VehicleOverlapError();
  const auto& p = in.params;
  const double free_term = p.v_des > 0.0 ? std::pow(in.v / p.v_des, 4) : (in.v > 0.0 ? 1e12 : 0.0);
  double interaction = 0.0;
  if (std::isfinite(in.gap)) {
    const double s_des = p.s_min + in.v * p.headway;
    const double term = s_des / in.gap + in.v * in.v_rel / (2.0 * in.gap * std::sqrt(p.a_acc * p.a_cft));
    interaction = term * term;
  }
  return p.a_acc * (1.0 - free_term - interaction);
}

double idm_acceleration(const IdmInput& in) {
  return std::clamp(idm_acceleration_unclamped(in), -in.params.a_dec, in.params.a_acc);
}

std::vector<IdmSample> simulate_idm(double arc, double v, const LeadProvider& lead, const DriverParams& params,
                                    double horizon, double dt) {
  const long steps = std::lround(horizon / dt);
  std::vector<IdmSample> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (long n = 0;; ++n) {
    const double t = static_cast<double>(n) * dt;
    IdmInput in{v, std::numeric_limits<double>::infinity(), 0.0, params};
    if (lead) {
      if (const auto l = lead(t)) {
        in.gap = l->rear_arc - arc;
        in.v_rel = v - l->v;
      }
    }
    const double a = idm_acceleration(in);
    out.push_back({t, arc, v, a});
    if (n == steps) break;
    arc += v * dt;
    v = std::max(0.0, v + a * dt);
  }
  return out;
}

DriverParams hypothetical_driver(const WorldState& world, const RouteGeometry& route) {
  DriverParams p = world.ego.params;
  p.v_des = route.speed_limit;
  p.politeness = 0.0;
  return p;
}

HypotheticalVehicle make_hypothetical(const WorldState& world, const MergePoint& merge, double s_vis_cross) {
  const auto& route = world.route(merge.other_route_id);
  HypotheticalVehicle h;
  h.route_id = route.id;
  h.arc = std::max(0.0, merge.other_arc - s_vis_cross);
  h.speed = route.speed_limit;
  h.s_full_h = braking_distance(h.speed, hypothetical_driver(world, route).a_dec);
  return h;
}

HypotheticalVehicle make_hypothetical(const WorldState& world, const MergePoint& merge, const VisibilityResult& vis) {
  const auto it = vis.s_vis_cross.find(merge.other_route_id);
  return make_hypothetical(world, merge, it == vis.s_vis_cross.end() ? 0.0 : it->second);
}

InteractionResult crossing_interaction(const VehicleState& ego, const DriverParams& ego_params,
                                       const CrossingAgent& mio, const MergePoint& merge, double horizon,
                                       double dt) {
  InteractionResult res;
  double xe = ego.arc_pos.mean, ve = ego.speed.mean;
  double xo = mio.arc, vo = mio.v;
  const long steps = std::lround(horizon / dt);
  for (long n = 0; n <= steps; ++n) {
    const double ego_rear_to_merge = merge.ego_arc - (xe - ego.length);
    if (ego_rear_to_merge < 0.0) break;  // ego cleared the merge
    const double mio_to_merge = merge.other_arc - xo;
    const double gap = mio_to_merge - ego_rear_to_merge;
    if (gap <= 0.0) {
      // The agent is ahead in the projection; all it can do is stop short of the merge.
      res.conflict = true;
      const double need = mio_to_merge > 0.0 ? vo * vo / (2.0 * mio_to_merge)
                                             : std::numeric_limits<double>::infinity();
      res.max_required_decel = std::max(res.max_required_decel, need);
      break;
    }
    const IdmInput in{vo, gap, vo - ve, mio.params};
    const double a = idm_acceleration_unclamped(in);
    res.max_required_decel = std::max(res.max_required_decel, -a);
    const double ao = std::clamp(a, -mio.params.a_dec, mio.params.a_acc);
    const double ae = idm_acceleration(IdmInput{ve, std::numeric_limits<double>::infinity(), 0.0, ego_params});
    xo += vo * dt;
    vo = std::max(0.0, vo + ao * dt);
    xe += ve * dt;
    ve = std::max(0.0, ve + ae * dt);
  }
  return res;
}

bool gap_acceptance(const VehicleState& ego, const DriverParams& ego_params, const CrossingAgent& mio,
                    const MergePoint& merge, double gamma_e, double horizon, double dt) {
  const auto r = crossing_interaction(ego, ego_params, mio, merge, horizon, dt);
  return !r.conflict && r.max_required_decel <= (1.0 - gamma_e) * mio.params.a_cft;
}

bool visibility_compliant(double vis_cross, const HypotheticalVehicle& hyp, double t_d) {
  return vis_cross > hyp.s_full_h + 2.0 * t_d * hyp.speed;
}

bool deceleration_compliant(const CrossingAgent& mio, const VehicleState& ego, const DriverParams& ego_params,
                            const MergePoint& merge, double horizon, double dt) {
  if (mio.arc - mio.length > merge.other_arc) return true;
  const auto r = crossing_interaction(ego, ego_params, mio, merge, horizon, dt);
  return r.max_required_decel <= mio.params.a_cft;
}

}  // namespace occplan
