#include "occplan/env_model.hpp"

#include "occplan/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace occplan {

const char* to_string(ModeKind kind) {
  switch (kind) {
    case ModeKind::FreeDrive: return "FREE_DRIVE";
    case ModeKind::FollowDrive: return "FOLLOW_DRIVE";
    case ModeKind::IntersectionGiveWay: return "INTERSECTION_GIVE_WAY";
    case ModeKind::IntersectionRightOfWay: return "INTERSECTION_RIGHT_OF_WAY";
  }
  return "?";
}

const char* to_string(MergeAction action) {
  switch (action) {
    case MergeAction::RightOfWay: return "RIGHT_OF_WAY";
    case MergeAction::GiveWay: return "GIVE_WAY";
    case MergeAction::StopThenGo: return "STOP_THEN_GO";
  }
  return "?";
}

namespace {

void require_route_invariants(const RouteGeometry& r) {
  if (r.id.empty()) throw ScenarioError("route with empty id");
  if (r.centerline.size() < 2) throw ScenarioError("route '" + r.id + "' needs at least 2 points");
  if (r.cumulative_arclength.size() != r.centerline.size() || r.cumulative_arclength.front() != 0.0) {
    throw ScenarioError("route '" + r.id + "' has inconsistent arc length table");
  }
  for (std::size_t i = 1; i < r.cumulative_arclength.size(); ++i) {
    if (!(r.cumulative_arclength[i] > r.cumulative_arclength[i - 1])) {
      throw ScenarioError("route '" + r.id + "' has repeated centerline point " + std::to_string(i));
    }
  }
  if (!(r.speed_limit >= 0.0)) throw ScenarioError("route '" + r.id + "' has negative speed limit");
  for (const auto& tag : r.rule_tags) {
    if (!(tag.from <= tag.to)) throw ScenarioError("route '" + r.id + "' has a tag with from > to");
  }
}

double signed_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) a += cross2(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

void require_driver(const DriverParams& p, const std::string& who) {
  if (!(p.a_acc > 0 && p.a_cft > 0 && p.a_dec > 0 && p.s_min > 0 && p.headway > 0)) {
    throw ScenarioError(who + ": driver accelerations, s_min and headway must be positive");
  }
  if (!(p.v_des >= 0)) throw ScenarioError(who + ": v_des must be non-negative");
  if (!(p.politeness >= 0 && p.politeness < 1)) throw ScenarioError(who + ": politeness must lie in [0, 1)");
  if (p.a_cft > p.a_dec) throw ScenarioError(who + ": a_cft exceeds a_dec");
}

void require_vehicle(const WorldState& world, const VehicleState& s, const std::string& who) {
  const RouteGeometry* route = nullptr;
  for (const auto& r : world.routes) {
    if (r.id == s.route_id) route = &r;
  }
  if (!route) throw ScenarioError(who + ": dangling route_id '" + s.route_id + "'");
  if (!(s.arc_pos.mean >= 0 && s.arc_pos.mean <= route->length())) {
    throw ScenarioError(who + ": arc position outside route '" + s.route_id + "'");
  }
  if (!(s.speed.mean >= 0)) throw ScenarioError(who + ": negative speed");
  if (!(s.arc_pos.std >= 0 && s.speed.std >= 0)) throw ScenarioError(who + ": negative sigma");
  if (!(s.length > 0 && s.width > 0)) throw ScenarioError(who + ": non-positive dimensions");
}

bool is_multiple(double value, double unit) {
  const double q = value / unit;
  return std::abs(q - std::round(q)) < 1e-9 && std::round(q) >= 1.0;
}

}  // namespace

RouteGeometry make_route(std::string id, std::vector<Vec2> centerline, double speed_limit,
                         std::vector<RuleTag> tags) {
  RouteGeometry r;
  r.id = std::move(id);
  r.centerline = std::move(centerline);
  r.speed_limit = speed_limit;
  r.rule_tags = std::move(tags);
  r.cumulative_arclength.reserve(r.centerline.size());
  double s = 0.0;
  for (std::size_t i = 0; i < r.centerline.size(); ++i) {
    if (i > 0) s += (r.centerline[i] - r.centerline[i - 1]).norm();
    r.cumulative_arclength.push_back(s);
  }
  require_route_invariants(r);
  return r;
}

OccluderPolygon make_occluder(std::vector<Vec2> vertices, const std::string& name) {
  if (vertices.size() < 3) throw ScenarioError(name + ": needs at least 3 vertices");
  double area = signed_area(vertices);
  double scale = 0.0;
  for (const auto& v : vertices) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  if (std::abs(area) <= 1e-12 * std::max(1.0, scale * scale)) throw ScenarioError(name + ": degenerate occluder");
  if (area < 0) std::reverse(vertices.begin(), vertices.end());
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = vertices[(i + 1) % n] - vertices[i];
    const Vec2 e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
    if (cross2(e0, e1) < -1e-12 * std::max(1.0, e0.norm() * e1.norm())) {
      throw ScenarioError(name + ": non-convex occluder");
    }
  }
  return OccluderPolygon{std::move(vertices)};
}

namespace {

std::size_t segment_index(const RouteGeometry& route, double arc) {
  const auto& cum = route.cumulative_arclength;
  auto it = std::upper_bound(cum.begin(), cum.end(), arc);
  std::size_t idx = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
  return std::min(idx, cum.size() - 2);
}

}  // namespace

Vec2 point_at(const RouteGeometry& route, double arc) {
  arc = std::clamp(arc, 0.0, route.length());
  const std::size_t i = segment_index(route, arc);
  const double seg = route.cumulative_arclength[i + 1] - route.cumulative_arclength[i];
  const double t = (arc - route.cumulative_arclength[i]) / seg;
  return route.centerline[i] + t * (route.centerline[i + 1] - route.centerline[i]);
}

Vec2 tangent_at(const RouteGeometry& route, double arc) {
  arc = std::clamp(arc, 0.0, route.length());
  const std::size_t i = segment_index(route, arc);
  return (route.centerline[i + 1] - route.centerline[i]).normalized();
}

RouteProjection project_to_route(const Vec2& point, const RouteGeometry& route) {
  RouteProjection best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < route.centerline.size(); ++i) {
    const Vec2& a = route.centerline[i];
    const Vec2 d = route.centerline[i + 1] - a;
    const double len = route.cumulative_arclength[i + 1] - route.cumulative_arclength[i];
    const double t = std::clamp((point - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    const Vec2 foot = a + t * d;
    const double dist = (point - foot).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best.arc = route.cumulative_arclength[i] + t * len;
      best.lateral_offset = cross2(d, point - foot) >= 0.0 ? dist : -dist;
    }
  }
  return best;
}

double speed_limit_at(const RouteGeometry& route, double arc) {
  for (const auto& tag : route.rule_tags) {
    if (tag.kind == RuleKind::SpeedLimit && arc >= tag.from && arc <= tag.to) return tag.value;
  }
  return route.speed_limit;
}

bool has_tag(const RouteGeometry& route, RuleKind kind, double from, double to) {
  for (const auto& tag : route.rule_tags) {
    if (tag.kind == kind && tag.from <= to && tag.to >= from) return true;
  }
  return false;
}

std::vector<RouteCrossing> find_crossings(const RouteGeometry& a, const RouteGeometry& b) {
  std::vector<RouteCrossing> out;
  for (std::size_t i = 0; i + 1 < a.centerline.size(); ++i) {
    const Vec2 p = a.centerline[i];
    const Vec2 r = a.centerline[i + 1] - p;
    for (std::size_t j = 0; j + 1 < b.centerline.size(); ++j) {
      const Vec2 q = b.centerline[j];
      const Vec2 s = b.centerline[j + 1] - q;
      const double denom = cross2(r, s);
      if (std::abs(denom) < 1e-12) continue;  // parallel segments never cross
      const double t = cross2(q - p, s) / denom;
      const double u = cross2(q - p, r) / denom;
      if (t < 0 || t > 1 || u < 0 || u > 1) continue;
      RouteCrossing c{a.id, b.id,
                      a.cumulative_arclength[i] + t * (a.cumulative_arclength[i + 1] - a.cumulative_arclength[i]),
                      b.cumulative_arclength[j] + u * (b.cumulative_arclength[j + 1] - b.cumulative_arclength[j]),
                      p + t * r};
      const bool duplicate = std::any_of(out.begin(), out.end(), [&](const RouteCrossing& o) {
        return std::abs(o.arc_a - c.arc_a) < 1e-6;
      });
      if (!duplicate) out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.arc_a < y.arc_a; });
  return out;
}

void validate(const WorldState& world) {
  std::set<std::string> ids;
  for (const auto& r : world.routes) {
    require_route_invariants(r);
    if (!ids.insert(r.id).second) throw ScenarioError("duplicate route id '" + r.id + "'");
  }
  for (std::size_t i = 0; i < world.occluders.size(); ++i) {
    const auto name = "occluder " + std::to_string(i);
    const auto checked = make_occluder(world.occluders[i].vertices, name);
    if (signed_area(world.occluders[i].vertices) < 0) throw ScenarioError(name + ": not counter-clockwise");
    (void)checked;
  }
  require_vehicle(world, world.ego.state, "ego");
  require_driver(world.ego.params, "ego");
  std::set<std::string> vehicle_ids;
  for (const auto& o : world.others) {
    const auto who = "vehicle '" + o.id + "'";
    if (o.id.empty() || !vehicle_ids.insert(o.id).second) throw ScenarioError(who + ": missing or duplicate id");
    require_vehicle(world, o.state, who);
    require_driver(o.params, who);
  }
  if (!(world.sensor_range >= 0)) throw ScenarioError("sensor_range must be non-negative");
  if (!(world.sigma_meas_pos >= 0 && world.sigma_meas_speed >= 0)) throw ScenarioError("noise sigmas must be non-negative");

  const auto& tm = world.timing;
  if (!(tm.h > 0) || tm.n_pin < 1) throw ScenarioError("timing: h must be positive and n_pin >= 1");
  if (!(tm.t_p >= 0)) throw ScenarioError("timing: t_p must be non-negative");
  if (!(tm.dt_sim > 0) || !is_multiple(tm.h, tm.dt_sim)) throw ScenarioError("timing: dt_sim must divide h");
  if (!is_multiple(tm.plan_period, tm.h)) throw ScenarioError("timing: plan_period must be a multiple of h");
  if (!is_multiple(tm.env_period, tm.dt_sim)) throw ScenarioError("timing: env_period must be a multiple of dt_sim");
  if (tm.plan_period > tm.dead_time() + 1e-9) throw ScenarioError("timing: plan_period exceeds dead time n_pin*h");
  if (tm.t_p > 0 && !is_multiple(tm.t_p, tm.dt_sim)) throw ScenarioError("timing: t_p must be a multiple of dt_sim");

  const auto& pc = world.planner;
  const int shift = static_cast<int>(std::lround(tm.plan_period / tm.h));
  if (pc.n_points < 4 || pc.n_points < shift + 2 * tm.n_pin + 1) {
    throw ScenarioError("planner: n_points too small for n_pin and plan_period");
  }
  const auto& w = pc.weights;
  if (!(w.w_vel >= 0 && w.w_acc >= 0 && w.w_jerk >= 0 && w.w_s >= 0)) throw ScenarioError("planner: negative weight");
  if (!(w.w_vel > 0 || w.w_acc > 0 || w.w_jerk > 0)) throw ScenarioError("planner: all comfort weights are zero");
  if (!(w.penalty_weight > 0 && w.penalty_sharpness > 0)) throw ScenarioError("planner: penalty parameters must be positive");
  if (pc.max_iterations < 1 || !(pc.grad_tol > 0) || !(pc.fallback_tol >= 0)) throw ScenarioError("planner: bad solver settings");
  if (!(world.safety.k >= 0)) throw ScenarioError("safety: k must be non-negative");
  if (!(world.visibility.ds > 0)) throw ScenarioError("visibility: ds must be positive");
  if (!(world.scene.lateral_tol > 0 && world.scene.preview_spacing > 0)) throw ScenarioError("scene: tolerances must be positive");
  if (!(world.prediction.dt > 0 && world.prediction.horizon > 0)) throw ScenarioError("prediction: dt and horizon must be positive");
  if (!(world.sim.duration >= 0)) throw ScenarioError("sim: negative duration");
}

Vec2 ego_position(const WorldState& world) {
  return point_at(world.ego_route(), world.ego.state.arc_pos.mean);
}

WorldState measure(const WorldState& world, std::uint64_t seed) {
  WorldState out = world;
  out.others.clear();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const Vec2 eye = ego_position(world);
  for (const auto& o : world.others) {
    // Draw for every vehicle so visibility changes do not reshuffle the noise of others.
    const double n_pos = unit(rng);
    const double n_speed = unit(rng);
    if (!o.active) continue;
    const auto& route = world.route(o.state.route_id);
    const Vec2 target = point_at(route, o.state.arc_pos.mean);
    if (!is_point_visible(eye, target, world.occluders, world.sensor_range)) continue;
    OtherVehicle m = o;
    m.state.arc_pos.mean = std::clamp(o.state.arc_pos.mean + world.sigma_meas_pos * n_pos, 0.0, route.length());
    m.state.speed.mean = std::max(0.0, o.state.speed.mean + world.sigma_meas_speed * n_speed);
    m.state.arc_pos.std = world.sigma_meas_pos;
    m.state.speed.std = world.sigma_meas_speed;
    out.others.push_back(std::move(m));
  }
  return out;
}

}  // namespace occplan
