#include "occplan/visibility.hpp"

#include "occplan/env_model.hpp"

#include <algorithm>
#include <cmath>

namespace occplan {

bool segment_hits_interior(const Vec2& a, const Vec2& b, const OccluderPolygon& poly) {
  const Vec2 d = b - a;
  const auto& v = poly.vertices;
  const std::size_t n = v.size();

  Vec2 lo = v[0], hi = v[0];
  for (const auto& p : v) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (std::max(a.x(), b.x()) <= lo.x() || std::min(a.x(), b.x()) >= hi.x() ||
      std::max(a.y(), b.y()) <= lo.y() || std::min(a.y(), b.y()) >= hi.y()) {
    return false;
  }

  // Cyrus-Beck clipping against the open half-planes left of each CCW edge.
  double t_lo = 0.0;
  double t_hi = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = v[(i + 1) % n] - v[i];
    const double num = cross2(e, a - v[i]);
    const double den = cross2(e, d);
    if (std::abs(den) <= 1e-14 * e.norm() * d.norm()) {
      if (num <= 0.0) return false;
      continue;
    }
    const double t = -num / den;
    if (den > 0.0) {
      t_lo = std::max(t_lo, t);
    } else {
      t_hi = std::min(t_hi, t);
    }
    if (t_lo >= t_hi) return false;
  }
  return t_hi - t_lo > 1e-12;
}

bool is_point_visible(const Vec2& eye, const Vec2& target, std::span<const OccluderPolygon> occluders,
                      double sensor_range) {
  if ((target - eye).norm() > sensor_range * (1.0 + 1e-12) + 1e-12) return false;
  return std::none_of(occluders.begin(), occluders.end(),
                      [&](const OccluderPolygon& p) { return segment_hits_interior(eye, target, p); });
}

double visible_range_on_route(const Vec2& eye, const RouteGeometry& route, double from_arc,
                              std::span<const OccluderPolygon> occluders, double sensor_range,
                              double ds) {
  const double end = route.length();
  from_arc = std::clamp(from_arc, 0.0, end);
  double visible = 0.0;
  for (long k = 0;; ++k) {
    const double arc = from_arc + static_cast<double>(k) * ds;
    if (arc > end) {
      // Check the route end itself before declaring the whole remainder visible.
      if (is_point_visible(eye, point_at(route, end), occluders, sensor_range)) visible = end - from_arc;
      break;
    }
    if (!is_point_visible(eye, point_at(route, arc), occluders, sensor_range)) break;
    visible = arc - from_arc;
  }
  return visible;
}

double cross_route_visibility(const Vec2& eye, const RouteGeometry& route, double merge_arc,
                              std::span<const OccluderPolygon> occluders, double sensor_range,
                              double ds) {
  merge_arc = std::clamp(merge_arc, 0.0, route.length());
  double visible = 0.0;
  for (long k = 0;; ++k) {
    const double arc = merge_arc - static_cast<double>(k) * ds;
    if (arc < 0.0) {
      if (is_point_visible(eye, point_at(route, 0.0), occluders, sensor_range)) visible = merge_arc;
      break;
    }
    if (!is_point_visible(eye, point_at(route, arc), occluders, sensor_range)) break;
    visible = merge_arc - arc;
  }
  return visible;
}

double cross_route_visibility(const WorldState& world, const MergePoint& merge) {
  return cross_route_visibility(ego_position(world), world.route(merge.other_route_id), merge.other_arc,
                                world.occluders, world.sensor_range, world.visibility.ds);
}

double ego_visible_range(const WorldState& world) {
  return visible_range_on_route(ego_position(world), world.ego_route(), world.ego.state.arc_pos.mean,
                                world.occluders, world.sensor_range, world.visibility.ds);
}

VisibilityResult compute_visibility(const WorldState& world, const std::vector<MergePoint>& merges) {
  VisibilityResult out;
  out.s_vis_ego = ego_visible_range(world);
  out.line_of_sight_arcs[world.ego.state.route_id] = world.ego.state.arc_pos.mean + out.s_vis_ego;
  for (const auto& m : merges) {
    const double s = cross_route_visibility(world, m);
    out.s_vis_cross[m.other_route_id] = s;
    out.line_of_sight_arcs[m.other_route_id] = m.other_arc - s;
  }
  return out;
}

}  // namespace occplan
