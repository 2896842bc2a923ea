#pragma once

#include "occplan/types.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace occplan {

/// True if the open segment (a, b) passes through the interior of `poly`.
/// Grazing an edge or a vertex does not count.
bool segment_hits_interior(const Vec2& a, const Vec2& b, const OccluderPolygon& poly);

bool is_point_visible(const Vec2& eye, const Vec2& target, std::span<const OccluderPolygon> occluders,
                      double sensor_range);

/// Contiguous visible distance ahead along `route`, sampled every `ds` from
/// `from_arc`. Visibility ends at the first occluded or out-of-range sample.
double visible_range_on_route(const Vec2& eye, const RouteGeometry& route, double from_arc,
                              std::span<const OccluderPolygon> occluders, double sensor_range,
                              double ds);

/// Walks `route` upstream from `merge_arc` and returns the distance from the
/// farthest contiguously visible point to the merge point.
double cross_route_visibility(const Vec2& eye, const RouteGeometry& route, double merge_arc,
                              std::span<const OccluderPolygon> occluders, double sensor_range,
                              double ds);

double cross_route_visibility(const WorldState& world, const MergePoint& merge);

struct VisibilityResult {
  double s_vis_ego = 0.0;
  std::map<std::string, double> s_vis_cross;        // keyed by intersecting route id
  std::map<std::string, double> line_of_sight_arcs;  // farthest visible arc per route
};

double ego_visible_range(const WorldState& world);

VisibilityResult compute_visibility(const WorldState& world, const std::vector<MergePoint>& merges);

}  // namespace occplan
