#pragma once

#include "occplan/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace occplan {

/// Builds a route from its polyline, computing cumulative arc length.
RouteGeometry make_route(std::string id, std::vector<Vec2> centerline, double speed_limit,
                         std::vector<RuleTag> tags = {});

/// Validates convexity and area, re-winding clockwise input to counter-clockwise.
OccluderPolygon make_occluder(std::vector<Vec2> vertices, const std::string& name = "occluder");

Vec2 point_at(const RouteGeometry& route, double arc);
Vec2 tangent_at(const RouteGeometry& route, double arc);

struct RouteProjection {
  double arc = 0.0;
  double lateral_offset = 0.0;  // positive = left of travel direction
};

RouteProjection project_to_route(const Vec2& point, const RouteGeometry& route);

double speed_limit_at(const RouteGeometry& route, double arc);

/// True if a tag of `kind` overlaps the closed arc interval [from, to].
bool has_tag(const RouteGeometry& route, RuleKind kind, double from, double to);

/// Geometric crossing of two routes' centerlines.
struct RouteCrossing {
  std::string route_a;
  std::string route_b;
  double arc_a = 0.0;
  double arc_b = 0.0;
  Vec2 point = Vec2::Zero();
};

std::vector<RouteCrossing> find_crossings(const RouteGeometry& a, const RouteGeometry& b);

/// Enforces every WorldState invariant; throws ScenarioError naming the culprit.
void validate(const WorldState& world);

/// Front bumper position of the ego, used as the sensor eye.
Vec2 ego_position(const WorldState& world);

/// Perceived copy of `world`: other vehicles outside sensor range or hidden by
/// occluders are removed; the rest get independent Gaussian noise on position
/// and speed with the configured measurement sigmas.
WorldState measure(const WorldState& world, std::uint64_t seed);

}  // namespace occplan
