#pragma once

#include "occplan/types.hpp"
#include "occplan/visibility.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace occplan {

struct PreviewPoint {
  double arc = 0.0;
  Vec2 point = Vec2::Zero();
};

/// Reference to the most important object: an entry of `WorldState::others`
/// in the measured world, or the hypothetical vehicle at the line of sight.
struct MioRef {
  enum class Kind { Vehicle, Hypothetical };
  Kind kind = Kind::Hypothetical;
  std::size_t index = 0;
};

struct PlanningMode {
  ModeKind kind = ModeKind::FreeDrive;
  std::optional<MioRef> mio;
  std::optional<MergePoint> merge;
  bool mandatory_stop = false;
};

/// Equidistant preview points from `from_arc`, truncated at the route end.
std::vector<PreviewPoint> sample_preview_points(const RouteGeometry& ego_route, double from_arc,
                                                double length, double spacing);

MergeAction determine_action(const MergePoint& merge, const RouteGeometry& ego_route,
                             const RouteGeometry& other_route, const Vec2& heading,
                             double stop_sign_window = 10.0);

/// First preview point lying on each other route yields a merge point; the
/// result is ordered by ego arc.
std::vector<MergePoint> detect_intersections(const WorldState& world, const std::vector<PreviewPoint>& preview,
                                             double lateral_tol);

/// Nearest same-route vehicle ahead of the ego within `max_gap`, if any.
std::optional<std::size_t> find_lead(const WorldState& world, double max_gap);

/// Nearest-to-merge detected vehicle on the crossing route whose rear has not
/// yet passed the merge point.
std::optional<std::size_t> find_crossing_mio(const WorldState& world, const MergePoint& merge);

/// Vehicle following `mio` on the same crossing route, if detected.
std::optional<std::size_t> find_follower(const WorldState& world, std::size_t mio);

PlanningMode select_mode(const WorldState& world, const VisibilityResult& vis,
                         const std::vector<MergePoint>& merges);

}  // namespace occplan
