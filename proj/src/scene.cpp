#include "occplan/scene.hpp"

#include "occplan/env_model.hpp"

#include <algorithm>
#include <cmath>

namespace occplan {

std::vector<PreviewPoint> sample_preview_points(const RouteGeometry& ego_route, double from_arc,
                                                double length, double spacing) {
  const double start = std::clamp(from_arc, 0.0, ego_route.length());
  const double stop = std::min(start + std::max(length, 0.0), ego_route.length());
  std::vector<PreviewPoint> out;
  const long count = static_cast<long>(std::floor((stop - start) / spacing + 1e-9));
  out.reserve(static_cast<std::size_t>(count) + 1);
  for (long k = 0; k <= count; ++k) {
    const double arc = start + static_cast<double>(k) * spacing;
    out.push_back({arc, point_at(ego_route, arc)});
  }
  return out;
}

MergeAction determine_action(const MergePoint& merge, const RouteGeometry& ego_route,
                             const RouteGeometry& other_route, const Vec2& heading,
                             double stop_sign_window) {
  if (has_tag(ego_route, RuleKind::StopSign, merge.ego_arc - stop_sign_window, merge.ego_arc)) {
    return MergeAction::StopThenGo;
  }
  const bool ego_priority = has_tag(ego_route, RuleKind::PriorityRoad, merge.ego_arc, merge.ego_arc);
  const bool other_priority = has_tag(other_route, RuleKind::PriorityRoad, merge.other_arc, merge.other_arc);
  if (ego_priority && other_priority) {
    throw ScenarioError("conflicting PRIORITY_ROAD tags on routes '" + ego_route.id + "' and '" +
                        other_route.id + "'");
  }
  if (has_tag(ego_route, RuleKind::Yield, merge.ego_arc - stop_sign_window, merge.ego_arc)) {
    return MergeAction::GiveWay;
  }
  if (ego_priority) return MergeAction::RightOfWay;
  if (other_priority) return MergeAction::GiveWay;
  // Right before left: the approach direction points from the merge back to
  // where the other traffic comes from.
  const Vec2 approach = -tangent_at(other_route, merge.other_arc);
  return cross2(heading, approach) < 0.0 ? MergeAction::GiveWay : MergeAction::RightOfWay;
}

std::vector<MergePoint> detect_intersections(const WorldState& world, const std::vector<PreviewPoint>& preview,
                                             double lateral_tol) {
  const auto& ego_route = world.ego_route();
  std::vector<MergePoint> out;
  for (const auto& route : world.routes) {
    if (route.id == ego_route.id) continue;
    for (const auto& p : preview) {
      const auto proj = project_to_route(p.point, route);
      if (std::abs(proj.lateral_offset) > lateral_tol) continue;
      MergePoint m{p.arc, route.id, proj.arc, MergeAction::GiveWay};
      m.action = determine_action(m, ego_route, route, tangent_at(ego_route, p.arc), world.scene.stop_sign_window);
      out.push_back(m);
      break;
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ego_arc < b.ego_arc; });
  return out;
}

std::optional<std::size_t> find_lead(const WorldState& world, double max_gap) {
  const auto& ego = world.ego.state;
  std::optional<std::size_t> best;
  double best_gap = max_gap;
  for (std::size_t i = 0; i < world.others.size(); ++i) {
    const auto& o = world.others[i];
    if (!o.active || o.state.route_id != ego.route_id) continue;
    if (o.state.arc_pos.mean <= ego.arc_pos.mean) continue;
    const double gap = o.state.rear() - ego.arc_pos.mean;
    if (gap <= best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

std::optional<std::size_t> find_crossing_mio(const WorldState& world, const MergePoint& merge) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < world.others.size(); ++i) {
    const auto& o = world.others[i];
    if (!o.active || o.state.route_id != merge.other_route_id) continue;
    if (o.state.rear() > merge.other_arc) continue;
    if (!best || o.state.arc_pos.mean > world.others[*best].state.arc_pos.mean) best = i;
  }
  return best;
}

std::optional<std::size_t> find_follower(const WorldState& world, std::size_t mio) {
  const auto& lead = world.others[mio].state;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < world.others.size(); ++i) {
    const auto& o = world.others[i];
    if (i == mio || !o.active || o.state.route_id != lead.route_id) continue;
    if (o.state.arc_pos.mean >= lead.arc_pos.mean) continue;
    if (!best || o.state.arc_pos.mean > world.others[*best].state.arc_pos.mean) best = i;
  }
  return best;
}

PlanningMode select_mode(const WorldState& world, const VisibilityResult& vis,
                         const std::vector<MergePoint>& merges) {
  PlanningMode mode;
  if (const auto lead = find_lead(world, vis.s_vis_ego)) {
    mode.kind = ModeKind::FollowDrive;
    mode.mio = MioRef{MioRef::Kind::Vehicle, *lead};
    return mode;
  }
  const double ego_arc = world.ego.state.arc_pos.mean;
  for (const auto& m : merges) {
    if (m.ego_arc < ego_arc || m.ego_arc - ego_arc > vis.s_vis_ego) continue;
    mode.merge = m;
    mode.kind = m.action == MergeAction::RightOfWay ? ModeKind::IntersectionRightOfWay
                                                     : ModeKind::IntersectionGiveWay;
    mode.mandatory_stop = m.action == MergeAction::StopThenGo;
    if (const auto mio = find_crossing_mio(world, m)) {
      mode.mio = MioRef{MioRef::Kind::Vehicle, *mio};
    } else {
      mode.mio = MioRef{MioRef::Kind::Hypothetical, 0};
    }
    return mode;
  }
  return mode;
}

}  // namespace occplan
