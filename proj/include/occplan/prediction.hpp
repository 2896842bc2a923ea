#pragma once

#include "occplan/types.hpp"
#include "occplan/visibility.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace occplan {

/// Raised when an IDM query is made with a non-positive gap.
class VehicleOverlapError : public std::runtime_error {
 public:
  VehicleOverlapError() : std::runtime_error("vehicle overlap") {}
};

struct IdmInput {
  double v = 0.0;
  double gap = std::numeric_limits<double>::infinity();  // bumper gap, +inf on a free road
  double v_rel = 0.0;                                    // own speed minus lead speed
  DriverParams params;
};

double idm_acceleration_unclamped(const IdmInput& in);

/// IDM acceleration clamped to [-a_dec, a_acc].
double idm_acceleration(const IdmInput& in);

struct IdmSample {
  double t = 0.0;
  double arc = 0.0;
  double v = 0.0;
  double a = 0.0;
};

struct LeadState {
  double rear_arc = 0.0;
  double v = 0.0;
};

using LeadProvider = std::function<std::optional<LeadState>(double t)>;

/// Explicit Euler rollout with the speed floored at zero.
std::vector<IdmSample> simulate_idm(double arc, double v, const LeadProvider& lead, const DriverParams& params,
                                    double horizon, double dt);

struct HypotheticalVehicle {
  std::string route_id;
  double arc = 0.0;
  double speed = 0.0;
  double s_full_h = 0.0;
};

/// Driver model assumed for a vehicle hidden on `route`: the ego's parameters
/// with the route speed limit as set speed.
DriverParams hypothetical_driver(const WorldState& world, const RouteGeometry& route);

HypotheticalVehicle make_hypothetical(const WorldState& world, const MergePoint& merge, double s_vis_cross);
HypotheticalVehicle make_hypothetical(const WorldState& world, const MergePoint& merge, const VisibilityResult& vis);

/// A vehicle on the crossing route, in that route's arc coordinates.
struct CrossingAgent {
  double arc = 0.0;  // front bumper
  double v = 0.0;
  double length = 4.5;
  DriverParams params;
};

/// Outcome of rolling the crossing agent forward against the ego's
/// merge-projected rear as virtual lead.
struct InteractionResult {
  bool conflict = false;            // agent ahead of the ego's rear in the merge projection
  double max_required_decel = 0.0;  // largest unclamped IDM deceleration, or the stop-short demand
};

InteractionResult crossing_interaction(const VehicleState& ego, const DriverParams& ego_params,
                                       const CrossingAgent& mio, const MergePoint& merge, double horizon,
                                       double dt);

/// True if the ego can enter ahead of `mio` without forcing it to brake harder
/// than (1 - gamma_e) * a_cft.
bool gap_acceptance(const VehicleState& ego, const DriverParams& ego_params, const CrossingAgent& mio,
                    const MergePoint& merge, double gamma_e, double horizon, double dt);

/// Strict check that a hidden vehicle at the line of sight could still react.
bool visibility_compliant(double vis_cross, const HypotheticalVehicle& hyp, double t_d);

/// True if yielding to the ego needs no more than comfortable deceleration.
bool deceleration_compliant(const CrossingAgent& mio, const VehicleState& ego, const DriverParams& ego_params,
                            const MergePoint& merge, double horizon, double dt);

}  // namespace occplan
