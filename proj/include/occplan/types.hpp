#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace occplan {

using Vec2 = Eigen::Vector2d;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Raised for malformed or inconsistent scenario input. The message names the
/// offending entity.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Gaussian1D {
  double mean = 0.0;
  double std = 0.0;
};

struct DriverParams {
  double a_acc = 1.5;       // maximum acceleration [m/s^2]
  double a_cft = 2.0;       // comfortable deceleration, magnitude [m/s^2]
  double a_dec = 8.0;       // full-braking deceleration, magnitude [m/s^2]
  double s_min = 2.0;       // stand-still distance [m]
  double headway = 1.5;     // desired time headway [s]
  double v_des = 13.89;     // set speed [m/s]
  double politeness = 0.0;  // gamma in [0, 1)
};

/// Longitudinal state on a route. `arc_pos` is the front bumper.
struct VehicleState {
  std::string route_id;
  Gaussian1D arc_pos;
  Gaussian1D speed;
  double length = 4.5;
  double width = 1.8;

  double rear() const { return arc_pos.mean - length; }
};

enum class RuleKind { StopSign, Yield, PriorityRoad, SpeedLimit };

struct RuleTag {
  double from = 0.0;
  double to = 0.0;
  RuleKind kind = RuleKind::PriorityRoad;
  double value = 0.0;  // only used by SpeedLimit
};

struct RouteGeometry {
  std::string id;
  std::vector<Vec2> centerline;
  std::vector<double> cumulative_arclength;
  double speed_limit = 13.89;
  std::vector<RuleTag> rule_tags;

  double length() const { return cumulative_arclength.empty() ? 0.0 : cumulative_arclength.back(); }
};

/// Convex polygon, counter-clockwise.
struct OccluderPolygon {
  std::vector<Vec2> vertices;
};

struct TimingModel {
  double h = 0.25;
  int n_pin = 3;
  double t0 = 0.0;
  double env_period = 0.5;
  double plan_period = 0.75;
  double t_p = 0.0;
  double dt_sim = 0.025;

  double dead_time() const { return n_pin * h; }
  double t_pin() const { return t0 + dead_time(); }
  double t_safe() const { return t0 + 2.0 * dead_time(); }
};

enum class SigmaMode { PaperExact, FirstOrder };

struct PlannerWeights {
  double w_vel = 1.0;
  double w_acc = 2.0;
  double w_jerk = 4.0;
  double w_s = 0.5;
  double penalty_weight = 1.0e6;
  double penalty_sharpness = 50.0;
};

struct PlannerConfig {
  int n_points = 40;
  PlannerWeights weights;
  int max_iterations = 200;
  double grad_tol = 1e-6;
  double fallback_tol = 1e-3;
};

struct SafetyConfig {
  double k = 2.0;
  SigmaMode sigma_mode = SigmaMode::FirstOrder;
};

struct VisibilityConfig {
  double ds = 0.5;
};

struct SceneConfig {
  double lateral_tol = 1.0;
  double preview_spacing = 0.5;
  double stop_sign_window = 10.0;
  double stop_release_speed = 0.1;
};

struct PredictionConfig {
  double dt = 0.05;
  double horizon = 10.0;
};

struct SimConfig {
  double duration = 30.0;
};

enum class Behavior { Idm, ConstantSpeed, Stationary };

struct OtherVehicle {
  std::string id;
  VehicleState state;
  DriverParams params;
  Behavior behavior = Behavior::Idm;
  std::optional<double> brake_at;     // full braking at a_dec from this time on
  std::optional<double> spawn_time;   // absent from the world before this time
  bool spawn_at_line_of_sight = false;
  bool active = true;
  double accel = 0.0;
};

struct EgoVehicle {
  VehicleState state;  // arc_pos.std / speed.std are the localization sigmas
  DriverParams params;
};

struct WorldState {
  std::vector<RouteGeometry> routes;
  std::vector<OccluderPolygon> occluders;
  EgoVehicle ego;
  std::vector<OtherVehicle> others;
  double sensor_range = 80.0;
  TimingModel timing;
  double sigma_meas_pos = 0.0;
  double sigma_meas_speed = 0.0;
  double clock = 0.0;

  PlannerConfig planner;
  SafetyConfig safety;
  VisibilityConfig visibility;
  SceneConfig scene;
  PredictionConfig prediction;
  SimConfig sim;

  const RouteGeometry& route(const std::string& id) const {
    for (const auto& r : routes) {
      if (r.id == id) return r;
    }
    throw ScenarioError("unknown route '" + id + "'");
  }
  const RouteGeometry& ego_route() const { return route(ego.state.route_id); }
};

enum class MergeAction { RightOfWay, GiveWay, StopThenGo };

struct MergePoint {
  double ego_arc = 0.0;
  std::string other_route_id;
  double other_arc = 0.0;
  MergeAction action = MergeAction::GiveWay;
};

enum class ModeKind { FreeDrive, FollowDrive, IntersectionGiveWay, IntersectionRightOfWay };

const char* to_string(ModeKind kind);
const char* to_string(MergeAction action);

}  // namespace occplan
