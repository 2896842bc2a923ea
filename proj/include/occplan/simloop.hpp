#pragma once

#include "occplan/planner.hpp"
#include "occplan/safety.hpp"
#include "occplan/scene.hpp"
#include "occplan/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace occplan {

struct TickRecord {
  double t = 0.0;
  double ego_arc = 0.0;
  double ego_speed = 0.0;
  double ego_accel = 0.0;
  ModeKind mode = ModeKind::FreeDrive;
  std::string decision;
  int n_bounds = 0;
  double tightest_bound = 0.0;  // NaN when unconstrained
  double s_vis_ego = 0.0;
  double s_vis_cross = 0.0;     // NaN without a merge in view
  int plan_index = -1;
  int iterations = 0;
  double grad_norm = 0.0;
  double max_violation = 0.0;
  bool fallback = false;
};

struct VehicleRecord {
  double t = 0.0;
  std::string id;
  std::string route_id;
  double arc = 0.0;
  double speed = 0.0;
  bool measured = false;
  double meas_arc = 0.0;
  double meas_speed = 0.0;
};

struct CollisionEvent {
  double t = 0.0;
  std::string a;
  std::string b;
  double gap = 0.0;
};

struct PlanRecord {
  int index = 0;
  double t_plan = 0.0;
  double snapshot_time = 0.0;
  ModeKind mode = ModeKind::FreeDrive;
  std::string decision;
  SupportTrajectory warm;
  SupportTrajectory released;
  ConstraintSet constraints;
  PlannerDiagnostics diagnostics;
  double sigma_x = 0.0;
  double sigma_v = 0.0;
  double a_dec = 8.0;
  SigmaMode sigma_mode = SigmaMode::FirstOrder;
  double s_vis_ego = 0.0;
  bool gap_checked = false;
  bool gap_accepted = false;
};

struct SimSummary {
  int collisions = 0;
  double min_gap = 0.0;
  std::optional<double> speed_at_merge;
  double terminal_speed = 0.0;
  double min_speed = 0.0;
  double terminal_arc = 0.0;
  int fallback_count = 0;
  int plans = 0;
  int gap_checks = 0;
  int gap_accepts = 0;
  double max_commit_jump = 0.0;
};

struct SimLog {
  std::vector<TickRecord> ticks;
  std::vector<VehicleRecord> vehicles;
  std::vector<CollisionEvent> collisions;
  std::vector<PlanRecord> plans;
  SimSummary summary;
};

struct RunOptions {
  bool keep_plans = true;
  bool keep_vehicles = true;
  double gradient_scale = 1.0;  // negative control only
};

/// Executed position of a committed plan at time t (piecewise linear).
double plan_position(const SupportTrajectory& plan, double t);
double plan_speed(const SupportTrajectory& plan, double t);

/// Advances the other vehicles by one tick given the ego position on its route.
void step_others(WorldState& world, double dt);

/// Runs the closed loop for `duration` seconds (world.sim.duration if <= 0).
SimLog run(const WorldState& world, std::uint64_t seed, double duration = 0.0, const RunOptions& opt = {});

void write_log_csv(const SimLog& log, const std::string& path);
void write_vehicles_csv(const SimLog& log, const std::string& path);
void write_pt_analysis_csv(const SimLog& log, const std::string& path);
void write_summary_json(const SimLog& log, const std::string& path, std::uint64_t seed);

/// Stable column lists of the CSV outputs.
extern const char* const kLogHeader;
extern const char* const kVehiclesHeader;
extern const char* const kPtAnalysisHeader;

}  // namespace occplan
