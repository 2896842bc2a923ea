#include "occplan/scenarios.hpp"

#include "occplan/env_model.hpp"

namespace occplan::scenarios {

namespace {

WorldState straight(double sensor_range, double length = 1000.0) {
  WorldState w;
  w.routes.push_back(make_route("main", {{0.0, 0.0}, {length, 0.0}}, 13.89));
  w.sensor_range = sensor_range;
  w.ego.state.route_id = "main";
  w.ego.state.arc_pos = {0.0, 0.0};
  w.ego.state.speed = {13.89, 0.0};
  w.ego.params.v_des = 13.89;
  return w;
}

OtherVehicle vehicle(std::string id, std::string route, double arc, double speed, Behavior b, double v_des) {
  OtherVehicle o;
  o.id = std::move(id);
  o.state.route_id = std::move(route);
  o.state.arc_pos = {arc, 0.0};
  o.state.speed = {speed, 0.0};
  o.behavior = b;
  o.params.v_des = v_des;
  return o;
}

constexpr double kSideLimit = 6.94;  // 25 km/h

// Ego heads east on "main"; "side" runs north through x = 150.
WorldState crossing(double sensor_range, bool ego_priority, bool occluded) {
  WorldState w;
  std::vector<RuleTag> main_tags, side_tags;
  if (ego_priority) {
    main_tags.push_back({0.0, 600.0, RuleKind::PriorityRoad, 0.0});
  } else {
    side_tags.push_back({0.0, 300.0, RuleKind::PriorityRoad, 0.0});
  }
  w.routes.push_back(make_route("main", {{0.0, 0.0}, {600.0, 0.0}}, 13.89, main_tags));
  w.routes.push_back(make_route("side", {{150.0, -150.0}, {150.0, 150.0}}, kSideLimit, side_tags));
  if (occluded) {
    w.occluders.push_back(make_occluder({{60.0, -80.0}, {130.0, -80.0}, {130.0, -20.0}, {60.0, -20.0}}, "building"));
  }
  w.sensor_range = sensor_range;
  w.ego.state.route_id = "main";
  w.ego.state.arc_pos = {40.0, 0.0};
  w.ego.state.speed = {13.89, 0.0};
  w.ego.params.v_des = 13.89;
  w.sim.duration = 25.0;
  return w;
}

}  // namespace

WorldState free_drive_limited_visibility(double sensor_range) {
  WorldState w = straight(sensor_range);
  w.ego.state.speed = {0.0, 0.0};
  // Snapshots on every support point keep the plan and perception clocks aligned.
  w.timing.env_period = 0.25;
  w.sim.duration = 20.0;
  return w;
}

WorldState empty_road() {
  WorldState w = straight(200.0);
  w.ego.state.speed = {5.0, 0.0};
  w.sim.duration = 20.0;
  return w;
}

WorldState give_way(double sensor_range) { return crossing(sensor_range, false, true); }

WorldState stopped_vehicle() {
  WorldState w = straight(60.0, 500.0);
  w.others.push_back(vehicle("parked", "main", 66.5, 0.0, Behavior::Stationary, 13.89));
  w.sim.duration = 20.0;
  return w;
}

WorldState lead_brakes() {
  WorldState w = straight(80.0, 500.0);
  w.ego.state.arc_pos = {5.5, 0.0};
  w.ego.state.speed = {10.0, 0.0};
  auto lead = vehicle("lead", "main", 40.0, 10.0, Behavior::Idm, 10.0);
  lead.brake_at = 5.0;
  w.others.push_back(lead);
  w.sim.duration = 15.0;
  return w;
}

WorldState hidden_spawn(double spawn_time) {
  WorldState w = give_way(80.0);
  auto o = vehicle("hidden", "side", 0.0, kSideLimit, Behavior::Idm, kSideLimit);
  o.spawn_time = spawn_time;
  o.spawn_at_line_of_sight = true;
  w.others.push_back(o);
  return w;
}

WorldState right_of_way_uncompliant() {
  WorldState w = crossing(80.0, true, false);
  w.routes[0].speed_limit = 10.0;
  w.ego.state.arc_pos = {50.0, 0.0};
  w.ego.state.speed = {10.0, 0.0};
  w.ego.params.v_des = 10.0;
  w.others.push_back(vehicle("speeder", "side", 30.0, 12.0, Behavior::ConstantSpeed, 12.0));
  return w;
}

WorldState stop_sign() {
  WorldState w = crossing(80.0, false, true);
  w.routes[1].rule_tags.clear();
  w.routes[0].rule_tags.push_back({140.0, 149.0, RuleKind::StopSign, 0.0});
  return w;
}

void apply_noise(WorldState& w, double sigma_pos, double sigma_speed, double k) {
  w.sigma_meas_pos = sigma_pos;
  w.sigma_meas_speed = sigma_speed;
  w.ego.state.arc_pos.std = sigma_pos;
  w.ego.state.speed.std = sigma_speed;
  w.safety.k = k;
}

std::vector<std::pair<std::string, WorldState>> catalog() {
  return {
      {"free_drive", free_drive_limited_visibility()},
      {"empty_road", empty_road()},
      {"give_way", give_way()},
      {"stopped_vehicle", stopped_vehicle()},
      {"lead_brakes", lead_brakes()},
      {"hidden_spawn", hidden_spawn()},
      {"right_of_way_uncompliant", right_of_way_uncompliant()},
      {"stop_sign", stop_sign()},
  };
}

}  // namespace occplan::scenarios
