#include "occplan/scenario_io.hpp"

#include "occplan/env_model.hpp"

#include <fstream>
#include <sstream>

namespace occplan {

using nlohmann::json;

namespace {

const char* tag_name(RuleKind k) {
  switch (k) {
    case RuleKind::StopSign: return "STOP_SIGN";
    case RuleKind::Yield: return "YIELD";
    case RuleKind::PriorityRoad: return "PRIORITY_ROAD";
    case RuleKind::SpeedLimit: return "SPEED_LIMIT";
  }
  return "?";
}

RuleKind parse_tag(const std::string& s, const std::string& where) {
  if (s == "STOP_SIGN") return RuleKind::StopSign;
  if (s == "YIELD") return RuleKind::Yield;
  if (s == "PRIORITY_ROAD") return RuleKind::PriorityRoad;
  if (s == "SPEED_LIMIT") return RuleKind::SpeedLimit;
  throw ScenarioError(where + ": unknown tag '" + s + "'");
}

const char* behavior_name(Behavior b) {
  switch (b) {
    case Behavior::Idm: return "idm";
    case Behavior::ConstantSpeed: return "constant_speed";
    case Behavior::Stationary: return "stationary";
  }
  return "?";
}

Behavior parse_behavior(const std::string& s, const std::string& where) {
  if (s == "idm") return Behavior::Idm;
  if (s == "constant_speed") return Behavior::ConstantSpeed;
  if (s == "stationary") return Behavior::Stationary;
  throw ScenarioError(where + ": unknown behavior '" + s + "'");
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ScenarioError(where + ": missing key '" + key + "'");
  return j.at(key);
}

double num(const json& j, const char* key, const std::string& where) {
  const auto& v = need(j, key, where);
  if (!v.is_number()) throw ScenarioError(where + "." + key + ": expected a number");
  return v.get<double>();
}

double num_or(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return num(j, key, where);
}

Vec2 parse_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ScenarioError(where + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json point_json(const Vec2& p) { return json::array({p.x(), p.y()}); }

DriverParams parse_driver(const json& j, double default_v_des, const std::string& where) {
  DriverParams p;
  p.v_des = default_v_des;
  if (j.is_null()) return p;
  const auto w = where + ".driver";
  p.a_acc = num_or(j, "a_acc", p.a_acc, w);
  p.a_cft = num_or(j, "a_cft", p.a_cft, w);
  p.a_dec = num_or(j, "a_dec", p.a_dec, w);
  p.s_min = num_or(j, "s_min", p.s_min, w);
  p.headway = num_or(j, "headway", p.headway, w);
  p.v_des = num_or(j, "v_des", p.v_des, w);
  p.politeness = num_or(j, "politeness", p.politeness, w);
  return p;
}

json driver_json(const DriverParams& p) {
  return {{"a_acc", p.a_acc}, {"a_cft", p.a_cft}, {"a_dec", p.a_dec}, {"s_min", p.s_min},
          {"headway", p.headway}, {"v_des", p.v_des}, {"politeness", p.politeness}};
}

VehicleState parse_vehicle(const json& j, const std::string& where) {
  VehicleState s;
  const auto& rid = need(j, "route_id", where);
  if (!rid.is_string()) throw ScenarioError(where + ".route_id: expected a string");
  s.route_id = rid.get<std::string>();
  s.arc_pos.mean = num(j, "arc", where);
  s.speed.mean = num(j, "speed", where);
  s.length = num_or(j, "length", s.length, where);
  s.width = num_or(j, "width", s.width, where);
  return s;
}

double route_speed_limit(const std::vector<RouteGeometry>& routes, const std::string& id) {
  for (const auto& r : routes) {
    if (r.id == id) return r.speed_limit;
  }
  return DriverParams{}.v_des;
}

}  // namespace

WorldState parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ScenarioError("scenario: top level must be an object");
  WorldState w;

  const auto& routes = need(doc, "routes", "scenario");
  if (!routes.is_array()) throw ScenarioError("routes: expected a list");
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto& r = routes[i];
    const auto where = "routes[" + std::to_string(i) + "]";
    const auto& id = need(r, "id", where);
    if (!id.is_string()) throw ScenarioError(where + ".id: expected a string");
    const auto name = "route '" + id.get<std::string>() + "'";
    std::vector<Vec2> pts;
    for (const auto& p : need(r, "polyline", name)) pts.push_back(parse_point(p, name + ".polyline"));
    std::vector<RuleTag> tags;
    if (r.contains("tags")) {
      for (const auto& t : r.at("tags")) {
        RuleTag tag;
        tag.from = num(t, "from", name + ".tags");
        tag.to = num(t, "to", name + ".tags");
        tag.kind = parse_tag(need(t, "tag", name + ".tags").get<std::string>(), name);
        tag.value = num_or(t, "value", 0.0, name + ".tags");
        if (tag.kind == RuleKind::SpeedLimit && !t.contains("value")) {
          throw ScenarioError(name + ": SPEED_LIMIT tag needs a value");
        }
        tags.push_back(tag);
      }
    }
    w.routes.push_back(make_route(id.get<std::string>(), std::move(pts), num(r, "speed_limit", name), std::move(tags)));
  }

  const auto& occ = need(doc, "occluders", "scenario");
  if (!occ.is_array()) throw ScenarioError("occluders: expected a list");
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const auto name = "occluder " + std::to_string(i);
    std::vector<Vec2> verts;
    for (const auto& p : need(occ[i], "vertices", name)) verts.push_back(parse_point(p, name));
    w.occluders.push_back(make_occluder(std::move(verts), name));
  }

  const auto& ego = need(doc, "ego", "scenario");
  w.ego.state = parse_vehicle(ego, "ego");
  w.ego.state.arc_pos.std = num_or(ego, "sigma_pos", 0.0, "ego");
  w.ego.state.speed.std = num_or(ego, "sigma_speed", 0.0, "ego");
  w.ego.params = parse_driver(ego.value("driver", json()), route_speed_limit(w.routes, w.ego.state.route_id), "ego");

  const auto& others = need(doc, "others", "scenario");
  if (!others.is_array()) throw ScenarioError("others: expected a list");
  for (std::size_t i = 0; i < others.size(); ++i) {
    const auto& o = others[i];
    OtherVehicle v;
    v.id = o.contains("id") && o.at("id").is_string() ? o.at("id").get<std::string>() : "vehicle" + std::to_string(i);
    const auto where = "vehicle '" + v.id + "'";
    v.state = parse_vehicle(o, where);
    v.params = parse_driver(o.value("driver", json()), route_speed_limit(w.routes, v.state.route_id), where);
    v.behavior = parse_behavior(o.value("behavior", std::string("idm")), where);
    if (o.contains("brake_at")) v.brake_at = num(o, "brake_at", where);
    if (o.contains("spawn_time")) v.spawn_time = num(o, "spawn_time", where);
    v.spawn_at_line_of_sight = o.value("spawn_at_line_of_sight", false);
    v.active = !v.spawn_time.has_value();
    w.others.push_back(std::move(v));
  }

  w.sensor_range = num(doc, "sensor_range", "scenario");

  const auto& tm = need(doc, "timing", "scenario");
  w.timing.h = num(tm, "h", "timing");
  w.timing.n_pin = static_cast<int>(num(tm, "n_pin", "timing"));
  w.timing.env_period = num(tm, "env_period", "timing");
  w.timing.plan_period = num(tm, "plan_period", "timing");
  w.timing.t_p = num_or(tm, "t_p", 0.0, "timing");
  w.timing.dt_sim = num_or(tm, "dt_sim", w.timing.h / 10.0, "timing");

  if (doc.contains("noise")) {
    const auto& nz = doc.at("noise");
    w.sigma_meas_pos = num_or(nz, "sigma_pos", 0.0, "noise");
    w.sigma_meas_speed = num_or(nz, "sigma_speed", 0.0, "noise");
  }

  const auto& pl = need(doc, "planner", "scenario");
  auto& pc = w.planner;
  pc.n_points = static_cast<int>(num_or(pl, "n_points", pc.n_points, "planner"));
  pc.weights.w_vel = num_or(pl, "w_vel", pc.weights.w_vel, "planner");
  pc.weights.w_acc = num_or(pl, "w_acc", pc.weights.w_acc, "planner");
  pc.weights.w_jerk = num_or(pl, "w_jerk", pc.weights.w_jerk, "planner");
  pc.weights.w_s = num_or(pl, "w_s", pc.weights.w_s, "planner");
  pc.weights.penalty_weight = num_or(pl, "penalty_weight", pc.weights.penalty_weight, "planner");
  pc.weights.penalty_sharpness = num_or(pl, "penalty_sharpness", pc.weights.penalty_sharpness, "planner");
  pc.max_iterations = static_cast<int>(num_or(pl, "max_iterations", pc.max_iterations, "planner"));
  pc.grad_tol = num_or(pl, "grad_tol", pc.grad_tol, "planner");
  pc.fallback_tol = num_or(pl, "fallback_tol", pc.fallback_tol, "planner");

  const json empty = json::object();
  const auto& sf = doc.contains("safety") ? doc.at("safety") : empty;
  w.safety.k = num_or(sf, "k", w.safety.k, "safety");
  const auto mode = sf.value("sigma_mode", std::string("first_order"));
  if (mode == "paper") {
    w.safety.sigma_mode = SigmaMode::PaperExact;
  } else if (mode == "first_order") {
    w.safety.sigma_mode = SigmaMode::FirstOrder;
  } else {
    throw ScenarioError("safety.sigma_mode: expected 'paper' or 'first_order'");
  }

  const auto& vis = doc.contains("visibility") ? doc.at("visibility") : empty;
  w.visibility.ds = num_or(vis, "ds", w.visibility.ds, "visibility");

  const auto& sc = doc.contains("scene") ? doc.at("scene") : empty;
  w.scene.lateral_tol = num_or(sc, "lateral_tol", w.scene.lateral_tol, "scene");
  w.scene.preview_spacing = num_or(sc, "preview_spacing", w.scene.preview_spacing, "scene");
  w.scene.stop_sign_window = num_or(sc, "stop_sign_window", w.scene.stop_sign_window, "scene");
  w.scene.stop_release_speed = num_or(sc, "stop_release_speed", w.scene.stop_release_speed, "scene");

  const auto& pr = doc.contains("prediction") ? doc.at("prediction") : empty;
  w.prediction.dt = num_or(pr, "dt", w.prediction.dt, "prediction");
  w.prediction.horizon = num_or(pr, "horizon", w.prediction.horizon, "prediction");

  const auto& sim = doc.contains("sim") ? doc.at("sim") : empty;
  w.sim.duration = num_or(sim, "duration", w.sim.duration, "sim");

  validate(w);
  return w;
}

json scenario_to_json(const WorldState& w) {
  json doc;
  json routes = json::array();
  for (const auto& r : w.routes) {
    json pts = json::array();
    for (const auto& p : r.centerline) pts.push_back(point_json(p));
    json tags = json::array();
    for (const auto& t : r.rule_tags) {
      json jt = {{"from", t.from}, {"to", t.to}, {"tag", tag_name(t.kind)}};
      if (t.kind == RuleKind::SpeedLimit) jt["value"] = t.value;
      tags.push_back(jt);
    }
    routes.push_back({{"id", r.id}, {"polyline", pts}, {"speed_limit", r.speed_limit}, {"tags", tags}});
  }
  doc["routes"] = routes;

  json occ = json::array();
  for (const auto& o : w.occluders) {
    json verts = json::array();
    for (const auto& p : o.vertices) verts.push_back(point_json(p));
    occ.push_back({{"vertices", verts}});
  }
  doc["occluders"] = occ;

  const auto& e = w.ego.state;
  doc["ego"] = {{"route_id", e.route_id}, {"arc", e.arc_pos.mean}, {"speed", e.speed.mean},
                {"sigma_pos", e.arc_pos.std}, {"sigma_speed", e.speed.std}, {"length", e.length},
                {"width", e.width}, {"driver", driver_json(w.ego.params)}};

  json others = json::array();
  for (const auto& o : w.others) {
    json jo = {{"id", o.id}, {"route_id", o.state.route_id}, {"arc", o.state.arc_pos.mean},
               {"speed", o.state.speed.mean}, {"length", o.state.length}, {"width", o.state.width},
               {"driver", driver_json(o.params)}, {"behavior", behavior_name(o.behavior)},
               {"spawn_at_line_of_sight", o.spawn_at_line_of_sight}};
    if (o.brake_at) jo["brake_at"] = *o.brake_at;
    if (o.spawn_time) jo["spawn_time"] = *o.spawn_time;
    others.push_back(jo);
  }
  doc["others"] = others;

  doc["sensor_range"] = w.sensor_range;
  const auto& tm = w.timing;
  doc["timing"] = {{"h", tm.h}, {"n_pin", tm.n_pin}, {"env_period", tm.env_period},
                   {"plan_period", tm.plan_period}, {"t_p", tm.t_p}, {"dt_sim", tm.dt_sim}};
  doc["noise"] = {{"sigma_pos", w.sigma_meas_pos}, {"sigma_speed", w.sigma_meas_speed}};
  const auto& pc = w.planner;
  doc["planner"] = {{"n_points", pc.n_points}, {"w_vel", pc.weights.w_vel}, {"w_acc", pc.weights.w_acc},
                    {"w_jerk", pc.weights.w_jerk}, {"w_s", pc.weights.w_s},
                    {"penalty_weight", pc.weights.penalty_weight},
                    {"penalty_sharpness", pc.weights.penalty_sharpness},
                    {"max_iterations", pc.max_iterations}, {"grad_tol", pc.grad_tol},
                    {"fallback_tol", pc.fallback_tol}};
  doc["safety"] = {{"k", w.safety.k},
                   {"sigma_mode", w.safety.sigma_mode == SigmaMode::PaperExact ? "paper" : "first_order"}};
  doc["visibility"] = {{"ds", w.visibility.ds}};
  doc["scene"] = {{"lateral_tol", w.scene.lateral_tol}, {"preview_spacing", w.scene.preview_spacing},
                  {"stop_sign_window", w.scene.stop_sign_window},
                  {"stop_release_speed", w.scene.stop_release_speed}};
  doc["prediction"] = {{"dt", w.prediction.dt}, {"horizon", w.prediction.horizon}};
  doc["sim"] = {{"duration", w.sim.duration}};
  return doc;
}

std::string serialize_scenario(const WorldState& world) { return scenario_to_json(world).dump(2) + "\n"; }

WorldState load_scenario(const std::string& path) { return load_scenario(path, {}); }

WorldState load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ScenarioError("parse error in '" + path + "': " + e.what());
  }
  WorldState world = parse_scenario(doc);
  if (overrides.empty()) return world;
  json canonical = scenario_to_json(world);
  apply_overrides(canonical, overrides);
  return parse_scenario(canonical);
}

void save_scenario(const WorldState& world, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file '" + path + "'");
  out << serialize_scenario(world);
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ScenarioError("override '" + ov + "': expected key=value");
    const std::string key = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    json* node = &doc;
    std::stringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) {
      if (node->is_object()) {
        if (!node->contains(part)) throw ScenarioError("unknown config key '" + key + "'");
        node = &(*node)[part];
      } else if (node->is_array()) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(part);
        } catch (const std::exception&) {
          throw ScenarioError("unknown config key '" + key + "'");
        }
        if (idx >= node->size()) throw ScenarioError("unknown config key '" + key + "'");
        node = &(*node)[idx];
      } else {
        throw ScenarioError("unknown config key '" + key + "'");
      }
    }
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;
    }
    *node = parsed;
  }
}

}  // namespace occplan
