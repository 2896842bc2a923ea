#include "occplan/simloop.hpp"

#include "occplan/env_model.hpp"
#include "occplan/prediction.hpp"
#include "occplan/visibility.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace occplan {

const char* const kLogHeader =
    "t,ego_arc,ego_speed,ego_accel,mode,decision,n_bounds,tightest_bound,s_vis_ego,s_vis_cross,plan_index,"
    "iterations,grad_norm,max_violation,fallback_flag";
const char* const kVehiclesHeader = "t,id,route_id,arc,speed,measured,meas_arc,meas_speed";
const char* const kPtAnalysisHeader = "plan_index,t_plan,i,t,x,v,stop_mean,stop_std,k,stop_point,bound";

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Grid index q of the stacked layout sits at t0 + (q - 3) h.
double plan_coordinate(const SupportTrajectory& plan, double t) { return (t - plan.t0) / plan.h + 3.0; }

struct EgoCrossing {
  std::string route_id;
  double ego_arc = 0.0;
  double other_arc = 0.0;
};

std::vector<EgoCrossing> ego_crossings(const WorldState& w) {
  std::vector<EgoCrossing> out;
  const auto& er = w.ego_route();
  for (const auto& r : w.routes) {
    if (r.id == er.id) continue;
    for (const auto& c : find_crossings(er, r)) out.push_back({r.id, c.arc_a, c.arc_b});
  }
  return out;
}

// Ground-truth drivers give way to the ego only once it is visibly committed.
bool ego_committed(const WorldState& w, const EgoCrossing& c, double other_width) {
  const auto& e = w.ego.state;
  const double entry = c.ego_arc - 0.5 * other_width - 0.5;
  if (e.rear() > c.ego_arc + 0.5 * other_width) return false;  // already cleared
  if (e.arc_pos.mean >= entry - 0.5) return true;
  const double v = e.speed.mean;
  return v * v / (2.0 * w.ego.params.a_cft) >= entry - e.arc_pos.mean;
}

}  // namespace

double plan_position(const SupportTrajectory& plan, double t) {
  const Eigen::VectorXd z = plan.stacked();
  const double u = plan_coordinate(plan, t);
  const Eigen::Index last = z.size() - 1;
  if (u <= 0.0) return z(0);
  if (u >= static_cast<double>(last)) return z(last);
  const Eigen::Index q = static_cast<Eigen::Index>(std::floor(u + 1e-9));
  const double frac = u - static_cast<double>(q);
  if (frac <= 1e-9) return z(q);
  return z(q) + frac * (z(q + 1) - z(q));
}

double plan_speed(const SupportTrajectory& plan, double t) {
  const Eigen::VectorXd z = plan.stacked();
  const Eigen::Index last = z.size() - 1;
  const double u = plan_coordinate(plan, t);
  const Eigen::Index q = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(u + 1e-9)), 0, last - 1);
  return (z(q + 1) - z(q)) / plan.h;
}

void step_others(WorldState& w, double dt) {
  const auto crossings = ego_crossings(w);
  const std::size_t n = w.others.size();
  std::vector<double> accel(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& o = w.others[i];
    if (!o.active) continue;
    if (o.brake_at && w.clock >= *o.brake_at - 1e-12) {
      accel[i] = -o.params.a_dec;
      continue;
    }
    if (o.behavior == Behavior::ConstantSpeed) continue;
    if (o.behavior == Behavior::Stationary) {
      accel[i] = 0.0;
      continue;
    }
    double gap = std::numeric_limits<double>::infinity();
    double lead_v = 0.0;
    auto consider = [&](double g, double v) {
      if (g < gap) {
        gap = g;
        lead_v = v;
      }
    };
    for (std::size_t j = 0; j < n; ++j) {
      const auto& l = w.others[j];
      if (j == i || !l.active || l.state.route_id != o.state.route_id) continue;
      if (l.state.arc_pos.mean <= o.state.arc_pos.mean) continue;
      consider(l.state.rear() - o.state.arc_pos.mean, l.state.speed.mean);
    }
    const auto& e = w.ego.state;
    if (e.route_id == o.state.route_id && e.arc_pos.mean > o.state.arc_pos.mean) {
      consider(e.rear() - o.state.arc_pos.mean, e.speed.mean);
    }
    for (const auto& c : crossings) {
      if (c.route_id != o.state.route_id || !ego_committed(w, c, o.state.width)) continue;
      const double g = (c.other_arc - o.state.arc_pos.mean) - (c.ego_arc - e.rear());
      if (g > 0.0) consider(g, e.speed.mean);
    }
    if (gap <= 0.0) {
      accel[i] = -o.params.a_dec;
      continue;
    }
    accel[i] = idm_acceleration({o.state.speed.mean, gap, o.state.speed.mean - lead_v, o.params});
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& o = w.others[i];
    if (!o.active) continue;
    o.accel = accel[i];
    o.state.arc_pos.mean += o.state.speed.mean * dt;
    o.state.speed.mean = std::max(0.0, o.state.speed.mean + accel[i] * dt);
    if (o.state.rear() > w.route(o.state.route_id).length()) o.active = false;
  }
  w.clock += dt;
}

namespace {

struct Snapshot {
  double t = 0.0;
  WorldState world;
};

struct LoopMemory {
  std::optional<double> served_stop_arc;
};

Eigen::VectorXd predict_lead_rear(const OtherVehicle& lead, double age, const WorldState& w, int n_points) {
  const double h = w.timing.h;
  const double dt = w.prediction.dt;
  const double horizon = age + (n_points - 1) * h;
  const auto traj = simulate_idm(lead.state.arc_pos.mean, lead.state.speed.mean, nullptr, lead.params, horizon + dt, dt);
  Eigen::VectorXd rear(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double t = age + i * h;
    const std::size_t s = std::min<std::size_t>(static_cast<std::size_t>(std::lround(t / dt)), traj.size() - 1);
    rear(i) = traj[s].arc - lead.state.length;
  }
  return rear;
}

PlanRecord plan_cycle(const Snapshot& snap, const std::optional<SupportTrajectory>& prev, double t0,
                      const WorldState& truth, LoopMemory& mem, int index, const RunOptions& opt) {
  const WorldState& w = snap.world;
  const int n_points = w.planner.n_points;
  PlanRecord rec;
  rec.index = index;
  rec.t_plan = t0;
  rec.snapshot_time = snap.t;
  rec.warm = warm_start(prev, t0, truth.ego.state.arc_pos.mean, truth.ego.state.speed.mean, w.ego.params.a_dec,
                        w.timing, n_points);

  const auto& ego_route = w.ego_route();
  const auto preview = sample_preview_points(ego_route, w.ego.state.arc_pos.mean, w.sensor_range,
                                             w.scene.preview_spacing);
  const auto merges = detect_intersections(w, preview, w.scene.lateral_tol);
  const auto vis = compute_visibility(w, merges);
  const auto mode = select_mode(w, vis, merges);
  rec.mode = mode.kind;
  rec.s_vis_ego = vis.s_vis_ego;

  ConstraintContext ctx;
  ctx.world = &w;
  ctx.vis = &vis;
  ctx.mode = &mode;
  ctx.n_points = n_points;
  ctx.snapshot_age = t0 - snap.t;
  ctx.x0 = rec.warm.points(0);
  ctx.v0 = rec.warm.speed(0);
  ctx.x_pinned = rec.warm.points(w.timing.n_pin - 1);
  ctx.v_pinned = rec.warm.speed(w.timing.n_pin - 1);
  if (mode.merge && mode.mandatory_stop) {
    const double x_mp = mode.merge->ego_arc;
    const bool served = mem.served_stop_arc && std::abs(*mem.served_stop_arc - x_mp) < 1.0;
    if (!served && ctx.v0 < w.scene.stop_release_speed && ctx.x0 >= x_mp - w.ego.params.s_min - 1.5) {
      mem.served_stop_arc = x_mp;
    }
    ctx.hold_stop = !(mem.served_stop_arc && std::abs(*mem.served_stop_arc - x_mp) < 1.0);
  }

  AssemblyReport report;
  rec.constraints = assemble_constraints(ctx, &report);
  rec.decision = report.decision;
  rec.gap_checked = report.gap_checked;
  rec.gap_accepted = report.gap_accepted;

  ObjectiveContext octx;
  octx.weights = w.planner.weights;
  octx.mode = mode.kind;
  octx.v_des = w.ego.params.v_des;
  octx.a_dec = w.ego.params.a_dec;
  octx.sigma_x = w.ego.state.arc_pos.std;
  octx.sigma_v = w.ego.state.speed.std;
  octx.sigma_mode = w.safety.sigma_mode;
  octx.constraints = rec.constraints;
  octx.s_min = w.ego.params.s_min;
  octx.headway = w.ego.params.headway;
  if (mode.kind == ModeKind::FollowDrive && mode.mio && mode.mio->kind == MioRef::Kind::Vehicle) {
    octx.lead_rear = predict_lead_rear(w.others[mode.mio->index], ctx.snapshot_age, w, n_points);
  }
  if (report.stop_line) {
    octx.stop_target = *report.stop_line - 0.5;
    octx.stop_decel = w.ego.params.a_cft;
  }
  rec.sigma_x = octx.sigma_x;
  rec.sigma_v = octx.sigma_v;
  rec.a_dec = octx.a_dec;
  rec.sigma_mode = octx.sigma_mode;

  auto result = optimize(rec.warm, octx, w.planner, opt.gradient_scale);
  rec.released = std::move(result.trajectory);
  rec.diagnostics = result.diagnostics;
  return rec;
}

void place_at_line_of_sight(WorldState& w, OtherVehicle& o) {
  const auto& ego_route = w.ego_route();
  const auto preview = sample_preview_points(ego_route, w.ego.state.arc_pos.mean, ego_route.length(),
                                             w.scene.preview_spacing);
  for (const auto& m : detect_intersections(w, preview, w.scene.lateral_tol)) {
    if (m.other_route_id != o.state.route_id) continue;
    const double s = cross_route_visibility(w, m);
    o.state.arc_pos.mean = std::max(0.0, m.other_arc - s - w.visibility.ds);
    o.state.speed.mean = w.route(o.state.route_id).speed_limit;
    return;
  }
}

}  // namespace

SimLog run(const WorldState& initial, std::uint64_t seed, double duration, const RunOptions& opt) {
  validate(initial);
  WorldState truth = initial;
  truth.clock = 0.0;
  if (duration <= 0.0) duration = truth.sim.duration;
  const auto& tm = truth.timing;
  const double dt = tm.dt_sim;
  const long ticks_env = std::lround(tm.env_period / dt);
  const long ticks_plan = std::lround(tm.plan_period / dt);
  const long ticks_tp = std::lround(tm.t_p / dt);
  const long n_ticks = std::lround(duration / dt);

  for (auto& o : truth.others) {
    if (o.spawn_time && *o.spawn_time > 0.0) o.active = false;
  }
  const auto crossings = ego_crossings(truth);

  SimLog log;
  std::deque<Snapshot> snaps;
  std::optional<SupportTrajectory> committed;
  LoopMemory mem;
  std::map<std::pair<std::string, std::string>, bool> in_contact;
  double min_gap = std::numeric_limits<double>::infinity();
  double min_speed = std::numeric_limits<double>::infinity();
  PlanRecord last_plan;
  bool have_plan = false;
  std::optional<double> speed_at_merge;
  const double first_cross = crossings.empty() ? kNaN : std::min_element(crossings.begin(), crossings.end(),
      [](const auto& a, const auto& b) { return a.ego_arc < b.ego_arc; })->ego_arc;

  for (long n = 0; n <= n_ticks; ++n) {
    const double t = static_cast<double>(n) * dt;
    truth.clock = t;

    for (auto& o : truth.others) {
      if (!o.active && o.spawn_time && t >= *o.spawn_time - 1e-12 && o.state.rear() <= truth.route(o.state.route_id).length()) {
        o.active = true;
        o.spawn_time.reset();
        if (o.spawn_at_line_of_sight) place_at_line_of_sight(truth, o);
      }
    }

    if (committed) {
      truth.ego.state.arc_pos.mean = plan_position(*committed, t);
      truth.ego.state.speed.mean = plan_speed(*committed, t);
    }

    if (n % ticks_env == 0) {
      snaps.push_back({t, measure(truth, splitmix(seed ^ splitmix(static_cast<std::uint64_t>(n))))});
      snaps.back().world.clock = t;
      while (snaps.size() > 2 && snaps[1].t <= t - tm.t_p - 1e-12) snaps.pop_front();
    }

    if (n % ticks_plan == 0 && n < n_ticks) {
      const Snapshot* use = nullptr;
      for (const auto& s : snaps) {
        if (std::lround(s.t / dt) <= n - ticks_tp) use = &s;
      }
      if (use) {
        PlanRecord rec = plan_cycle(*use, committed, t, truth, mem, static_cast<int>(log.summary.plans), opt);
        if (committed) {
          // Continuity across the release over every pinned time.
          for (int q = 0; q < 3 + tm.n_pin; ++q) {
            const double tq = t + (q - 3) * tm.h;
            log.summary.max_commit_jump =
                std::max(log.summary.max_commit_jump,
                         std::abs(plan_position(*committed, tq) - plan_position(rec.released, tq)));
          }
        }
        committed = rec.released;
        ++log.summary.plans;
        if (rec.diagnostics.fallback) ++log.summary.fallback_count;
        if (rec.gap_checked) {
          ++log.summary.gap_checks;
          if (rec.gap_accepted) ++log.summary.gap_accepts;
        }
        last_plan = rec;
        have_plan = true;
        if (opt.keep_plans) log.plans.push_back(std::move(rec));
      } else if (!committed) {
        committed = warm_start(std::nullopt, t, truth.ego.state.arc_pos.mean, truth.ego.state.speed.mean,
                               truth.ego.params.a_dec, tm, truth.planner.n_points);
      }
    }

    // Ego state from the committed plan.
    const double x = plan_position(*committed, t);
    const double v = plan_speed(*committed, t);
    truth.ego.state.arc_pos.mean = x;
    truth.ego.state.speed.mean = v;

    TickRecord tr;
    tr.t = t;
    tr.ego_arc = x;
    tr.ego_speed = v;
    tr.ego_accel = (plan_speed(*committed, t + committed->h) - v) / committed->h;
    tr.tightest_bound = kNaN;
    tr.s_vis_cross = kNaN;
    if (have_plan) {
      tr.mode = last_plan.mode;
      tr.decision = last_plan.decision;
      tr.n_bounds = static_cast<int>(last_plan.constraints.bounds.size());
      for (const auto& b : last_plan.constraints.bounds) {
        if (std::isnan(tr.tightest_bound) || b.upper < tr.tightest_bound) tr.tightest_bound = b.upper;
      }
      tr.s_vis_ego = last_plan.s_vis_ego;
      tr.plan_index = last_plan.index;
      tr.iterations = last_plan.diagnostics.iterations;
      tr.grad_norm = last_plan.diagnostics.grad_norm;
      tr.max_violation = last_plan.diagnostics.max_violation;
      tr.fallback = last_plan.diagnostics.fallback;
    }
    if (!snaps.empty()) {
      const auto& sw = snaps.back().world;
      double best = kNaN;
      for (const auto& c : crossings) {
        if (c.ego_arc < x) continue;
        MergePoint m{c.ego_arc, c.route_id, c.other_arc, MergeAction::GiveWay};
        const double s = cross_route_visibility(sw, m);
        if (std::isnan(best) || s < best) best = s;
      }
      tr.s_vis_cross = best;
    }
    log.ticks.push_back(tr);
    min_speed = std::min(min_speed, v);
    if (!speed_at_merge && !std::isnan(first_cross) && x >= first_cross) speed_at_merge = v;

    if (opt.keep_vehicles) {
      const auto* sw = snaps.empty() ? nullptr : &snaps.back().world;
      for (const auto& o : truth.others) {
        if (!o.active) continue;
        VehicleRecord vr{t, o.id, o.state.route_id, o.state.arc_pos.mean, o.state.speed.mean, false, kNaN, kNaN};
        if (sw) {
          for (const auto& m : sw->others) {
            if (m.id == o.id) {
              vr.measured = true;
              vr.meas_arc = m.state.arc_pos.mean;
              vr.meas_speed = m.state.speed.mean;
            }
          }
        }
        log.vehicles.push_back(std::move(vr));
      }
    }

    // Collisions.
    auto contact = [&](const std::string& a, const std::string& b, bool hit, double gap) {
      auto& state = in_contact[{a, b}];
      if (hit && !state) log.collisions.push_back({t, a, b, gap});
      state = hit;
    };
    const auto& e = truth.ego.state;
    for (std::size_t i = 0; i < truth.others.size(); ++i) {
      const auto& o = truth.others[i];
      if (!o.active) continue;
      if (o.state.route_id == e.route_id) {
        const double gap = o.state.arc_pos.mean >= e.arc_pos.mean ? o.state.rear() - e.arc_pos.mean
                                                                  : e.rear() - o.state.arc_pos.mean;
        min_gap = std::min(min_gap, gap);
        contact("ego", o.id, gap <= 0.0, gap);
      }
      for (const auto& c : crossings) {
        if (c.route_id != o.state.route_id) continue;
        const double r = 0.25 * (e.length + o.state.length);
        const double de = std::abs(e.arc_pos.mean - 0.5 * e.length - c.ego_arc);
        const double d_o = std::abs(o.state.arc_pos.mean - 0.5 * o.state.length - c.other_arc);
        const double sep = std::max(de, d_o) - r;
        min_gap = std::min(min_gap, sep);
        contact("ego", o.id + "@" + c.route_id, sep <= 0.0, sep);
      }
      for (std::size_t j = i + 1; j < truth.others.size(); ++j) {
        const auto& p = truth.others[j];
        if (!p.active || p.state.route_id != o.state.route_id) continue;
        const double gap = p.state.arc_pos.mean >= o.state.arc_pos.mean ? p.state.rear() - o.state.arc_pos.mean
                                                                        : o.state.rear() - p.state.arc_pos.mean;
        contact(o.id, p.id, gap <= 0.0, gap);
      }
    }

    if (n == n_ticks) break;
    step_others(truth, dt);
  }

  auto& s = log.summary;
  s.collisions = static_cast<int>(log.collisions.size());
  s.min_gap = min_gap;
  s.speed_at_merge = speed_at_merge;
  s.terminal_speed = log.ticks.back().ego_speed;
  s.terminal_arc = log.ticks.back().ego_arc;
  s.min_speed = min_speed;
  return log;
}

namespace {

std::string num(double v) {
  if (std::isnan(v) || std::isinf(v)) return "";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_log_csv(const SimLog& log, const std::string& path) {
  std::ostringstream os;
  os << kLogHeader << "\n";
  for (const auto& r : log.ticks) {
    os << num(r.t) << ',' << num(r.ego_arc) << ',' << num(r.ego_speed) << ',' << num(r.ego_accel) << ','
       << to_string(r.mode) << ',' << r.decision << ',' << r.n_bounds << ',' << num(r.tightest_bound) << ','
       << num(r.s_vis_ego) << ',' << num(r.s_vis_cross) << ',' << r.plan_index << ',' << r.iterations << ','
       << num(r.grad_norm) << ',' << num(r.max_violation) << ',' << (r.fallback ? 1 : 0) << "\n";
  }
  write_atomic(path, os.str());
}

void write_vehicles_csv(const SimLog& log, const std::string& path) {
  std::ostringstream os;
  os << kVehiclesHeader << "\n";
  for (const auto& r : log.vehicles) {
    os << num(r.t) << ',' << r.id << ',' << r.route_id << ',' << num(r.arc) << ',' << num(r.speed) << ','
       << (r.measured ? 1 : 0) << ',' << num(r.meas_arc) << ',' << num(r.meas_speed) << "\n";
  }
  write_atomic(path, os.str());
}

void write_pt_analysis_csv(const SimLog& log, const std::string& path) {
  std::ostringstream os;
  os << kPtAnalysisHeader << "\n";
  for (const auto& p : log.plans) {
    const auto& traj = p.released;
    const double k = p.constraints.k;
    for (int i = 0; i < traj.size(); ++i) {
      const double x = traj.points(i);
      const double v = traj.speed(i);
      const auto b = p.constraints.tightest(i);
      const double extra = b ? b->extra_variance : 0.0;
      const double std = std::sqrt(p.sigma_x * p.sigma_x + extra +
                                   braking_distance_variance(v, p.sigma_v, p.a_dec, p.sigma_mode));
      const double mean = x + braking_distance(v, p.a_dec);
      os << p.index << ',' << num(p.t_plan) << ',' << i << ',' << num(traj.time(i)) << ',' << num(x) << ','
         << num(v) << ',' << num(mean) << ',' << num(std) << ',' << num(k) << ',' << num(mean + k * std) << ','
         << (b ? num(b->upper) : std::string()) << "\n";
    }
  }
  write_atomic(path, os.str());
}

void write_summary_json(const SimLog& log, const std::string& path, std::uint64_t seed) {
  const auto& s = log.summary;
  nlohmann::json j;
  j["seed"] = seed;
  j["collisions"] = s.collisions;
  nlohmann::json events = nlohmann::json::array();
  for (const auto& c : log.collisions) events.push_back({{"t", c.t}, {"a", c.a}, {"b", c.b}, {"gap", c.gap}});
  j["collision_events"] = events;
  j["min_gap"] = std::isfinite(s.min_gap) ? nlohmann::json(s.min_gap) : nlohmann::json(nullptr);
  j["speed_at_merge"] = s.speed_at_merge ? nlohmann::json(*s.speed_at_merge) : nlohmann::json(nullptr);
  j["terminal_speed"] = s.terminal_speed;
  j["terminal_arc"] = s.terminal_arc;
  j["min_speed"] = s.min_speed;
  j["fallback_count"] = s.fallback_count;
  j["plans"] = s.plans;
  j["gap_checks"] = s.gap_checks;
  j["gap_accepts"] = s.gap_accepts;
  j["max_commit_jump"] = s.max_commit_jump;
  write_atomic(path, j.dump(2) + "\n");
}

}  // namespace occplan
