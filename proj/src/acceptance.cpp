#include "occplan/acceptance.hpp"

#include "occplan/env_model.hpp"
#include "occplan/parallel.hpp"
#include "occplan/planner.hpp"
#include "occplan/prediction.hpp"
#include "occplan/safety.hpp"
#include "occplan/scenarios.hpp"
#include "occplan/simloop.hpp"
#include "occplan/visibility.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace occplan::acceptance {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CriterionResult finish(CriterionResult r, Clock::time_point t0) {
  r.seconds = elapsed(t0);
  if (r.budget > 0.0 && r.seconds >= r.budget) {
    r.pass = false;
    r.detail += fmt("; over runtime budget (%.1f s)", r.seconds);
  }
  return r;
}

}  // namespace

std::vector<std::pair<std::string, WorldState>> adversarial_suite() {
  std::vector<std::pair<std::string, WorldState>> s;
  s.emplace_back("stopped_vehicle", scenarios::stopped_vehicle());
  s.emplace_back("lead_brakes", scenarios::lead_brakes());
  for (double ts : {4.0, 6.0, 8.0}) s.emplace_back(fmt("hidden_spawn@%.0fs", ts), scenarios::hidden_spawn(ts));
  s.emplace_back("right_of_way_uncompliant", scenarios::right_of_way_uncompliant());
  return s;
}

// ---------------------------------------------------------------------------

CriterionResult limited_visibility_cruise(const Options&) {
  const auto t0 = Clock::now();
  CriterionResult r{1, "limited-visibility cruise", false, 0.0, 10.0, ""};
  const WorldState w = scenarios::free_drive_limited_visibility();
  const SimLog log = run(w, 1);

  const double t_end = log.ticks.back().t;
  const double window = 5.0;
  double sum = 0.0, lo = 1e9, hi = -1e9;
  int count = 0;
  for (const auto& tk : log.ticks) {
    if (tk.t < t_end - window) continue;
    sum += tk.ego_speed;
    lo = std::min(lo, tk.ego_speed);
    hi = std::max(hi, tk.ego_speed);
    ++count;
  }
  const double v_star = sum / count;

  double slack_lo = 1e9, slack_hi = -1e9;
  int plans = 0;
  for (const auto& p : log.plans) {
    if (p.t_plan < t_end - window || p.constraints.bounds.empty()) continue;
    ObjectiveContext ctx;
    ctx.a_dec = p.a_dec;
    ctx.sigma_x = p.sigma_x;
    ctx.sigma_v = p.sigma_v;
    ctx.sigma_mode = p.sigma_mode;
    ctx.constraints = p.constraints;
    const auto kin = kinematics(p.released);
    double binding = std::numeric_limits<double>::infinity();
    for (const auto& b : p.constraints.bounds) {
      binding = std::min(binding, -bound_violation(p.released.points(b.index), kin.v(b.index), b, ctx));
    }
    slack_lo = std::min(slack_lo, binding);
    slack_hi = std::max(slack_hi, binding);
    ++plans;
  }

  // Constant-speed solution of the stop-point bound at the last constrained
  // index: v T + v^2 / (2 a) = s_vis - s_min with T = (2 N_pin - 1) h.
  const double T = (2 * w.timing.n_pin - 1) * w.timing.h;
  const double a = w.ego.params.a_dec;
  const double room = w.sensor_range - w.ego.params.s_min;
  const double v_eq = a * (-T + std::sqrt(T * T + 2.0 * room / a));

  const double v_des = w.ego.params.v_des;
  r.pass = count > 0 && plans > 0 && v_star < v_des && hi - lo <= 0.1 && slack_lo >= 0.0 && slack_hi <= 0.1;
  r.detail = fmt("v*=%.3f m/s (v_des %.2f, spread %.3f, constant-speed bound %.3f), binding slack [%.4f, %.4f] m over %d plans",
                 v_star, v_des, hi - lo, v_eq, slack_lo, slack_hi, plans);
  return finish(r, t0);
}

CriterionResult sensor_range_monotonicity(const Options& opt) {
  const auto t0 = Clock::now();
  CriterionResult r{2, "sensor-range monotonicity", false, 0.0, 60.0, ""};
  const std::vector<double> ranges{30.0, 50.0, 70.0, 90.0, 110.0};
  std::vector<SimSummary> out(ranges.size());
  parallel_for(ranges.size(), [&](std::size_t i) { out[i] = run(scenarios::give_way(ranges[i]), 1, 0.0, {false, false, 1.0}).summary; },
               opt.threads);

  bool ok = true;
  std::ostringstream d;
  d << std::fixed << std::setprecision(3);
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (i) d << ", ";
    d << "R=" << ranges[i] << ": ";
    if (out[i].speed_at_merge) {
      d << *out[i].speed_at_merge;
    } else {
      d << "merge not reached";
      ok = false;
    }
    if (out[i].collisions) {
      d << " (" << out[i].collisions << " collisions)";
      ok = false;
    }
    if (i && out[i].speed_at_merge && out[i - 1].speed_at_merge &&
        *out[i].speed_at_merge < *out[i - 1].speed_at_merge - 0.05) {
      ok = false;
      d << " (decrease)";
    }
  }
  r.pass = ok;
  r.detail = "speed at MP " + d.str();
  return finish(r, t0);
}

namespace {

struct SuiteOutcome {
  int runs = 0;
  int collisions = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  std::string worst;
};

}  // namespace

CriterionResult adversarial_noise_free(const Options& opt) {
  const auto t0 = Clock::now();
  CriterionResult r{3, "adversarial suite, noise-free", false, 0.0, 30.0, ""};
  const auto suite = adversarial_suite();
  std::vector<SimLog> logs(suite.size());
  parallel_for(suite.size(), [&](std::size_t i) { logs[i] = run(suite[i].second, 1); }, opt.threads);

  bool ok = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& [name, w] = suite[i];
    const auto& s = logs[i].summary;
    if (s.collisions > 0 || !(s.min_gap > 0.0)) ok = false;
    d << (i ? "; " : "") << name << fmt(" gap %.2f", s.min_gap);
    if (s.collisions) d << fmt(" COLLISIONS %d", s.collisions);

    // Each scenario has to exercise the situation it is named after.
    if (name == "stopped_vehicle") {
      const double s_vis = ego_visible_range(w);
      const double gap0 = w.others.front().state.rear() - w.ego.state.arc_pos.mean;
      if (!(gap0 > s_vis)) {
        ok = false;
        d << " (vehicle visible at start)";
      }
    } else if (name == "lead_brakes") {
      const auto& lead = w.others.front();
      const double q = *lead.brake_at / w.timing.env_period;
      if (std::abs(q - std::round(q)) > 1e-9) {
        ok = false;
        d << " (braking not at a measurement)";
      }
    } else if (name.starts_with("hidden_spawn")) {
      const bool seen = std::any_of(logs[i].vehicles.begin(), logs[i].vehicles.end(),
                                    [](const VehicleRecord& v) { return v.id == "hidden" && v.measured; });
      if (!seen) {
        ok = false;
        d << " (hidden vehicle never detected)";
      }
    } else if (name == "right_of_way_uncompliant") {
      const bool triggered = std::any_of(logs[i].ticks.begin(), logs[i].ticks.end(),
                                         [](const TickRecord& t) { return t.decision == "uncompliant_stop"; });
      if (!triggered) {
        ok = false;
        d << " (compliance stop never triggered)";
      }
    }
  }
  r.pass = ok;
  r.detail = d.str();
  return finish(r, t0);
}

CriterionResult adversarial_noisy(const Options& opt) {
  const auto t0 = Clock::now();
  CriterionResult r{4, "adversarial suite, noisy (20 seeds)", false, 0.0, 180.0, ""};
  const auto suite = adversarial_suite();
  const int seeds = 20;
  struct Job {
    std::size_t scenario;
    int seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    for (int s = 0; s < seeds; ++s) jobs.push_back({i, s});
  }
  std::vector<SimSummary> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    WorldState w = suite[jobs[j].scenario].second;
    scenarios::apply_noise(w, 0.3, 0.2, 3.0);
    out[j] = run(w, static_cast<std::uint64_t>(1000 + jobs[j].seed), 0.0, {false, false, 1.0}).summary;
  }, opt.threads);

  std::vector<SuiteOutcome> per(suite.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& p = per[jobs[j].scenario];
    ++p.runs;
    p.collisions += out[j].collisions;
    if (out[j].min_gap < p.min_gap) {
      p.min_gap = out[j].min_gap;
      p.worst = fmt("seed %d", 1000 + jobs[j].seed);
    }
  }
  bool ok = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    if (per[i].collisions > 0 || !(per[i].min_gap > 0.0)) ok = false;
    d << (i ? "; " : "") << suite[i].first << fmt(" %d runs, %d collisions, min gap %.2f", per[i].runs,
                                                    per[i].collisions, per[i].min_gap);
  }
  r.pass = ok;
  r.detail = d.str();
  return finish(r, t0);
}

// ---------------------------------------------------------------------------

namespace {

using Real = long double;

Eigen::VectorXd random_trajectory(std::mt19937_64& rng, int n, double h, bool backward_step) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd z(n + 3);
  double x = 20.0 + 40.0 * u(rng);
  double v = 0.5 + 13.0 * u(rng);
  for (int q = 0; q < n + 3; ++q) {
    z(q) = x;
    v = std::clamp(v + (u(rng) - 0.5) * 1.5, 0.5, 16.0);
    x += v * h;
  }
  if (backward_step) {
    const int q = 5 + static_cast<int>(u(rng) * (n - 8));
    z(q + 1) = z(q) - 0.05 - 0.1 * u(rng);
    for (int p = q + 2; p < n + 3; ++p) z(p) = std::max(z(p), z(p - 1) + 0.2);
  }
  return z;
}

/// Bounds whose effective limit sits within a few centimetres of the stop
/// point, so every smoothing regime of the penalty is exercised.
std::vector<Bound> bounds_near(const Eigen::VectorXd& z, double h, int count, double a_dec, double extra,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.25);
  const auto kin = kinematics<double>(z, h);
  std::vector<Bound> b;
  for (int i = 0; i < count; ++i) {
    b.push_back({i, z(i + 3) + kin.v(i) * kin.v(i) / (2.0 * a_dec) + u(rng), extra});
  }
  return b;
}

}  // namespace

CriterionResult gradient_check(const Options& opt) {
  const auto t0 = Clock::now();
  CriterionResult r{5, "gradient vs central differences", false, 0.0, 5.0, ""};
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ModeKind modes[] = {ModeKind::FreeDrive, ModeKind::FollowDrive, ModeKind::IntersectionGiveWay,
                            ModeKind::IntersectionRightOfWay};
  const int n = 40;
  const double h = 0.25;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    ObjectiveContext ctx;
    ctx.mode = modes[trial % 4];
    ctx.sigma_mode = trial % 8 < 4 ? SigmaMode::FirstOrder : SigmaMode::PaperExact;
    ctx.sigma_x = 0.3 * u(rng);
    ctx.sigma_v = 0.2 * u(rng);
    ctx.v_des = 8.0 + 6.0 * u(rng);
    ctx.constraints.k = 3.0 * u(rng);
    const Eigen::VectorXd z = random_trajectory(rng, n, h, trial % 3 == 0);
    int count = 6;
    double extra = 0.0;
    switch (ctx.mode) {
      case ModeKind::FollowDrive: {
        extra = 0.04 * u(rng);
        Eigen::VectorXd lead(n);
        for (int i = 0; i < n; ++i) lead(i) = z(i + 3) + 8.0 + 10.0 * u(rng) + 0.5 * i;
        ctx.lead_rear = lead;
        break;
      }
      case ModeKind::IntersectionGiveWay:
        count = n;
        ctx.stop_target = z(3) + 10.0 + 40.0 * u(rng);
        ctx.stop_decel = 2.0;
        break;
      default:
        break;
    }
    ctx.constraints.mode = ctx.mode;
    ctx.constraints.bounds = bounds_near(z, h, count, ctx.a_dec, extra, rng);

    Objective obj(ctx, n, h);
    obj.gradient_scale = opt.gradient_scale;
    Eigen::VectorXd g(z.size());
    obj.value_and_gradient(z, g);

    VecX<Real> zl = z.cast<Real>();
    Eigen::VectorXd fd(z.size());
    for (Eigen::Index q = 0; q < z.size(); ++q) {
      const Real step = 1e-7L;
      VecX<Real> zp = zl, zm = zl;
      zp(q) += step;
      zm(q) -= step;
      fd(q) = static_cast<double>((obj.value<Real>(zp) - obj.value<Real>(zm)) / (zp(q) - zm(q)));
    }
    const double err = (g - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, fd.lpNorm<Eigen::Infinity>());
    worst = std::max(worst, err);
  }
  r.pass = worst <= 1e-5;
  r.detail = fmt("worst relative error %.2e over 20 trajectories (limit 1e-5)", worst);
  return finish(r, t0);
}

CriterionResult variance_propagation(const Options& opt) {
  const auto t0 = Clock::now();
  CriterionResult r{6, "variance propagation", false, 0.0, 10.0, ""};
  struct Setting {
    double x, sx, v, sv, a;
  };
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Setting> settings;
  for (int i = 0; i < 20; ++i) {
    settings.push_back({100.0 * u(gen), 0.5 * u(gen), 2.0 + 18.0 * u(gen), 0.05 + 0.45 * u(gen), 3.0 + 6.0 * u(gen)});
  }
  std::vector<double> rel(settings.size());
  parallel_for(settings.size(), [&](std::size_t i) {
    const auto& s = settings[i];
    std::mt19937_64 rng(1000 + i);
    std::normal_distribution<double> nx(s.x, s.sx), nv(s.v, s.sv);
    const int samples = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (int k = 1; k <= samples; ++k) {
      const double x = nx(rng), v = nv(rng);
      const double stop = x + v * v / (2.0 * s.a);
      const double delta = stop - mean;
      mean += delta / k;
      m2 += delta * (stop - mean);
    }
    const double mc = std::sqrt(m2 / (samples - 1));
    const auto model = stop_distribution({s.x, s.sx}, {s.v, s.sv}, s.a, SigmaMode::FirstOrder);
    rel[i] = std::abs(model.std - mc) / mc;
  }, opt.threads);
  const double worst_mc = *std::max_element(rel.begin(), rel.end());

  // Printed formulas: stop std sqrt(sx^2 + 4 sv^2); follow std
  // sqrt(sx_e^2 + sx_o^2 + 4 sv_e^2 + 4 sv_o^2).
  double worst_paper = 0.0;
  TimingModel tm;
  for (int i = 0; i < 20; ++i) {
    const double sxe = u(gen), sve = u(gen), sxo = u(gen), svo = u(gen), v = 20.0 * u(gen), a = 3.0 + 6.0 * u(gen);
    const auto sd = stop_distribution({0.0, sxe}, {v, sve}, a, SigmaMode::PaperExact);
    worst_paper = std::max(worst_paper, std::abs(sd.std - std::sqrt(sxe * sxe + 4.0 * sve * sve)));

    const auto cs = follow_drive_bounds({30.0, sxo}, {v, svo}, a, 2.0, tm, 1.0, SigmaMode::PaperExact);
    ObjectiveContext ctx;
    ctx.a_dec = a;
    ctx.sigma_x = sxe;
    ctx.sigma_v = sve;
    ctx.sigma_mode = SigmaMode::PaperExact;
    ctx.constraints = cs;
    Bound b = cs.bounds.front();
    b.upper = 0.0;
    const double sigma = bound_violation(0.0, 0.0, b, ctx);  // k = 1, x = v = 0
    const double expect = std::sqrt(sxe * sxe + sxo * sxo + 4.0 * sve * sve + 4.0 * svo * svo);
    worst_paper = std::max(worst_paper, std::abs(sigma - expect));
  }
  r.pass = worst_mc <= 0.03 && worst_paper <= 1e-12;
  r.detail = fmt("first-order vs Monte Carlo worst %.3f%% (limit 3%%); printed formulas worst |err| %.1e", 100.0 * worst_mc,
                 worst_paper);
  return finish(r, t0);
}

CriterionResult pinning(const Options&) {
  const auto t0 = Clock::now();
  CriterionResult r{7, "pinning and commitment", false, 0.0, 0.0, ""};
  WorldState w = scenarios::give_way();
  scenarios::apply_noise(w, 0.3, 0.2, 2.0);
  const SimLog log = run(w, 3);
  const int replans = 20;
  const int fixed = 3 + w.timing.n_pin;
  bool ok = static_cast<int>(log.plans.size()) > replans;
  int mismatches = 0;
  double jump = 0.0;
  for (int k = 1; ok && k <= replans; ++k) {
    const auto& prev = log.plans[k - 1].released;
    const auto& p = log.plans[k];
    const Eigen::VectorXd zw = p.warm.stacked(), zr = p.released.stacked(), zp = prev.stacked();
    if (std::memcmp(zw.data(), zr.data(), sizeof(double) * fixed) != 0) ++mismatches;
    const long m = std::lround((p.released.t0 - prev.t0) / prev.h);
    if (m < 0 || std::memcmp(zp.data() + m, zr.data(), sizeof(double) * fixed) != 0) ++mismatches;
    // Executed position switches from prev to p at the release time.
    for (int q = 0; q < fixed; ++q) {
      const double t = p.released.t0 + (q - 3) * p.released.h;
      jump = std::max(jump, std::abs(plan_position(prev, t) - plan_position(p.released, t)));
    }
  }
  jump = std::max(jump, log.summary.max_commit_jump);
  r.pass = ok && mismatches == 0 && jump < 1e-9;
  r.detail = fmt("%d replans checked, %d warm-start mismatches, max position jump %.1e m", ok ? replans : 0,
                 mismatches, jump);
  return finish(r, t0);
}

// ---------------------------------------------------------------------------

namespace {

bool strictly_inside(const Vec2& p, const OccluderPolygon& poly) {
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (cross2(v[(i + 1) % v.size()] - v[i], p - v[i]) <= 0.0) return false;
  }
  return true;
}

/// Marches along the sight line in small steps and reports whether any probe
/// falls strictly inside an occluder.
bool marched_visible(const Vec2& eye, const Vec2& target, const std::vector<OccluderPolygon>& occ, double range) {
  const Vec2 d = target - eye;
  const double len = d.norm();
  if (len > range) return false;
  const double probe = 0.02;
  for (const auto& poly : occ) {
    Vec2 c = Vec2::Zero();
    for (const auto& p : poly.vertices) c += p;
    c /= static_cast<double>(poly.vertices.size());
    double rad = 0.0;
    for (const auto& p : poly.vertices) rad = std::max(rad, (p - c).norm());
    if (len < 1e-12) continue;
    // Parameter interval of the segment inside the bounding circle.
    const Vec2 f = eye - c;
    const double A = d.squaredNorm(), B = 2.0 * f.dot(d), C = f.squaredNorm() - rad * rad;
    const double disc = B * B - 4.0 * A * C;
    if (disc <= 0.0) continue;
    const double s0 = std::max(0.0, (-B - std::sqrt(disc)) / (2.0 * A));
    const double s1 = std::min(1.0, (-B + std::sqrt(disc)) / (2.0 * A));
    if (s1 <= s0) continue;
    const int steps = static_cast<int>(std::ceil((s1 - s0) * len / probe));
    for (int k = 0; k <= steps; ++k) {
      const double s = s0 + (s1 - s0) * k / std::max(1, steps);
      if (s <= 0.0 || s >= 1.0) continue;
      if (strictly_inside(eye + s * d, poly)) return false;
    }
  }
  return true;
}

OccluderPolygon random_convex(std::mt19937_64& rng, const Vec2& center, double size) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 3 + static_cast<int>(u(rng) * 5);
  std::vector<double> ang(n);
  for (auto& a : ang) a = 2.0 * std::numbers::pi * u(rng);
  std::sort(ang.begin(), ang.end());
  const double rx = size * (0.5 + u(rng)), ry = size * (0.5 + u(rng)), rot = std::numbers::pi * u(rng);
  std::vector<Vec2> pts;
  for (double a : ang) {
    const Vec2 e(rx * std::cos(a), ry * std::sin(a));
    pts.push_back(center + Vec2(std::cos(rot) * e.x() - std::sin(rot) * e.y(), std::sin(rot) * e.x() + std::cos(rot) * e.y()));
  }
  return make_occluder(pts);
}

}  // namespace

CriterionResult visibility_oracle(const Options& opt) {
  const auto t0 = Clock::now();
  CriterionResult r{8, "visibility vs ray-cast oracle", false, 0.0, 10.0, ""};
  const int scenes = 100;
  std::vector<double> err(scenes, 0.0);
  std::vector<int> failed(scenes, 0);
  parallel_for(scenes, [&](std::size_t sidx) {
    std::mt19937_64 rng(5000 + sidx);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double heading = 2.0 * std::numbers::pi * u(rng);
    const Vec2 dir(std::cos(heading), std::sin(heading));
    const Vec2 start(0.0, 0.0);
    const double length = 60.0 + 60.0 * u(rng);
    std::vector<Vec2> line{start, start + 0.5 * length * dir};
    const double bend = (u(rng) - 0.5) * 1.2;
    const Vec2 dir2(std::cos(heading + bend), std::sin(heading + bend));
    line.push_back(line.back() + 0.5 * length * dir2);
    const RouteGeometry route = make_route("r", line, 10.0);

    const Vec2 normal(-dir.y(), dir.x());
    const bool cross_mode = sidx % 2 == 1;
    Vec2 eye = start + (u(rng) - 0.5) * 2.0 * normal;
    if (cross_mode) eye = start + 30.0 * dir + (15.0 + 20.0 * u(rng)) * (u(rng) < 0.5 ? 1.0 : -1.0) * normal;
    std::vector<OccluderPolygon> occ;
    const int n_occ = 1 + static_cast<int>(u(rng) * 3);
    while (static_cast<int>(occ.size()) < n_occ) {
      const double along = 10.0 + 50.0 * u(rng);
      const double side = (u(rng) - 0.5) * 24.0;
      auto poly = random_convex(rng, start + along * dir + side * normal, 1.5 + 4.0 * u(rng));
      if (strictly_inside(eye, poly)) continue;
      occ.push_back(std::move(poly));
    }
    const double range = 30.0 + 50.0 * u(rng);
    const double ds = 0.5;
    const double fine = ds / 5.0;

    double lib = 0.0, oracle = 0.0;
    if (!cross_mode) {
      lib = visible_range_on_route(eye, route, 0.0, occ, range, ds);
      oracle = route.length();
      for (double s = 0.0; s <= route.length(); s += fine) {
        if (!marched_visible(eye, point_at(route, s), occ, range)) {
          oracle = std::max(0.0, s - fine);
          break;
        }
      }
    } else {
      const double merge = route.length() * (0.5 + 0.4 * u(rng));
      lib = cross_route_visibility(eye, route, merge, occ, range, ds);
      oracle = merge;
      for (double s = 0.0; s <= merge; s += fine) {
        if (!marched_visible(eye, point_at(route, merge - s), occ, range)) {
          oracle = std::max(0.0, s - fine);
          break;
        }
      }
    }
    err[sidx] = std::abs(lib - oracle);
    failed[sidx] = err[sidx] > ds + fine;
  }, opt.threads);
  const double worst = *std::max_element(err.begin(), err.end());
  const int bad = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  r.pass = bad == 0;
  r.detail = fmt("%d/%d scenes within one ds (0.5 m), worst difference %.3f m", scenes - bad, scenes, worst);
  return finish(r, t0);
}

CriterionResult no_return_surface(const Options&) {
  const auto t0 = Clock::now();
  CriterionResult r{9, "surface of no return", false, 0.0, 5.0, ""};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x_mp = 150.0, s_min = 2.0, dt = 1e-3;
  int disagreements = 0, on_band = 0;
  for (int i = 0; i < 1000; ++i) {
    const double a = 3.0 + 6.0 * u(rng);
    const double limit = x_mp - s_min;
    const double x = limit - 80.0 * u(rng) + 2.0 * u(rng);
    double v;
    if (i % 4 == 0) {
      // Points close to the surface.
      const double vc = std::sqrt(2.0 * a * std::max(0.0, limit - x));
      v = vc * (1.0 + (u(rng) - 0.5) * 0.02);
    } else {
      v = 25.0 * u(rng);
    }
    double xs = x, vs = v;
    while (vs > 0.0) {
      const double vn = std::max(0.0, vs - a * dt);
      const double step = vn > 0.0 ? dt : vs / a;
      xs += 0.5 * (vs + vn) * step;
      vs = vn;
    }
    const double tol = 1e-9 + a * dt * dt;
    const auto cls = surface_of_no_return(x, v, x_mp, s_min, a);
    if (std::abs(xs - limit) <= tol) {
      ++on_band;
      continue;
    }
    const auto expect = xs < limit ? NoReturnClass::Below : NoReturnClass::Above;
    if (cls != expect) ++disagreements;
  }
  r.pass = disagreements == 0;
  r.detail = fmt("%d disagreements over 1000 points (%d inside the integration band)", disagreements, on_band);
  return finish(r, t0);
}

CriterionResult idm_equilibria(const Options&) {
  const auto t0 = Clock::now();
  CriterionResult r{10, "IDM equilibria", false, 0.0, 0.0, ""};
  DriverParams p;
  const double dt = 0.05;

  const auto free = simulate_idm(0.0, 0.0, nullptr, p, 150.0, dt);
  const double free_err = std::abs(free.back().v - p.v_des) / p.v_des;

  // Follow a lead held at 5 m/s; with v well below v_des the equilibrium gap
  // is within a percent of s_min + v T.
  const double v_lead = 5.0, rear0 = 40.0;
  LeadProvider lead = [&](double t) { return std::optional<LeadState>(LeadState{rear0 + v_lead * t, v_lead}); };
  const auto fol = simulate_idm(0.0, 10.0, lead, p, 300.0, dt);
  const double gap = rear0 + v_lead * fol.back().t - fol.back().arc;
  const double target = p.s_min + fol.back().v * p.headway;
  const double follow_err = std::abs(gap - target) / target;

  double spot = 0.0;
  for (double a_acc : {0.7, 1.0, 1.5, 2.5}) {
    for (double v_des : {8.33, 13.89, 20.0}) {
      DriverParams q = p;
      q.a_acc = a_acc;
      q.v_des = v_des;
      spot = std::max(spot, std::abs(idm_acceleration({v_des / 2.0, std::numeric_limits<double>::infinity(), 0.0, q}) -
                                     0.9375 * a_acc));
    }
  }
  r.pass = free_err <= 0.01 && follow_err <= 0.02 && spot <= 1e-12;
  r.detail = fmt("free-road error %.3f%%, follow gap %.3f vs %.3f m (%.2f%%), spot values |err| %.1e", 100.0 * free_err,
                 gap, target, 100.0 * follow_err, spot);
  return finish(r, t0);
}

// ---------------------------------------------------------------------------

std::string format(const CriterionResult& r) {
  std::string s = fmt("criterion %2d %s  %-38s %7.2f s", r.id, r.pass ? "PASS" : "FAIL", r.title.c_str(), r.seconds);
  if (r.budget > 0.0) s += fmt(" (limit %.0f s)", r.budget);
  return s + "  " + r.detail;
}

std::vector<CriterionResult> run_all(const Options& opt, std::ostream& out) {
  using Fn = CriterionResult (*)(const Options&);
  const Fn all[] = {limited_visibility_cruise, sensor_range_monotonicity, adversarial_noise_free, adversarial_noisy,
                    gradient_check,            variance_propagation,      pinning,                visibility_oracle,
                    no_return_surface,         idm_equilibria};
  std::vector<CriterionResult> results;
  for (Fn f : all) {
    CriterionResult res;
    try {
      res = f(opt);
    } catch (const std::exception& e) {
      res.id = static_cast<int>(results.size()) + 1;
      res.title = "error";
      res.detail = e.what();
    }
    out << format(res) << std::endl;
    results.push_back(std::move(res));
  }
  return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.pass; });
}

}  // namespace occplan::acceptance
