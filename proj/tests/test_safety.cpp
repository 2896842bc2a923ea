#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "occplan/env_model.hpp"
#include "occplan/planner.hpp"
#include "occplan/safety.hpp"
#include "occplan/scenarios.hpp"
#include "occplan/scene.hpp"
#include "occplan/visibility.hpp"

#include <cmath>
#include <random>

using namespace occplan;
using doctest::Approx;

namespace {

double effective(const ConstraintSet& cs, const Bound& b) { return b.upper - cs.k * std::sqrt(b.extra_variance); }

// sigma seen by the planner for bound b at speed v: violation at x = 0, upper = 0, k = 1.
double planner_sigma(const Bound& b, double v, double sx, double sv, double a, SigmaMode mode) {
  ObjectiveContext ctx;
  ctx.a_dec = a;
  ctx.sigma_x = sx;
  ctx.sigma_v = sv;
  ctx.sigma_mode = mode;
  ctx.constraints.k = 1.0;
  Bound z = b;
  z.upper = 0.0;
  return bound_violation(0.0, v, z, ctx) - v * v / (2.0 * a);
}

struct Pipeline {
  WorldState w;
  std::vector<MergePoint> merges;
  VisibilityResult vis;
  PlanningMode mode;
  ConstraintContext ctx;
  AssemblyReport rep;
  ConstraintSet cs;

  explicit Pipeline(WorldState world, bool hold_stop = false) : w(std::move(world)) {
    const auto pv = sample_preview_points(w.ego_route(), w.ego.state.arc_pos.mean, w.sensor_range, 0.5);
    merges = detect_intersections(w, pv, w.scene.lateral_tol);
    vis = compute_visibility(w, merges);
    mode = select_mode(w, vis, merges);
    ctx.world = &w;
    ctx.vis = &vis;
    ctx.mode = &mode;
    ctx.n_points = w.planner.n_points;
    ctx.x0 = ctx.x_pinned = w.ego.state.arc_pos.mean;
    ctx.v0 = ctx.v_pinned = w.ego.state.speed.mean;
    ctx.hold_stop = hold_stop;
    cs = assemble_constraints(ctx, &rep);
  }
};

}  // namespace

TEST_CASE("braking distance") {
  CHECK(braking_distance(0.0, 8.0) == 0.0);
  CHECK(braking_distance(10.0, 5.0) == Approx(10.0));
  CHECK(braking_distance(13.89, 8.0) == Approx(12.06).epsilon(0.001));
}

TEST_CASE("stop distribution") {
  auto s = stop_distribution({5.0, 0.0}, {10.0, 0.0}, 5.0, SigmaMode::FirstOrder);
  CHECK(s.mean == Approx(15.0));
  CHECK(s.std == 0.0);
  s = stop_distribution({0.0, 3.0}, {10.0, 2.0}, 8.0, SigmaMode::PaperExact);
  CHECK(s.std == Approx(5.0).epsilon(1e-14));
  s = stop_distribution({0.0, 0.0}, {10.0, 0.5}, 5.0, SigmaMode::FirstOrder);
  CHECK(s.std == Approx(1.0).epsilon(1e-14));
  CHECK(s.mean >= 0.0);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> v(10.0, 0.5);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = v(rng);
    const double stop = d * d / 10.0;
    sum += stop;
    sq += stop * stop;
  }
  const double m = sum / n;
  CHECK(std::sqrt(sq / n - m * m) == Approx(1.0).epsilon(0.03));
}

TEST_CASE("free-drive bounds") {
  TimingModel tm;
  auto cs = free_drive_bounds(0.0, 50.0, 2.0, tm, 2.0);
  REQUIRE(cs.bounds.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(cs.bounds[i].index == i);
    CHECK(cs.bounds[i].upper == Approx(48.0));
    CHECK(cs.bounds[i].extra_variance == 0.0);
  }
  CHECK(cs.active_range == ActiveRange::First2NPin);
  CHECK(free_drive_bounds(7.0, 2.0, 2.0, tm, 2.0).bounds[0].upper == Approx(7.0));
  CHECK(free_drive_bounds(0.0, 50.0, 2.0, tm, 0.0).k == 0.0);
}

TEST_CASE("follow bounds") {
  TimingModel tm;
  auto cs = follow_drive_bounds({30.0, 0.0}, {0.0, 0.0}, 8.0, 2.0, tm, 0.0, SigmaMode::FirstOrder);
  REQUIRE(cs.bounds.size() == 6);
  CHECK(cs.bounds[5].upper == Approx(28.0));
  cs = follow_drive_bounds({30.0, 0.0}, {10.0, 0.0}, 5.0, 2.0, tm, 0.0, SigmaMode::FirstOrder);
  CHECK(cs.bounds[0].upper == Approx(30.0 - 2.0 + 10.0));

  cs = follow_drive_bounds({30.0, 3.0}, {10.0, 2.0}, 5.0, 2.0, tm, 1.0, SigmaMode::PaperExact);
  const double sigma = planner_sigma(cs.bounds[0], 10.0, 3.0, 2.0, 5.0, SigmaMode::PaperExact);
  CHECK(sigma == Approx(std::sqrt(50.0)).epsilon(1e-14));
}

TEST_CASE("intersection stop bounds and composition") {
  TimingModel tm;
  auto full = intersection_stop_bounds(100.0, 2.0, tm, 2.0, ActiveRange::FullHorizon, 40);
  CHECK(full.bounds.size() == 40);
  CHECK(full.bounds.back().upper == Approx(98.0));
  auto pin = intersection_stop_bounds(100.0, 2.0, tm, 2.0, ActiveRange::First2NPin, 40);
  CHECK(pin.bounds.size() == 6);
  CHECK(pin.bounds.back().index == 5);

  // Visibility at 40 m against a lead whose bound sits at 30 m.
  const auto vis = free_drive_bounds(0.0, 42.0, 2.0, tm, 2.0);
  auto lead = follow_drive_bounds({32.0, 0.1}, {0.0, 0.1}, 8.0, 2.0, tm, 2.0, SigmaMode::FirstOrder);
  const auto both = compose(vis, lead);
  REQUIRE(both.bounds.size() == 6);
  for (const auto& b : both.bounds) {
    CHECK(effective(both, b) == Approx(std::min(40.0, 30.0 - 2.0 * std::sqrt(0.01 + 0.0))).epsilon(1e-3));
    CHECK(effective(both, b) <= 30.0);
  }
  const auto longer = compose(vis, full);
  CHECK(longer.bounds.size() == 40);
  CHECK(longer.active_range == ActiveRange::FullHorizon);
  for (const auto& b : longer.bounds) CHECK(b.upper <= 98.0);
  lead.k = 3.0;
  CHECK_THROWS(compose(vis, lead));
  CHECK(both.tightest(0).has_value());
  CHECK_FALSE(both.tightest(6).has_value());
}

TEST_CASE("surface of no return") {
  const double x_mp = 100.0, s_min = 2.0, a = 8.0;
  CHECK(surface_of_no_return(50.0, 0.0, x_mp, s_min, a) == NoReturnClass::Below);
  const double vc = std::sqrt(2.0 * a * (x_mp - s_min - 50.0));
  CHECK(surface_of_no_return(50.0, vc, x_mp, s_min, a) == NoReturnClass::On);
  CHECK(surface_of_no_return(50.0, vc * 1.001, x_mp, s_min, a) == NoReturnClass::Above);
  CHECK(surface_of_no_return(50.0, vc * 0.999, x_mp, s_min, a) == NoReturnClass::Below);
  CHECK(surface_of_no_return(99.0, 0.0, x_mp, s_min, a) == NoReturnClass::Above);  // past the stop line
  CHECK(surface_of_no_return(98.0, 0.0, x_mp, s_min, a) == NoReturnClass::On);
}

TEST_CASE("confidence factor") {
  CHECK(std::abs(k_from_confidence(0.5)) < 1e-15);
  CHECK(k_from_confidence(0.975) == Approx(1.959963984540054).epsilon(1e-13));
  CHECK(k_from_confidence(0.99865010196837) == Approx(3.0).epsilon(1e-10));
  CHECK(k_from_confidence(0.001) == Approx(-k_from_confidence(0.999)).epsilon(1e-12));
  CHECK_THROWS(k_from_confidence(0.0));
  CHECK_THROWS(k_from_confidence(1.0));
}

TEST_CASE("constraint ladder") {
  SUBCASE("give-way, hypothetical fails the gap check") {
    auto w = scenarios::give_way(20.0);
    w.ego.state.arc_pos.mean = 140.0;
    w.ego.state.speed.mean = 0.0;
    Pipeline p(w);
    REQUIRE(p.mode.kind == ModeKind::IntersectionGiveWay);
    CHECK(p.rep.gap_checked);
    CHECK_FALSE(p.rep.gap_accepted);
    CHECK(p.rep.decision == "give_way_stop");
    CHECK(p.cs.active_range == ActiveRange::FullHorizon);
    REQUIRE(p.cs.bounds.size() == static_cast<std::size_t>(w.planner.n_points));
    const double line = p.mode.merge->ego_arc - w.ego.params.s_min;
    REQUIRE(p.rep.stop_line.has_value());
    CHECK(*p.rep.stop_line == Approx(line));
    for (const auto& b : p.cs.bounds) CHECK(effective(p.cs, b) <= line + 1e-12);
    CHECK(p.cs.bounds.back().upper == Approx(line));
  }
  SUBCASE("give-way, long view accepts") {
    auto w = scenarios::give_way(110.0);
    w.occluders.clear();
    w.ego.state.arc_pos.mean = 100.0;
    w.ego.state.speed.mean = 13.89;
    Pipeline p(w);
    REQUIRE(p.mode.kind == ModeKind::IntersectionGiveWay);
    CHECK(p.rep.gap_accepted);
    CHECK(p.cs.bounds.size() == 6);
  }
  SUBCASE("stop sign, then committed past the surface") {
    auto w = scenarios::stop_sign();
    w.ego.state.arc_pos.mean = 130.0;
    w.ego.state.speed.mean = 5.0;
    Pipeline first(w, true);
    REQUIRE(first.mode.mandatory_stop);
    CHECK(first.rep.decision == "stop_sign");
    CHECK(first.cs.active_range == ActiveRange::FullHorizon);
    const double line = first.mode.merge->ego_arc - w.ego.params.s_min;

    // 8 m/s needs 4 m of braking; start 3 m short of the line.
    w.ego.state.arc_pos.mean = line - 3.0;
    w.ego.state.speed.mean = 8.0;
    Pipeline late(w, true);
    CHECK(late.rep.committed);
    CHECK(late.rep.decision == "stop_sign+committed");
    CHECK_FALSE(late.rep.stop_line.has_value());
    CHECK(late.cs.bounds.size() == 6);
  }
  SUBCASE("right of way, clear view") {
    auto w = scenarios::right_of_way_uncompliant();
    w.others.clear();
    w.ego.state.arc_pos.mean = 100.0;
    Pipeline p(w);
    REQUIRE(p.mode.kind == ModeKind::IntersectionRightOfWay);
    CHECK(p.rep.visibility_ok);
    CHECK(p.rep.decision == "right_of_way");
    REQUIRE(p.cs.bounds.size() == 6);
    CHECK(p.cs.bounds[0].upper == Approx(100.0 + p.vis.s_vis_ego - w.ego.params.s_min));
  }
  SUBCASE("right of way, uncompliant crossing vehicle") {
    auto w = scenarios::right_of_way_uncompliant();
    w.ego.state.arc_pos.mean = 130.0;
    w.ego.state.speed.mean = 10.0;
    w.others[0].state.arc_pos.mean = 140.0;  // 10 m before the merge at 12 m/s
    Pipeline p(w);
    REQUIRE(p.mode.kind == ModeKind::IntersectionRightOfWay);
    CHECK_FALSE(p.rep.deceleration_ok);
    CHECK(p.rep.decision == "uncompliant_stop");
    CHECK(p.cs.active_range == ActiveRange::First2NPin);
    CHECK(p.cs.bounds.size() == 6);
  }
  SUBCASE("right of way, blocked view") {
    auto w = scenarios::right_of_way_uncompliant();
    w.others.clear();
    w.sensor_range = 12.0;
    w.ego.state.arc_pos.mean = 140.0;
    Pipeline p(w);
    REQUIRE(p.mode.kind == ModeKind::IntersectionRightOfWay);
    CHECK_FALSE(p.rep.visibility_ok);
    CHECK(p.rep.decision == "visibility_stop");
  }
  SUBCASE("follow") {
    auto w = scenarios::lead_brakes();
    Pipeline p(w);
    REQUIRE(p.mode.kind == ModeKind::FollowDrive);
    CHECK(p.rep.decision == "follow");
    const auto& lead = w.others[0];
    const double expect = lead.state.rear() - 2.0 + braking_distance(lead.state.speed.mean, lead.params.a_dec);
    CHECK(p.cs.bounds[0].upper == Approx(std::min(expect, w.ego.state.arc_pos.mean + p.vis.s_vis_ego - 2.0)));
  }
}
