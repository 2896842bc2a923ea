#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "occplan/env_model.hpp"
#include "occplan/scenario_io.hpp"
#include "occplan/scenarios.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace occplan;
using doctest::Approx;

namespace {

WorldState minimal_world() {
  WorldState w;
  w.routes.push_back(make_route("main", {{0.0, 0.0}, {500.0, 0.0}}, 13.89));
  w.ego.state.route_id = "main";
  w.ego.state.arc_pos = {0.0, 0.0};
  w.ego.state.speed = {10.0, 0.0};
  return w;
}

OtherVehicle car(const std::string& id, const std::string& route, double arc, double speed) {
  OtherVehicle o;
  o.id = id;
  o.state.route_id = route;
  o.state.arc_pos = {arc, 0.0};
  o.state.speed = {speed, 0.0};
  return o;
}

}  // namespace

TEST_CASE("route arc length and interpolation") {
  const auto r = make_route("L", {{0, 0}, {3, 0}, {3, 4}}, 10.0);
  REQUIRE(r.cumulative_arclength.size() == 3);
  CHECK(r.cumulative_arclength[1] == Approx(3.0));
  CHECK(r.length() == Approx(7.0));
  CHECK(point_at(r, 5.0).isApprox(Vec2(3, 2)));
  CHECK(point_at(r, -1.0).isApprox(Vec2(0, 0)));
  CHECK(point_at(r, 99.0).isApprox(Vec2(3, 4)));
  CHECK(tangent_at(r, 1.0).isApprox(Vec2(1, 0)));
  CHECK(tangent_at(r, 6.0).isApprox(Vec2(0, 1)));
  CHECK_THROWS_AS(make_route("bad", {{0, 0}}, 10.0), ScenarioError);
  CHECK_THROWS_AS(make_route("dup", {{0, 0}, {0, 0}, {1, 0}}, 10.0), ScenarioError);
}

TEST_CASE("projection onto a route") {
  const auto r = make_route("x", {{0, 0}, {100, 0}}, 10.0);
  auto p = project_to_route({0, 0}, r);
  CHECK(p.arc == Approx(0.0));
  CHECK(p.lateral_offset == Approx(0.0));
  p = project_to_route({10, 2}, r);
  CHECK(p.arc == Approx(10.0));
  CHECK(p.lateral_offset == Approx(2.0));
  p = project_to_route({10, -3}, r);
  CHECK(p.lateral_offset == Approx(-3.0));
  CHECK(project_to_route({150, 0}, r).arc == Approx(100.0));
}

TEST_CASE("speed limit tags and tag overlap") {
  auto r = make_route("x", {{0, 0}, {100, 0}}, 13.89, {{20.0, 40.0, RuleKind::SpeedLimit, 8.0}});
  CHECK(speed_limit_at(r, 10.0) == Approx(13.89));
  CHECK(speed_limit_at(r, 30.0) == Approx(8.0));
  CHECK(has_tag(r, RuleKind::SpeedLimit, 40.0, 50.0));
  CHECK_FALSE(has_tag(r, RuleKind::SpeedLimit, 41.0, 50.0));
  CHECK_FALSE(has_tag(r, RuleKind::StopSign, 0.0, 100.0));
}

TEST_CASE("occluder normalization") {
  const auto cw = make_occluder({{0, 0}, {0, 1}, {1, 0}});
  double area = 0.0;
  for (std::size_t i = 0; i < 3; ++i) area += cross2(cw.vertices[i], cw.vertices[(i + 1) % 3]);
  CHECK(area > 0.0);
  CHECK_THROWS_WITH_AS(make_occluder({{0, 0}, {1, 1}, {2, 2}}), doctest::Contains("degenerate occluder"), ScenarioError);
  CHECK_THROWS_WITH_AS(make_occluder({{0, 0}, {4, 0}, {1, 1}, {0, 4}}), doctest::Contains("non-convex"), ScenarioError);
  CHECK_THROWS_AS(make_occluder({{0, 0}, {1, 0}}), ScenarioError);
}

TEST_CASE("route crossings") {
  const auto a = make_route("a", {{0, 0}, {100, 0}}, 10.0);
  const auto b = make_route("b", {{50, -50}, {50, 50}}, 10.0);
  const auto xs = find_crossings(a, b);
  REQUIRE(xs.size() == 1);
  CHECK(xs[0].arc_a == Approx(50.0));
  CHECK(xs[0].arc_b == Approx(50.0));
  const auto c = make_route("c", {{0, 10}, {100, 10}}, 10.0);
  CHECK(find_crossings(a, c).empty());
}

TEST_CASE("validation names the offending entity") {
  auto w = minimal_world();
  CHECK_NOTHROW(validate(w));

  auto dangling = w;
  dangling.others.push_back(car("ghost", "nowhere", 10.0, 5.0));
  CHECK_THROWS_WITH_AS(validate(dangling), doctest::Contains("nowhere"), ScenarioError);

  auto slow_plan = w;
  slow_plan.timing.plan_period = 1.0;
  CHECK_THROWS_WITH_AS(validate(slow_plan), doctest::Contains("dead time"), ScenarioError);

  auto bad_dt = w;
  bad_dt.timing.dt_sim = 0.03;
  CHECK_THROWS_AS(validate(bad_dt), ScenarioError);

  auto far = w;
  far.ego.state.arc_pos.mean = 600.0;
  CHECK_THROWS_WITH_AS(validate(far), doctest::Contains("ego"), ScenarioError);

  auto rude = w;
  rude.ego.params.politeness = 1.0;
  CHECK_THROWS_AS(validate(rude), ScenarioError);

  auto soft = w;
  soft.ego.params.a_cft = 9.0;
  CHECK_THROWS_AS(validate(soft), ScenarioError);

  auto twins = w;
  twins.others.push_back(car("a", "main", 50.0, 5.0));
  twins.others.push_back(car("a", "main", 80.0, 5.0));
  CHECK_THROWS_AS(validate(twins), ScenarioError);
}

TEST_CASE("measurement: visibility filter, noise and determinism") {
  auto w = minimal_world();
  w.sensor_range = 100.0;
  w.others.push_back(car("near", "main", 50.0, 5.0));
  w.others.push_back(car("far", "main", 200.0, 5.0));
  w.others.push_back(car("hidden", "main", 80.0, 5.0));
  // Wall across the road between the near and the hidden vehicle; it blocks
  // the line of sight to points beyond arc 60.
  w.occluders.push_back(make_occluder({{60, -5}, {62, -5}, {62, 5}, {60, 5}}));

  SUBCASE("noise-free copy") {
    const auto m = measure(w, 1);
    REQUIRE(m.others.size() == 1);
    CHECK(m.others[0].id == "near");
    CHECK(m.others[0].state.arc_pos.mean == 50.0);
    CHECK(m.others[0].state.speed.mean == 5.0);
    CHECK(m.others[0].state.arc_pos.std == 0.0);
  }

  SUBCASE("noisy measurements") {
    w.sigma_meas_pos = 0.3;
    w.sigma_meas_speed = 0.2;
    const auto a = measure(w, 7), b = measure(w, 7), c = measure(w, 8);
    CHECK(a.others[0].state.arc_pos.mean == b.others[0].state.arc_pos.mean);
    CHECK(a.others[0].state.arc_pos.mean != c.others[0].state.arc_pos.mean);
    CHECK(a.others[0].state.arc_pos.std == 0.3);
    CHECK(a.ego.state.arc_pos.mean == w.ego.state.arc_pos.mean);

    // Sample moments over many seeds.
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int s = 0; s < n; ++s) {
      const double e = measure(w, 1000 + s).others[0].state.arc_pos.mean - 50.0;
      sum += e;
      sq += e * e;
    }
    const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) < 4.0 * 0.3 / std::sqrt(n));
    CHECK(sd == Approx(0.3).epsilon(0.03));
  }
}

TEST_CASE("scenario files round-trip byte-identically") {
  for (const auto& [name, w] : scenarios::catalog()) {
    CAPTURE(name);
    const std::string a = serialize_scenario(w);
    const auto again = parse_scenario(nlohmann::json::parse(a));
    CHECK(serialize_scenario(again) == a);
  }
}

TEST_CASE("scenario parsing and overrides") {
  auto doc = scenario_to_json(minimal_world());
  SUBCASE("minimal document") {
    const auto w = parse_scenario(doc);
    CHECK(w.routes.size() == 1);
    CHECK(w.routes[0].length() == Approx(500.0));
    CHECK(w.sensor_range == doc["sensor_range"].get<double>());
  }
  SUBCASE("clockwise triangle is accepted") {
    doc["occluders"] = nlohmann::json::array({{{"vertices", {{10, 10}, {10, 12}, {12, 10}}}}});
    CHECK_NOTHROW(parse_scenario(doc));
  }
  SUBCASE("collinear occluder") {
    doc["occluders"] = nlohmann::json::array({{{"vertices", {{10, 10}, {11, 11}, {12, 12}}}}});
    CHECK_THROWS_WITH_AS(parse_scenario(doc), doctest::Contains("degenerate occluder"), ScenarioError);
  }
  SUBCASE("missing key") {
    doc.erase("timing");
    CHECK_THROWS_WITH_AS(parse_scenario(doc), doctest::Contains("timing"), ScenarioError);
  }
  SUBCASE("overrides") {
    apply_overrides(doc, {"safety.k=0", "ego.speed=7.5", "routes.0.speed_limit=8"});
    const auto w = parse_scenario(doc);
    CHECK(w.safety.k == 0.0);
    CHECK(w.ego.state.speed.mean == 7.5);
    CHECK(w.routes[0].speed_limit == 8.0);
    CHECK_THROWS_WITH_AS(apply_overrides(doc, {"safety.kk=1"}), doctest::Contains("safety.kk"), ScenarioError);
    CHECK_THROWS_AS(apply_overrides(doc, {"routes.3.id=x"}), ScenarioError);
    CHECK_THROWS_AS(apply_overrides(doc, {"nokey"}), ScenarioError);
  }
  SUBCASE("file round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "occplan_env_test.json").string();
    save_scenario(scenarios::give_way(), path);
    const auto w = load_scenario(path, {"sensor_range=55"});
    CHECK(w.sensor_range == 55.0);
    CHECK(w.occluders.size() == 1);
    std::filesystem::remove(path);
  }
}
