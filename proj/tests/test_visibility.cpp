#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "occplan/env_model.hpp"
#include "occplan/scenarios.hpp"
#include "occplan/scene.hpp"
#include "occplan/visibility.hpp"

#include <cmath>
#include <vector>

using namespace occplan;
using doctest::Approx;

namespace {

OccluderPolygon box(double x0, double y0, double x1, double y1) {
  return make_occluder({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

}  // namespace

TEST_CASE("segment against polygon interior") {
  const auto sq = box(4, -1, 6, 1);
  CHECK(segment_hits_interior({0, 0}, {10, 0}, sq));
  CHECK_FALSE(segment_hits_interior({0, 0}, {10, 5}, sq));
  CHECK_FALSE(segment_hits_interior({0, 1}, {10, 1}, sq));     // runs along the top edge
  CHECK(segment_hits_interior({0, -2}, {8, 2}, sq));
  CHECK_FALSE(segment_hits_interior({3, 0}, {5, 2}, sq));     // touches the corner (4, 1) only
  CHECK(segment_hits_interior({0, 0}, {5, 0}, sq));           // ends inside
  CHECK_FALSE(segment_hits_interior({0, 0}, {3.9, 0}, sq));   // stops short
}

TEST_CASE("point visibility") {
  const std::vector<OccluderPolygon> occ{box(4, -1, 6, 1)};
  CHECK_FALSE(is_point_visible({0, 0}, {10, 0}, occ, 100.0));
  CHECK(is_point_visible({0, 0}, {10, 5}, occ, 100.0));
  CHECK(is_point_visible({0, 0}, {50, 0}, {}, 50.0));  // range is inclusive
  CHECK_FALSE(is_point_visible({0, 0}, {50.01, 0}, {}, 50.0));
}

TEST_CASE("visible range along the ego route") {
  const auto r = make_route("r", {{0, 0}, {300, 0}}, 13.89);
  const double ds = 0.5;
  CHECK(std::abs(visible_range_on_route({0, 0}, r, 0.0, {}, 80.0, ds) - 80.0) <= ds);

  // Eye 10 m off the road; a small box hides only a middle stretch of road.
  // Corner (xc, yc) of the box lies on the sight line to arc 10 xc / (10 - yc),
  // so arcs (38.2, 53.3) are hidden and the road beyond is in view again.
  const std::vector<OccluderPolygon> block{box(21, 4.5, 24, 5.5)};
  const Vec2 eye(0, 10);
  CHECK(is_point_visible(eye, {60, 0}, block, 200.0));
  CHECK_FALSE(is_point_visible(eye, {45, 0}, block, 200.0));
  const double first_hidden = 10.0 * 21.0 / (10.0 - 4.5);
  CHECK(std::abs(visible_range_on_route(eye, r, 0.0, block, 200.0, ds) - first_hidden) <= ds);

  // Route ending inside the sensor range.
  const auto short_route = make_route("s", {{0, 0}, {30, 0}}, 13.89);
  CHECK(visible_range_on_route({0, 0}, short_route, 0.0, {}, 80.0, ds) == Approx(30.0));
  CHECK(visible_range_on_route({0, 0}, r, 0.0, {}, 0.0, ds) == 0.0);
}

TEST_CASE("visible range with an occluder beside a curving road") {
  // Road turns left around a building corner: straight to (50, 0), then north.
  const auto r = make_route("r", {{0, 0}, {50, 0}, {50, 100}}, 13.89);
  const std::vector<OccluderPolygon> occ{box(20, 5, 45, 40)};
  const Vec2 eye(0, 0);
  // The sight line through the corner (45, 5) meets x = 50 at y = 5 * 50 / 45.
  const double y_hit = 5.0 * 50.0 / 45.0;
  const double expect = 50.0 + y_hit;
  const double got = visible_range_on_route(eye, r, 0.0, occ, 200.0, 0.5);
  CHECK(std::abs(got - expect) <= 0.5);
}

TEST_CASE("cross-route visibility") {
  SUBCASE("open intersection") {
    const auto side = make_route("side", {{150, -100}, {150, 100}}, 8.33);
    // Eye at (140, 0), merge at arc 100; the upstream leg is 100 m long.
    CHECK(std::abs(cross_route_visibility({140, 0}, side, 100.0, {}, 200.0, 0.5) - 100.0) <= 0.5);
    CHECK(cross_route_visibility({140, 0}, side, 100.0, {}, 0.0, 0.5) == 0.0);
  }
  SUBCASE("corner building") {
    // Building corner at (130, -20); the sight line from the eye through the
    // corner meets x = 150 at -20 (150 - xe) / (130 - xe).
    const auto side = make_route("side", {{150, -150}, {150, 150}}, 8.33);
    const std::vector<OccluderPolygon> occ{box(60, -80, 130, -20)};
    for (double xe : {100.0, 110.0, 120.0, 126.0}) {
      CAPTURE(xe);
      const double expect = 20.0 * (150.0 - xe) / (130.0 - xe);
      const double got = cross_route_visibility({xe, 0}, side, 150.0, occ, 500.0, 0.5);
      CHECK(std::abs(got - expect) <= 0.5);
    }
    // The building hides the upstream leg beyond 25 m from xe = 50.
    const double xe25 = 130.0 - 20.0 * 20.0 / 5.0;  // solves 20 (150 - xe) / (130 - xe) = 25
    CHECK(std::abs(cross_route_visibility({xe25, 0}, side, 150.0, occ, 500.0, 0.5) - 25.0) <= 0.5);
  }
}

TEST_CASE("compute_visibility on the give-way scenario") {
  auto w = scenarios::give_way(80.0);
  w.ego.state.arc_pos.mean = 120.0;
  const auto preview = sample_preview_points(w.ego_route(), 120.0, 80.0, 0.5);
  const auto merges = detect_intersections(w, preview, w.scene.lateral_tol);
  REQUIRE(merges.size() == 1);
  const auto vis = compute_visibility(w, merges);
  CHECK(vis.s_vis_ego == Approx(80.0).epsilon(0.01));
  REQUIRE(vis.s_vis_cross.count("side") == 1);
  const double s = vis.s_vis_cross.at("side");
  CHECK(s > 0.0);
  CHECK(s <= 80.0);
  CHECK(vis.line_of_sight_arcs.at("side") == Approx(merges[0].other_arc - s));
  const double xe = 120.0;
  const double corner = 20.0 * (150.0 - xe) / (130.0 - xe);
  CHECK(s <= corner + 0.5);
}
