#include "deconflict/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "doctest.h"

using namespace deconflict;

namespace {

std::string replace_line(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string remove_line(std::string text, const std::string& line) { return replace_line(text, line + "\n", ""); }

}  // namespace

TEST_CASE("reference scenario document") {
  const auto& s = reference_scenario();
  CHECK(s.waypoints.size() == 9);
  CHECK(s.routes.size() == 4);
  CHECK(s.d_nmac == 100);
  CHECK(s.d_lowc == 500);
  CHECK(s.dt == 3);
  CHECK(s.mission_horizon == 1080);
  CHECK(s.goal_tolerance == 50);
  CHECK(s.total_agents() == 20);
  CHECK(s.reward.eta_m == 50);

  const auto& x = s.config("X");
  CHECK(x.v_max == 44.88);
  CHECK(x.accel_mag == 1.71);
  CHECK(x.sensing_range == 1000);
  const auto& y = s.config("Y");
  CHECK(y.v_max == 30.12);
  CHECK(y.accel_mag == 1.02);
  CHECK(y.sensing_range == 750);
  CHECK(x.spawn_speed == 20);
  CHECK(y.spawn_speed == 20);
}

TEST_CASE("shipped scenario file matches the built-in text") {
  std::ifstream f(DECONFLICT_SOURCE_DIR "/scenarios/reference.scn", std::ios::binary);
  REQUIRE(f);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == reference_scenario_text());
  const auto loaded = load_scenario_file(DECONFLICT_SOURCE_DIR "/scenarios/reference.scn");
  CHECK(loaded.routes.size() == 4);
}

TEST_CASE("route invariants") {
  const auto& s = reference_scenario();
  for (const auto& r : s.routes) {
    CAPTURE(r.id);
    CHECK(std::abs(r.length - 10330.0) <= 1.0);
    double sum = 0;
    for (size_t i = 1; i < r.points.size(); ++i) sum += distance(r.points[i - 1], r.points[i]);
    CHECK(sum == doctest::Approx(r.length));
    REQUIRE(r.kinds.size() == 4);
    CHECK(r.kinds[1] == WaypointKind::kMerge);
    CHECK(r.kinds[2] == WaypointKind::kIntersection);
    CHECK(r.kinds[3] == WaypointKind::kDestination);
  }
  CHECK(s.routes[0].owner_fleet == FleetId::kA);
  CHECK(s.routes[1].owner_fleet == FleetId::kB);
  CHECK(s.routes[2].owner_fleet == FleetId::kA);
  CHECK(s.routes[3].owner_fleet == FleetId::kB);
  CHECK(s.route_of_agent(0) == 0);
  CHECK(s.route_of_agent(19) == 3);
}

TEST_CASE("validation rejects swapped thresholds") {
  std::string text(reference_scenario_text());
  text = replace_line(text, "d_nmac = 100", "d_nmac = 500");
  text = replace_line(text, "d_lowc = 500", "d_lowc = 100");
  try {
    load_scenario(text);
    FAIL("expected a validation error");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("d_nmac < d_lowc violated") != std::string::npos);
  }
}

TEST_CASE("omitted optional parameters take defaults") {
  std::string text(reference_scenario_text());
  text = remove_line(text, "dt = 3");
  text = remove_line(text, "mission_horizon = 1080");
  const auto s = load_scenario(text);
  CHECK(s.dt == 3);
  CHECK(s.mission_horizon == 1080);
}

TEST_CASE("parse errors carry line numbers") {
  std::string text(reference_scenario_text());
  text = replace_line(text, "dt = 3", "dt = fast");
  try {
    load_scenario(text);
    FAIL("expected a parse error");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("parse error at line") != std::string::npos);
  }
  CHECK_THROWS_AS(load_scenario(replace_line(std::string(reference_scenario_text()), "dt = 3", "bogus = 1")),
                  ScenarioError);
  CHECK_THROWS_AS(load_scenario("[waypoints]\nWP1 = 0, 0, origin\n"), ScenarioError);
}

TEST_CASE("unequal route lengths are rejected") {
  std::string text(reference_scenario_text());
  text = replace_line(text, "WP4 = 3330, 0, destination", "WP4 = 3400, 0, destination");
  CHECK_THROWS_AS(load_scenario(text), ScenarioError);
}

TEST_CASE("position_on_route on route I") {
  const auto& r = reference_scenario().routes[0];
  const auto start = position_on_route(r, 0);
  CHECK(start.position == Vec2{-6400, 1800});
  CHECK(start.bearing == doctest::Approx(std::atan2(-1800.0, 2400.0) + 2 * std::numbers::pi));

  const auto end = position_on_route(r, r.length);
  CHECK(end.position.x == doctest::Approx(3330));
  CHECK(end.position.y == doctest::Approx(0));

  // Halfway along WP1 -> WP3 (3000 m segment).
  const auto mid = position_on_route(r, 1500);
  CHECK(mid.position.x == doctest::Approx(-5200));
  CHECK(mid.position.y == doctest::Approx(900));

  // 1000 m into WP3 -> WP9, heading east.
  const auto p = position_on_route(r, 4000);
  CHECK(p.position.x == doctest::Approx(-3000));
  CHECK(p.position.y == doctest::Approx(0).epsilon(1e-9));
  CHECK(p.bearing == doctest::Approx(0.0));

  CHECK_THROWS_AS(position_on_route(r, -1), std::out_of_range);
  CHECK_THROWS_AS(position_on_route(r, r.length + 1), std::out_of_range);
}

TEST_CASE("position_on_route is 1-Lipschitz and bearing in [0, 2pi)") {
  for (const auto& r : reference_scenario().routes) {
    for (double s = 0; s + 7.3 <= r.length; s += 7.3) {
      const auto a = position_on_route(r, s);
      const auto b = position_on_route(r, s + 7.3);
      CHECK(distance(a.position, b.position) <= 7.3 + 1e-9);
      CHECK(a.bearing >= 0);
      CHECK(a.bearing < 2 * std::numbers::pi);
    }
  }
}

TEST_CASE("next_bottleneck along route I") {
  const auto& s = reference_scenario();
  const auto& r = s.routes[0];
  auto id = [&](double arc) -> std::string {
    auto bn = next_bottleneck(r, arc);
    return bn ? r.waypoint_ids[*bn] : "none";
  };
  CHECK(id(100) == "WP3");
  CHECK(id(5000) == "WP9");
  CHECK(id(8000) == "none");

  size_t last = 0;
  for (double a = 0; a <= r.length; a += 10) {
    auto bn = next_bottleneck(r, a);
    const size_t v = bn ? *bn : r.points.size();
    CHECK(v >= last);
    last = v;
  }
}

TEST_CASE("spawn times follow 35 + 5k") {
  const auto& s = reference_scenario();
  CHECK(spawn_time_for(s, 0) == 35);
  CHECK(spawn_time_for(s, 10) == 85);

  Rng a(42), b(42);
  const auto ta = sample_spawn_times(s, a);
  const auto tb = sample_spawn_times(s, b);
  CHECK(ta == tb);
  CHECK(ta.size() == 20);

  Rng rng(1);
  bool saw_min = false, saw_max = false;
  for (int i = 0; i < 200; ++i) {
    for (double t : sample_spawn_times(s, rng)) {
      CHECK(t >= 35);
      CHECK(t <= 85);
      CHECK(std::fmod(t - 35, 5) == 0);
      saw_min |= t == 35;
      saw_max |= t == 85;
    }
  }
  CHECK(saw_min);
  CHECK(saw_max);
}
