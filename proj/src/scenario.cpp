#include "deconflict/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace deconflict {

namespace detail {
extern const std::string_view kReferenceScenario;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, std::string_view seps) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    size_t j = s.find_first_of(seps, i);
    if (j == std::string_view::npos) j = s.size();
    auto tok = trim(s.substr(i, j - i));
    if (!tok.empty()) out.emplace_back(tok);
    i = j + 1;
  }
  return out;
}

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw ScenarioError(fmt::format("parse error at line {}: {}", line, msg));
}

double parse_number(std::string_view s, int line, std::string_view field) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    parse_fail(line, fmt::format("field '{}': '{}' is not a number", field, s));
  return v;
}

int parse_int(std::string_view s, int line, std::string_view field) {
  s = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    parse_fail(line, fmt::format("field '{}': '{}' is not an integer", field, s));
  return v;
}

WaypointKind parse_kind(std::string_view s, int line) {
  if (s == "origin") return WaypointKind::kOrigin;
  if (s == "merge") return WaypointKind::kMerge;
  if (s == "intersection") return WaypointKind::kIntersection;
  if (s == "destination") return WaypointKind::kDestination;
  parse_fail(line, fmt::format("unknown waypoint kind '{}'", s));
}

[[noreturn]] void invalid(const std::string& what) {
  throw ScenarioError(fmt::format("validation error: {} violated", what));
}

void build_route_geometry(Route& r, const ScenarioSpec& spec) {
  r.waypoint_index.clear();
  r.points.clear();
  r.kinds.clear();
  r.arc_at.clear();
  double arc = 0.0;
  for (const auto& id : r.waypoint_ids) {
    auto idx = spec.find_waypoint(id);
    if (!idx) throw ScenarioError(fmt::format("validation error: route {} references unknown waypoint '{}'", r.id, id));
    const auto& wp = spec.waypoints[*idx];
    if (!r.points.empty()) arc += distance(r.points.back(), wp.position);
    r.waypoint_index.push_back(*idx);
    r.points.push_back(wp.position);
    r.kinds.push_back(wp.kind);
    r.arc_at.push_back(arc);
  }
  r.length = arc;
}

}  // namespace

const FleetConfig& ScenarioSpec::config(std::string_view id) const {
  for (const auto& c : configs)
    if (c.id == id) return c;
  throw ScenarioError(fmt::format("unknown fleet configuration '{}'", id));
}

std::optional<size_t> ScenarioSpec::find_waypoint(std::string_view id) const {
  for (size_t i = 0; i < waypoints.size(); ++i)
    if (waypoints[i].id == id) return i;
  return std::nullopt;
}

const Waypoint& ScenarioSpec::waypoint(std::string_view id) const {
  auto idx = find_waypoint(id);
  if (!idx) throw ScenarioError(fmt::format("unknown waypoint '{}'", id));
  return waypoints[*idx];
}

void validate(const ScenarioSpec& s) {
  if (!(s.d_nmac < s.d_lowc)) invalid("d_nmac < d_lowc");
  if (!(s.d_nmac > 0)) invalid("d_nmac > 0");
  if (!(s.dt > 0)) invalid("dt > 0");
  if (!(s.mission_horizon > 0)) invalid("mission_horizon > 0");
  if (!(s.goal_tolerance > 0)) invalid("goal_tolerance > 0");
  if (s.agents_per_route <= 0) invalid("agents_per_route > 0");
  if (s.spawn_k_max < 0) invalid("spawn_k_max >= 0");
  if (!(s.spawn_step >= 0) || !(s.spawn_base >= 0)) invalid("spawn_base, spawn_step >= 0");

  std::set<std::string> ids;
  for (const auto& w : s.waypoints)
    if (!ids.insert(w.id).second) invalid(fmt::format("unique waypoint id ({})", w.id));

  const std::vector<std::string> route_ids = {"I", "II", "III", "IV"};
  if (s.routes.size() != route_ids.size()) invalid("exactly four routes I, II, III, IV");
  for (size_t i = 0; i < route_ids.size(); ++i)
    if (s.routes[i].id != route_ids[i]) invalid("exactly four routes I, II, III, IV");

  std::map<std::string, int> bottleneck_use;
  for (const auto& r : s.routes) {
    if (r.kinds.size() != 4 || r.kinds[0] != WaypointKind::kOrigin || r.kinds[1] != WaypointKind::kMerge ||
        r.kinds[2] != WaypointKind::kIntersection || r.kinds[3] != WaypointKind::kDestination)
      invalid(fmt::format("route {} visits origin, one merge, the intersection, then its destination", r.id));
    double sum = 0.0;
    for (size_t i = 1; i < r.points.size(); ++i) sum += distance(r.points[i - 1], r.points[i]);
    if (std::abs(sum - r.length) > 1e-6) invalid(fmt::format("route {} length equals its segment sum", r.id));
    bottleneck_use[r.waypoint_ids[1]]++;
    bottleneck_use[r.waypoint_ids[2]]++;
  }
  for (const auto& [id, n] : bottleneck_use)
    if (n < 2) invalid(fmt::format("bottleneck {} shared by at least two routes", id));
  for (const auto& r : s.routes)
    if (std::abs(r.length - s.routes.front().length) > 1.0) invalid("all routes have equal length (within 1 m)");

  if (s.configs.empty()) invalid("at least one fleet configuration");
  for (const auto& c : s.configs) {
    if (!(c.v_min >= 0 && c.v_min < c.v_max)) invalid(fmt::format("0 <= v_min < v_max for {}", c.id));
    if (!(c.accel_mag > 0)) invalid(fmt::format("accel > 0 for {}", c.id));
    if (!(c.sensing_range > s.d_lowc)) invalid(fmt::format("sensing_range > d_lowc for {}", c.id));
    if (!(c.spawn_speed >= c.v_min && c.spawn_speed <= c.v_max))
      invalid(fmt::format("v_min <= spawn_speed <= v_max for {}", c.id));
  }

  const auto& w = s.reward;
  if (!(w.alpha >= 0 && w.alpha <= 1)) invalid("reward.alpha in [0,1]");
  if (w.psi1_v < 0 || w.psi2_v < 0 || w.psi1_a < 0 || w.psi2_a < 0 || w.psi_m < 0 || w.psi_t < 0)
    invalid("reward psi coefficients >= 0");
  if (!(s.rules.eta_buffer > 0)) invalid("rule.eta_buffer > 0");
  if (!(s.rules.follow_gap > s.d_nmac)) invalid("rule.follow_gap > d_nmac");
}

ScenarioSpec load_scenario(std::string_view text) {
  ScenarioSpec spec;
  std::map<std::string, FleetConfig> configs;
  std::set<std::string> seen_sections;
  std::set<std::string> config_fields_seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;

  while (std::getline(in, raw)) {
    ++line;
    auto l = trim(raw);
    if (auto hash = l.find('#'); hash != std::string_view::npos) l = trim(l.substr(0, hash));
    if (l.empty()) continue;
    if (l.front() == '[') {
      if (l.back() != ']') parse_fail(line, "unterminated section header");
      section = std::string(trim(l.substr(1, l.size() - 2)));
      if (section != "waypoints" && section != "routes" && section != "fleets" && section != "params")
        parse_fail(line, fmt::format("unknown section [{}]", section));
      if (!seen_sections.insert(section).second) parse_fail(line, fmt::format("duplicate section [{}]", section));
      continue;
    }
    auto eq = l.find('=');
    if (eq == std::string_view::npos) parse_fail(line, "expected 'key = value'");
    std::string key(trim(l.substr(0, eq)));
    auto value = trim(l.substr(eq + 1));
    if (key.empty()) parse_fail(line, "empty key");
    if (section.empty()) parse_fail(line, "key outside of any section");

    if (section == "waypoints") {
      auto parts = split(value, ",");
      if (parts.size() != 3) parse_fail(line, fmt::format("waypoint {}: expected 'x, y, kind'", key));
      spec.waypoints.push_back(
          {key, {parse_number(parts[0], line, key + ".x"), parse_number(parts[1], line, key + ".y")},
           parse_kind(parts[2], line)});
    } else if (section == "routes") {
      auto colon = value.find(':');
      if (colon == std::string_view::npos) parse_fail(line, fmt::format("route {}: expected 'FLEET: WP ...'", key));
      auto fleet = trim(value.substr(0, colon));
      Route r;
      r.id = key;
      if (fleet == "A")
        r.owner_fleet = FleetId::kA;
      else if (fleet == "B")
        r.owner_fleet = FleetId::kB;
      else
        parse_fail(line, fmt::format("route {}: fleet must be A or B, got '{}'", key, fleet));
      r.waypoint_ids = split(value.substr(colon + 1), " \t,");
      if (r.waypoint_ids.size() < 2) parse_fail(line, fmt::format("route {}: needs at least two waypoints", key));
      spec.routes.push_back(std::move(r));
    } else if (section == "fleets") {
      auto dot = key.find('.');
      if (dot == std::string::npos) parse_fail(line, fmt::format("fleet key '{}' must be CONFIG.field", key));
      auto cfg_id = key.substr(0, dot);
      auto field = key.substr(dot + 1);
      auto& c = configs[cfg_id];
      c.id = cfg_id;
      double v = parse_number(value, line, key);
      if (field == "v_min") c.v_min = v;
      else if (field == "v_max") c.v_max = v;
      else if (field == "accel") c.accel_mag = v;
      else if (field == "sensing_range") c.sensing_range = v;
      else if (field == "spawn_speed") c.spawn_speed = v;
      else parse_fail(line, fmt::format("unknown fleet field '{}'", field));
      config_fields_seen.insert(key);
    } else {
      auto num = [&] { return parse_number(value, line, key); };
      auto& w = spec.reward;
      auto& rp = spec.rules;
      if (key == "agents_per_route") spec.agents_per_route = parse_int(value, line, key);
      else if (key == "spawn_base") spec.spawn_base = num();
      else if (key == "spawn_step") spec.spawn_step = num();
      else if (key == "spawn_k_max") spec.spawn_k_max = parse_int(value, line, key);
      else if (key == "dt") spec.dt = num();
      else if (key == "mission_horizon") spec.mission_horizon = num();
      else if (key == "d_nmac") spec.d_nmac = num();
      else if (key == "d_lowc") spec.d_lowc = num();
      else if (key == "goal_tolerance") spec.goal_tolerance = num();
      else if (key == "reward.alpha") w.alpha = num();
      else if (key == "reward.psi1_v") w.psi1_v = num();
      else if (key == "reward.psi2_v") w.psi2_v = num();
      else if (key == "reward.eta1_v") w.eta1_v = num();
      else if (key == "reward.eta2_v") w.eta2_v = num();
      else if (key == "reward.psi1_a") w.psi1_a = num();
      else if (key == "reward.psi2_a") w.psi2_a = num();
      else if (key == "reward.psi_m") w.psi_m = num();
      else if (key == "reward.psi_t") w.psi_t = num();
      else if (key == "rule.eta_buffer") rp.eta_buffer = num();
      else if (key == "rule.follow_gap") rp.follow_gap = num();
      else if (key == "rule.cruise_speed") rp.cruise_speed = num();
      else parse_fail(line, fmt::format("unknown parameter '{}'", key));
    }
  }

  for (const char* required : {"waypoints", "routes", "fleets"})
    if (!seen_sections.count(required)) throw ScenarioError(fmt::format("parse error: missing section [{}]", required));

  for (auto& [id, c] : configs) {
    for (const char* f : {"v_max", "accel", "sensing_range"})
      if (!config_fields_seen.count(id + "." + f))
        throw ScenarioError(fmt::format("parse error: fleet configuration {} is missing field '{}'", id, f));
    spec.configs.push_back(c);
  }
  // The goal tolerance doubles as the mission-bonus threshold.
  spec.reward.eta_m = spec.goal_tolerance;

  for (auto& r : spec.routes) build_route_geometry(r, spec);
  validate(spec);
  return spec;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ScenarioError(fmt::format("cannot open scenario file '{}'", path));
  std::stringstream ss;
  ss << f.rdbuf();
  return load_scenario(ss.str());
}

std::string_view reference_scenario_text() { return detail::kReferenceScenario; }

const ScenarioSpec& reference_scenario() {
  static const ScenarioSpec spec = load_scenario(reference_scenario_text());
  return spec;
}

Pose position_on_route(const Route& route, double arc) {
  if (!(arc >= 0.0 && arc <= route.length))
    throw std::out_of_range(fmt::format("arc {} outside route {} [0, {}]", arc, route.id, route.length));
  // Segment i spans [arc_at[i], arc_at[i+1]].
  size_t seg = 0;
  while (seg + 2 < route.points.size() && arc > route.arc_at[seg + 1]) ++seg;
  const Vec2 a = route.points[seg];
  const Vec2 b = route.points[seg + 1];
  const double seg_len = route.arc_at[seg + 1] - route.arc_at[seg];
  const double t = seg_len > 0 ? (arc - route.arc_at[seg]) / seg_len : 0.0;
  Pose p;
  p.position = a + t * (b - a);
  double bearing = std::atan2(b.y - a.y, b.x - a.x);
  if (bearing < 0) bearing += 2 * std::numbers::pi;
  if (bearing >= 2 * std::numbers::pi) bearing = 0.0;
  p.bearing = bearing;
  return p;
}

std::optional<size_t> next_bottleneck(const Route& route, double arc) {
  for (size_t i = 0; i < route.points.size(); ++i)
    if (is_bottleneck(route.kinds[i]) && route.arc_at[i] > arc) return i;
  return std::nullopt;
}

size_t next_waypoint(const Route& route, double arc) {
  for (size_t i = 1; i < route.points.size(); ++i)
    if (route.arc_at[i] > arc) return i;
  return route.points.size() - 1;
}

double spawn_time_for(const ScenarioSpec& spec, int k) { return spec.spawn_base + spec.spawn_step * k; }

std::vector<double> sample_spawn_times(const ScenarioSpec& spec, Rng& rng) {
  std::vector<double> times(static_cast<size_t>(spec.total_agents()));
  for (auto& t : times) t = spawn_time_for(spec, static_cast<int>(uniform_index(rng, spec.spawn_k_max + 1)));
  return times;
}

}  // namespace deconflict
