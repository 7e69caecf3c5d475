#include "deconflict/metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace deconflict {

const char* to_string(PairCategory c) {
  switch (c) {
    case PairCategory::kAA: return "AA";
    case PairCategory::kAB: return "AB";
    case PairCategory::kBB: return "BB";
  }
  return "?";
}

const char* to_string(BottleneckCategory c) {
  switch (c) {
    case BottleneckCategory::kM1: return "M1";
    case BottleneckCategory::kM2: return "M2";
    case BottleneckCategory::kIN: return "IN";
  }
  return "?";
}

namespace {

BottleneckCategory category_of_waypoint(size_t wp, const ScenarioSpec& spec) {
  const auto& routes = spec.routes;
  if (wp == routes[0].waypoint_index[1]) return BottleneckCategory::kM1;
  if (wp == routes[2].waypoint_index[1]) return BottleneckCategory::kM2;
  return BottleneckCategory::kIN;
}

std::optional<size_t> heading_to(const AircraftState& a, const ScenarioSpec& spec) {
  const auto& r = spec.routes[a.route];
  auto bn = next_bottleneck(r, a.arc);
  if (!bn) return std::nullopt;
  return r.waypoint_index[*bn];
}

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

nlohmann::ordered_json ms_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }
MeanSd ms_from(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("sd").get<double>()}; }

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}
std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string num(double v) { return fmt::format("{:.6g}", v); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string("NA"); }

}  // namespace

NmacClass classify_nmac(const ConflictEvent& event, const WorldState& world, const ScenarioSpec& spec) {
  if (event.kind != EventKind::kNmac) throw std::invalid_argument("classify_nmac: event is not an NMAC");
  const auto& a = world.aircraft.at(static_cast<size_t>(event.agent_a));
  const auto& b = world.aircraft.at(static_cast<size_t>(event.agent_b));

  NmacClass out{};
  if (a.fleet != b.fleet)
    out.pair = PairCategory::kAB;
  else
    out.pair = a.fleet == FleetId::kA ? PairCategory::kAA : PairCategory::kBB;

  auto wa = heading_to(a, spec);
  auto wb = heading_to(b, spec);
  if (wa && wb && *wa == *wb) {
    out.bottleneck = category_of_waypoint(*wa, spec);
    return out;
  }
  double best = std::numeric_limits<double>::infinity();
  size_t best_wp = 0;
  for (size_t i = 0; i < spec.waypoints.size(); ++i) {
    if (!is_bottleneck(spec.waypoints[i].kind)) continue;
    const double d = distance(spec.waypoints[i].position, event.midpoint);
    if (d < best) {
      best = d;
      best_wp = i;
    }
  }
  out.bottleneck = category_of_waypoint(best_wp, spec);
  return out;
}

double fairness(double t1, double t2) {
  if (!(t1 > 0) || !(t2 > 0)) throw std::invalid_argument("fairness: mission times must be positive");
  return (1.0 - std::abs(t1 - t2) / std::max(t1, t2)) * 100.0;
}

EvalReport aggregate(std::span<const EpisodeMetrics> episodes, std::string model) {
  if (episodes.empty()) throw std::invalid_argument("aggregate: no episodes");
  EvalReport r;
  r.model = std::move(model);
  r.episodes = static_cast<int>(episodes.size());

  auto collect = [&](auto&& f) {
    std::vector<double> xs;
    xs.reserve(episodes.size());
    for (const auto& e : episodes) xs.push_back(static_cast<double>(f(e)));
    return mean_sd(xs);
  };
  for (size_t k = 0; k < 3; ++k) {
    r.nmac_by_pair[k] = collect([k](const EpisodeMetrics& e) { return e.nmac_by_pair[k]; });
    r.nmac_by_bottleneck[k] = collect([k](const EpisodeMetrics& e) { return e.nmac_by_bottleneck[k]; });
  }
  r.nmac_total = collect([](const EpisodeMetrics& e) { return e.total_nmac(); });
  r.n_success = collect([](const EpisodeMetrics& e) { return e.n_success; });
  r.reward = collect([](const EpisodeMetrics& e) { return e.total_reward(); });
  for (size_t f = 0; f < kNumFleets; ++f)
    r.fleet_reward[f] = collect([f](const EpisodeMetrics& e) { return e.fleet_reward[f]; });
  r.steps = collect([](const EpisodeMetrics& e) { return e.steps; });

  std::array<std::optional<double>, kNumFleets> t;
  for (size_t f = 0; f < kNumFleets; ++f) {
    double sum = 0.0;
    size_t n = 0;
    for (const auto& e : episodes) {
      for (double s : e.mission_times[f]) sum += s;
      n += e.mission_times[f].size();
    }
    if (n > 0) t[f] = sum / static_cast<double>(n) / 60.0;
  }
  r.mission_time_a = t[0];
  r.mission_time_b = t[1];
  if (t[0] && t[1]) r.fairness = fairness(*t[0], *t[1]);
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["model"] = r.model;
  j["episodes"] = r.episodes;
  j["nmac"] = {{"AA", ms_json(r.nmac_by_pair[0])}, {"AB", ms_json(r.nmac_by_pair[1])},
               {"BB", ms_json(r.nmac_by_pair[2])}, {"M1", ms_json(r.nmac_by_bottleneck[0])},
               {"M2", ms_json(r.nmac_by_bottleneck[1])}, {"IN", ms_json(r.nmac_by_bottleneck[2])},
               {"Total", ms_json(r.nmac_total)}};
  j["n_success"] = ms_json(r.n_success);
  j["reward"] = ms_json(r.reward);
  j["reward_A"] = ms_json(r.fleet_reward[0]);
  j["reward_B"] = ms_json(r.fleet_reward[1]);
  j["steps"] = ms_json(r.steps);
  j["mission_time_A_min"] = opt_json(r.mission_time_a);
  j["mission_time_B_min"] = opt_json(r.mission_time_b);
  j["fairness_pct"] = opt_json(r.fairness);
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  const auto schema = j.at("schema").get<std::string>();
  if (schema != kReportSchema)
    throw std::runtime_error(fmt::format("report schema '{}' does not match expected '{}'", schema, kReportSchema));
  EvalReport r;
  r.model = j.at("model").get<std::string>();
  r.episodes = j.at("episodes").get<int>();
  const auto& n = j.at("nmac");
  r.nmac_by_pair = {ms_from(n.at("AA")), ms_from(n.at("AB")), ms_from(n.at("BB"))};
  r.nmac_by_bottleneck = {ms_from(n.at("M1")), ms_from(n.at("M2")), ms_from(n.at("IN"))};
  r.nmac_total = ms_from(n.at("Total"));
  r.n_success = ms_from(j.at("n_success"));
  r.reward = ms_from(j.at("reward"));
  r.fleet_reward = {ms_from(j.at("reward_A")), ms_from(j.at("reward_B"))};
  r.steps = ms_from(j.at("steps"));
  r.mission_time_a = opt_from(j.at("mission_time_A_min"));
  r.mission_time_b = opt_from(j.at("mission_time_B_min"));
  r.fairness = opt_from(j.at("fairness_pct"));
  return r;
}

const std::vector<std::string>& report_csv_columns() {
  static const std::vector<std::string> cols = {"schema", "model", "episodes", "AA",  "AB",  "BB",
                                                "M1",     "M2",    "IN",       "Total", "N_s", "N_s_sd",
                                                "R",      "R_sd",  "T_A_min",  "T_B_min", "F_t_pct", "steps"};
  return cols;
}

std::string to_csv(const EvalReport& r) {
  std::string out;
  const auto& cols = report_csv_columns();
  for (size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  out += fmt::format("{},\"{}\",{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", kReportSchema, r.model, r.episodes,
                     num(r.nmac_by_pair[0].mean), num(r.nmac_by_pair[1].mean), num(r.nmac_by_pair[2].mean),
                     num(r.nmac_by_bottleneck[0].mean), num(r.nmac_by_bottleneck[1].mean),
                     num(r.nmac_by_bottleneck[2].mean), num(r.nmac_total.mean), num(r.n_success.mean),
                     num(r.n_success.sd), num(r.reward.mean), num(r.reward.sd), num(r.mission_time_a),
                     num(r.mission_time_b), num(r.fairness), num(r.steps.mean));
  return out;
}

std::string comparison_table(std::span<const EvalReport> reports) {
  std::string out = "metric";
  for (const auto& r : reports) out += ",\"" + r.model + "\"";
  out += "\n";
  auto row = [&](const char* name, auto&& f) {
    out += name;
    for (const auto& r : reports) out += "," + num(f(r));
    out += "\n";
  };
  row("AA", [](const EvalReport& r) { return r.nmac_by_pair[0].mean; });
  row("AB", [](const EvalReport& r) { return r.nmac_by_pair[1].mean; });
  row("BB", [](const EvalReport& r) { return r.nmac_by_pair[2].mean; });
  row("M1", [](const EvalReport& r) { return r.nmac_by_bottleneck[0].mean; });
  row("M2", [](const EvalReport& r) { return r.nmac_by_bottleneck[1].mean; });
  row("IN", [](const EvalReport& r) { return r.nmac_by_bottleneck[2].mean; });
  row("Total", [](const EvalReport& r) { return r.nmac_total.mean; });
  row("N_s", [](const EvalReport& r) { return r.n_success.mean; });
  row("N_s_sd", [](const EvalReport& r) { return r.n_success.sd; });
  row("R", [](const EvalReport& r) { return r.reward.mean; });
  row("T_A_min", [](const EvalReport& r) { return r.mission_time_a; });
  row("T_B_min", [](const EvalReport& r) { return r.mission_time_b; });
  row("F_t_pct", [](const EvalReport& r) { return r.fairness; });
  return out;
}

}  // namespace deconflict
