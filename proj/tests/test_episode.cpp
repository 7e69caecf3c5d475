#include "deconflict/episode.hpp"

#include <numeric>

#include "doctest.h"

using namespace deconflict;

namespace {

const ScenarioSpec& spec() { return reference_scenario(); }

FleetController fixed(PolicyKind kind, const char* config) {
  FleetController c;
  c.kind = kind;
  c.config = spec().config(config);
  return c;
}

int total_decisions(const ActionLog& log, FleetId fleet) {
  int n = 0;
  for (const auto& step : log)
    for (size_t id = 0; id < step.size(); ++id)
      if (step[id] >= 0 && spec().routes[spec().route_of_agent(static_cast<int>(id))].owner_fleet == fleet) ++n;
  return n;
}

}  // namespace

TEST_CASE("episode is a pure function of its seed") {
  const Controllers ctl = {fixed(PolicyKind::kRandom, "X"), fixed(PolicyKind::kRuleBased, "Y")};
  const EpisodeOptions opt{true, true};
  const auto a = run_episode(spec(), ctl, 42, opt);
  const auto b = run_episode(spec(), ctl, 42, opt);
  const auto c = run_episode(spec(), ctl, 43, opt);
  CHECK(a.actions == b.actions);
  CHECK(a.trajectory_csv == b.trajectory_csv);
  CHECK(a.metrics.steps == b.metrics.steps);
  CHECK(a.trajectory_csv != c.trajectory_csv);
}

TEST_CASE("episode metrics are internally consistent") {
  const Controllers ctl = {fixed(PolicyKind::kRandom, "X"), fixed(PolicyKind::kRandom, "Y")};
  for (const auto& r : run_episodes_serial(spec(), ctl, 7, 20)) {
    const auto& m = r.metrics;
    const int bn = std::accumulate(m.nmac_by_bottleneck.begin(), m.nmac_by_bottleneck.end(), 0);
    CHECK(bn == m.total_nmac());
    CHECK(m.n_success == m.fleet_success[0] + m.fleet_success[1]);
    CHECK(m.n_success <= spec().total_agents());
    CHECK(m.steps > 0);
    CHECK(m.steps <= kMaxEpisodeSteps);
    for (int f = 0; f < kNumFleets; ++f)
      CHECK(static_cast<int>(m.mission_times[static_cast<size_t>(f)].size()) == m.fleet_success[static_cast<size_t>(f)]);
  }
}

TEST_CASE("parallel evaluation matches the serial reference") {
  const Controllers ctl = {fixed(PolicyKind::kRuleBased, "X"), fixed(PolicyKind::kRandom, "Y")};
  const EpisodeOptions opt{true, true};
  const auto par = run_episodes(spec(), ctl, 99, 12, opt);
  const auto ser = run_episodes_serial(spec(), ctl, 99, 12, opt);
  REQUIRE(par.size() == ser.size());
  for (size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].actions == ser[i].actions);
    CHECK(par[i].trajectory_csv == ser[i].trajectory_csv);
    CHECK(par[i].metrics.fleet_reward == ser[i].metrics.fleet_reward);
  }
}

TEST_CASE("replaying recorded actions reproduces the episode") {
  const Controllers ctl = {fixed(PolicyKind::kRandom, "X"), fixed(PolicyKind::kRuleBased, "Y")};
  const EpisodeOptions opt{true, true};
  const auto original = run_episode(spec(), ctl, 5, opt);

  Controllers replay = ctl;
  replay[0] = fixed(PolicyKind::kReplay, "X");
  replay[0].replay = &original.actions;
  const auto again = run_episode(spec(), replay, 5, opt);
  CHECK(again.actions == original.actions);
  CHECK(again.trajectory_csv == original.trajectory_csv);

  ActionLog truncated(original.actions.begin(), original.actions.begin() + 3);
  replay[0].replay = &truncated;
  CHECK_THROWS(run_episode(spec(), replay, 5, opt));
}

TEST_CASE("learning fleet records one transition per decision") {
  const auto net = nn::init_network<float>(3);
  ppo::FleetBuffer buf(FleetId::kA);
  Controllers ctl = {fixed(PolicyKind::kPpoa2c, "X"), fixed(PolicyKind::kRuleBased, "X")};
  ctl[0].net = &net;
  ctl[0].buffer = &buf;
  const auto r = run_episode(spec(), ctl, 11, {true, false});
  CHECK(static_cast<int>(buf.size()) == total_decisions(r.actions, FleetId::kA));
  int done = 0;
  for (const auto& [id, traj] : buf.trajectories()) {
    CHECK(spec().routes[spec().route_of_agent(id)].owner_fleet == FleetId::kA);
    for (size_t i = 0; i + 1 < traj.size(); ++i) CHECK_FALSE(traj[i].done);
    done += traj.back().done ? 1 : 0;
  }
  CHECK(done == static_cast<int>(buf.trajectories().size()));

  Controllers shared = ctl;
  shared[0].buffer = nullptr;
  CHECK_THROWS(run_episodes(spec(), ctl, 1, 2));
}

TEST_CASE("greedy network play is deterministic and sampling uses the seed") {
  const auto net = nn::init_network<float>(8);
  Controllers ctl = {fixed(PolicyKind::kPpoa2c, "X"), fixed(PolicyKind::kPpoa2c, "Y")};
  for (auto& c : ctl) c.net = &net;
  for (auto& c : ctl) c.greedy = true;
  CHECK(run_episode(spec(), ctl, 1, {true, false}).actions == run_episode(spec(), ctl, 1, {true, false}).actions);
  for (auto& c : ctl) c.greedy = false;
  const auto s1 = run_episode(spec(), ctl, 1, {true, false});
  CHECK(s1.actions == run_episode(spec(), ctl, 1, {true, false}).actions);
  CHECK(s1.actions != run_episode(spec(), ctl, 2, {true, false}).actions);
}

TEST_CASE("policy names") {
  CHECK(std::string(to_string(PolicyKind::kPpoa2c)) == "ppoa2c");
  CHECK(std::string(display_name(PolicyKind::kRuleBased)) == "Rule-based");
  CHECK(std::string(trajectory_csv_header()) == "step,agent_id,fleet,arc,speed,action,x,y\n");
}
