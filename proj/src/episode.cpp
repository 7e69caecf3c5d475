#include "deconflict/episode.hpp"

#include <fmt/format.h>

#include <exception>
#include <stdexcept>

#include "deconflict/baselines.hpp"

namespace deconflict {

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kPpoa2c: return "ppoa2c";
    case PolicyKind::kRuleBased: return "rulebased";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kReplay: return "replay";
  }
  return "?";
}

const char* display_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::kPpoa2c: return "PPOA2C";
    case PolicyKind::kRuleBased: return "Rule-based";
    case PolicyKind::kRandom: return "Random";
    case PolicyKind::kReplay: return "Replay";
  }
  return "?";
}

const char* trajectory_csv_header() { return "step,agent_id,fleet,arc,speed,action,x,y\n"; }

namespace {

struct Decision {
  int agent = -1;
  Action action = Action::kHold;
  Action prev_action = Action::kHold;
  // Learned fleets only.
  Observation obs;
  float log_prob = 0.0f;
  float value = 0.0f;
};

}  // namespace

EpisodeResult run_episode(const ScenarioSpec& spec, const Controllers& controllers, uint64_t episode_seed,
                          const EpisodeOptions& options) {
  for (const auto& c : controllers) {
    if (c.kind == PolicyKind::kPpoa2c && c.net == nullptr)
      throw std::invalid_argument("run_episode: PPOA2C fleet without a network");
    if (c.kind == PolicyKind::kReplay && c.replay == nullptr)
      throw std::invalid_argument("run_episode: replay fleet without an action log");
  }
  FleetConfigs configs = {controllers[0].config, controllers[1].config};

  Rng spawn_rng(derive_seed(episode_seed, {kStreamSpawn}));
  std::array<Rng, kNumFleets> action_rng = {Rng(derive_seed(episode_seed, {kStreamActions, 0})),
                                            Rng(derive_seed(episode_seed, {kStreamActions, 1}))};

  WorldState world = make_world(spec, sample_spawn_times(spec, spawn_rng));
  EpisodeResult result;
  auto& m = result.metrics;
  const size_t n_agents = world.aircraft.size();

  std::vector<Decision> decisions;
  std::vector<nn::ForwardCache<float>> caches;

  while (!is_episode_done(world)) {
    decisions.clear();
    for (const auto& a : world.aircraft)
      if (a.status == AgentStatus::kActive) decisions.push_back({a.agent_id, Action::kHold, a.prev_action, {}, 0, 0});

    // Learned fleets: observations and forward passes are independent per agent.
    caches.resize(decisions.size());
    std::exception_ptr error;
    const auto nd = static_cast<std::ptrdiff_t>(decisions.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < nd; ++i) {
      auto& d = decisions[static_cast<size_t>(i)];
      const auto& a = world.aircraft[static_cast<size_t>(d.agent)];
      const auto& ctl = controllers[static_cast<size_t>(fleet_index(a.fleet))];
      if (ctl.kind != PolicyKind::kPpoa2c) continue;
      try {
        d.obs = build_observation(a, sense_intruders(a, world, spec, ctl.config), spec, ctl.config);
        ctl.net->forward(d.obs, caches[static_cast<size_t>(i)]);
      } catch (...) {
#pragma omp critical(episode_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);

    // Action selection in agent order so each fleet's rng stream is consumed
    // deterministically.
    for (size_t i = 0; i < decisions.size(); ++i) {
      auto& d = decisions[i];
      const auto& a = world.aircraft[static_cast<size_t>(d.agent)];
      const size_t f = static_cast<size_t>(fleet_index(a.fleet));
      const auto& ctl = controllers[f];
      switch (ctl.kind) {
        case PolicyKind::kPpoa2c: {
          const auto& probs = caches[i].probs;
          nn::SampledAction s;
          if (ctl.greedy) {
            s.index = nn::argmax<float>(probs);
            s.log_prob = std::log(static_cast<double>(probs[static_cast<size_t>(s.index)]));
          } else {
            s = nn::sample_action(probs, action_rng[f]);
          }
          d.action = static_cast<Action>(s.index);
          d.log_prob = static_cast<float>(s.log_prob);
          d.value = caches[i].value;
          break;
        }
        case PolicyKind::kRuleBased:
          d.action = rule_based_action(a, world, spec, ctl.config, spec.rules);
          break;
        case PolicyKind::kRandom:
          d.action = random_action(action_rng[f]);
          break;
        case PolicyKind::kReplay: {
          const auto& log = *ctl.replay;
          const auto step = static_cast<size_t>(world.step_index);
          if (step >= log.size() || log[step][static_cast<size_t>(d.agent)] < 0)
            throw std::runtime_error(fmt::format("replay log has no action for agent {} at step {}", d.agent, step));
          d.action = static_cast<Action>(log[step][static_cast<size_t>(d.agent)]);
          break;
        }
      }
    }

    if (options.record_actions) {
      result.actions.emplace_back(n_agents, -1);
      for (const auto& d : decisions) result.actions.back()[static_cast<size_t>(d.agent)] = static_cast<int>(d.action);
    }
    if (options.record_trajectory) {
      for (const auto& d : decisions) {
        const auto& a = world.aircraft[static_cast<size_t>(d.agent)];
        const Vec2 p = position_of(a, spec);
        result.trajectory_csv += fmt::format("{},{},{},{:.3f},{:.3f},{},{:.3f},{:.3f}\n", world.step_index, a.agent_id,
                                             fleet_char(a.fleet), a.arc, a.speed, static_cast<int>(d.action), p.x, p.y);
      }
    }

    for (const auto& d : decisions) {
      auto& a = world.aircraft[static_cast<size_t>(d.agent)];
      a = apply_action(a, d.action, configs[static_cast<size_t>(fleet_index(a.fleet))], spec.dt);
    }
    advance_kinematics(world, spec, configs);

    // Separation seen by each acting agent before anyone is retired.
    std::vector<double> d_min(decisions.size());
    for (size_t i = 0; i < decisions.size(); ++i) {
      const auto& a = world.aircraft[static_cast<size_t>(decisions[i].agent)];
      d_min[i] = nearest_aircraft_distance(a, world, spec, configs[static_cast<size_t>(fleet_index(a.fleet))]);
    }

    auto events = detect_events(world, spec);
    if (world.step_index >= kMaxEpisodeSteps) {
      auto cut = truncate_episode(world);
      events.insert(events.end(), cut.begin(), cut.end());
    }

    std::vector<double> nmac_sep(n_agents, std::numeric_limits<double>::infinity());
    for (const auto& e : events) {
      switch (e.kind) {
        case EventKind::kNmac: {
          const auto cls = classify_nmac(e, world, spec);
          m.nmac_by_pair[static_cast<size_t>(cls.pair)]++;
          m.nmac_by_bottleneck[static_cast<size_t>(cls.bottleneck)]++;
          const auto fa = world.aircraft[static_cast<size_t>(e.agent_a)].fleet;
          const auto fb = world.aircraft[static_cast<size_t>(e.agent_b)].fleet;
          m.fleet_nmac[static_cast<size_t>(fleet_index(fa))]++;
          if (fb != fa) m.fleet_nmac[static_cast<size_t>(fleet_index(fb))]++;
          for (int id : {e.agent_a, e.agent_b})
            nmac_sep[static_cast<size_t>(id)] = std::min(nmac_sep[static_cast<size_t>(id)], e.separation);
          break;
        }
        case EventKind::kGoal: {
          const auto& a = world.aircraft[static_cast<size_t>(e.agent_a)];
          const auto f = static_cast<size_t>(fleet_index(a.fleet));
          m.n_success++;
          m.fleet_success[f]++;
          m.mission_times[f].push_back(e.sim_time - a.spawn_time);
          break;
        }
        case EventKind::kTimeout:
          break;
      }
    }

    for (size_t i = 0; i < decisions.size(); ++i) {
      const auto& d = decisions[i];
      const auto& a = world.aircraft[static_cast<size_t>(d.agent)];
      const size_t f = static_cast<size_t>(fleet_index(a.fleet));
      const auto& cfg = configs[f];
      RewardContext ctx;
      ctx.d_min = std::min(d_min[i], nmac_sep[static_cast<size_t>(d.agent)]);
      ctx.d_nmac = spec.d_nmac;
      ctx.d_lowc = spec.d_lowc;
      ctx.speed = a.speed;
      ctx.v_min = cfg.v_min;
      ctx.v_max = cfg.v_max;
      ctx.action = d.action;
      ctx.prev_action = d.prev_action;
      ctx.dist_final = distance(position_of(a, spec), spec.routes[a.route].destination());
      ctx.airborne_time = world.sim_time - a.spawn_time;
      ctx.horizon = spec.mission_horizon;
      const double r = total_reward(ctx, spec.reward);
      m.fleet_reward[f] += r;

      const auto& ctl = controllers[f];
      if (ctl.kind == PolicyKind::kPpoa2c && ctl.buffer != nullptr) {
        ppo::Transition t;
        t.obs = d.obs;
        t.action = static_cast<int>(d.action);
        t.log_prob_old = d.log_prob;
        t.reward = static_cast<float>(r);
        t.value_old = d.value;
        t.done = a.status != AgentStatus::kActive;
        t.agent_id = d.agent;
        t.step = world.step_index - 1;
        ctl.buffer->add(std::move(t));
      }
    }
  }
  m.steps = world.step_index;
  return result;
}

std::vector<EpisodeResult> run_episodes_serial(const ScenarioSpec& spec, const Controllers& controllers,
                                               uint64_t seed, int episodes, const EpisodeOptions& options) {
  std::vector<EpisodeResult> out;
  out.reserve(static_cast<size_t>(episodes));
  for (int e = 0; e < episodes; ++e)
    out.push_back(run_episode(spec, controllers, derive_seed(seed, {static_cast<uint64_t>(e)}), options));
  return out;
}

std::vector<EpisodeResult> run_episodes(const ScenarioSpec& spec, const Controllers& controllers, uint64_t seed,
                                        int episodes, const EpisodeOptions& options) {
  for (const auto& c : controllers)
    if (c.buffer != nullptr) throw std::invalid_argument("run_episodes: concurrent episodes cannot record transitions");
  std::vector<EpisodeResult> out(static_cast<size_t>(episodes));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int e = 0; e < episodes; ++e) {
    try {
      out[static_cast<size_t>(e)] =
          run_episode(spec, controllers, derive_seed(seed, {static_cast<uint64_t>(e)}), options);
    } catch (...) {
#pragma omp critical(run_episodes_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace deconflict
