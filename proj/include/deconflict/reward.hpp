#pragma once

#include <limits>

namespace deconflict {

enum class Action : int { kDecel = 0, kHold = 1, kAccel = 2 };
inline constexpr int kNumActions = 3;

/// Coefficients of the five-term step reward.
struct RewardWeights {
  double alpha = 0.1;     // LoWC band scaling
  double psi1_v = 1e-3;   // low-speed penalty
  double psi2_v = 1e-4;   // high-speed penalty
  double eta1_v = 5.14;   // m/s above v_min
  double eta2_v = 2.57;   // m/s below v_max
  double psi1_a = 1e-5;   // action change
  double psi2_a = 1e-4;   // non-HOLD action
  double psi_m = 0.1;     // mission bonus
  double eta_m = 50.0;    // goal threshold, m
  double psi_t = 1e-4;    // per-step time penalty
};

/// Loss-of-separation term. d_min is the distance to the nearest aircraft,
/// +inf when none is sensed.
double r_los(double d_min, double d_nmac, double d_lowc, double alpha);

double r_velocity(double speed, double v_min, double v_max, const RewardWeights& w);

double r_action(Action action, Action prev_action, const RewardWeights& w);

double r_mission(double dist_final, const RewardWeights& w);

double r_time(double airborne_time, double horizon, const RewardWeights& w);

/// Everything total_reward needs about one agent for one step.
struct RewardContext {
  double d_min = std::numeric_limits<double>::infinity();
  double d_nmac = 100.0;
  double d_lowc = 500.0;
  double speed = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  Action action = Action::kHold;
  Action prev_action = Action::kHold;
  double dist_final = std::numeric_limits<double>::infinity();
  double airborne_time = 0.0;
  double horizon = 1080.0;
};

double total_reward(const RewardContext& ctx, const RewardWeights& w);

}  // namespace deconflict
