#include "deconflict/reward.hpp"

namespace deconflict {

double r_los(double d_min, double d_nmac, double d_lowc, double alpha) {
  if (d_min < d_nmac) return -1.0;
  if (d_min <= d_lowc) return alpha * (-1.0 + (d_min - d_nmac) / (d_lowc - d_nmac));
  return 0.0;
}

double r_velocity(double speed, double v_min, double v_max, const RewardWeights& w) {
  double r = 0.0;
  if (speed < v_min + w.eta1_v) r -= w.psi1_v;
  if (speed > v_max - w.eta2_v) r -= w.psi2_v;
  return r;
}

double r_action(Action action, Action prev_action, const RewardWeights& w) {
  double r = 0.0;
  if (action != prev_action) r -= w.psi1_a;
  if (action != Action::kHold) r -= w.psi2_a;
  return r;
}

double r_mission(double dist_final, const RewardWeights& w) {
  return dist_final < w.eta_m ? w.psi_m : 0.0;
}

double r_time(double airborne_time, double horizon, const RewardWeights& w) {
  return airborne_time < horizon ? -w.psi_t : -1.0;
}

double total_reward(const RewardContext& c, const RewardWeights& w) {
  return r_los(c.d_min, c.d_nmac, c.d_lowc, w.alpha) + r_velocity(c.speed, c.v_min, c.v_max, w) +
         r_action(c.action, c.prev_action, w) + r_mission(c.dist_final, w) +
         r_time(c.airborne_time, c.horizon, w);
}

}  // namespace deconflict
