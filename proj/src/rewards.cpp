#include "metanav/rewards.hpp"

#include <stdexcept>

namespace metanav::rewards {

std::string to_string(Variant v) { return v == Variant::R1 ? "R1" : "R2"; }

Variant parse_variant(const std::string& s) {
  if (s == "R1" || s == "r1") return Variant::R1;
  if (s == "R2" || s == "r2") return Variant::R2;
  throw std::invalid_argument("unknown reward variant '" + s + "' (expected R1 or R2)");
}

void RewardConfig::check() const {
  if (!(critical_radius > 0.0 && critical_radius < safe_radius))
    throw std::invalid_argument("reward config requires 0 < critical_radius < safe_radius");
}

double obstacle_term(double dist_obs, const RewardConfig& cfg) {
  if (dist_obs < cfg.critical_radius) return cfg.critical_penalty;
  // dist_obs == safe_radius falls in the zero band.
  if (dist_obs < cfg.safe_radius) return -cfg.target_coeff * (cfg.safe_radius - dist_obs);
  return 0.0;
}

double target_term(double dist_target, bool goal_reached, const RewardConfig& cfg) {
  double r = -cfg.target_coeff * dist_target;
  if (goal_reached && cfg.goal_bonus_enabled) r += cfg.goal_bonus;
  return r;
}

double reward_r1(double dist_target, double dist_obs, bool goal_reached, const RewardConfig& cfg) {
  return target_term(dist_target, goal_reached, cfg) + obstacle_term(dist_obs, cfg);
}

double reward_r2(world::StepEvent event, const RewardConfig& cfg) {
  switch (event) {
    case world::StepEvent::GoalReached: return cfg.goal_bonus;
    case world::StepEvent::Collided: return cfg.collision_penalty;
    case world::StepEvent::None: break;
  }
  return cfg.step_penalty;
}

double reward(const world::StepResult& step, const RewardConfig& cfg) {
  if (cfg.variant == Variant::R2) return reward_r2(step.event, cfg);
  return reward_r1(step.dist_target, step.dist_obs, step.event == world::StepEvent::GoalReached, cfg);
}

}  // namespace metanav::rewards
