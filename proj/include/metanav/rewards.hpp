#pragma once

#include <string>

#include "metanav/world.hpp"

namespace metanav::rewards {

enum class Variant { R1, R2 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct RewardConfig {
  Variant variant = Variant::R1;
  bool goal_bonus_enabled = true;
  double critical_radius = 0.25;
  double safe_radius = 0.75;
  double target_coeff = 0.2;
  double goal_bonus = 200.0;
  double collision_penalty = -100.0;  // R2
  double step_penalty = -1.0;         // R2
  double critical_penalty = -1.5;     // R1

  /// Throws std::invalid_argument unless 0 < critical_radius < safe_radius.
  void check() const;
};

/// Obstacle-proximity term of R1: constant penalty inside the critical zone,
/// linear ramp up to the safe radius, zero from the safe radius outward.
double obstacle_term(double dist_obs, const RewardConfig& cfg);

/// Goal-distance term of R1, including the optional goal bonus.
double target_term(double dist_target, bool goal_reached, const RewardConfig& cfg);

double reward_r1(double dist_target, double dist_obs, bool goal_reached, const RewardConfig& cfg);

double reward_r2(world::StepEvent event, const RewardConfig& cfg = {});

double reward(const world::StepResult& step, const RewardConfig& cfg);

}  // namespace metanav::rewards
