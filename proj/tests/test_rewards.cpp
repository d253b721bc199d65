#include <doctest.h>

#include "metanav/rewards.hpp"

using namespace metanav::rewards;
using metanav::world::StepEvent;
using metanav::world::StepResult;

TEST_SUITE("rewards") {

TEST_CASE("obstacle term bands") {
  const RewardConfig cfg;
  CHECK(obstacle_term(0.2, cfg) == -1.5);
  CHECK(obstacle_term(0.0, cfg) == -1.5);
  CHECK(obstacle_term(0.25, cfg) == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(obstacle_term(0.5, cfg) == doctest::Approx(-0.05).epsilon(1e-15));
  CHECK(obstacle_term(0.75, cfg) == 0.0);
  CHECK(obstacle_term(2.0, cfg) == 0.0);
}

TEST_CASE("R1") {
  RewardConfig cfg;
  CHECK(reward_r1(5.0, 1.0, false, cfg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(reward_r1(0.0, 1.0, true, cfg) == 200.0);
  cfg.goal_bonus_enabled = false;
  CHECK(reward_r1(0.2, 2.0, true, cfg) == doctest::Approx(-0.04).epsilon(1e-15));
}

TEST_CASE("enlarged zones") {
  RewardConfig cfg;
  cfg.critical_radius = 0.5;
  cfg.safe_radius = 1.5;
  CHECK(obstacle_term(1.0, cfg) == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(obstacle_term(0.49, cfg) == -1.5);
}

TEST_CASE("R2") {
  CHECK(reward_r2(StepEvent::GoalReached) == 200.0);
  CHECK(reward_r2(StepEvent::Collided) == -100.0);
  CHECK(reward_r2(StepEvent::None) == -1.0);
}

TEST_CASE("dispatch") {
  RewardConfig cfg;
  cfg.variant = Variant::R2;
  StepResult r;
  r.dist_target = 4.0;
  r.dist_obs = 0.1;
  CHECK(reward(r, cfg) == -1.0);
  cfg.variant = Variant::R1;
  cfg.goal_bonus_enabled = false;
  r.event = StepEvent::GoalReached;
  r.dist_target = 0.2;
  r.dist_obs = 2.0;
  CHECK(reward(r, cfg) == doctest::Approx(-0.04).epsilon(1e-15));
}

TEST_CASE("monotone in both distances") {
  const RewardConfig cfg;
  for (double d = 0.0; d < 6.0; d += 0.25)
    CHECK(reward_r1(d + 0.1, 1.0, false, cfg) < reward_r1(d, 1.0, false, cfg));
  for (double o = 0.25; o + 0.05 < 0.75; o += 0.05)
    CHECK(obstacle_term(o + 0.05, cfg) > obstacle_term(o, cfg));
}

TEST_CASE("config validation") {
  RewardConfig cfg;
  cfg.critical_radius = 0.8;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  CHECK(parse_variant("R2") == Variant::R2);
  CHECK_THROWS(parse_variant("R3"));
}

}
