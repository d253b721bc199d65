#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "metanav/world.hpp"
#include "oracles.hpp"

using namespace metanav::world;

namespace {

WorldSpec open_arena(double h = 5.0) {
  WorldSpec s;
  s.arena_half_extent = h;
  s.robot_start = {0.0, 0.0, 0.0};
  s.goal = {3.0, 3.0, 0.0};
  return s;
}

}  // namespace

TEST_SUITE("world") {

TEST_CASE("sample_task is a pure function of the seed") {
  TaskDistributionConfig cfg;
  CHECK(sample_task(7, cfg) == sample_task(7, cfg));
  CHECK_FALSE(sample_task(7, cfg) == sample_task(8, cfg));
}

TEST_CASE("sampled tasks satisfy placement invariants") {
  TaskDistributionConfig cfg;
  EnvParams env;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const WorldSpec s = sample_task(seed, cfg, env);
    CHECK(validate(s, env).empty());
    CHECK(s.obstacles.size() >= 1);
    CHECK(s.obstacles.size() <= 3);
    const double d = std::hypot(s.goal.x - s.robot_start.x, s.goal.y - s.robot_start.y);
    CHECK(d >= cfg.min_goal_distance - 1e-12);
    CHECK(d <= cfg.max_goal_distance + 1e-12);
  }
}

TEST_CASE("zero obstacles") {
  TaskDistributionConfig cfg;
  cfg.min_obstacles = cfg.max_obstacles = 0;
  EnvParams env;
  const WorldSpec s = sample_task(3, cfg, env);
  CHECK(s.obstacles.empty());
  CHECK(std::hypot(s.goal.x - s.robot_start.x, s.goal.y - s.robot_start.y) >=
        env.robot_radius + env.goal_radius);
}

TEST_CASE("fixed start keeps the start pose and varies the rest") {
  TaskDistributionConfig cfg;
  cfg.random_start = false;
  const WorldSpec first = sample_task(1, cfg);
  int goals_differ = 0;
  for (std::uint64_t seed = 2; seed <= 100; ++seed) {
    const WorldSpec s = sample_task(seed, cfg);
    CHECK(s.robot_start == first.robot_start);
    goals_differ += !(s.goal == first.goal);
  }
  CHECK(goals_differ == 99);
}

TEST_CASE("crowded arena is infeasible") {
  TaskDistributionConfig cfg;
  cfg.arena_half_extent = 1.0;
  cfg.min_obstacles = cfg.max_obstacles = 3;
  cfg.min_obstacle_radius = cfg.max_obstacle_radius = 0.9;
  CHECK_THROWS_AS(sample_task(1, cfg), InfeasibleTaskConfig);
}

TEST_CASE("reset") {
  const WorldSpec s = sample_task(11, {});
  const auto a = reset(s);
  const auto b = reset(s);
  CHECK(a.observation.robot_pose == s.robot_start);
  CHECK(a.observation.lidar == b.observation.lidar);
  CHECK(a.state.step_count == 0);
}

TEST_CASE("open arena lidar hits the walls") {
  WorldSpec s = open_arena(10.0);
  const LidarScan scan = lidar_scan({0, 0, 0}, s);
  CHECK((scan.array() == 5.0).all());

  s = open_arena(3.0);
  const LidarScan near = lidar_scan({0, 0, 0}, s);
  for (int i = 0; i < kLidarBeams; ++i) {
    const double a = beam_offset(i);
    const double expected = std::min(5.0, 3.0 / std::max(std::abs(std::cos(a)), std::abs(std::sin(a))));
    CHECK(near[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("circle ahead") {
  WorldSpec s = open_arena();
  s.obstacles = {{2.0, 0.0, 0.5}};
  const LidarScan scan = lidar_scan({0, 0, 0}, s);
  CHECK(scan[64] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(scan[128] == doctest::Approx(5.0));
  CHECK(beam_offset(0) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(beam_offset(128) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("lidar agrees with the segment oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4.5, 4.5);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (int k = 0; k < 50; ++k) {
    const WorldSpec s = sample_task(100 + k, {});
    const Pose2D p{u(rng), u(rng), ang(rng)};
    const auto ref = oracle::lidar(p, s, 5.0);
    const LidarScan got = lidar_scan(p, s);
    for (int i = 0; i < kLidarBeams; ++i) CHECK(std::abs(got[i] - ref[i]) < 1e-9);
  }
}

TEST_CASE("distances") {
  WorldSpec s = open_arena();
  s.obstacles = {{3.0, 4.0, 1.0}};
  CHECK(distances({0, 0, 0}, s).dist_obs == doctest::Approx(3.8).epsilon(1e-12));
  CHECK(distances(s.goal, s).dist_target == 0.0);
  s.obstacles.clear();
  CHECK(distances({0, 0, 0}, s).dist_obs == 50.0);
}

TEST_CASE("zero action only advances the clock") {
  const WorldSpec s = sample_task(2, {});
  auto [state, obs] = reset(s);
  auto out = step(state, {0.0, 0.0});
  CHECK(out.state.pose == state.pose);
  CHECK(out.state.step_count == 1);
}

TEST_CASE("driving into a circle collides near x = 1.3") {
  WorldSpec s = open_arena();
  s.goal = {-3.0, -3.0, 0.0};
  s.obstacles = {{2.0, 0.0, 0.5}};
  WorldState state = reset(s).state;
  StepResult last;
  int steps = 0;
  while (state.terminated == Termination::Running) {
    auto out = step(state, {1.0, 0.0});
    state = out.state;
    last = out.result;
    ++steps;
  }
  CHECK(state.terminated == Termination::Collided);
  CHECK(last.event == StepEvent::Collided);
  CHECK(last.done);
  // first step at or past x = 2 - 0.5 - 0.2
  CHECK(state.pose.x >= 1.3 - 1e-9);
  CHECK(state.pose.x < 1.4 + 1e-9);
  CHECK((steps == 13 || steps == 14));
  CHECK_THROWS_AS(step(state, {1.0, 0.0}), TerminatedStateError);
}

TEST_CASE("horizon") {
  WorldSpec s = open_arena();
  EnvParams env;
  WorldState state = reset(s, env).state;
  StepOutput out;
  for (int t = 0; t < env.horizon; ++t) {
    out = step(state, {0.0, 0.0}, env);
    state = out.state;
  }
  CHECK(state.terminated == Termination::HorizonExceeded);
  CHECK(out.result.done);
  CHECK(out.result.event == StepEvent::None);
}

TEST_CASE("goal reached") {
  WorldSpec s = open_arena();
  s.goal = {0.5, 0.0, 0.0};
  WorldState state = reset(s).state;
  auto out = step(state, {1.0, 0.0});
  out = step(out.state, {1.0, 0.0});
  CHECK(out.result.event == StepEvent::GoalReached);
  CHECK(out.state.terminated == Termination::GoalReached);
}

TEST_CASE("wall contact collides") {
  WorldSpec s = open_arena();
  s.robot_start = {4.5, 0.0, 0.0};
  WorldState state = reset(s).state;
  StepOutput out;
  do {
    out = step(state, {1.0, 0.0});
    state = out.state;
  } while (state.terminated == Termination::Running);
  CHECK(state.terminated == Termination::Collided);
  CHECK(state.pose.x >= 4.8 - 1e-9);
}

TEST_CASE("flattened observation") {
  WorldSpec s = open_arena(10.0);
  Observation o = make_observation({10.0, 10.0, std::numbers::pi / 2}, s);
  o.lidar.setConstant(5.0);
  const ObservationVector v = flatten_observation(o, 10.0);
  CHECK(v.size() == 135);
  CHECK((v.head(129).array() == 1.0).all());
  CHECK(v[129] == 1.0);
  CHECK(v[130] == 1.0);
  CHECK(v[131] == doctest::Approx(0.5));
  const Observation back = unflatten_observation(v, 10.0);
  CHECK(back.robot_pose.x == doctest::Approx(10.0));
  CHECK(back.lidar[0] == doctest::Approx(5.0));
}

TEST_CASE("angles wrap into [-pi, pi)") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(-std::numbers::pi));
  CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(wrap_angle(0.25) == 0.25);
}

TEST_CASE("world spec json round trip") {
  const WorldSpec s = sample_task(21, {});
  const nlohmann::json j = s;
  CHECK(j.get<WorldSpec>() == s);
}

}
