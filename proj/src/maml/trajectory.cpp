#include <cstdio>
#include <vector>

#include "metanav/maml.hpp"
#include "metanav/random.hpp"

namespace metanav::maml {

void MamlConfig::check() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("maml config: ") + what); };
  if (meta_iterations < 0) fail("meta_iterations must be >= 0");
  if (meta_batch_size < 1) fail("meta_batch_size must be >= 1");
  if (trajectories_per_task < 1) fail("trajectories_per_task must be >= 1");
  if (!(inner_lr > 0.0)) fail("inner_lr must be > 0");
  if (!(kl_bound > 0.0)) fail("kl_bound must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (inner_steps < 1) fail("inner_steps must be >= 1");
  if (cg_iterations < 1) fail("cg_iterations must be >= 1");
  if (cg_damping < 0.0) fail("cg_damping must be >= 0");
  if (line_search_backtracks < 1) fail("line_search_backtracks must be >= 1");
  if (!(line_search_ratio > 0.0 && line_search_ratio < 1.0)) fail("line_search_ratio must lie in (0, 1)");
  if (baseline_ridge < 0.0) fail("baseline_ridge must be >= 0");
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
}

std::vector<Trajectory> collect_trajectories(const ad::GaussianPolicy& policy,
                                             const world::WorldSpec& task, int K, int horizon,
                                             const rewards::RewardConfig& reward_cfg,
                                             const world::EnvParams& env, std::uint64_t seed) {
  std::vector<Trajectory> out;
  if (K <= 0) return out;
  out.reserve(static_cast<std::size_t>(K));
  world::EnvParams params = env;
  params.horizon = horizon;
  const double h = task.arena_half_extent;

  std::vector<double> obs_buf, act_buf, rew_buf;
  for (int k = 0; k < K; ++k) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    auto [state, obs] = world::reset(task, params);
    obs_buf.clear();
    act_buf.clear();
    rew_buf.clear();
    world::ObservationVector x = world::flatten_observation(obs, h, params);
    while (state.terminated == world::Termination::Running) {
      Vector a = ad::sample_action(policy, x, rng);
      auto [next, result] = world::step(state, {a[0], a[1]}, params);
      obs_buf.insert(obs_buf.end(), x.data(), x.data() + x.size());
      act_buf.insert(act_buf.end(), a.data(), a.data() + a.size());
      rew_buf.push_back(rewards::reward(result, reward_cfg));
      state = std::move(next);
      x = world::flatten_observation(result.observation, h, params);
    }
    const auto T = static_cast<Eigen::Index>(rew_buf.size());
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Trajectory traj;
    traj.observations = Eigen::Map<const RowMajor>(obs_buf.data(), T, world::kObservationDim);
    traj.actions = Eigen::Map<const RowMajor>(act_buf.data(), T, world::kActionDim);
    traj.rewards = Eigen::Map<const Vector>(rew_buf.data(), T);
    traj.terminal_event = state.terminated;
    out.push_back(std::move(traj));
  }
  return out;
}

std::string maml_csv_header() {
  return "meta_iteration,mean_return_pre,mean_return_post,mean_kl,goal_rate,collision_rate";
}

std::string to_csv(const MamlMetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g", row.meta_iteration,
                row.mean_return_pre, row.mean_return_post, row.mean_kl, row.goal_rate,
                row.collision_rate);
  return buf;
}

}  // namespace metanav::maml
