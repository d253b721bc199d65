#include <cstdio>
#include <deque>
#include <numeric>
#include <random>

#include "metanav/rewards.hpp"
#include "metanav/td3.hpp"

namespace metanav::td3 {

std::string td3_csv_header() {
  return "episode,env_step,return,moving_avg_return,critic1_loss,critic2_loss,goal_reached,collided";
}

std::string to_csv(const Td3MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%d,%d", row.episode, row.env_step,
                row.episode_return, row.moving_avg_return, row.critic1_loss, row.critic2_loss,
                row.goal_reached ? 1 : 0, row.collided ? 1 : 0);
  return buf;
}

std::vector<Td3MetricsRow> run_td3_training(const Td3Config& cfg, const TaskSetup& setup,
                                            std::uint64_t seed, Td3Sink& sink) {
  cfg.check();
  setup.reward.check();
  Agent agent(world::kObservationDim, world::kActionDim, cfg, derive_seed(seed, {10}));
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng rng(derive_seed(seed, {11}));
  std::uniform_real_distribution<double> uniform_action(-1.0, 1.0);

  std::vector<Td3MetricsRow> rows;
  std::deque<double> window;
  long episode = 0;

  auto new_episode = [&]() {
    const auto spec = world::sample_task(training_task_seed(seed, static_cast<int>(episode), 0),
                                         setup.task, setup.env);
    return world::reset(spec, setup.env);
  };
  auto [state, obs] = new_episode();
  world::ObservationVector x = world::flatten_observation(obs, state.spec.arena_half_extent, setup.env);
  double episode_return = 0.0;
  double loss1_sum = 0.0, loss2_sum = 0.0;
  long loss_count = 0;

  sink.on_checkpoint(0, agent.networks().actor);
  for (long t = 1; t <= cfg.total_steps; ++t) {
    Vector a(world::kActionDim);
    if (t <= static_cast<long>(cfg.prefill)) {
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = uniform_action(rng);
    } else {
      a = agent.act(x, cfg.exploration_sigma, rng);
    }
    auto [next, result] = world::step(state, {a[0], a[1]}, setup.env);
    const double r = rewards::reward(result, setup.reward);
    const world::ObservationVector x_next =
        world::flatten_observation(result.observation, state.spec.arena_half_extent, setup.env);
    buffer.push({x, a, r, x_next, result.event != world::StepEvent::None});
    episode_return += r;
    state = std::move(next);
    x = x_next;

    if (t > static_cast<long>(cfg.prefill) && buffer.size() >= cfg.batch_size) {
      try {
        const auto stats = agent.train_step(buffer, rng);
        loss1_sum += stats.losses.critic1;
        loss2_sum += stats.losses.critic2;
        ++loss_count;
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("env step " + std::to_string(t) + ": " + e.what());
      }
    }

    if (result.done) {
      ++episode;
      window.push_back(episode_return);
      if (static_cast<int>(window.size()) > cfg.moving_average_window) window.pop_front();
      Td3MetricsRow row;
      row.episode = episode;
      row.env_step = t;
      row.episode_return = episode_return;
      row.moving_avg_return =
          std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
      row.critic1_loss = loss_count ? loss1_sum / static_cast<double>(loss_count) : 0.0;
      row.critic2_loss = loss_count ? loss2_sum / static_cast<double>(loss_count) : 0.0;
      row.goal_reached = result.event == world::StepEvent::GoalReached;
      row.collided = result.event == world::StepEvent::Collided;
      rows.push_back(row);
      sink.on_row(row);

      episode_return = 0.0;
      loss1_sum = loss2_sum = 0.0;
      loss_count = 0;
      auto fresh = new_episode();
      state = std::move(fresh.state);
      x = world::flatten_observation(fresh.observation, state.spec.arena_half_extent, setup.env);
    }
    if (t % cfg.checkpoint_every == 0 || t == cfg.total_steps) sink.on_checkpoint(t, agent.networks().actor);
  }
  return rows;
}

}  // namespace metanav::td3
