#pragma once

#include <cstdint>

#include "metanav/rewards.hpp"
#include "metanav/world.hpp"

namespace metanav {

/// Everything that defines the task family an agent trains on.
struct TaskSetup {
  world::TaskDistributionConfig task;
  world::EnvParams env;
  rewards::RewardConfig reward;
};

/// Seeds for training tasks never collide with evaluation seeds (top bit).
std::uint64_t training_task_seed(std::uint64_t run_seed, int iteration, int task_index);
std::uint64_t evaluation_task_seed(std::uint64_t run_seed, int episode);

}  // namespace metanav
