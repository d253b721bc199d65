#include "metanav/setup.hpp"

#include "metanav/random.hpp"

namespace metanav {

namespace {
constexpr std::uint64_t kEvaluationBit = 1ULL << 63;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kEvalStream = 4;
}  // namespace

std::uint64_t training_task_seed(std::uint64_t run_seed, int iteration, int task_index) {
  return derive_seed(run_seed, {kTrainStream, static_cast<std::uint64_t>(iteration),
                                static_cast<std::uint64_t>(task_index)}) &
         ~kEvaluationBit;
}

std::uint64_t evaluation_task_seed(std::uint64_t run_seed, int episode) {
  return derive_seed(run_seed, {kEvalStream, static_cast<std::uint64_t>(episode)}) | kEvaluationBit;
}

}  // namespace metanav
