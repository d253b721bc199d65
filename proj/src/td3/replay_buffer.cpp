#include <random>
#include <stdexcept>

#include "metanav/td3.hpp"

namespace metanav::td3 {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  storage_[head_] = std::move(t);
  head_ = (head_ + 1) % storage_.size();
  if (size_ < storage_.size()) ++size_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index past the stored range");
  const std::size_t oldest = size_ < storage_.size() ? 0 : head_;
  return storage_[(oldest + i) % storage_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (size_ < n || size_ == 0)
    throw std::out_of_range("ReplayBuffer::sample: requested " + std::to_string(n) +
                            " transitions from a buffer holding " + std::to_string(size_));
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(n, rng)) out.push_back(at(i));
  return out;
}

Batch stack(const std::vector<Transition>& transitions) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  if (n == 0) return b;
  const Eigen::Index ds = transitions.front().s.size();
  const Eigen::Index da = transitions.front().a.size();
  b.s.resize(n, ds);
  b.a.resize(n, da);
  b.r.resize(n);
  b.s_next.resize(n, ds);
  b.done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = transitions[static_cast<std::size_t>(i)];
    b.s.row(i) = t.s.transpose();
    b.a.row(i) = t.a.transpose();
    b.r[i] = t.r;
    b.s_next.row(i) = t.s_next.transpose();
    b.done[i] = t.done ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace metanav::td3
