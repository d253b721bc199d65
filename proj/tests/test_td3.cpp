#include <doctest.h>

#include "metanav/td3.hpp"

using namespace metanav;
using namespace metanav::td3;

namespace {

Transition tagged(double tag) {
  return {Vector::Constant(1, tag), Vector::Zero(1), tag, Vector::Zero(1), false};
}

/// Critic whose output is the constant `value` (zero weights, output bias set).
ParamVector constant_critic(int in, double value) {
  ad::MlpShape shape{in, {3}, 1, ad::Activation::ReLU, ad::Activation::Identity};
  ParamVector p(shape);
  p.values[p.size() - 1] = value;
  return p;
}

Batch toy_batch(int n) {
  Batch b;
  b.s = Matrix::Zero(n, 1);
  b.a = Matrix::Zero(n, 1);
  b.r = Vector::Zero(n);
  b.s_next = Matrix::Zero(n, 1);
  b.done = Vector::Zero(n);
  return b;
}

}  // namespace

TEST_SUITE("td3") {

TEST_CASE("replay buffer is a FIFO ring") {
  ReplayBuffer buf(3);
  for (int i = 1; i <= 4; ++i) buf.push(tagged(i));
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).r == 2.0);
  CHECK(buf.at(1).r == 3.0);
  CHECK(buf.at(2).r == 4.0);
}

TEST_CASE("sampling is seeded and refuses an under-filled buffer") {
  ReplayBuffer buf(10);
  for (int i = 0; i < 5; ++i) buf.push(tagged(i));
  Rng a(3), b(3);
  CHECK(buf.sample_indices(4, a) == buf.sample_indices(4, b));
  CHECK_THROWS_AS(buf.sample(6, a), std::out_of_range);
}

TEST_CASE("actions") {
  ad::MlpShape shape{4, {5}, 2, ad::Activation::ReLU, ad::Activation::Tanh};
  const ParamVector zero(shape);
  Rng rng(1);
  CHECK(select_action(zero, Vector::Ones(4), 0.0, rng).isZero());
  const ParamVector actor = ad::init_params(shape, 2);
  const Vector mu = ad::mlp_apply(actor, Matrix::Ones(1, 4)).row(0).transpose();
  CHECK(select_action(actor, Vector::Ones(4), 0.0, rng) == mu);
  for (int i = 0; i < 100; ++i)
    CHECK(select_action(actor, Vector::Ones(4), 5.0, rng).cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("critic target takes the smaller critic and masks terminals") {
  Td3Config cfg;
  ad::MlpShape actor_shape{1, {3}, 1, ad::Activation::ReLU, ad::Activation::Tanh};
  const ParamVector actor(actor_shape);
  Batch b = toy_batch(2);
  b.r << 0.0, 5.0;
  b.done << 0.0, 1.0;
  const Matrix noise = Matrix::Zero(2, 1);
  const Vector y = critic_target(b, actor, constant_critic(2, 1.0), constant_critic(2, 2.0), cfg, noise);
  CHECK(y[0] == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(y[1] == 5.0);
}

TEST_CASE("noise clip bounds the smoothing") {
  Td3Config cfg;
  cfg.noise_clip = 0.0;
  ad::MlpShape actor_shape{1, {}, 1, ad::Activation::ReLU, ad::Activation::Tanh};
  ParamVector actor(actor_shape);
  // critic Q = a
  ad::MlpShape critic_shape{2, {}, 1, ad::Activation::ReLU, ad::Activation::Identity};
  Vector cw(3);
  cw << 0.0, 1.0, 0.0;
  const ParamVector critic(critic_shape, cw);
  Batch b = toy_batch(1);
  Rng rng(4);
  CHECK(critic_target(b, actor, critic, critic, cfg, rng)[0] == 0.0);
  cfg.noise_clip = 0.5;
  const Vector y = critic_target(b, actor, critic, critic, cfg, Matrix::Constant(1, 1, 3.0));
  CHECK(y[0] == doctest::Approx(0.99 * 0.5));
}

TEST_CASE("scalar toy critic SGD step") {
  ParamVector c1 = constant_critic(2, 0.0), c2 = constant_critic(2, 0.0);
  const Batch b = toy_batch(4);
  SgdOptimizer o1(0.5), o2(0.5);
  const auto losses = update_critics(c1, c2, b, Vector::Ones(4), o1, o2);
  CHECK(losses.critic1 == 1.0);
  CHECK(c1.values[c1.size() - 1] == doctest::Approx(1.0).epsilon(1e-15));
  const Vector before = c1.values;
  update_critics(c1, c2, b, Vector::Ones(4), o1, o2);
  CHECK(c1.values == before);
}

TEST_CASE("soft update") {
  Vector target = Vector::Zero(1), source = Vector::Ones(1);
  soft_update(target, source, 0.005);
  CHECK(target[0] == doctest::Approx(0.005).epsilon(1e-15));
  Vector t1 = Vector::Zero(3), s1 = Vector::Ones(3);
  soft_update(t1, s1, 1.0);
  CHECK(t1 == s1);
  Vector t0 = Vector::Zero(3);
  soft_update(t0, s1, 0.0);
  CHECK(t0.isZero());
}

TEST_CASE("actor and targets move only on delayed updates") {
  Td3Config cfg;
  cfg.hidden_dims = {8};
  Agent agent(3, 1, cfg, 5);
  Batch b;
  b.s = Matrix::Random(6, 3);
  b.a = Matrix::Random(6, 1);
  b.r = Vector::Zero(6);
  b.s_next = b.s;
  b.done = Vector::Zero(6);
  const Networks before = agent.networks();
  CHECK_FALSE(agent.update_actor_and_targets(b, 1));
  CHECK(agent.networks().actor.values == before.actor.values);
  CHECK(agent.networks().actor_target.values == before.actor_target.values);
  CHECK(agent.update_actor_and_targets(b, 2));
  CHECK(agent.networks().actor.values != before.actor.values);
  const Vector expected = 0.995 * before.actor_target.values + 0.005 * agent.networks().actor.values;
  CHECK((agent.networks().actor_target.values - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("config validation") {
  Td3Config cfg;
  cfg.prefill = cfg.buffer_capacity + 1;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = {};
  cfg.tau = 1.5;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}

TEST_CASE("prefill-only run never trains") {
  Td3Config cfg;
  cfg.buffer_capacity = 400;
  cfg.prefill = 400;
  cfg.total_steps = 400;
  cfg.hidden_dims = {8};
  cfg.checkpoint_every = 400;
  struct Sink : Td3Sink {
    std::vector<Td3MetricsRow> rows;
    void on_row(const Td3MetricsRow& r) override { rows.push_back(r); }
  } sink;
  const auto rows = run_td3_training(cfg, {}, 3, sink);
  CHECK(rows.size() == sink.rows.size());
  for (const auto& r : rows) {
    CHECK(r.critic1_loss == 0.0);
    CHECK(r.critic2_loss == 0.0);
  }
}

}
