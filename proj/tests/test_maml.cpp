#include <doctest.h>

#include <cmath>
#include <random>

#include "metanav/maml.hpp"
#include "oracles.hpp"

using namespace metanav;
using namespace metanav::maml;

namespace {

ad::MlpShape small_shape() {
  return {world::kObservationDim, {8}, world::kActionDim, ad::Activation::ReLU,
          ad::Activation::Tanh};
}

TaskBatch random_batch(int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  TaskBatch b;
  b.observations = Matrix::NullaryExpr(rows, world::kObservationDim, [&] { return 0.3 * n(rng); });
  b.actions = Matrix::NullaryExpr(rows, world::kActionDim, [&] { return n(rng); });
  b.advantages = Vector::NullaryExpr(rows, [&] { return n(rng); });
  return b;
}

world::WorldSpec open_task() {
  world::WorldSpec s;
  s.robot_start = {-2.0, 0.0, 0.0};
  s.goal = {2.0, 0.0, 0.0};
  return s;
}

}  // namespace

TEST_SUITE("maml") {

TEST_CASE("gae spec example and degenerate cases") {
  Vector r(2), v = Vector::Zero(3);
  r << 1.0, 0.0;
  const Vector a = gae_advantages(r, v, 1.0, 1.0);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 0.0);

  Vector r3(3), v3(4);
  r3 << 1.0, -2.0, 0.5;
  v3 << 0.1, 0.2, -0.3, 0.0;
  const Vector delta = gae_advantages(r3, v3, 0.9, 0.0);
  for (int t = 0; t < 3; ++t) CHECK(delta[t] == r3[t] + 0.9 * v3[t + 1] - v3[t]);
  CHECK(gae_advantages(Vector::Zero(4), Vector::Zero(5), 0.99, 0.97).isZero());
  CHECK_THROWS(gae_advantages(r3, Vector::Zero(3), 0.9, 0.9));
}

TEST_CASE("gae matches the double sum") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const int T = 1 + k % 20;
    const Vector r = Vector::NullaryExpr(T, [&] { return n(rng); });
    const Vector v = Vector::NullaryExpr(T + 1, [&] { return n(rng); });
    const Vector got = gae_advantages(r, v, 0.97, 0.5);
    CHECK((got - oracle::gae(r, v, 0.97, 0.5)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("discounted returns") {
  Vector r(3);
  r << 1.0, 2.0, 3.0;
  const Vector g = discounted_returns(r, 0.5);
  CHECK(g[2] == 3.0);
  CHECK(g[1] == 3.5);
  CHECK(g[0] == 2.75);
}

TEST_CASE("baseline fits exactly linear data") {
  Trajectory t;
  const int T = 40;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  t.observations = Matrix::NullaryExpr(T, 3, [&] { return u(rng); });
  t.actions = Matrix::Zero(T, 2);
  Vector w_true = Vector::NullaryExpr(10, [&] { return u(rng); });
  Trajectory probe = t;
  probe.rewards = Vector::Zero(T);
  const Matrix f = baseline_features(probe, 50);
  const Vector returns = f * w_true;
  // rewards whose undiscounted returns are `returns`
  t.rewards.resize(T);
  for (int i = 0; i < T; ++i) t.rewards[i] = returns[i] - (i + 1 < T ? returns[i + 1] : 0.0);
  const BaselineWeights w = fit_linear_baseline({t}, 1.0, 50, 1e-12);
  CHECK((f * w.weights - returns).cwiseAbs().maxCoeff() < 1e-8);

  t.rewards.setZero();
  CHECK(fit_linear_baseline({t}, 0.99, 50).weights.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fit_linear_baseline({t}, 0.99, 50, 1e12).weights.norm() < 1e-6);
}

TEST_CASE("inner loss definitions") {
  const auto shape = small_shape();
  const ad::GaussianPolicy pol = ad::make_gaussian_policy(shape, 5);
  Tensor theta = Tensor::vector(pol.flat(), true);

  TaskBatch zero = random_batch(6, 2);
  zero.advantages.setZero();
  Tensor l0 = inner_loss(theta, shape, zero);
  CHECK(l0.item() == 0.0);
  CHECK(ad::grad(l0, theta).value().isZero());

  TaskBatch one = random_batch(1, 4);
  one.advantages.setOnes();
  const double lp = ad::gaussian_log_prob(pol, Tensor::matrix(one.observations),
                                          Tensor::matrix(one.actions)).item();
  CHECK(inner_loss(theta, shape, one).item() == doctest::Approx(-lp).epsilon(1e-14));
}

TEST_CASE("alpha = 0 leaves theta unchanged") {
  const auto shape = small_shape();
  const ad::GaussianPolicy pol = ad::make_gaussian_policy(shape, 5);
  MamlConfig cfg;
  cfg.inner_lr = 0.0;
  Tensor theta = Tensor::vector(pol.flat(), true);
  const TaskBatch b = random_batch(5, 9);
  CHECK(inner_adapt(theta, shape, b, cfg).value() == pol.flat());
}

TEST_CASE("meta objective collapses and sums") {
  const auto shape = small_shape();
  const ad::GaussianPolicy pol = ad::make_gaussian_policy(shape, 6);
  MamlConfig cfg;
  cfg.inner_lr = 0.0;
  Tensor theta = Tensor::vector(pol.flat(), true);
  AdaptedTask task;
  task.pre_batch = random_batch(4, 1);
  task.post_batch = random_batch(4, 2);
  task.theta_prime = theta.detach();
  const double single = meta_objective(theta, {task}, shape, cfg).item();
  CHECK(single == doctest::Approx(inner_loss(theta, shape, task.post_batch).item()).epsilon(1e-14));
  cfg.inner_lr = 0.1;
  const double one = meta_objective(theta, {task}, shape, cfg).item();
  CHECK(meta_objective(theta, {task, task}, shape, cfg).item() == doctest::Approx(2 * one).epsilon(1e-14));
}

TEST_CASE("meta gradient matches finite differences through the inner step") {
  const ad::MlpShape shape{world::kObservationDim, {4}, world::kActionDim, ad::Activation::Tanh,
                           ad::Activation::Tanh};
  const ad::GaussianPolicy pol = ad::make_gaussian_policy(shape, 12, -0.3);
  MamlConfig cfg;
  cfg.inner_lr = 0.3;
  AdaptedTask task;
  task.pre_batch = random_batch(5, 7);
  task.post_batch = random_batch(5, 8);
  auto f = [&](const Vector& x) {
    return meta_objective(Tensor::vector(x, true), {task}, shape, cfg).item();
  };
  Tensor theta = Tensor::vector(pol.flat(), true);
  const Vector g = ad::grad(meta_objective(theta, {task}, shape, cfg), theta).value();
  CHECK(oracle::rel_error(g, oracle::fd_gradient(f, pol.flat(), 1e-5)) < 1e-5);
}

TEST_CASE("conjugate gradient solves an SPD system") {
  Matrix a(3, 3);
  a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  Vector b(3);
  b << 1, 2, 3;
  const Vector x = conjugate_gradient([&](const Vector& v) { return Vector(a * v); }, b, 10);
  CHECK((a * x - b).norm() < 1e-8);
}

TEST_CASE("zero meta gradient keeps theta") {
  Vector theta(2);
  theta << 0.5, -0.5;
  auto flat = [](const Tensor& t) { return scale(sum(t), 0.0); };
  const auto r = trust_region_step(theta, flat, flat, {});
  CHECK_FALSE(r.accepted);
  CHECK(r.theta == theta);
}

TEST_CASE("trust region respects the KL bound on a quadratic") {
  Vector theta = Vector::Zero(3);
  Vector target(3);
  target << 1.0, -2.0, 0.5;
  auto surrogate = [&](const Tensor& t) { return sum(square(sub(t, Tensor::vector(target)))); };
  auto kl = [&](const Tensor& t) { return scale(sum(square(sub(t, Tensor::vector(theta)))), 2.0); };
  TrustRegionConfig cfg;
  cfg.cg_damping = 0.0;
  const auto r = trust_region_step(theta, surrogate, kl, cfg);
  CHECK(r.accepted);
  CHECK(r.kl <= cfg.max_kl);
  CHECK(r.surrogate_after < r.surrogate_before);
}

TEST_CASE("rollouts are seeded") {
  const auto shape = small_shape();
  const ad::GaussianPolicy pol = ad::make_gaussian_policy(shape, 2);
  const rewards::RewardConfig rc;
  const world::EnvParams env;
  CHECK(collect_trajectories(pol, open_task(), 0, 50, rc, env, 1).empty());
  const auto a = collect_trajectories(pol, open_task(), 2, 50, rc, env, 1);
  const auto b = collect_trajectories(pol, open_task(), 2, 50, rc, env, 1);
  REQUIRE(a.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(a[k].observations == b[k].observations);
    CHECK(a[k].actions == b[k].actions);
    CHECK(a[k].rewards == b[k].rewards);
  }
}

TEST_CASE("near-deterministic zero policy stands still under R2") {
  const auto shape = small_shape();
  ad::GaussianPolicy pol(ad::ParamVector(shape), Vector::Constant(2, std::log(1e-6)));
  rewards::RewardConfig rc;
  rc.variant = rewards::Variant::R2;
  const auto trajs = collect_trajectories(pol, open_task(), 2, 300, rc, {}, 4);
  for (const auto& t : trajs) {
    CHECK(t.length() == 300);
    CHECK(t.total_return() == -300.0);
    CHECK(t.terminal_event == world::Termination::HorizonExceeded);
    CHECK(t.actions.cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("zero iterations writes only the initial checkpoint") {
  struct Sink : MamlSink {
    int rows = 0, checkpoints = 0;
    void on_row(const MamlMetricsRow&) override { ++rows; }
    void on_checkpoint(int, const ad::GaussianPolicy&) override { ++checkpoints; }
  } sink;
  MamlConfig cfg;
  cfg.meta_iterations = 0;
  CHECK(run_meta_training(cfg, {}, 1, sink).empty());
  CHECK(sink.rows == 0);
  CHECK(sink.checkpoints == 1);
}

TEST_CASE("metrics csv") {
  MamlMetricsRow row;
  row.meta_iteration = 3;
  row.mean_return_pre = -1.5;
  CHECK(maml_csv_header() == "meta_iteration,mean_return_pre,mean_return_post,mean_kl,goal_rate,collision_rate");
  CHECK(to_csv(row).rfind("3,-1.5,0,0,0,0", 0) == 0);
}

}
