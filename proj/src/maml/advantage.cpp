#include <cmath>

#include "metanav/maml.hpp"

namespace metanav::maml {

Matrix baseline_features(const Trajectory& traj, int horizon) {
  const Eigen::Index T = traj.length();
  const Eigen::Index d = traj.observations.cols();
  Matrix f(T, 2 * d + 4);
  f.leftCols(d) = traj.observations;
  f.middleCols(d, d) = traj.observations.array().square().matrix();
  for (Eigen::Index t = 0; t < T; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(horizon);
    f(t, 2 * d) = s;
    f(t, 2 * d + 1) = s * s;
    f(t, 2 * d + 2) = s * s * s;
    f(t, 2 * d + 3) = 1.0;
  }
  return f;
}

BaselineWeights fit_linear_baseline(const std::vector<Trajectory>& trajs, double gamma,
                                    int horizon, double ridge) {
  if (trajs.empty()) throw std::invalid_argument("fit_linear_baseline: no trajectories");
  Eigen::Index rows = 0;
  for (const auto& t : trajs) rows += t.length();
  const Eigen::Index width = 2 * trajs.front().observations.cols() + 4;
  Matrix features(rows, width);
  Vector targets(rows);
  Eigen::Index r = 0;
  for (const auto& t : trajs) {
    if (t.length() == 0) continue;
    features.middleRows(r, t.length()) = baseline_features(t, horizon);
    targets.segment(r, t.length()) = discounted_returns(t.rewards, gamma);
    r += t.length();
  }

  const Matrix gram = features.transpose() * features;
  const Vector rhs = features.transpose() * targets;
  double reg = ridge;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix a = gram;
    a.diagonal().array() += reg;
    Vector w = a.ldlt().solve(rhs);
    if (w.allFinite()) return {w, reg};
    reg = reg > 0.0 ? reg * 10.0 : 1e-8;
  }
  return {Vector::Zero(width), reg};
}

Vector baseline_values(const BaselineWeights& w, const Trajectory& traj, int horizon) {
  Vector v = Vector::Zero(traj.length() + 1);
  if (traj.length() > 0) v.head(traj.length()) = baseline_features(traj, horizon) * w.weights;
  return v;
}

TaskBatch make_batch(const std::vector<Trajectory>& trajs, const MamlConfig& cfg, int horizon) {
  Eigen::Index rows = 0;
  for (const auto& t : trajs) rows += t.length();
  TaskBatch batch;
  batch.observations.resize(rows, trajs.empty() ? world::kObservationDim : trajs.front().observations.cols());
  batch.actions.resize(rows, trajs.empty() ? world::kActionDim : trajs.front().actions.cols());
  batch.advantages.resize(rows);
  if (rows == 0) return batch;

  const BaselineWeights w = fit_linear_baseline(trajs, cfg.gamma, horizon, cfg.baseline_ridge);
  Eigen::Index r = 0;
  for (const auto& t : trajs) {
    const Eigen::Index T = t.length();
    if (T == 0) continue;
    batch.observations.middleRows(r, T) = t.observations;
    batch.actions.middleRows(r, T) = t.actions;
    batch.advantages.segment(r, T) =
        gae_advantages(t.rewards, baseline_values(w, t, horizon), cfg.gamma, cfg.gae_lambda);
    r += T;
  }
  if (cfg.normalize_advantages) {
    const double mu = batch.advantages.mean();
    const double sd = std::sqrt((batch.advantages.array() - mu).square().mean());
    batch.advantages = ((batch.advantages.array() - mu) / (sd + 1e-8)).matrix();
  }
  return batch;
}

}  // namespace metanav::maml
