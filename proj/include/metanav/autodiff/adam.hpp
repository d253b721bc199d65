#pragma once

#include "metanav/autodiff/tensor.hpp"

namespace metanav::ad {

/// Adaptive-moment optimizer over a flat parameter column.
class Adam {
 public:
  struct Options {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(Eigen::Index size, Options options);

  /// params -= lr * m_hat / (sqrt(v_hat) + eps)
  void step(Vector& params, const Eigen::Ref<const Vector>& gradient);

  long steps_taken() const { return t_; }
  const Options& options() const { return options_; }

 private:
  Options options_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace metanav::ad
