#include "metanav/autodiff/adam.hpp"

#include <cmath>

namespace metanav::ad {

Adam::Adam(Eigen::Index size, Options options)
    : options_(options), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Vector& params, const Eigen::Ref<const Vector>& gradient) {
  if (gradient.size() != params.size() || params.size() != m_.size())
    throw ShapeError("Adam::step: size mismatch");
  ++t_;
  m_ = options_.beta1 * m_ + (1.0 - options_.beta1) * gradient;
  v_ = options_.beta2 * v_ + (1.0 - options_.beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  params.array() -= options_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + options_.eps);
}

}  // namespace metanav::ad
