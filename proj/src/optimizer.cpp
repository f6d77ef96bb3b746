#include "stml/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "stml/error.hpp"

namespace stml {

void Adam::step(ModelParams& params, const ParamGradient& grad, double learning_rate) {
  std::vector<double> theta = params.flatten();
  const std::vector<double> g = grad.flatten();
  if (theta.size() != first_.size() || g.size() != first_.size())
    throw ShapeError("Adam: parameter count changed between steps");
  ++steps_;
  const double correct1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
  const double correct2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    first_[i] = kBeta1 * first_[i] + (1.0 - kBeta1) * g[i];
    second_[i] = kBeta2 * second_[i] + (1.0 - kBeta2) * g[i] * g[i];
    const double m_hat = first_[i] / correct1;
    const double v_hat = second_[i] / correct2;
    theta[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kEpsilon);
  }
  params = ModelParams::unflatten(params.dims, params.role, theta);
}

double cosine_decay(double base, double progress) {
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace stml
