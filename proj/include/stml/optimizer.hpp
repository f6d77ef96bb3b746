#pragma once

#include <cstddef>
#include <vector>

#include "stml/model.hpp"

namespace stml {

/// Adam over the flat student parameter vector (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit Adam(std::size_t parameter_count) : first_(parameter_count, 0.0), second_(parameter_count, 0.0) {}

  /// One bias-corrected step of size `learning_rate` on `params`.
  void step(ModelParams& params, const ParamGradient& grad, double learning_rate);

  std::size_t steps() const { return steps_; }

 private:
  std::vector<double> first_;
  std::vector<double> second_;
  std::size_t steps_ = 0;
};

/// base * (1 + cos(pi * progress)) / 2 for progress in [0, 1].
double cosine_decay(double base, double progress);

}  // namespace stml
