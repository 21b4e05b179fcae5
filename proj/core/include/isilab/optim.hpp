#pragma once

#include <cstdint>
#include <vector>

#include "isilab/nn.hpp"

namespace isilab {

struct OptimizerState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;  // first moments, parallel to the parameter list
  std::vector<std::vector<double>> v;  // second moments
};

OptimizerState make_optimizer(double lr);

// One decoupled-weight-decay update over every parameter whose gradient has
// been populated by a backward pass; parameters a backward pass never reached
// are left untouched. Gradients are zeroed here and nowhere else.
// Throws NonFiniteGradient before touching any state if a gradient is not finite.
void adamw_step(std::vector<NamedParam>& params, OptimizerState& state);

double exp_lr(double lr0, double gamma, std::int64_t epoch);

}  // namespace isilab
