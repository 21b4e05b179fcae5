#include "isilab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "isilab/errors.hpp"

namespace isilab {

OptimizerState make_optimizer(double lr) {
  OptimizerState state;
  state.lr = lr;
  return state;
}

void adamw_step(std::vector<NamedParam>& params, OptimizerState& state) {
  for (const auto& p : params)
    for (double g : p.value.node->grad)
      if (!std::isfinite(g))
        throw NonFiniteGradient("non-finite gradient in parameter " + p.name);

  state.m.resize(params.size());
  state.v.resize(params.size());
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& node = *params[i].value.node;
    if (node.grad.empty()) continue;  // never reached by a backward pass
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.empty()) {
      m.assign(node.values.size(), 0.0);
      v.assign(node.values.size(), 0.0);
    }
    for (std::size_t t = 0; t < node.values.size(); ++t) {
      const double g = node.grad[t];
      m[t] = state.beta1 * m[t] + (1.0 - state.beta1) * g;
      v[t] = state.beta2 * v[t] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[t] / bc1;
      const double v_hat = v[t] / bc2;
      node.values[t] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) +
                                    state.weight_decay * node.values[t]);
    }
    std::fill(node.grad.begin(), node.grad.end(), 0.0);
  }
}

double exp_lr(double lr0, double gamma, std::int64_t epoch) {
  return lr0 * std::pow(gamma, static_cast<double>(epoch));
}

}  // namespace isilab
