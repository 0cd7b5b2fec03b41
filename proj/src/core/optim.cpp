// SPDX-License-Identifier: Apache-2.0
#include "enrol/core/optim.hpp"

#include <string>

#include "enrol/core/error.hpp"

namespace enrol {

void sgd_momentum_step(std::span<Parameter* const> params, Real lr, Real momentum) {
  if (!(lr > 0)) throw ConfigError("sgd: learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("sgd: momentum must lie in [0,1)");
  for (Parameter* p : params)
    if (!p->has_grad) throw UsageError("sgd: parameter '" + p->name + "' has no gradient");
  for (Parameter* p : params) {
    if (p->momentum.shape() != p->value.shape()) p->momentum = Tensor(p->value.shape(), 0);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->momentum[i] = momentum * p->momentum[i] + p->grad[i];
      p->value[i] -= lr * p->momentum[i];
    }
    p->zero_grad();
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace enrol
