// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "enrol/core/tape.hpp"

namespace enrol {

/// Heavy-ball SGD: v <- momentum*v + g; w <- w - lr*v. Clears gradients.
/// Throws UsageError if a parameter has no gradient from the last backward.
void sgd_momentum_step(std::span<Parameter* const> params, Real lr, Real momentum);

void zero_grads(std::span<Parameter* const> params);

}  // namespace enrol
