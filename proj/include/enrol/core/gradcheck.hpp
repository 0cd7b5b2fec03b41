// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "enrol/core/tensor.hpp"

namespace enrol {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every element.
Tensor finite_difference_gradient(const std::function<Real(const Tensor&)>& f, const Tensor& x,
                                  Real h = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1e-4). The floor keeps exact zeros
/// from turning finite-difference round-off into a large ratio.
Real max_relative_error(const Tensor& a, const Tensor& b);

}  // namespace enrol
