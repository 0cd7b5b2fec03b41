// SPDX-License-Identifier: Apache-2.0
#include "enrol/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "enrol/core/error.hpp"

namespace enrol {

Tensor finite_difference_gradient(const std::function<Real(const Tensor&)>& f, const Tensor& x,
                                  Real h) {
  Tensor grad(x.shape(), 0);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real orig = probe[i];
    probe[i] = orig + h;
    const Real up = f(probe);
    probe[i] = orig - h;
    const Real down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

Real max_relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_relative_error: shape mismatch");
  Real worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real denom = std::max({Real(1e-4), std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace enrol
