// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "enrol/core/tensor.hpp"

namespace enrol::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, Real lo = -2, Real hi = 2) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape), 0);
  for (Real& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

// Moves values away from the relu kink at zero.
inline void nudge_from_zero(Tensor& t, Real margin = 1e-3) {
  for (Real& v : t.data())
    if (v > -margin && v < margin) v = v < 0 ? -0.5 : 0.5;
}

}  // namespace enrol::testing
