// SPDX-License-Identifier: Apache-2.0
//
// Cross-entropy plus the gated manifold discrepancy
//   Dist = relu(gate) * KL(p_epk || p_dlm)
// with gate = l_dlm - l_epk (orientation rules) or l_epk - l_dlm (as_written),
// l = per-sample cross-entropy against the true label. The gate and p_epk are
// constants under differentiation.
#pragma once

#include <optional>
#include <span>
#include <string>

#include "enrol/core/tape.hpp"

namespace enrol::train {

enum class GateOrientation { rules, as_written };

std::string to_string(GateOrientation o);
GateOrientation parse_gate_orientation(const std::string& text);

struct DiscrepancyTerms {
  double gate = 0;  // relu'd gate factor
  double kl = 0;
  double dist = 0;
};

/// Scalar evaluation for one sample. Rows must be distributions (to 1e-6) and
/// `y` one-hot, all of the same length >= 2; InputError otherwise.
DiscrepancyTerms manifold_discrepancy(std::span<const double> p_epk, std::span<const double> p_dlm,
                                      std::span<const double> y, GateOrientation orientation);

/// Per-sample Dist [N] on the tape of `p_dlm`; gradient reaches p_dlm only.
Var manifold_discrepancy(Var p_dlm, const Tensor& p_epk, const Tensor& labels,
                         GateOrientation orientation);

struct LossBreakdown {
  double ce = 0;
  double dist = 0;
  double total = 0;
};

struct Objective {
  Var total;
  LossBreakdown parts;
};

/// Baseline objective: mean cross-entropy of softmax(logits).
Objective baseline_objective(Var logits, const Tensor& labels);

/// mean CE + lambda * mean Dist. With lambda == 0 the discrepancy is never
/// evaluated and the result is the baseline objective node for node.
/// `p_epk` may be empty only when lambda == 0 (TrainingError otherwise).
Objective enrol_batch_objective(Var logits, const Tensor& labels, const std::optional<Tensor>& p_epk,
                                double lambda, GateOrientation orientation);

}  // namespace enrol::train
