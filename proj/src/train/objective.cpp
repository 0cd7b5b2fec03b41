// SPDX-License-Identifier: Apache-2.0
#include "enrol/train/objective.hpp"

#include <algorithm>
#include <cmath>

#include "enrol/core/error.hpp"
#include "enrol/core/ops.hpp"

namespace enrol::train {
namespace {

void check_distribution(std::span<const double> p, const char* what) {
  double s = 0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0) throw InputError(std::string(what) + " has a negative or non-finite entry");
    s += v;
  }
  if (std::abs(s - 1) > 1e-6) throw InputError(std::string(what) + " does not sum to 1");
}

double gate_argument(double l_epk, double l_dlm, GateOrientation o) {
  return o == GateOrientation::rules ? l_dlm - l_epk : l_epk - l_dlm;
}

}  // namespace

std::string to_string(GateOrientation o) { return o == GateOrientation::rules ? "rules" : "as_written"; }

GateOrientation parse_gate_orientation(const std::string& text) {
  if (text == "rules") return GateOrientation::rules;
  if (text == "as_written") return GateOrientation::as_written;
  throw ConfigError("unknown gate_orientation '" + text + "' (expected rules or as_written)");
}

DiscrepancyTerms manifold_discrepancy(std::span<const double> p_epk, std::span<const double> p_dlm,
                                      std::span<const double> y, GateOrientation orientation) {
  if (p_epk.size() != p_dlm.size() || p_epk.size() != y.size() || y.size() < 2)
    throw InputError("manifold_discrepancy: rows must share a length >= 2");
  check_distribution(p_epk, "p_epk");
  check_distribution(p_dlm, "p_dlm");
  std::size_t hot = y.size(), ones = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] == 1) {
      hot = k;
      ++ones;
    } else if (y[k] != 0) {
      throw InputError("manifold_discrepancy: y must be one-hot");
    }
  }
  if (ones != 1) throw InputError("manifold_discrepancy: y must be one-hot");
  const double l_epk = -std::log(std::max(p_epk[hot], static_cast<double>(ops::kProbFloor)));
  const double l_dlm = -std::log(std::max(p_dlm[hot], static_cast<double>(ops::kProbFloor)));
  DiscrepancyTerms t;
  t.gate = std::max(0.0, gate_argument(l_epk, l_dlm, orientation));
  for (std::size_t k = 0; k < p_epk.size(); ++k)
    if (p_epk[k] > 0)
      t.kl += p_epk[k] * std::log(p_epk[k] / std::max(p_dlm[k], static_cast<double>(ops::kProbFloor)));
  t.kl = std::max(t.kl, 0.0);
  t.dist = t.gate * t.kl;
  return t;
}

Var manifold_discrepancy(Var p_dlm, const Tensor& p_epk, const Tensor& labels, GateOrientation orientation) {
  if (p_epk.shape() != p_dlm.shape())
    throw ShapeError("manifold_discrepancy: p_epk " + shape_string(p_epk.shape()) + " vs p_dlm " +
                     shape_string(p_dlm.shape()));
  const auto l_epk = ops::per_sample_cross_entropy(p_epk, labels);
  const auto l_dlm = ops::per_sample_cross_entropy(p_dlm.value(), labels);
  Tensor gate(Shape{l_epk.size()}, 0);
  for (std::size_t i = 0; i < l_epk.size(); ++i)
    gate[i] = std::max(Real(0), static_cast<Real>(gate_argument(l_epk[i], l_dlm[i], orientation)));
  Var teacher = p_dlm.tape().constant(p_epk);
  return ops::mul_const(ops::kl_divergence(teacher, p_dlm), gate);
}

Objective baseline_objective(Var logits, const Tensor& labels) {
  Var ce = ops::cross_entropy(ops::softmax(logits), labels);
  Objective o{ce, {}};
  o.parts.ce = ce.value().item();
  o.parts.total = o.parts.ce;
  return o;
}

Objective enrol_batch_objective(Var logits, const Tensor& labels, const std::optional<Tensor>& p_epk,
                                double lambda, GateOrientation orientation) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
  if (lambda == 0) return baseline_objective(logits, labels);
  if (!p_epk) throw TrainingError("ENROL objective needs expert predictions for every batch sample");
  Var probs = ops::softmax(logits);
  Var ce = ops::cross_entropy(probs, labels);
  Var dist = ops::mean(manifold_discrepancy(probs, *p_epk, labels, orientation));
  Var total = ops::add(ce, ops::scale(dist, static_cast<Real>(lambda)));
  Objective o{total, {}};
  o.parts.ce = ce.value().item();
  o.parts.dist = dist.value().item();
  o.parts.total = total.value().item();
  return o;
}

}  // namespace enrol::train
