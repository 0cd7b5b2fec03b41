// SPDX-License-Identifier: Apache-2.0
//
// Radiomics comparison model: Welch t-test filter, L1 logistic regression,
// recursive feature elimination, then an unpenalized logistic regression on
// the survivors. A stage that would drop every feature passes its input on.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace enrol::train {

using Matrix = std::vector<std::vector<double>>;

/// Two-sided Welch t-test p-value with a standard normal reference.
/// Zero pooled variance gives p = 1 for equal means and 0 otherwise.
double welch_p_value(const std::vector<double>& a, const std::vector<double>& b);

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0;

  double probability(const std::vector<double>& row) const;
};

/// Coordinate-wise proximal gradient on mean log-loss + penalty * |w|_1
/// (bias unpenalized). Stops when no coordinate moves more than `tol`.
LogisticModel fit_l1_logistic(const Matrix& x, const std::vector<int>& y, double penalty,
                              std::size_t max_sweeps = 500, double tol = 1e-7);

/// Gradient descent on mean log-loss until the gradient norm drops below
/// `grad_tol` or `max_iterations` is reached.
LogisticModel fit_logistic(const Matrix& x, const std::vector<int>& y, std::size_t max_iterations = 5000,
                           double grad_tol = 1e-8);

struct CascadeConfig {
  double p_threshold = 0.05;
  /// Lasso penalties as fractions of the smallest penalty that zeroes every weight.
  std::vector<double> lasso_grid{0.5, 0.25, 0.1, 0.05, 0.025};
  std::size_t cv_folds = 3;
  std::size_t rfe_target = 5;
  std::size_t max_iterations = 5000;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const CascadeConfig& c);
void from_json(const nlohmann::json& j, CascadeConfig& c);

struct RadiomicsClassifier {
  std::vector<std::string> feature_names;  // full input list
  std::vector<std::size_t> selected;       // column indices into the input
  LogisticModel model;
  /// Feature count entering the cascade and after each of the three stages.
  std::array<std::size_t, 4> stage_counts{};
  double lasso_penalty = 0;

  std::vector<std::string> selected_names() const;
  /// Positive-class probability for each full-width row.
  std::vector<double> predict(const Matrix& rows) const;
};

nlohmann::json classifier_json(const RadiomicsClassifier& c);
RadiomicsClassifier classifier_from_json(const nlohmann::json& j);

/// `x` holds normalized features; TrainingError on single-class labels.
RadiomicsClassifier train_radiomics_classifier(const Matrix& x, const std::vector<int>& y,
                                               const std::vector<std::string>& names, const CascadeConfig& cfg = {});

}  // namespace enrol::train
