// SPDX-License-Identifier: Apache-2.0
//
// Binary classification metrics. Label 1 (HGG analog) is the positive class;
// a score >= threshold is a positive prediction.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace enrol::eval {

struct PredictionSet {
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<int> labels;

  /// Equal lengths, finite scores in [0,1], labels in {0,1}. Throws InputError.
  void validate() const;
  std::size_t size() const { return scores.size(); }
};

/// Mann-Whitney statistic from midranks; ties count 0.5. MetricError on one class.
double compute_auc(const PredictionSet& preds);
double compute_accuracy(const PredictionSet& preds, double threshold = 0.5);
/// MetricError when there is no positive label.
double compute_sensitivity(const PredictionSet& preds, double threshold = 0.5);

/// Per-sample mean over sets sharing ids (in the same order) and labels.
PredictionSet ensemble_average(const std::vector<PredictionSet>& sets);

struct MetricsReport {
  std::string sequence;
  std::string architecture;
  bool enrol = false;
  double lambda = 0;
  std::uint64_t seed = 0;
  double auc = 0, acc = 0, sen = 0;
  std::size_t n = 0, n_pos = 0, n_neg = 0;
};

MetricsReport evaluate(const PredictionSet& preds, std::string sequence, std::string architecture,
                       bool enrol, double lambda, std::uint64_t seed, double threshold = 0.5);

enum class TableFormat { csv, markdown };
TableFormat parse_table_format(const std::string& text);

/// Sorted by sequence, architecture, ENROL flag, lambda, seed; metrics to 4 decimals.
std::string render_report_table(std::vector<MetricsReport> reports, TableFormat format);

/// Columns: sequence,architecture,enrol_flag,lambda,seed,auc,acc,sen,n,n_pos,n_neg.
std::string metrics_csv(const std::vector<MetricsReport>& reports);
void write_metrics_csv(const std::vector<MetricsReport>& reports, const std::filesystem::path& path);
std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path);

void write_predictions_csv(const PredictionSet& preds, const std::filesystem::path& path);
PredictionSet read_predictions_csv(const std::filesystem::path& path);

}  // namespace enrol::eval
