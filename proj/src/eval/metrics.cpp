// SPDX-License-Identifier: Apache-2.0
#include "enrol/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "enrol/core/error.hpp"
#include "enrol/io/text.hpp"

namespace enrol::eval {
namespace {

int sequence_rank(const std::string& s) {
  static const char* order[] = {"t1", "t1ce", "t2", "flair", "ensemble"};
  for (int i = 0; i < 5; ++i)
    if (s == order[i]) return i;
  return 5;
}

int architecture_rank(const std::string& s) {
  static const char* order[] = {"radiomics", "seg-cnn", "vgg", "resnet", "seresnet"};
  for (int i = 0; i < 5; ++i)
    if (s == order[i]) return i;
  return 5;
}

std::string method_name(const MetricsReport& r) {
  return r.enrol ? "ENROL(lambda=" + io::format_double(r.lambda) + ")" : "baseline";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  return os;
}

}  // namespace

void PredictionSet::validate() const {
  if (scores.size() != labels.size())
    throw InputError("prediction set has " + std::to_string(scores.size()) + " scores and " +
                     std::to_string(labels.size()) + " labels");
  if (!ids.empty() && ids.size() != scores.size())
    throw InputError("prediction set ids do not match scores in length");
  for (double s : scores)
    if (!std::isfinite(s) || s < 0 || s > 1) throw InputError("prediction scores must lie in [0,1]");
  for (int l : labels)
    if (l != 0 && l != 1) throw InputError("prediction labels must be 0 or 1");
}

double compute_auc(const PredictionSet& preds) {
  preds.validate();
  const std::size_t n = preds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds.scores[a] < preds.scores[b]; });
  // Midranks (1-based) are multiples of 0.5, so the rank sum below is exact.
  double rank_sum_pos = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && preds.scores[order[j]] == preds.scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2;
    for (std::size_t k = i; k < j; ++k)
      if (preds.labels[order[k]] == 1) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw MetricError("AUC is undefined: labels contain a single class");
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum_pos - p * (p + 1) / 2;
  return u / (p * static_cast<double>(n_neg));
}

double compute_accuracy(const PredictionSet& preds, double threshold) {
  preds.validate();
  if (preds.size() == 0) throw MetricError("accuracy is undefined for an empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    hits += (preds.scores[i] >= threshold ? 1 : 0) == preds.labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double compute_sensitivity(const PredictionSet& preds, double threshold) {
  preds.validate();
  std::size_t pos = 0, tp = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds.labels[i] == 1) {
      ++pos;
      tp += preds.scores[i] >= threshold;
    }
  if (pos == 0) throw MetricError("sensitivity is undefined: no positive labels");
  return static_cast<double>(tp) / static_cast<double>(pos);
}

PredictionSet ensemble_average(const std::vector<PredictionSet>& sets) {
  if (sets.empty()) throw InputError("ensemble needs at least one prediction set");
  const PredictionSet& first = sets.front();
  first.validate();
  PredictionSet out = first;
  for (std::size_t s = 1; s < sets.size(); ++s) {
    sets[s].validate();
    if (sets[s].ids != first.ids) throw InputError("ensemble inputs cover different sample ids");
    if (sets[s].labels != first.labels) throw InputError("ensemble inputs disagree on labels");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    double sum = 0;
    for (const auto& set : sets) sum += set.scores[i];
    out.scores[i] = sum / static_cast<double>(sets.size());
  }
  return out;
}

MetricsReport evaluate(const PredictionSet& preds, std::string sequence, std::string architecture,
                       bool enrol, double lambda, std::uint64_t seed, double threshold) {
  MetricsReport r;
  r.sequence = std::move(sequence);
  r.architecture = std::move(architecture);
  r.enrol = enrol;
  r.lambda = lambda;
  r.seed = seed;
  r.auc = compute_auc(preds);
  r.acc = compute_accuracy(preds, threshold);
  r.sen = compute_sensitivity(preds, threshold);
  r.n = preds.size();
  r.n_pos = static_cast<std::size_t>(std::count(preds.labels.begin(), preds.labels.end(), 1));
  r.n_neg = r.n - r.n_pos;
  return r;
}

TableFormat parse_table_format(const std::string& text) {
  if (text == "csv") return TableFormat::csv;
  if (text == "markdown" || text == "md") return TableFormat::markdown;
  throw ConfigError("unknown table format '" + text + "' (expected csv or markdown)");
}

std::string render_report_table(std::vector<MetricsReport> reports, TableFormat format) {
  std::stable_sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
    return std::make_tuple(sequence_rank(a.sequence), a.sequence, architecture_rank(a.architecture),
                           a.architecture, a.enrol, a.lambda, a.seed) <
           std::make_tuple(sequence_rank(b.sequence), b.sequence, architecture_rank(b.architecture),
                           b.architecture, b.enrol, b.lambda, b.seed);
  });
  std::ostringstream os;
  const std::vector<std::string> head{"Sequence", "Model", "Method", "Seed", "AUC", "Acc", "Sen"};
  auto row_cells = [](const MetricsReport& r) {
    return std::vector<std::string>{r.sequence,
                                    r.architecture,
                                    method_name(r),
                                    std::to_string(r.seed),
                                    io::format_fixed(r.auc, 4),
                                    io::format_fixed(r.acc, 4),
                                    io::format_fixed(r.sen, 4)};
  };
  if (format == TableFormat::csv) {
    for (std::size_t i = 0; i < head.size(); ++i) os << (i ? "," : "") << head[i];
    os << '\n';
    for (const auto& r : reports) {
      const auto cells = row_cells(r);
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << '\n';
    }
  } else {
    os << '|';
    for (const auto& h : head) os << ' ' << h << " |";
    os << "\n|";
    for (std::size_t i = 0; i < head.size(); ++i) os << (i < 4 ? "---|" : "---:|");
    os << '\n';
    for (const auto& r : reports) {
      os << '|';
      for (const auto& c : row_cells(r)) os << ' ' << c << " |";
      os << '\n';
    }
  }
  return os.str();
}

std::string metrics_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "sequence,architecture,enrol_flag,lambda,seed,auc,acc,sen,n,n_pos,n_neg\n";
  for (const auto& r : reports)
    os << r.sequence << ',' << r.architecture << ',' << (r.enrol ? 1 : 0) << ','
       << io::format_double(r.lambda) << ',' << r.seed << ',' << io::format_double(r.auc) << ','
       << io::format_double(r.acc) << ',' << io::format_double(r.sen) << ',' << r.n << ','
       << r.n_pos << ',' << r.n_neg << '\n';
  return os.str();
}

void write_metrics_csv(const std::vector<MetricsReport>& reports, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << metrics_csv(reports);
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open metrics file '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) ||
      line != "sequence,architecture,enrol_flag,lambda,seed,auc,acc,sen,n,n_pos,n_neg")
    throw FormatError("unrecognized format: '" + path.string() + "' is not a metrics CSV");
  std::vector<MetricsReport> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = io::split_csv_line(line);
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    if (c.size() != 11) throw FormatError(where + ": expected 11 columns");
    MetricsReport r;
    r.sequence = c[0];
    r.architecture = c[1];
    r.enrol = io::parse_int(c[2], where) != 0;
    r.lambda = io::parse_double(c[3], where);
    r.seed = static_cast<std::uint64_t>(io::parse_int(c[4], where));
    r.auc = io::parse_double(c[5], where);
    r.acc = io::parse_double(c[6], where);
    r.sen = io::parse_double(c[7], where);
    r.n = static_cast<std::size_t>(io::parse_int(c[8], where));
    r.n_pos = static_cast<std::size_t>(io::parse_int(c[9], where));
    r.n_neg = static_cast<std::size_t>(io::parse_int(c[10], where));
    out.push_back(r);
  }
  return out;
}

void write_predictions_csv(const PredictionSet& preds, const std::filesystem::path& path) {
  preds.validate();
  auto os = open_out(path);
  os << "id,score,label\n";
  for (std::size_t i = 0; i < preds.size(); ++i)
    os << (preds.ids.empty() ? std::to_string(i) : preds.ids[i]) << ','
       << io::format_double(preds.scores[i]) << ',' << preds.labels[i] << '\n';
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

PredictionSet read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open predictions file '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || line != "id,score,label")
    throw FormatError("unrecognized format: '" + path.string() + "' is not a predictions CSV");
  PredictionSet p;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = io::split_csv_line(line);
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    if (c.size() != 3) throw FormatError(where + ": expected 3 columns");
    p.ids.push_back(c[0]);
    p.scores.push_back(io::parse_double(c[1], where));
    p.labels.push_back(static_cast<int>(io::parse_int(c[2], where)));
  }
  p.validate();
  return p;
}

}  // namespace enrol::eval
