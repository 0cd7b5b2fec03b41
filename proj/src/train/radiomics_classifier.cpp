// SPDX-License-Identifier: Apache-2.0
#include "enrol/train/radiomics_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "enrol/core/error.hpp"
#include "enrol/eval/metrics.hpp"

namespace enrol::train {
namespace {

using Json = nlohmann::json;

double sigmoid(double z) {
  if (z >= 0) return 1 / (1 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1 + e);
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0;
}

std::size_t width_of(const Matrix& x) {
  if (x.empty()) throw ConfigError("logistic regression: empty design matrix");
  const std::size_t p = x.front().size();
  for (const auto& r : x)
    if (r.size() != p) throw InputError("logistic regression: ragged design matrix");
  return p;
}

void check_labels(const std::vector<int>& y, std::size_t n, const char* what) {
  if (y.size() != n) throw InputError(std::string(what) + ": labels and rows differ in count");
  bool has0 = false, has1 = false;
  for (int l : y) {
    if (l != 0 && l != 1) throw InputError(std::string(what) + ": labels must be 0 or 1");
    (l ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw TrainingError(std::string(what) + ": labels contain a single class");
}

Matrix columns(const Matrix& x, const std::vector<std::size_t>& cols) {
  Matrix out(x.size(), std::vector<double>(cols.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out[i][j] = x[i][cols[j]];
  return out;
}

double auc_of(const LogisticModel& m, const Matrix& x, const std::vector<int>& y) {
  eval::PredictionSet p;
  for (const auto& r : x) p.scores.push_back(m.probability(r));
  p.labels = y;
  return eval::compute_auc(p);
}

// Largest penalty with a nonzero weight: max_j |mean((y - ybar) x_j)|.
double zeroing_penalty(const Matrix& x, const std::vector<int>& y) {
  const std::size_t n = x.size(), p = width_of(x);
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double best = 0;
  for (std::size_t j = 0; j < p; ++j) {
    double g = 0;
    for (std::size_t i = 0; i < n; ++i) g += (y[i] - ybar) * x[i][j];
    best = std::max(best, std::abs(g) / static_cast<double>(n));
  }
  return best;
}

// Stratified fold index per row.
std::vector<std::size_t> fold_assignment(const std::vector<int>& y, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> fold(y.size());
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = k % folds;
  }
  return fold;
}

}  // namespace

double welch_p_value(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw InputError("t-test needs at least 2 values per group");
  auto stats = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, s / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  const double se2 = va / static_cast<double>(a.size()) + vb / static_cast<double>(b.size());
  if (se2 <= 0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(se2);
  return std::erfc(std::abs(t) / std::sqrt(2.0));
}

double LogisticModel::probability(const std::vector<double>& row) const {
  if (row.size() != weights.size()) throw InputError("logistic model: row width mismatch");
  double z = bias;
  for (std::size_t j = 0; j < row.size(); ++j) z += weights[j] * row[j];
  return sigmoid(z);
}

LogisticModel fit_l1_logistic(const Matrix& x, const std::vector<int>& y, double penalty, std::size_t max_sweeps,
                              double tol) {
  const std::size_t n = x.size(), p = width_of(x);
  check_labels(y, n, "lasso");
  if (!(penalty >= 0)) throw ConfigError("lasso penalty must be >= 0");
  LogisticModel m;
  m.weights.assign(p, 0);
  std::vector<double> eta(n, 0), prob(n, 0.5);
  std::vector<double> lip(p);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i][j] * x[i][j];
    lip[j] = 0.25 * s / static_cast<double>(n);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0;
    {
      double g = 0;
      for (std::size_t i = 0; i < n; ++i) g += prob[i] - y[i];
      const double delta = -g * inv_n / 0.25;
      m.bias += delta;
      for (std::size_t i = 0; i < n; ++i) {
        eta[i] += delta;
        prob[i] = sigmoid(eta[i]);
      }
      moved = std::max(moved, std::abs(delta));
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (lip[j] <= 0) continue;
      double g = 0;
      for (std::size_t i = 0; i < n; ++i) g += (prob[i] - y[i]) * x[i][j];
      g *= inv_n;
      const double w = soft_threshold(m.weights[j] - g / lip[j], penalty / lip[j]);
      const double delta = w - m.weights[j];
      if (delta == 0) continue;
      m.weights[j] = w;
      for (std::size_t i = 0; i < n; ++i) {
        eta[i] += delta * x[i][j];
        prob[i] = sigmoid(eta[i]);
      }
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < tol) break;
  }
  return m;
}

LogisticModel fit_logistic(const Matrix& x, const std::vector<int>& y, std::size_t max_iterations, double grad_tol) {
  const std::size_t n = x.size(), p = width_of(x);
  check_labels(y, n, "logistic regression");
  // Step 1/L with L = 0.25 * trace([1 X]^T [1 X]) / n, an upper bound on the Hessian norm.
  double trace = 1;
  for (const auto& r : x)
    for (double v : r) trace += v * v / static_cast<double>(n);
  const double step = 1 / (0.25 * trace);
  LogisticModel m;
  m.weights.assign(p, 0);
  std::vector<double> grad(p);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = m.probability(x[i]) - y[i];
      gb += r;
      for (std::size_t j = 0; j < p; ++j) grad[j] += r * x[i][j];
    }
    gb /= static_cast<double>(n);
    double norm2 = gb * gb;
    for (double& g : grad) {
      g /= static_cast<double>(n);
      norm2 += g * g;
    }
    if (std::sqrt(norm2) < grad_tol) break;
    m.bias -= step * gb;
    for (std::size_t j = 0; j < p; ++j) m.weights[j] -= step * grad[j];
  }
  return m;
}

void CascadeConfig::validate() const {
  if (!(p_threshold > 0 && p_threshold <= 1)) throw ConfigError("cascade p_threshold must lie in (0,1]");
  if (lasso_grid.empty()) throw ConfigError("cascade lasso_grid is empty");
  for (double g : lasso_grid)
    if (!(g > 0)) throw ConfigError("cascade lasso_grid entries must be > 0");
  if (cv_folds < 2) throw ConfigError("cascade cv_folds must be >= 2");
  if (rfe_target < 1) throw ConfigError("cascade rfe_target must be >= 1");
  if (max_iterations < 1) throw ConfigError("cascade max_iterations must be >= 1");
}

void to_json(Json& j, const CascadeConfig& c) {
  j = Json{{"p_threshold", c.p_threshold}, {"lasso_grid", c.lasso_grid},         {"cv_folds", c.cv_folds},
           {"rfe_target", c.rfe_target},   {"max_iterations", c.max_iterations}, {"seed", c.seed}};
}

void from_json(const Json& j, CascadeConfig& c) {
  static const std::set<std::string> known{"p_threshold", "lasso_grid", "cv_folds", "rfe_target", "max_iterations",
                                           "seed"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("cascade config: unknown field '" + key + "'");
  try {
    c = CascadeConfig{};
    c.p_threshold = j.value("p_threshold", c.p_threshold);
    c.lasso_grid = j.value("lasso_grid", c.lasso_grid);
    c.cv_folds = j.value("cv_folds", c.cv_folds);
    c.rfe_target = j.value("rfe_target", c.rfe_target);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.seed = j.value("seed", c.seed);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("cascade config: ") + e.what());
  }
  c.validate();
}

std::vector<std::string> RadiomicsClassifier::selected_names() const {
  std::vector<std::string> out;
  for (std::size_t j : selected) out.push_back(j < feature_names.size() ? feature_names[j] : std::to_string(j));
  return out;
}

std::vector<double> RadiomicsClassifier::predict(const Matrix& rows) const {
  std::vector<double> out;
  for (const auto& r : rows) {
    std::vector<double> sub;
    for (std::size_t j : selected) {
      if (j >= r.size()) throw InputError("radiomics classifier: row narrower than the training matrix");
      sub.push_back(r[j]);
    }
    out.push_back(model.probability(sub));
  }
  return out;
}

Json classifier_json(const RadiomicsClassifier& c) {
  return Json{{"feature_names", c.feature_names},   {"selected", c.selected},
              {"selected_names", c.selected_names()}, {"weights", c.model.weights},
              {"bias", c.model.bias},                 {"stage_counts", c.stage_counts},
              {"lasso_penalty", c.lasso_penalty}};
}

RadiomicsClassifier classifier_from_json(const Json& j) {
  RadiomicsClassifier c;
  try {
    c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    c.selected = j.at("selected").get<std::vector<std::size_t>>();
    c.model.weights = j.at("weights").get<std::vector<double>>();
    c.model.bias = j.at("bias").get<double>();
    c.stage_counts = j.value("stage_counts", c.stage_counts);
    c.lasso_penalty = j.value("lasso_penalty", 0.0);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("radiomics classifier: ") + e.what());
  }
  if (c.selected.size() != c.model.weights.size()) throw FormatError("radiomics classifier: weight count mismatch");
  return c;
}

RadiomicsClassifier train_radiomics_classifier(const Matrix& x, const std::vector<int>& y,
                                               const std::vector<std::string>& names, const CascadeConfig& cfg) {
  cfg.validate();
  const std::size_t p = width_of(x);
  check_labels(y, x.size(), "radiomics classifier");
  if (!names.empty() && names.size() != p) throw InputError("radiomics classifier: name count mismatch");
  RadiomicsClassifier out;
  out.feature_names = names;
  std::vector<std::size_t> current(p);
  std::iota(current.begin(), current.end(), 0);
  out.stage_counts[0] = p;

  // Stage 1: Welch t-test filter.
  {
    std::vector<std::size_t> kept;
    for (std::size_t j : current) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < x.size(); ++i) (y[i] ? a : b).push_back(x[i][j]);
      if (welch_p_value(a, b) < cfg.p_threshold) kept.push_back(j);
    }
    if (!kept.empty()) current = kept;
    out.stage_counts[1] = current.size();
  }

  // Stage 2: lasso with the penalty picked by k-fold cross-validated AUC.
  {
    const Matrix sub = columns(x, current);
    const double top = zeroing_penalty(sub, y);
    const auto fold = fold_assignment(y, cfg.cv_folds, cfg.seed);
    double best_auc = -1, best_pen = top * cfg.lasso_grid.front();
    std::vector<double> grid = cfg.lasso_grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());
    for (double g : grid) {
      const double pen = top * g;
      double auc_sum = 0;
      std::size_t used = 0;
      for (std::size_t f = 0; f < cfg.cv_folds; ++f) {
        Matrix xtr, xte;
        std::vector<int> ytr, yte;
        for (std::size_t i = 0; i < sub.size(); ++i) {
          (fold[i] == f ? xte : xtr).push_back(sub[i]);
          (fold[i] == f ? yte : ytr).push_back(y[i]);
        }
        const bool ok_tr = std::count(ytr.begin(), ytr.end(), 1) > 0 && std::count(ytr.begin(), ytr.end(), 0) > 0;
        const bool ok_te = std::count(yte.begin(), yte.end(), 1) > 0 && std::count(yte.begin(), yte.end(), 0) > 0;
        if (!ok_tr || !ok_te) continue;
        auc_sum += auc_of(fit_l1_logistic(xtr, ytr, pen), xte, yte);
        ++used;
      }
      const double auc = used ? auc_sum / static_cast<double>(used) : 0.5;
      // Strict improvement only: ties keep the larger (sparser) penalty.
      if (auc > best_auc) {
        best_auc = auc;
        best_pen = pen;
      }
    }
    out.lasso_penalty = best_pen;
    const LogisticModel lasso = fit_l1_logistic(sub, y, best_pen);
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < current.size(); ++k)
      if (lasso.weights[k] != 0) kept.push_back(current[k]);
    if (!kept.empty()) current = kept;
    out.stage_counts[2] = current.size();
  }

  // Stage 3: recursive elimination of the smallest |coefficient|.
  while (current.size() > cfg.rfe_target) {
    const LogisticModel m = fit_logistic(columns(x, current), y, cfg.max_iterations);
    std::size_t drop = 0;
    for (std::size_t k = 1; k < current.size(); ++k)
      if (std::abs(m.weights[k]) < std::abs(m.weights[drop])) drop = k;
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  out.stage_counts[3] = current.size();

  out.selected = current;
  out.model = fit_logistic(columns(x, current), y, cfg.max_iterations);
  return out;
}

}  // namespace enrol::train
