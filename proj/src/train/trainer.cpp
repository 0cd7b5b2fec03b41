// SPDX-License-Identifier: Apache-2.0
#include "enrol/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "enrol/core/error.hpp"
#include "enrol/core/ops.hpp"
#include "enrol/core/optim.hpp"
#include "enrol/core/rng.hpp"
#include "enrol/nn/checkpoint.hpp"

namespace enrol::train {
namespace {

using Json = nlohmann::json;

// Seed streams derived from a run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kValidationStream = 3;
constexpr std::uint64_t kJointExpertStream = 4;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void check_two_classes(const std::vector<int>& labels, const std::string& what) {
  bool has0 = false, has1 = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw InputError(what + ": labels must be 0 or 1");
    (l ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw TrainingError(what + ": training labels contain a single class");
}

Tensor rows_tensor(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ConfigError("empty feature matrix");
  const std::size_t f = rows.front().size();
  Tensor t({rows.size(), f}, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != f) throw InputError("feature rows differ in length");
    for (std::size_t j = 0; j < f; ++j) t[i * f + j] = static_cast<Real>(rows[i][j]);
  }
  return t;
}

std::function<double(nn::Model&, std::size_t)> auc_validator(const Tensor& inputs, const std::vector<int>& labels) {
  return [&inputs, labels](nn::Model& m, std::size_t) {
    eval::PredictionSet p;
    p.scores = predict_scores(m, inputs);
    p.labels = labels;
    return eval::compute_auc(p);
  };
}

std::unique_ptr<nn::ExpertEncoder> make_expert(std::size_t input_dim, const ExpertTrainConfig& cfg, std::uint64_t seed) {
  nn::ExpertEncoderSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_widths = cfg.hidden_widths;
  spec.latent_dim = cfg.latent_dim;
  return nn::build_expert_encoder(spec, seed);
}

}  // namespace

std::string to_string(ExpertMode m) { return m == ExpertMode::joint ? "joint" : "frozen_pretrained"; }

ExpertMode parse_expert_mode(const std::string& text) {
  if (text == "frozen_pretrained") return ExpertMode::frozen_pretrained;
  if (text == "joint") return ExpertMode::joint;
  throw ConfigError("unknown expert_mode '" + text + "' (expected frozen_pretrained or joint)");
}

void TrainConfig::validate() const {
  nn::parse_block_kind(architecture);
  require(learning_rate > 0 && std::isfinite(learning_rate), "learning_rate must be > 0");
  require(momentum >= 0 && momentum < 1, "momentum must lie in [0,1)");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(lambda >= 0 && std::isfinite(lambda), "lambda must be >= 0");
  require(validation_fraction > 0 && validation_fraction < 1, "validation_fraction must lie in (0,1)");
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"architecture", c.architecture},
           {"learning_rate", c.learning_rate},
           {"momentum", c.momentum},
           {"batch_size", c.batch_size},
           {"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"lambda", c.lambda},
           {"gate_orientation", to_string(c.gate_orientation)},
           {"expert_mode", to_string(c.expert_mode)},
           {"seed", c.seed},
           {"validation_fraction", c.validation_fraction}};
  if (c.model) j["model"] = *c.model;
}

void from_json(const Json& j, TrainConfig& c) {
  static const std::set<std::string> known{"architecture", "learning_rate",    "momentum",    "batch_size",
                                           "max_epochs",   "patience",         "lambda",      "gate_orientation",
                                           "expert_mode",  "seed",             "validation_fraction", "model"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("train config: unknown field '" + key + "'");
  try {
    c = TrainConfig{};
    c.architecture = j.value("architecture", c.architecture);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.lambda = j.value("lambda", c.lambda);
    c.gate_orientation = parse_gate_orientation(j.value("gate_orientation", std::string("rules")));
    c.expert_mode = parse_expert_mode(j.value("expert_mode", std::string("frozen_pretrained")));
    c.seed = j.value("seed", c.seed);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    if (j.contains("model")) {
      Json m = j.at("model");
      if (!m.contains("kind")) m["kind"] = c.architecture;
      c.model = m.get<nn::ModelSpec>();
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    is >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return j.get<TrainConfig>();
}

void ExpertTrainConfig::validate() const {
  require(learning_rate > 0 && std::isfinite(learning_rate), "expert learning_rate must be > 0");
  require(momentum >= 0 && momentum < 1, "expert momentum must lie in [0,1)");
  require(batch_size >= 1 && max_epochs >= 1 && patience >= 1, "expert batch_size, max_epochs, patience must be >= 1");
  require(validation_fraction > 0 && validation_fraction < 1, "expert validation_fraction must lie in (0,1)");
}

void to_json(Json& j, const ExpertTrainConfig& c) {
  j = Json{{"learning_rate", c.learning_rate}, {"momentum", c.momentum},
           {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
           {"patience", c.patience},           {"seed", c.seed},
           {"validation_fraction", c.validation_fraction}, {"hidden_widths", c.hidden_widths},
           {"latent_dim", c.latent_dim}};
}

void from_json(const Json& j, ExpertTrainConfig& c) {
  static const std::set<std::string> known{"learning_rate", "momentum", "batch_size", "max_epochs", "patience",
                                           "seed", "validation_fraction", "hidden_widths", "latent_dim"};
  if (!j.is_object()) throw ConfigError("expert config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("expert config: unknown field '" + key + "'");
  try {
    c = ExpertTrainConfig{};
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.hidden_widths = j.value("hidden_widths", c.hidden_widths);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("expert config: ") + e.what());
  }
  c.validate();
}

Json history_json(const TrainingHistory& h) {
  Json epochs = Json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"ce", e.train.ce},
                      {"dist", e.train.dist},
                      {"total", e.train.total},
                      {"val_auc", e.val_auc},
                      {"improved", e.improved}});
  return Json{{"epochs", epochs},
              {"best_epoch", h.best_epoch},
              {"best_val_auc", h.best_val_auc},
              {"stop_epoch", h.stop_epoch},
              {"early_stopped", h.early_stopped}};
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  if (t.rank() < 1 || t.dim(0) == 0) throw ShapeError("gather_rows: empty tensor");
  Shape shape = t.shape();
  const std::size_t stride = t.size() / shape[0];
  shape[0] = rows.size();
  Tensor out(shape, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= t.dim(0)) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(t.raw() + rows[r] * stride, stride, out.raw() + r * stride);
  }
  return out;
}

TrainingHistory run_training_loop(const LoopSpec& s) {
  if (!s.model || !s.inputs || !s.objective || !s.validator) throw UsageError("training loop: incomplete spec");
  const std::size_t n = s.inputs->dim(0);
  if (n == 0) throw ConfigError("training split is empty");
  if (s.labels.size() != n) throw InputError("training labels do not match inputs");
  check_two_classes(s.labels, "training loop");

  std::vector<Parameter*> params = s.model->parameters();
  for (nn::Model* m : s.co_trained) {
    const auto extra = m->parameters();
    params.insert(params.end(), extra.begin(), extra.end());
  }
  const Tensor onehot_all = ops::one_hot(s.labels, s.model->num_classes());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(s.shuffle_seed);

  TrainingHistory h;
  h.best_val_auc = -std::numeric_limits<double>::infinity();
  std::vector<Tensor> best = s.model->snapshot();
  std::vector<std::vector<Tensor>> best_co;
  for (nn::Model* m : s.co_trained) best_co.push_back(m->snapshot());
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= s.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < n; start += s.batch_size) {
      const std::size_t stop = std::min(n, start + s.batch_size);
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(stop));
      Tape tape;
      Var logits = s.model->forward(tape, gather_rows(*s.inputs, rows));
      const Objective obj = s.objective(tape, logits, gather_rows(onehot_all, rows), rows);
      tape.backward(obj.total);
      sgd_momentum_step(params, static_cast<Real>(s.learning_rate), static_cast<Real>(s.momentum));
      const double w = static_cast<double>(rows.size());
      rec.train.ce += obj.parts.ce * w;
      rec.train.dist += obj.parts.dist * w;
      rec.train.total += obj.parts.total * w;
      ++step;
      if (s.on_step) s.on_step(step, *s.model);
    }
    rec.train.ce /= static_cast<double>(n);
    rec.train.dist /= static_cast<double>(n);
    rec.train.total /= static_cast<double>(n);
    rec.val_auc = s.validator(*s.model, epoch);
    rec.improved = rec.val_auc > h.best_val_auc;
    if (rec.improved) {
      h.best_val_auc = rec.val_auc;
      h.best_epoch = epoch;
      best = s.model->snapshot();
      for (std::size_t i = 0; i < s.co_trained.size(); ++i) best_co[i] = s.co_trained[i]->snapshot();
    }
    h.epochs.push_back(rec);
    h.stop_epoch = epoch;
    if (epoch - h.best_epoch >= s.patience) {
      h.early_stopped = true;
      break;
    }
  }
  if (h.best_epoch == 0) throw TrainingError("validation AUC never produced a finite value");
  s.model->restore(best);
  for (std::size_t i = 0; i < s.co_trained.size(); ++i) s.co_trained[i]->restore(best_co[i]);
  return h;
}

Tensor predict_probs(nn::Model& model, const Tensor& inputs, std::size_t batch_size) {
  if (inputs.rank() < 1) throw ShapeError("predict: inputs need a batch axis");
  const std::size_t n = inputs.dim(0);
  const std::size_t k = model.num_classes();
  Tensor out({n, k}, 0);
  const bool was_frozen = model.frozen();
  model.set_frozen(true);
  try {
    for (std::size_t start = 0; start < n; start += batch_size) {
      std::vector<std::size_t> rows;
      for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) rows.push_back(i);
      Tape tape;
      Var p = ops::softmax(model.forward(tape, gather_rows(inputs, rows)));
      std::copy_n(p.value().raw(), rows.size() * k, out.raw() + start * k);
    }
  } catch (...) {
    model.set_frozen(was_frozen);
    throw;
  }
  model.set_frozen(was_frozen);
  return out;
}

std::vector<double> predict_scores(nn::Model& model, const Tensor& inputs, std::size_t batch_size) {
  const Tensor p = predict_probs(model, inputs, batch_size);
  const std::size_t k = p.dim(1);
  std::vector<double> out(p.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(static_cast<double>(p[i * k + 1]), 0.0, 1.0);
  return out;
}

eval::PredictionSet predict_dataset(nn::Model& model, const data::Dataset& ds, const std::string& sequence) {
  eval::PredictionSet p;
  p.ids = ds.ids();
  p.labels = ds.labels();
  p.scores = predict_scores(model, data::image_tensor(ds, sequence));
  return p;
}

Tensor Expert::probabilities(const std::vector<std::vector<double>>& raw_rows) const {
  if (!model) throw UsageError("expert has no model");
  return predict_probs(*model, rows_tensor(scaler.transform(raw_rows)));
}

void save_expert(const Expert& e, const std::filesystem::path& checkpoint) {
  if (!e.model) throw UsageError("expert has no model");
  nn::save_checkpoint(*e.model, checkpoint);
  std::ofstream os(checkpoint.string() + ".scaler.json", std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write scaler next to '" + checkpoint.string() + "'");
  os << Json{{"min", e.scaler.min}, {"max", e.scaler.max}}.dump() << '\n';
}

Expert load_expert(const std::filesystem::path& checkpoint) {
  Expert e;
  e.model = nn::load_expert_encoder(checkpoint);
  e.model->set_frozen(true);
  const std::string scaler_path = checkpoint.string() + ".scaler.json";
  std::ifstream is(scaler_path, std::ios::binary);
  if (!is) throw InputError("missing scaler file '" + scaler_path + "'");
  try {
    Json j;
    is >> j;
    e.scaler.min = j.at("min").get<std::vector<double>>();
    e.scaler.max = j.at("max").get<std::vector<double>>();
  } catch (const Json::exception& ex) {
    throw FormatError("scaler file '" + scaler_path + "': " + ex.what());
  }
  if (e.scaler.min.size() != e.model->spec().input_dim || e.scaler.max.size() != e.scaler.min.size())
    throw FormatError("scaler file '" + scaler_path + "' does not match the expert input width");
  return e;
}

ExpertResult pretrain_expert(const std::vector<std::vector<double>>& normalized, const std::vector<int>& labels,
                             const ExpertTrainConfig& cfg) {
  cfg.validate();
  if (normalized.size() != labels.size()) throw InputError("expert: feature rows and labels differ in count");
  check_two_classes(labels, "pretrain_expert");
  for (const auto& r : normalized)
    for (double v : r)
      if (!(v >= -1e-9 && v <= 1 + 1e-9)) throw InputError("expert: features must be normalized to [0,1]");
  const auto held = data::stratified_holdout(labels, cfg.validation_fraction, derive_seed(cfg.seed, kValidationStream));
  std::vector<std::vector<double>> tr, va;
  std::vector<int> ytr, yva;
  for (std::size_t i = 0, h = 0; i < labels.size(); ++i) {
    if (h < held.size() && held[h] == i) {
      va.push_back(normalized[i]);
      yva.push_back(labels[i]);
      ++h;
    } else {
      tr.push_back(normalized[i]);
      ytr.push_back(labels[i]);
    }
  }
  check_two_classes(yva, "pretrain_expert validation split");
  const Tensor xtr = rows_tensor(tr);
  const Tensor xva = rows_tensor(va);

  ExpertResult out;
  out.model = make_expert(xtr.dim(1), cfg, derive_seed(cfg.seed, kInitStream));
  LoopSpec loop;
  loop.model = out.model.get();
  loop.inputs = &xtr;
  loop.labels = ytr;
  loop.objective = [](Tape&, Var logits, const Tensor& onehot, const std::vector<std::size_t>&) {
    return baseline_objective(logits, onehot);
  };
  loop.validator = auc_validator(xva, yva);
  loop.learning_rate = cfg.learning_rate;
  loop.momentum = cfg.momentum;
  loop.batch_size = cfg.batch_size;
  loop.max_epochs = cfg.max_epochs;
  loop.patience = cfg.patience;
  loop.shuffle_seed = derive_seed(cfg.seed, kShuffleStream);
  out.history = run_training_loop(loop);
  out.model->set_frozen(true);
  return out;
}

Expert pretrain_expert(const data::Dataset& train, const ExpertTrainConfig& cfg, TrainingHistory* history) {
  const auto raw = data::feature_rows(train);
  Expert e;
  const auto normalized = radiomics::normalize_feature_matrix(raw, &e.scaler);
  ExpertResult r = pretrain_expert(normalized, train.labels(), cfg);
  e.model = std::move(r.model);
  if (history) *history = r.history;
  return e;
}

nn::ModelSpec grading_spec(const TrainConfig& cfg, const data::Dataset& ds, const std::string& sequence) {
  nn::ModelSpec spec = cfg.model.value_or(nn::ModelSpec{});
  spec.kind = nn::parse_block_kind(cfg.architecture);
  if (ds.samples.empty()) throw ConfigError("training split is empty");
  const auto it = ds.samples.front().volumes.find(sequence);
  if (it == ds.samples.front().volumes.end()) throw InputError("training data has no '" + sequence + "' volumes");
  spec.input_dims = {it->second.dims[0], it->second.dims[1], it->second.dims[2]};
  spec.input_channels = 1;
  spec.validate();
  return spec;
}

namespace {

struct GradingRun {
  std::unique_ptr<nn::GradingModel> model;
  Tensor train_x, val_x;
  std::vector<int> val_y;
  LoopSpec loop;
};

GradingRun prepare_run(const data::Dataset& train, const data::Dataset& val, const std::string& sequence,
                       const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  train.validate();
  val.validate();
  GradingRun r;
  r.model = nn::build_grading_model(grading_spec(cfg, train, sequence), derive_seed(cfg.seed, kInitStream));
  r.train_x = data::image_tensor(train, sequence);
  r.val_x = data::image_tensor(val, sequence);
  r.val_y = val.labels();
  r.loop.model = r.model.get();
  r.loop.labels = train.labels();
  r.loop.learning_rate = cfg.learning_rate;
  r.loop.momentum = cfg.momentum;
  r.loop.batch_size = cfg.batch_size;
  r.loop.max_epochs = cfg.max_epochs;
  r.loop.patience = cfg.patience;
  r.loop.shuffle_seed = derive_seed(cfg.seed, kShuffleStream);
  r.loop.on_step = hooks.on_step;
  return r;
}

void finish_loop(GradingRun& r, const TrainHooks& hooks) {
  r.loop.inputs = &r.train_x;
  if (hooks.validator) {
    r.loop.validator = hooks.validator;
  } else {
    check_two_classes(r.val_y, "validation split");
    r.loop.validator = auc_validator(r.val_x, r.val_y);
  }
}

}  // namespace

TrainResult train_baseline(const data::Dataset& train, const data::Dataset& val, const std::string& sequence,
                           const TrainConfig& cfg, const TrainHooks& hooks) {
  GradingRun r = prepare_run(train, val, sequence, cfg, hooks);
  r.loop.objective = [](Tape&, Var logits, const Tensor& onehot, const std::vector<std::size_t>&) {
    return baseline_objective(logits, onehot);
  };
  finish_loop(r, hooks);
  TrainResult out;
  out.history = run_training_loop(r.loop);
  out.model = std::move(r.model);
  return out;
}

TrainResult train_enrol(const data::Dataset& train, const data::Dataset& val, const std::string& sequence,
                        const TrainConfig& cfg, const Expert* expert, const TrainHooks& hooks,
                        const ExpertTrainConfig& joint_cfg) {
  GradingRun r = prepare_run(train, val, sequence, cfg, hooks);
  const double lambda = cfg.lambda;
  const GateOrientation orient = cfg.gate_orientation;
  std::unique_ptr<nn::ExpertEncoder> joint;
  auto p_epk = std::make_shared<std::optional<Tensor>>();
  auto joint_x = std::make_shared<Tensor>();

  if (lambda > 0 && cfg.expert_mode == ExpertMode::frozen_pretrained) {
    if (!expert || !expert->model) throw TrainingError("frozen_pretrained mode needs a pretrained expert");
    *p_epk = expert->probabilities(data::feature_rows(train));
  } else if (lambda > 0) {
    radiomics::MinMaxScaler scaler;
    const auto normalized = radiomics::normalize_feature_matrix(data::feature_rows(train), &scaler);
    *joint_x = rows_tensor(normalized);
    joint = make_expert(joint_x->dim(1), joint_cfg, derive_seed(cfg.seed, kJointExpertStream));
    r.loop.co_trained.push_back(joint.get());
  }

  nn::ExpertEncoder* joint_ptr = joint.get();
  r.loop.objective = [=](Tape& tape, Var logits, const Tensor& onehot, const std::vector<std::size_t>& rows) {
    if (lambda == 0) return enrol_batch_objective(logits, onehot, std::nullopt, 0, orient);
    if (!joint_ptr) return enrol_batch_objective(logits, onehot, gather_rows(**p_epk, rows), lambda, orient);
    // Joint: the expert learns from its own cross-entropy; the discrepancy
    // still treats its output as a constant teacher.
    Var expert_probs = ops::softmax(joint_ptr->forward(tape, gather_rows(*joint_x, rows)));
    Var expert_ce = ops::cross_entropy(expert_probs, onehot);
    Objective o = enrol_batch_objective(logits, onehot, expert_probs.value(), lambda, orient);
    o.total = ops::add(o.total, expert_ce);
    return o;
  };
  finish_loop(r, hooks);
  TrainResult out;
  out.history = run_training_loop(r.loop);
  out.model = std::move(r.model);
  return out;
}

VoxelVolume crop_to_mask(const VoxelVolume& vol, const MaskVolume& mask) {
  if (vol.dims != mask.dims) throw InputError("crop: volume and mask dims differ");
  Dims3 lo{vol.dims}, hi{0, 0, 0};
  bool any = false;
  for (std::size_t z = 0; z < mask.dims[0]; ++z)
    for (std::size_t y = 0; y < mask.dims[1]; ++y)
      for (std::size_t x = 0; x < mask.dims[2]; ++x)
        if (mask.inside(z, y, x)) {
          any = true;
          const std::size_t c[3] = {z, y, x};
          for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
          }
        }
  if (!any) throw ExtractionError("crop: mask is empty");
  const Dims3 d{hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  std::vector<float> values;
  values.reserve(d[0] * d[1] * d[2]);
  for (std::size_t z = lo[0]; z <= hi[0]; ++z)
    for (std::size_t y = lo[1]; y <= hi[1]; ++y)
      for (std::size_t x = lo[2]; x <= hi[2]; ++x) values.push_back(vol.at(z, y, x));
  return VoxelVolume(d, vol.spacing, std::move(values));
}

VoxelVolume resize_trilinear(const VoxelVolume& vol, const Dims3& out) {
  for (std::size_t d : out)
    if (d == 0) throw InputError("resize: output dims must be positive");
  // Per axis: source coordinate, lower index and weight of the upper neighbour.
  std::array<std::vector<std::size_t>, 3> i0;
  std::array<std::vector<double>, 3> w;
  for (int a = 0; a < 3; ++a) {
    const std::size_t in = vol.dims[a];
    for (std::size_t o = 0; o < out[a]; ++o) {
      const double pos = out[a] > 1 ? static_cast<double>(o) * static_cast<double>(in - 1) / static_cast<double>(out[a] - 1)
                                    : 0.0;
      std::size_t f = static_cast<std::size_t>(std::floor(pos));
      if (f + 1 >= in) f = in >= 2 ? in - 2 : 0;
      i0[a].push_back(f);
      w[a].push_back(in >= 2 ? pos - static_cast<double>(f) : 0.0);
    }
  }
  auto at = [&](std::size_t z, std::size_t y, std::size_t x) {
    return static_cast<double>(vol.at(std::min(z, vol.dims[0] - 1), std::min(y, vol.dims[1] - 1),
                                      std::min(x, vol.dims[2] - 1)));
  };
  Spacing3 sp{};
  for (int a = 0; a < 3; ++a)
    sp[a] = vol.spacing[a] * static_cast<double>(vol.dims[a]) / static_cast<double>(out[a]);
  std::vector<float> values(out[0] * out[1] * out[2]);
  std::size_t k = 0;
  for (std::size_t z = 0; z < out[0]; ++z)
    for (std::size_t y = 0; y < out[1]; ++y)
      for (std::size_t x = 0; x < out[2]; ++x) {
        const std::size_t z0 = i0[0][z], y0 = i0[1][y], x0 = i0[2][x];
        const double wz = w[0][z], wy = w[1][y], wx = w[2][x];
        double acc = 0;
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const double weight = (dz ? wz : 1 - wz) * (dy ? wy : 1 - wy) * (dx ? wx : 1 - wx);
              if (weight != 0) acc += weight * at(z0 + dz, y0 + dy, x0 + dx);
            }
        values[k++] = static_cast<float>(acc);
      }
  return VoxelVolume(out, sp, std::move(values));
}

data::Dataset lesion_crops(const data::Dataset& ds, const std::string& sequence, std::size_t cube,
                           std::vector<std::string>* skipped) {
  if (cube == 0) throw ConfigError("crop cube size must be positive");
  data::Dataset out;
  out.split = ds.split;
  for (const auto& s : ds.samples) {
    if (!s.mask) throw InputError("sample '" + s.id + "' has no mask; the segmentation-input model needs masks");
    const auto it = s.volumes.find(sequence);
    if (it == s.volumes.end()) throw InputError("sample '" + s.id + "' has no '" + sequence + "' volume");
    if (s.mask->count() == 0) {
      std::cerr << "warning: sample '" << s.id << "' has an empty mask; skipped\n";
      if (skipped) skipped->push_back(s.id);
      continue;
    }
    data::Sample c;
    c.id = s.id;
    c.label = s.label;
    c.volumes.emplace(sequence, resize_trilinear(crop_to_mask(it->second, *s.mask), {cube, cube, cube}));
    out.samples.push_back(std::move(c));
  }
  return out;
}

TrainResult train_seg_cnn(const data::Dataset& train, const data::Dataset& val, const std::string& sequence,
                          const TrainConfig& cfg, std::size_t cube, const TrainHooks& hooks) {
  TrainConfig plain = cfg;
  plain.lambda = 0;
  return train_baseline(lesion_crops(train, sequence, cube), lesion_crops(val, sequence, cube), sequence, plain,
                        hooks);
}

std::vector<SweepRow> lambda_sweep(const data::Dataset& train, const data::Dataset& val, const data::Dataset& test,
                                   const std::string& sequence, const TrainConfig& cfg, const Expert* expert,
                                   const std::vector<double>& lambdas, const std::vector<std::uint64_t>& seeds) {
  if (lambdas.empty() || seeds.empty()) throw ConfigError("sweep needs at least one lambda and one seed");
  std::vector<SweepRow> rows;
  for (double lambda : lambdas)
    for (std::uint64_t seed : seeds) {
      TrainConfig c = cfg;
      c.lambda = lambda;
      c.seed = seed;
      TrainResult r = lambda == 0 ? train_baseline(train, val, sequence, c) : train_enrol(train, val, sequence, c, expert);
      SweepRow row;
      row.report = eval::evaluate(predict_dataset(*r.model, test, sequence), sequence, cfg.architecture, lambda > 0,
                                  lambda, seed);
      row.history = std::move(r.history);
      rows.push_back(std::move(row));
    }
  return rows;
}

}  // namespace enrol::train
