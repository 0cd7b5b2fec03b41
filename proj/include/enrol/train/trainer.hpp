// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch SGD training for grading models (baseline and ENROL), the
// expert encoder and the segmentation-input comparison model. All runs share
// one loop: seed-shuffled batches, validation AUC after every epoch, stop
// after `patience` epochs without improvement, restore the best epoch.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "enrol/data/dataset.hpp"
#include "enrol/eval/metrics.hpp"
#include "enrol/nn/models.hpp"
#include "enrol/radiomics/features.hpp"
#include "enrol/train/objective.hpp"
#include "json.hpp"

namespace enrol::train {

enum class ExpertMode { frozen_pretrained, joint };

std::string to_string(ExpertMode m);
ExpertMode parse_expert_mode(const std::string& text);

struct TrainConfig {
  std::string architecture = "vgg";
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 100;
  std::size_t patience = 20;
  double lambda = 0;
  GateOrientation gate_orientation = GateOrientation::rules;
  ExpertMode expert_mode = ExpertMode::frozen_pretrained;
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;
  /// Optional network overrides; kind and input dims always follow
  /// `architecture` and the data.
  std::optional<nn::ModelSpec> model;

  /// learning_rate > 0, momentum in [0,1), batch_size >= 1, max_epochs >= 1,
  /// patience >= 1, lambda >= 0, validation_fraction in (0,1). ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Unknown fields are rejected; missing ones keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_train_config(const std::filesystem::path& path);

struct ExpertTrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;
  std::vector<std::size_t> hidden_widths{32};
  std::size_t latent_dim = 16;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExpertTrainConfig& c);
void from_json(const nlohmann::json& j, ExpertTrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  double val_auc = 0;
  bool improved = false;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_auc = 0;
  std::size_t stop_epoch = 0;
  bool early_stopped = false;
};

nlohmann::json history_json(const TrainingHistory& h);

struct TrainHooks {
  /// Replaces the validation-set AUC (e.g. scripted curves); called once per epoch.
  std::function<double(nn::Model&, std::size_t epoch)> validator;
  /// Called after every optimizer step with the 1-based global step index.
  std::function<void(std::size_t step, const nn::Model&)> on_step;
};

/// Everything the shared loop needs. `objective` receives the batch logits,
/// the one-hot batch labels and the batch's row indices into `inputs`.
struct LoopSpec {
  nn::Model* model = nullptr;
  /// Extra models whose parameters are stepped alongside (joint expert).
  std::vector<nn::Model*> co_trained;
  const Tensor* inputs = nullptr;
  std::vector<int> labels;
  std::function<Objective(Tape&, Var logits, const Tensor& onehot, const std::vector<std::size_t>& rows)>
      objective;
  std::function<double(nn::Model&, std::size_t epoch)> validator;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 100;
  std::size_t patience = 20;
  std::uint64_t shuffle_seed = 0;
  std::function<void(std::size_t step, const nn::Model&)> on_step;
};

TrainingHistory run_training_loop(const LoopSpec& spec);

/// Rows `rows` of a [N,...] tensor.
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows);

/// Softmax probabilities [N,K] in batches; the model is bound frozen.
Tensor predict_probs(nn::Model& model, const Tensor& inputs, std::size_t batch_size = 32);
/// Probability of class 1 per row.
std::vector<double> predict_scores(nn::Model& model, const Tensor& inputs, std::size_t batch_size = 32);

/// Scores a grading model on `ds` from volumes alone (masks are never read).
eval::PredictionSet predict_dataset(nn::Model& model, const data::Dataset& ds, const std::string& sequence);

struct Expert {
  std::unique_ptr<nn::ExpertEncoder> model;
  radiomics::MinMaxScaler scaler;

  /// Frozen softmax outputs [N,K] for raw (unnormalized) feature rows.
  Tensor probabilities(const std::vector<std::vector<double>>& raw_rows) const;
};

void save_expert(const Expert& e, const std::filesystem::path& checkpoint);
/// Reads `checkpoint` and `checkpoint` + ".scaler.json".
Expert load_expert(const std::filesystem::path& checkpoint);

struct ExpertResult {
  std::unique_ptr<nn::ExpertEncoder> model;
  TrainingHistory history;
};

/// Trains the expert encoder on normalized features with the shared loop,
/// holding out validation_fraction (stratified) for early stopping. The
/// returned model is frozen. TrainingError on single-class labels.
ExpertResult pretrain_expert(const std::vector<std::vector<double>>& normalized, const std::vector<int>& labels,
                             const ExpertTrainConfig& cfg);

/// Fits the scaler on the dataset's cached features, then pretrain_expert.
Expert pretrain_expert(const data::Dataset& train, const ExpertTrainConfig& cfg, TrainingHistory* history = nullptr);

struct TrainResult {
  std::unique_ptr<nn::GradingModel> model;
  TrainingHistory history;
};

nn::ModelSpec grading_spec(const TrainConfig& cfg, const data::Dataset& ds, const std::string& sequence);

/// Plain cross-entropy training of a fresh grading model.
TrainResult train_baseline(const data::Dataset& train, const data::Dataset& val, const std::string& sequence,
                           const TrainConfig& cfg, const TrainHooks& hooks = {});

/// ENROL objective. frozen_pretrained needs `expert`; joint trains a fresh
/// expert alongside on its own cross-entropy. With lambda = 0 this is the
/// baseline run step for step and `expert` is not consulted.
TrainResult train_enrol(const data::Dataset& train, const data::Dataset& val, const std::string& sequence,
                        const TrainConfig& cfg, const Expert* expert, const TrainHooks& hooks = {},
                        const ExpertTrainConfig& joint_cfg = {});

/// Bounding-box crop of `vol` to the mask; ExtractionError on an empty mask.
VoxelVolume crop_to_mask(const VoxelVolume& vol, const MaskVolume& mask);
/// Trilinear resize with aligned corners (end voxels map onto end voxels).
VoxelVolume resize_trilinear(const VoxelVolume& vol, const Dims3& out_dims);

/// Replaces each sample's `sequence` volume by its resized lesion crop and
/// drops the masks. Samples with empty masks are skipped and their ids
/// appended to `skipped`.
data::Dataset lesion_crops(const data::Dataset& ds, const std::string& sequence, std::size_t cube,
                           std::vector<std::string>* skipped = nullptr);

/// Segmentation-input comparison model: crops, then a baseline run (lambda 0).
TrainResult train_seg_cnn(const data::Dataset& train, const data::Dataset& val, const std::string& sequence,
                          const TrainConfig& cfg, std::size_t cube = 16, const TrainHooks& hooks = {});

struct SweepRow {
  eval::MetricsReport report;
  TrainingHistory history;
};

/// One run per (lambda, seed) with otherwise identical configs, scored on
/// `test`. Rows follow lambdas-major order; lambda 0 rows are baseline runs.
std::vector<SweepRow> lambda_sweep(const data::Dataset& train, const data::Dataset& val, const data::Dataset& test,
                                   const std::string& sequence, const TrainConfig& cfg, const Expert* expert,
                                   const std::vector<double>& lambdas, const std::vector<std::uint64_t>& seeds);

inline const std::vector<double> kDefaultLambdas{0, 0.5, 0.1, 0.05, 0.01};

}  // namespace enrol::train
