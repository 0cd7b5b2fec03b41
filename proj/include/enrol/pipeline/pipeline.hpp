// SPDX-License-Identifier: Apache-2.0
//
// Glue between manifests on disk and the trainers: run directories, feature
// tables for any split, and scoring a finished run on the test split.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enrol/data/dataset.hpp"
#include "enrol/eval/metrics.hpp"
#include "enrol/radiomics/features.hpp"
#include "enrol/train/radiomics_classifier.hpp"
#include "json.hpp"

namespace enrol::pipeline {

inline constexpr const char* kRunGrading = "grading";
inline constexpr const char* kRunSegCnn = "seg-cnn";
inline constexpr const char* kRunRadiomics = "radiomics";

/// Contents of `run.json` in every run directory.
struct RunInfo {
  std::string kind = kRunGrading;
  std::string sequence = "t1ce";
  std::string architecture = "vgg";
  bool enrol = false;
  double lambda = 0;
  std::uint64_t seed = 1;
  std::size_t cube = 16;  // seg-cnn only
};

void to_json(nlohmann::json& j, const RunInfo& r);
void from_json(const nlohmann::json& j, RunInfo& r);
void save_run_info(const RunInfo& r, const std::filesystem::path& dir);
RunInfo load_run_info(const std::filesystem::path& dir);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

struct TrainingSplits {
  data::Dataset train, validation;
};

/// The manifest's train split, carved into train/validation with `seed`.
TrainingSplits load_training_splits(const data::DatasetManifest& m, const std::string& sequence,
                                    double validation_fraction, std::uint64_t seed, bool masks);

/// Raw hand-crafted features for every sample (masks required, any split).
radiomics::FeatureTable feature_table(const data::Dataset& ds, const std::string& sequence,
                                      const radiomics::DiscretizationConfig& cfg =
                                          radiomics::DiscretizationConfig::defaults());

nlohmann::json scaler_json(const radiomics::MinMaxScaler& s);
radiomics::MinMaxScaler scaler_from_json(const nlohmann::json& j);

/// Radiomics comparison model: features from the masks, train-split scaling, cascade.
struct RadiomicsRun {
  train::RadiomicsClassifier classifier;
  radiomics::MinMaxScaler scaler;
};

RadiomicsRun train_radiomics_run(const data::Dataset& train, const std::string& sequence,
                                 const train::CascadeConfig& cfg);
eval::PredictionSet predict_radiomics(const RadiomicsRun& run, const data::Dataset& ds, const std::string& sequence);

/// Scores the run in `dir` on the manifest's test split. Only seg-cnn and
/// radiomics runs read test masks; grading models see volumes alone.
eval::PredictionSet score_run(const std::filesystem::path& dir, const data::DatasetManifest& m);

}  // namespace enrol::pipeline
