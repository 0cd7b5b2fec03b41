// SPDX-License-Identifier: Apache-2.0
//
// Dataset manifests, stratified splitting and in-memory sample sets.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enrol/core/tensor.hpp"
#include "enrol/data/phantom.hpp"
#include "enrol/radiomics/features.hpp"
#include "json.hpp"

namespace enrol::data {

inline const std::string kSplitTrain = "train";
inline const std::string kSplitValidation = "validation";
inline const std::string kSplitTest = "test";

struct ManifestRecord {
  std::string id;
  int label = 0;
  /// Sequence tag -> volume path relative to the manifest directory.
  std::map<std::string, std::string> volume_paths;
  std::string mask_path;
  std::string split;
};

struct DatasetManifest {
  std::vector<std::string> sequences;
  std::vector<ManifestRecord> records;
  std::string generator_config_hash;
  nlohmann::json generator_config;
  /// Directory that relative paths resolve against; not serialized.
  std::filesystem::path root;

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
  std::vector<const ManifestRecord*> in_split(const std::string& split) const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
/// Parses and structurally validates; `root` becomes the file's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Ids unique, labels in {0,1}, split tags known, every record names a volume
/// for each sequence. With `check_files`, every referenced file must exist;
/// all missing paths are reported in one InputError.
void validate_manifest(const DatasetManifest& m, bool check_files);

/// Indices held out from `labels`, stratified. The held-out total is
/// floor(N * fraction); per-class quotas n_c * fraction are floored and the
/// remainder goes to the largest fractional parts. A class with >= 2 samples
/// keeps at least one on each side, which can raise the total in tiny sets. Deterministic per seed.
std::vector<std::size_t> stratified_holdout(const std::vector<int>& labels, double fraction,
                                            std::uint64_t seed);

/// Tags every record train or test at train_parts:test_parts. Needs >= 2
/// samples per class (ConfigError otherwise).
DatasetManifest split_dataset(DatasetManifest manifest, std::size_t train_parts,
                              std::size_t test_parts, std::uint64_t seed);

/// Writes every sample's volumes and mask under `out_dir`, splits 4:1 with the
/// config seed and saves `out_dir/manifest.json`.
DatasetManifest generate_phantom_dataset(const PhantomConfig& cfg, const std::filesystem::path& out_dir);

struct Sample {
  std::string id;
  int label = 0;
  std::map<std::string, VoxelVolume> volumes;
  std::optional<MaskVolume> mask;
  std::optional<radiomics::FeatureVector> features;
};

struct Dataset {
  std::string split;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  std::vector<int> labels() const;
  std::vector<std::string> ids() const;
  /// N >= 1, unique ids, labels in {0,1}, no mask or features on test samples.
  void validate() const;
  /// Samples at `indices`, relabeled with `split`.
  Dataset subset(const std::vector<std::size_t>& indices, const std::string& split) const;
};

struct LoadOptions {
  std::vector<std::string> sequences;  // empty: all manifest sequences
  bool masks = false;
};

/// Loads one split. Masks are only read for train/validation records unless
/// the split is test and `allow_test_masks` is set (segmentation-input models).
Dataset load_split(const DatasetManifest& m, const std::string& split, const LoadOptions& opts,
                   bool allow_test_masks = false);

/// In-memory dataset from generated phantoms; masks attached unless `split` is test.
Dataset dataset_from_phantoms(const std::vector<PhantomSample>& samples, const PhantomConfig& cfg,
                              const std::vector<std::size_t>& indices, const std::string& split,
                              bool attach_masks);

/// Splits a training set into (train, validation) with stratified_holdout.
std::pair<Dataset, Dataset> carve_validation(const Dataset& train, double fraction, std::uint64_t seed);

/// [N,1,D,H,W] with every volume standardized to zero mean and unit variance.
/// Reads volumes only.
Tensor image_tensor(const Dataset& ds, const std::string& sequence);

/// Computes and caches hand-crafted features from `sequence` and the masks.
void attach_features(Dataset& ds, const std::string& sequence,
                     const radiomics::DiscretizationConfig& cfg = radiomics::DiscretizationConfig::defaults());

/// Cached features as rows; TrainingError when any sample lacks them.
std::vector<std::vector<double>> feature_rows(const Dataset& ds);

}  // namespace enrol::data
