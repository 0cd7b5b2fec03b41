// SPDX-License-Identifier: Apache-2.0
//
// Synthetic lesion phantoms. Every sample shares one geometry across its
// sequences: a smooth background plus an ellipsoidal lesion. Grade 1 lesions
// carry voxel speckle, an irregular boundary and a bright rim; grade 0 lesions
// are homogeneous with a soft edge. Sequences re-render the same geometry with
// their own background, lesion and rim gains, then add Gaussian noise.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "enrol/radiomics/volume.hpp"
#include "json.hpp"

namespace enrol::data {

struct SequenceContrast {
  std::string tag;
  double background_gain = 1.0;
  double lesion_gain = 1.0;
  double rim_gain = 1.0;
};

/// Gains for the four built-in tags t1, t1ce, t2, flair.
SequenceContrast default_contrast(const std::string& tag);

struct Grade0Params {
  double lesion_mean = 0.6;
  /// Per-sample spread of the lesion level (constant within a lesion).
  double lesion_sigma = 0.05;
  /// Width in voxels of the Gaussian fall-off outside the mask.
  double boundary_smoothness = 1.0;
};

struct Grade1Params {
  double speckle_variance = 0.04;
  /// Relative radius modulation amplitude.
  double boundary_perturbation = 0.3;
  /// Depth in voxels of the enhancing rim inside the mask.
  double rim_width = 1.0;
  double rim_intensity = 0.5;
  /// Per-sample severity drawn uniformly from this range scales the speckle
  /// deviation, perturbation amplitude and rim intensity.
  std::array<double, 2> severity_range{0.3, 1.0};
};

struct PhantomConfig {
  std::array<std::size_t, 3> volume_dims{16, 16, 16};
  std::vector<SequenceContrast> sequences;
  std::size_t sample_count = 250;
  /// Relative class weights in label order (grade 0, grade 1).
  std::array<double, 2> class_ratio{76, 293};
  Grade0Params grade0;
  Grade1Params grade1;
  double noise_sigma = 0.06;
  double background_level = 0.3;
  double background_variation = 0.1;
  /// Lesion semi-axes as fractions of the smallest volume extent.
  std::array<double, 2> lesion_radius_range{0.18, 0.32};
  std::uint64_t seed = 1;

  static PhantomConfig defaults();
  /// dims >= 8, >= 2 samples per class, sigmas >= 0, sequence tags unique. Throws ConfigError.
  void validate() const;
  /// Per-class sample counts (grade 0, grade 1).
  std::array<std::size_t, 2> class_counts() const;
};

void to_json(nlohmann::json& j, const PhantomConfig& c);
/// Missing fields keep their defaults; sequences may be plain tags.
void from_json(const nlohmann::json& j, PhantomConfig& c);

/// FNV-1a 64 of the canonical config JSON, as 16 hex digits.
std::string config_hash(const PhantomConfig& cfg);

struct PhantomSample {
  std::string id;
  int label = 0;
  MaskVolume mask;
  /// One volume per configured sequence, in config order.
  std::vector<VoxelVolume> volumes;
};

inline constexpr int kMaxPlacementAttempts = 100;

/// Sample `index` with the given label; deterministic in (cfg, index, label).
/// Throws ConfigError when no lesion fits after kMaxPlacementAttempts tries.
PhantomSample generate_phantom(const PhantomConfig& cfg, std::size_t index, int label);

/// Label vector (class_counts() shuffled by seed), then every sample.
std::vector<int> phantom_labels(const PhantomConfig& cfg);
std::vector<PhantomSample> generate_phantom_samples(const PhantomConfig& cfg);

std::string phantom_id(std::size_t index);

}  // namespace enrol::data
