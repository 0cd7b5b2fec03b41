// SPDX-License-Identifier: Apache-2.0
//
// Hand-crafted lesion descriptors. Gray levels are min-max discretized over the
// masked range into bin_count bins; texture formulas use 1-based levels.
//
//   first_order (17)  mean median minimum maximum range variance std skewness
//                     kurtosis energy rms mad p10 p90 iqr entropy uniformity
//   shape (7)         volume surface_area sphericity surface_to_volume
//                     max_diameter elongation flatness
//   glcm (17)         contrast dissimilarity asm homogeneity inverse_difference
//                     entropy correlation autocorrelation joint_average
//                     cluster_tendency cluster_shade cluster_prominence
//                     max_probability sum_average sum_entropy
//                     difference_average difference_entropy
//   glrlm (16)        sre lre gln glnn rln rlnn run_percentage lgre hgre srlge
//                     srhge lrlge lrhge gray_level_variance run_length_variance
//                     run_entropy
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "enrol/radiomics/volume.hpp"

namespace enrol::radiomics {

using Offset = std::array<int, 3>;

struct DiscretizationConfig {
  std::size_t bin_count = 32;
  std::vector<Offset> glcm_offsets;
  std::vector<Offset> glrlm_directions;

  /// 32 bins and the 13 unit offsets of the 26-neighbourhood modulo sign.
  static DiscretizationConfig defaults();
  /// bin_count >= 2; offsets nonzero and unique up to sign. Throws ConfigError.
  void validate() const;
};

/// The 13 offsets (dz,dy,dx) whose first nonzero component is positive.
std::vector<Offset> unit_offsets();

struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  void add(std::string name, double value);
  void append(const FeatureVector& other);
  double at(const std::string& name) const;
};

inline constexpr std::size_t kFirstOrderCount = 17;
inline constexpr std::size_t kShapeCount = 7;
inline constexpr std::size_t kGlcmCount = 17;
inline constexpr std::size_t kGlrlmCount = 16;
inline constexpr std::size_t kFeatureCount = kFirstOrderCount + kShapeCount + kGlcmCount + kGlrlmCount;

/// Ordered feature names, family-prefixed, exactly as extract_features emits them.
std::vector<std::string> feature_names();

/// Masked-voxel bin indices in [0, bin_count), scan order.
std::vector<int> discretize(const VoxelVolume& vol, const MaskVolume& mask, std::size_t bin_count);

FeatureVector first_order_features(const VoxelVolume& vol, const MaskVolume& mask,
                                   std::size_t bin_count = 32);
FeatureVector shape_features(const MaskVolume& mask, const Spacing3& spacing);
FeatureVector glcm_features(const VoxelVolume& vol, const MaskVolume& mask,
                            const DiscretizationConfig& cfg);
FeatureVector glrlm_features(const VoxelVolume& vol, const MaskVolume& mask,
                             const DiscretizationConfig& cfg);

/// first_order, shape, glcm, glrlm in that order; names prefixed by family.
FeatureVector extract_features(const VoxelVolume& vol, const MaskVolume& mask,
                               const DiscretizationConfig& cfg = DiscretizationConfig::defaults());

/// Per-feature (min, max) fitted on training rows only.
struct MinMaxScaler {
  std::vector<double> min, max;

  static MinMaxScaler fit(const std::vector<std::vector<double>>& rows);
  /// Constant features map to 0; values outside the fitted range clip to [0,1].
  std::vector<double> transform(const std::vector<double>& row) const;
  std::vector<std::vector<double>> transform(const std::vector<std::vector<double>>& rows) const;
};

/// Fits on `train`, returns the scaled training matrix.
std::vector<std::vector<double>> normalize_feature_matrix(
    const std::vector<std::vector<double>>& train, MinMaxScaler* scaler_out = nullptr);

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
};

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable read_feature_csv(const std::filesystem::path& path);

}  // namespace enrol::radiomics
