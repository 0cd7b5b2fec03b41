// SPDX-License-Identifier: Apache-2.0
//
// Voxel grids. Storage is row-major over (D,H,W), W fastest. spacing[a] is the
// voxel extent in mm along dims[a].
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace enrol {

using Dims3 = std::array<std::size_t, 3>;
using Spacing3 = std::array<double, 3>;

struct VoxelVolume {
  Dims3 dims{1, 1, 1};
  Spacing3 spacing{1, 1, 1};
  std::vector<float> intensities;

  VoxelVolume() : intensities(1, 0.0f) {}
  VoxelVolume(Dims3 d, Spacing3 s, std::vector<float> values);
  VoxelVolume(Dims3 d, Spacing3 s, float fill);

  std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * dims[1] + y) * dims[2] + x;
  }
  float& at(std::size_t z, std::size_t y, std::size_t x) { return intensities[index(z, y, x)]; }
  float at(std::size_t z, std::size_t y, std::size_t x) const {
    return intensities[index(z, y, x)];
  }
  /// Throws InputError on zero dims, non-positive spacing, size mismatch or non-finite values.
  void validate() const;
  bool operator==(const VoxelVolume&) const = default;
};

struct MaskVolume {
  Dims3 dims{1, 1, 1};
  Spacing3 spacing{1, 1, 1};
  std::vector<std::uint8_t> labels;

  MaskVolume() : labels(1, 0) {}
  MaskVolume(Dims3 d, Spacing3 s, std::vector<std::uint8_t> values);
  MaskVolume(Dims3 d, Spacing3 s, std::uint8_t fill);

  std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * dims[1] + y) * dims[2] + x;
  }
  bool inside(std::size_t z, std::size_t y, std::size_t x) const {
    return labels[index(z, y, x)] != 0;
  }
  std::size_t count() const;
  /// Throws InputError on zero dims, bad spacing, size mismatch or labels outside {0,1}.
  void validate() const;
  bool operator==(const MaskVolume&) const = default;
};

}  // namespace enrol
