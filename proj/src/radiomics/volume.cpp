// SPDX-License-Identifier: Apache-2.0
#include "enrol/radiomics/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enrol/core/error.hpp"

namespace enrol {
namespace {

void check_geometry(const Dims3& d, const Spacing3& s, std::size_t n, const char* what) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (d[a] == 0) throw InputError(std::string(what) + ": dims must be positive");
    if (!(s[a] > 0) || !std::isfinite(s[a]))
      throw InputError(std::string(what) + ": spacing must be positive and finite");
  }
  if (n != d[0] * d[1] * d[2])
    throw InputError(std::string(what) + ": holds " + std::to_string(n) + " values, dims need " +
                     std::to_string(d[0] * d[1] * d[2]));
}

}  // namespace

VoxelVolume::VoxelVolume(Dims3 d, Spacing3 s, std::vector<float> values)
    : dims(d), spacing(s), intensities(std::move(values)) {
  validate();
}

VoxelVolume::VoxelVolume(Dims3 d, Spacing3 s, float fill)
    : dims(d), spacing(s), intensities(d[0] * d[1] * d[2], fill) {
  validate();
}

void VoxelVolume::validate() const {
  check_geometry(dims, spacing, intensities.size(), "volume");
  for (float v : intensities)
    if (!std::isfinite(v)) throw InputError("volume: intensities must be finite");
}

MaskVolume::MaskVolume(Dims3 d, Spacing3 s, std::vector<std::uint8_t> values)
    : dims(d), spacing(s), labels(std::move(values)) {
  validate();
}

MaskVolume::MaskVolume(Dims3 d, Spacing3 s, std::uint8_t fill)
    : dims(d), spacing(s), labels(d[0] * d[1] * d[2], fill) {
  validate();
}

std::size_t MaskVolume::count() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

void MaskVolume::validate() const {
  check_geometry(dims, spacing, labels.size(), "mask");
  for (std::uint8_t v : labels)
    if (v > 1) throw InputError("mask: labels must be 0 or 1");
}

}  // namespace enrol
