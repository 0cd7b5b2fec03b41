// SPDX-License-Identifier: Apache-2.0
//
// Volume files: "VVOL", u16 version, u8 dtype (0 = f32 intensities, 1 = u8
// mask), u8 ndim = 3, dims 3 x u32 (D,H,W), spacing 3 x f32, then the
// row-major payload with W fastest. Everything little-endian.
//
// Spacing is stored as f32, so it round-trips exactly only when the double
// value is representable in single precision.
#pragma once

#include <cstdint>
#include <filesystem>

#include "enrol/radiomics/volume.hpp"

namespace enrol::data {

inline constexpr std::uint16_t kVolumeVersion = 1;

enum class VolumeDtype : std::uint8_t { f32 = 0, u8 = 1 };

struct VolumeHeader {
  std::uint16_t version = kVolumeVersion;
  VolumeDtype dtype = VolumeDtype::f32;
  Dims3 dims{};
  Spacing3 spacing{};
};

void save_volume(const std::filesystem::path& path, const VoxelVolume& vol);
void save_volume(const std::filesystem::path& path, const MaskVolume& mask);

/// Errors (FormatError): "unrecognized format" for a bad magic, "unsupported
/// version", "unknown dtype", "corrupt header", "payload size mismatch" when
/// the payload is shorter or longer than the header implies, "dtype mismatch"
/// when the file holds the other kind of volume.
VolumeHeader read_volume_header(const std::filesystem::path& path);
VoxelVolume load_volume(const std::filesystem::path& path);
MaskVolume load_mask(const std::filesystem::path& path);

}  // namespace enrol::data
