// SPDX-License-Identifier: Apache-2.0
#include "enrol/data/vvol.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "enrol/core/error.hpp"
#include "enrol/io/binary.hpp"

namespace enrol::data {
namespace {

constexpr char kMagic[4] = {'V', 'V', 'O', 'L'};

std::string where(const std::filesystem::path& p) { return " in '" + p.string() + "'"; }

void write_header(std::ostream& os, VolumeDtype dtype, const Dims3& dims, const Spacing3& sp) {
  os.write(kMagic, 4);
  io::write_le<std::uint16_t>(os, kVolumeVersion);
  io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(dtype));
  io::write_le<std::uint8_t>(os, 3);
  for (std::size_t d : dims) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw InputError("volume dimension too large");
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  }
  for (double s : sp) io::write_le<float>(os, static_cast<float>(s));
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  return os;
}

VolumeHeader parse_header(std::istream& is, const std::filesystem::path& path) {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("unrecognized format" + where(path));
  VolumeHeader h;
  try {
    h.version = io::read_le<std::uint16_t>(is, "version");
    if (h.version != kVolumeVersion)
      throw FormatError("unsupported version " + std::to_string(h.version) + where(path));
    const auto dtype = io::read_le<std::uint8_t>(is, "dtype");
    if (dtype > 1) throw FormatError("unknown dtype " + std::to_string(dtype) + where(path));
    h.dtype = static_cast<VolumeDtype>(dtype);
    const auto ndim = io::read_le<std::uint8_t>(is, "ndim");
    if (ndim != 3) throw FormatError("corrupt header: ndim " + std::to_string(ndim) + where(path));
    for (auto& d : h.dims) {
      d = io::read_le<std::uint32_t>(is, "dims");
      if (d == 0) throw FormatError("corrupt header: zero dimension" + where(path));
    }
    for (auto& s : h.spacing) {
      s = io::read_le<float>(is, "spacing");
      if (!(s > 0) || !std::isfinite(s))
        throw FormatError("corrupt header: invalid spacing" + where(path));
    }
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    if (msg.rfind("truncated", 0) == 0) throw FormatError("corrupt header: " + msg + where(path));
    throw;
  }
  return h;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open volume '" + path.string() + "'");
  return is;
}

// Reads exactly `bytes` payload bytes and checks nothing follows.
std::vector<char> read_payload(std::istream& is, std::size_t bytes, const std::filesystem::path& path) {
  std::vector<char> buf(bytes);
  is.read(buf.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(is.gcount()) != bytes || is.peek() != std::char_traits<char>::eof())
    throw FormatError("payload size mismatch" + where(path));
  return buf;
}

std::size_t voxel_count(const Dims3& d) { return d[0] * d[1] * d[2]; }

}  // namespace

void save_volume(const std::filesystem::path& path, const VoxelVolume& vol) {
  vol.validate();
  auto os = open_for_write(path);
  write_header(os, VolumeDtype::f32, vol.dims, vol.spacing);
  for (float v : vol.intensities) io::write_le<float>(os, v);
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

void save_volume(const std::filesystem::path& path, const MaskVolume& mask) {
  mask.validate();
  auto os = open_for_write(path);
  write_header(os, VolumeDtype::u8, mask.dims, mask.spacing);
  os.write(reinterpret_cast<const char*>(mask.labels.data()),
           static_cast<std::streamsize>(mask.labels.size()));
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

VolumeHeader read_volume_header(const std::filesystem::path& path) {
  auto is = open_for_read(path);
  return parse_header(is, path);
}

VoxelVolume load_volume(const std::filesystem::path& path) {
  auto is = open_for_read(path);
  const VolumeHeader h = parse_header(is, path);
  if (h.dtype != VolumeDtype::f32) throw FormatError("dtype mismatch: expected f32 intensities" + where(path));
  const std::size_t n = voxel_count(h.dims);
  const auto buf = read_payload(is, n * 4, path);
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(buf[i * 4 + b]);
    std::memcpy(&values[i], &bits, 4);
  }
  try {
    return VoxelVolume(h.dims, h.spacing, std::move(values));
  } catch (const InputError& e) {
    throw FormatError(std::string("corrupt payload: ") + e.what() + where(path));
  }
}

MaskVolume load_mask(const std::filesystem::path& path) {
  auto is = open_for_read(path);
  const VolumeHeader h = parse_header(is, path);
  if (h.dtype != VolumeDtype::u8) throw FormatError("dtype mismatch: expected u8 mask" + where(path));
  const auto buf = read_payload(is, voxel_count(h.dims), path);
  std::vector<std::uint8_t> labels(buf.begin(), buf.end());
  try {
    return MaskVolume(h.dims, h.spacing, std::move(labels));
  } catch (const InputError& e) {
    throw FormatError(std::string("corrupt payload: ") + e.what() + where(path));
  }
}

}  // namespace enrol::data
