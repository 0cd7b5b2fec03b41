// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "enrol/core/error.hpp"
#include "enrol/data/dataset.hpp"
#include "enrol/data/phantom.hpp"
#include "enrol/data/vvol.hpp"

using namespace enrol;
using namespace enrol::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("enrol_datakit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string bytes_of(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void write_bytes(const fs::path& p, const std::string& b) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << b;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

PhantomConfig tiny_config(std::size_t n = 20) {
  PhantomConfig c = PhantomConfig::defaults();
  c.volume_dims = {10, 10, 10};
  c.sample_count = n;
  c.class_ratio = {1, 1};
  return c;
}

std::vector<int> labels_with(std::size_t n0, std::size_t n1) {
  std::vector<int> y(n0, 0);
  y.insert(y.end(), n1, 1);
  return y;
}

}  // namespace

TEST_CASE("volume files round-trip bit-exactly") {
  const fs::path dir = scratch("vvol");
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n(0, 100);
  std::vector<float> v(3 * 4 * 5);
  for (float& x : v) x = n(rng);
  v[0] = -0.0f;
  v[1] = 1e-40f;  // subnormal
  const VoxelVolume vol({3, 4, 5}, {0.5, 1.25, 3}, v);
  save_volume(dir / "a.vvol", vol);
  const VoxelVolume back = load_volume(dir / "a.vvol");
  CHECK(back.dims == vol.dims);
  CHECK(back.spacing == vol.spacing);
  CHECK(std::memcmp(back.intensities.data(), vol.intensities.data(), v.size() * 4) == 0);
  CHECK(std::signbit(back.intensities[0]));

  std::vector<std::uint8_t> lab(2 * 3 * 2);
  for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = i % 3 == 0;
  const MaskVolume mask({2, 3, 2}, {1, 1, 2}, lab);
  save_volume(dir / "m.vvol", mask);
  CHECK(load_mask(dir / "m.vvol") == mask);

  const std::string raw = bytes_of(dir / "a.vvol");
  CHECK(raw.substr(0, 4) == "VVOL");
  CHECK(raw.size() == 4 + 2 + 1 + 1 + 12 + 12 + v.size() * 4);
  CHECK(static_cast<unsigned char>(raw[4]) == 1);
  CHECK(static_cast<unsigned char>(raw[5]) == 0);
  CHECK(static_cast<unsigned char>(raw[6]) == 0);
  CHECK(static_cast<unsigned char>(raw[7]) == 3);
  CHECK(static_cast<unsigned char>(raw[8]) == 3);  // D
  CHECK(static_cast<unsigned char>(raw[16]) == 5);  // W
  CHECK(static_cast<unsigned char>(bytes_of(dir / "m.vvol")[6]) == 1);
  fs::remove_all(dir);
}

TEST_CASE("volume files: corruption raises the specified errors") {
  const fs::path dir = scratch("corrupt");
  const VoxelVolume vol({2, 2, 2}, {1, 1, 1}, 3.0f);
  save_volume(dir / "ok.vvol", vol);
  const std::string good = bytes_of(dir / "ok.vvol");

  write_bytes(dir / "t.vvol", good.substr(0, good.size() - 3));
  CHECK(error_of([&] { load_volume(dir / "t.vvol"); }).find("payload size mismatch") != std::string::npos);
  write_bytes(dir / "x.vvol", good + "x");
  CHECK(error_of([&] { load_volume(dir / "x.vvol"); }).find("payload size mismatch") != std::string::npos);

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(dir / "m.vvol", bad);
  CHECK(error_of([&] { load_volume(dir / "m.vvol"); }).find("unrecognized format") != std::string::npos);
  write_bytes(dir / "e.vvol", "");
  CHECK(error_of([&] { load_volume(dir / "e.vvol"); }).find("unrecognized format") != std::string::npos);

  bad = good;
  bad[4] = 7;
  write_bytes(dir / "v.vvol", bad);
  CHECK(error_of([&] { load_volume(dir / "v.vvol"); }).find("unsupported version") != std::string::npos);
  bad = good;
  bad[6] = 9;
  write_bytes(dir / "d.vvol", bad);
  CHECK(error_of([&] { load_volume(dir / "d.vvol"); }).find("unknown dtype") != std::string::npos);
  bad = good;
  bad[7] = 2;
  write_bytes(dir / "n.vvol", bad);
  CHECK(error_of([&] { load_volume(dir / "n.vvol"); }).find("corrupt header") != std::string::npos);
  write_bytes(dir / "h.vvol", good.substr(0, 12));
  CHECK(error_of([&] { load_volume(dir / "h.vvol"); }).find("corrupt header") != std::string::npos);
  CHECK(error_of([&] { load_mask(dir / "ok.vvol"); }).find("dtype mismatch") != std::string::npos);
  CHECK_THROWS_AS(load_volume(dir / "missing.vvol"), InputError);
  fs::remove_all(dir);
}

TEST_CASE("split arithmetic") {
  SUBCASE("369 samples at 4:1") {
    const auto y = labels_with(76, 293);
    const auto test = stratified_holdout(y, 0.2, 11);
    std::size_t pos = 0;
    for (std::size_t i : test) pos += y[i];
    CHECK(test.size() == 73);
    CHECK(369 - test.size() == 296);
    CHECK(pos == 58);
    CHECK(test.size() - pos == 15);
  }
  SUBCASE("10 samples, 5 per class") {
    const auto y = labels_with(5, 5);
    const auto test = stratified_holdout(y, 0.2, 3);
    REQUIRE(test.size() == 2);
    CHECK(y[test[0]] + y[test[1]] == 1);
  }
  SUBCASE("seeds change membership, not counts") {
    const auto y = labels_with(40, 60);
    const auto a = stratified_holdout(y, 0.2, 1);
    const auto b = stratified_holdout(y, 0.2, 2);
    CHECK(a.size() == b.size());
    CHECK(a != b);
    CHECK(a == stratified_holdout(y, 0.2, 1));
  }
  SUBCASE("default phantom counts give 200/50") {
    const auto counts = PhantomConfig::defaults().class_counts();
    CHECK(counts[0] + counts[1] == 250);
    CHECK(stratified_holdout(labels_with(counts[0], counts[1]), 0.2, 1).size() == 50);
  }
  SUBCASE("per-class deviation from the exact ratio is below one") {
    for (std::size_t n0 = 2; n0 < 30; ++n0)
      for (std::size_t n1 = 2; n1 < 30; n1 += 3) {
        const auto y = labels_with(n0, n1);
        const auto test = stratified_holdout(y, 0.2, n0 * 31 + n1);
        std::size_t t1 = 0;
        for (std::size_t i : test) t1 += y[i];
        const std::size_t t0 = test.size() - t1;
        CHECK(std::abs(static_cast<double>(t0) - 0.2 * static_cast<double>(n0)) <= 1.0);
        CHECK(std::abs(static_cast<double>(t1) - 0.2 * static_cast<double>(n1)) <= 1.0);
        CHECK(t0 >= 1);
        CHECK(t1 >= 1);
        CHECK(t0 < n0);
        CHECK(t1 < n1);
      }
  }
  SUBCASE("manifest split needs two per class") {
    DatasetManifest m;
    m.sequences = {"t1"};
    for (int i = 0; i < 5; ++i) m.records.push_back({"s" + std::to_string(i), i == 0 ? 1 : 0, {{"t1", "x"}}, "", ""});
    CHECK_THROWS_AS(split_dataset(m, 4, 1, 1), ConfigError);
  }
}

TEST_CASE("phantom construction") {
  SUBCASE("grade-0 lesion voxels equal the configured level without noise") {
    PhantomConfig c = tiny_config();
    c.noise_sigma = 0;
    c.grade0.lesion_sigma = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      const PhantomSample s = generate_phantom(c, i, 0);
      REQUIRE(s.mask.count() >= 8);
      for (std::size_t q = 0; q < c.sequences.size(); ++q) {
        const float expected = static_cast<float>(c.sequences[q].lesion_gain * c.grade0.lesion_mean);
        for (std::size_t v = 0; v < s.mask.size(); ++v)
          if (s.mask.labels[v]) CHECK(s.volumes[q].intensities[v] == expected);
      }
    }
  }
  SUBCASE("grade-1 lesions are more heterogeneous") {
    PhantomConfig c = PhantomConfig::defaults();
    c.sample_count = 100;
    c.class_ratio = {1, 1};
    double var[2] = {0, 0};
    std::size_t cnt[2] = {0, 0};
    for (const auto& s : generate_phantom_samples(c)) {
      const auto& v = s.volumes[0];
      double m = 0, m2 = 0;
      const double n = static_cast<double>(s.mask.count());
      for (std::size_t i = 0; i < s.mask.size(); ++i)
        if (s.mask.labels[i]) m += v.intensities[i];
      m /= n;
      for (std::size_t i = 0; i < s.mask.size(); ++i)
        if (s.mask.labels[i]) m2 += (v.intensities[i] - m) * (v.intensities[i] - m);
      var[s.label] += m2 / n;
      ++cnt[s.label];
    }
    CHECK(cnt[0] == 50);
    CHECK(cnt[1] == 50);
    CHECK(var[1] / 50 > var[0] / 50);
  }
  SUBCASE("lesion that cannot fit fails after the retry budget") {
    PhantomConfig c = tiny_config();
    c.volume_dims = {8, 8, 8};
    c.lesion_radius_range = {0.47, 0.49};
    CHECK_THROWS_AS(generate_phantom(c, 0, 1), ConfigError);
  }
  SUBCASE("config validation and JSON") {
    PhantomConfig c = PhantomConfig::defaults();
    nlohmann::json j = c;
    PhantomConfig back = j.get<PhantomConfig>();
    CHECK(config_hash(back) == config_hash(c));
    j["noise_sigma"] = 0.5;
    CHECK(config_hash(j.get<PhantomConfig>()) != config_hash(c));
    CHECK_THROWS_AS(nlohmann::json({{"bogus", 1}}).get<PhantomConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"volume_dims", {4, 16, 16}}}).get<PhantomConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"noise_sigma", -1}}).get<PhantomConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"sample_count", 3}}).get<PhantomConfig>(), ConfigError);
    const PhantomConfig tags = nlohmann::json({{"sequences", {"t2", "flair"}}}).get<PhantomConfig>();
    CHECK(tags.sequences.size() == 2);
    CHECK(tags.sequences[1].lesion_gain == default_contrast("flair").lesion_gain);
  }
}

TEST_CASE("dataset generation is deterministic and complete") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  const PhantomConfig c = tiny_config();
  const DatasetManifest ma = generate_phantom_dataset(c, a);
  generate_phantom_dataset(c, b);
  CHECK(bytes_of(a / "manifest.json") == bytes_of(b / "manifest.json"));
  for (const auto& r : ma.records) {
    for (const auto& [seq, rel] : r.volume_paths) CHECK(bytes_of(a / rel) == bytes_of(b / rel));
    CHECK(bytes_of(a / r.mask_path) == bytes_of(b / r.mask_path));
  }
  CHECK(ma.in_split(kSplitTrain).size() == 16);
  CHECK(ma.in_split(kSplitTest).size() == 4);
  CHECK(ma.generator_config_hash == config_hash(c));

  const DatasetManifest loaded = load_manifest(a / "manifest.json");
  validate_manifest(loaded, true);
  CHECK(loaded.records.size() == 20);

  SUBCASE("features are finite for every record") {
    Dataset train = load_split(loaded, kSplitTrain, {{}, true});
    attach_features(train, "t1ce");
    for (const auto& row : feature_rows(train))
      for (double v : row) CHECK(std::isfinite(v));
  }
  SUBCASE("test split never carries masks into inference") {
    const Dataset test = load_split(loaded, kSplitTest, {{"t1"}, true});
    for (const auto& s : test.samples) CHECK_FALSE(s.mask.has_value());
    const Tensor x = image_tensor(test, "t1");
    CHECK(x.shape() == Shape{4, 1, 10, 10, 10});
    Dataset copy = test;
    CHECK_THROWS_AS(attach_features(copy, "t1"), InputError);
  }
  SUBCASE("missing files are all reported") {
    fs::remove(a / loaded.records[0].mask_path);
    fs::remove(a / loaded.records[3].volume_paths.at("t2"));
    try {
      validate_manifest(loaded, true);
      FAIL("expected InputError");
    } catch (const InputError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("2 missing") != std::string::npos);
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("image tensor standardizes each volume") {
  const PhantomConfig c = tiny_config();
  const auto samples = generate_phantom_samples(c);
  const Dataset ds = dataset_from_phantoms(samples, c, {0, 1, 2}, kSplitTrain, true);
  const Tensor x = image_tensor(ds, "flair");
  const std::size_t per = 1000;
  for (std::size_t n = 0; n < 3; ++n) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < per; ++i) m += x[n * per + i];
    m /= per;
    for (std::size_t i = 0; i < per; ++i) v += (x[n * per + i] - m) * (x[n * per + i] - m);
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(v / per - 1) < 1e-9);
  }
  const auto [tr, va] = carve_validation(dataset_from_phantoms(samples, c, [] {
    std::vector<std::size_t> all(20);
    for (std::size_t i = 0; i < 20; ++i) all[i] = i;
    return all;
  }(), kSplitTrain, true), 0.2, 4);
  CHECK(tr.size() == 16);
  CHECK(va.size() == 4);
  CHECK(va.split == kSplitValidation);
}
