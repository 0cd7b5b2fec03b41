// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "enrol/core/error.hpp"
#include "enrol/radiomics/features.hpp"
#include "radiomics_oracle.hpp"

using namespace enrol;
using namespace enrol::radiomics;

namespace {

// 1 x 1 x n strip holding `values`, fully masked.
std::pair<VoxelVolume, MaskVolume> strip(const std::vector<float>& values) {
  const Dims3 d{1, 1, values.size()};
  return {VoxelVolume(d, {1, 1, 1}, values), MaskVolume(d, {1, 1, 1}, std::uint8_t{1})};
}

DiscretizationConfig axial(std::size_t bins) {
  DiscretizationConfig c;
  c.bin_count = bins;
  c.glcm_offsets = {{0, 0, 1}};
  c.glrlm_directions = {{0, 0, 1}};
  return c;
}

MaskVolume ball(std::size_t n, double r) {
  MaskVolume m({n, n, n}, {1, 1, 1}, std::uint8_t{0});
  const double c = (static_cast<double>(n) - 1) / 2;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double dz = double(z) - c, dy = double(y) - c, dx = double(x) - c;
        if (dz * dz + dy * dy + dx * dx <= r * r) m.labels[m.index(z, y, x)] = 1;
      }
  return m;
}

VoxelVolume random_volume(const Dims3& d, std::mt19937_64& rng) {
  std::normal_distribution<float> g(100, 20);
  VoxelVolume v(d, {1, 1, 1}, 0.0f);
  for (float& x : v.intensities) x = g(rng);
  return v;
}

MaskVolume blob(const Dims3& d, std::mt19937_64& rng) {
  MaskVolume m(d, {1, 1, 1}, std::uint8_t{0});
  std::bernoulli_distribution keep(0.6);
  for (std::size_t z = 1; z + 1 < d[0]; ++z)
    for (std::size_t y = 1; y + 1 < d[1]; ++y)
      for (std::size_t x = 1; x + 1 < d[2]; ++x) m.labels[m.index(z, y, x)] = keep(rng);
  m.labels[m.index(d[0] / 2, d[1] / 2, d[2] / 2)] = 1;
  return m;
}

}  // namespace

TEST_CASE("first order: hand cases") {
  {
    VoxelVolume v({3, 3, 3}, {1, 1, 1}, 5.0f);
    MaskVolume m({3, 3, 3}, {1, 1, 1}, std::uint8_t{0});
    m.labels[4] = m.labels[13] = m.labels[20] = 1;
    const auto f = first_order_features(v, m);
    CHECK(f.at("mean") == 5);
    CHECK(f.at("variance") == 0);
    CHECK(f.at("range") == 0);
    CHECK(f.at("entropy") == 0);
    CHECK(f.at("uniformity") == 1);
  }
  {
    auto [v, m] = strip({1, 3});
    const auto f = first_order_features(v, m);
    CHECK(f.at("mean") == 2);
    CHECK(f.at("variance") == 1);
    CHECK(f.at("energy") == 10);
    CHECK(f.at("rms") == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  }
  {
    auto [v, m] = strip({0, 1, 2, 3});
    const auto f = first_order_features(v, m, 4);
    CHECK(f.at("entropy") == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(f.at("uniformity") == 0.25);
    CHECK(f.at("median") == 1.5);
    CHECK(f.at("p10") == doctest::Approx(0.3));
    CHECK(f.at("iqr") == doctest::Approx(1.5));
  }
  CHECK(first_order_features(strip({1, 2}).first, strip({1, 2}).second).size() == kFirstOrderCount);
}

TEST_CASE("shape: face counting") {
  SUBCASE("unit voxel") {
    MaskVolume m({1, 1, 1}, {1, 1, 1}, std::uint8_t{1});
    const auto f = shape_features(m, {1, 1, 1});
    CHECK(f.at("volume") == 1);
    CHECK(f.at("surface_area") == 6);
    CHECK(f.at("surface_to_volume") == 6);
    CHECK(f.at("max_diameter") == 0);
    CHECK(f.at("elongation") == 1);
    CHECK(f.at("flatness") == 1);
  }
  SUBCASE("2-voxel bar") {
    MaskVolume m({1, 1, 2}, {1, 1, 1}, std::uint8_t{1});
    const auto f = shape_features(m, {1, 1, 1});
    CHECK(f.at("volume") == 2);
    CHECK(f.at("surface_area") == 10);
    CHECK(f.at("max_diameter") == 1.0);
    CHECK(f.at("sphericity") ==
          doctest::Approx(std::cbrt(std::numbers::pi) * std::pow(12.0, 2.0 / 3.0) / 10).epsilon(1e-15));
  }
  SUBCASE("anisotropic spacing") {
    MaskVolume m({2, 1, 1}, {1, 1, 1}, std::uint8_t{1});
    const auto f = shape_features(m, {2, 3, 0.5});
    CHECK(f.at("volume") == doctest::Approx(6));
    // 2 end caps of 3*0.5 plus 4 long sides of 4*0.5 and 4*3 pairs.
    CHECK(f.at("surface_area") == doctest::Approx(2 * 1.5 + 2 * (2 * 2 * 0.5) + 2 * (2 * 2 * 3)));
    CHECK(f.at("max_diameter") == doctest::Approx(2));
  }
  SUBCASE("digital ball") {
    const MaskVolume b = ball(23, 10);
    const auto f = shape_features(b, {1, 1, 1});
    const double s = f.at("sphericity");
    // Face counting overestimates area by ~3/2 on a sphere, so sphericity sits near 2/3.
    CHECK(b.count() == 4169);
    CHECK(f.at("surface_area") == 1902);
    CHECK(s == doctest::Approx(0.65860983030858089).epsilon(1e-14));
    MaskVolume bar({1, 1, b.count()}, {1, 1, 1}, std::uint8_t{1});
    CHECK(shape_features(bar, {1, 1, 1}).at("sphericity") < s);
    CHECK(f.at("max_diameter") == doctest::Approx(20));
    CHECK(f.at("elongation") == doctest::Approx(1).epsilon(1e-9));
    CHECK(f.at("flatness") == doctest::Approx(1).epsilon(1e-9));
  }
  SUBCASE("elongation of a 1x2x4 block") {
    MaskVolume m({1, 2, 4}, {1, 1, 1}, std::uint8_t{1});
    const auto f = shape_features(m, {1, 1, 1});
    // Variances 0.25 (y) and 1.25 (x).
    CHECK(f.at("elongation") == doctest::Approx(std::sqrt(0.25 / 1.25)).epsilon(1e-12));
    CHECK(f.at("flatness") == doctest::Approx(std::sqrt(1e-12 / 1.25)).epsilon(1e-9));
  }
}

TEST_CASE("glcm: hand cases") {
  {
    VoxelVolume v({2, 2, 2}, {1, 1, 1}, 7.0f);
    MaskVolume m({2, 2, 2}, {1, 1, 1}, std::uint8_t{1});
    const auto f = glcm_features(v, m, DiscretizationConfig::defaults());
    CHECK(f.at("contrast") == 0);
    CHECK(f.at("dissimilarity") == 0);
    CHECK(f.at("asm") == 1);
    CHECK(f.at("homogeneity") == 1);
    CHECK(f.at("entropy") == 0);
    CHECK(f.at("correlation") == 0);
  }
  {
    auto [v, m] = strip({0, 1, 0, 1});
    const auto f = glcm_features(v, m, axial(2));
    CHECK(f.at("contrast") == 1);
    CHECK(f.at("homogeneity") == 0.5);
    CHECK(f.at("asm") == 0.5);
    CHECK(f.at("entropy") == doctest::Approx(std::log(2.0)));
    CHECK(f.at("correlation") == doctest::Approx(-1));
  }
  {
    // Isolated voxels: no pairs anywhere.
    VoxelVolume v({1, 1, 3}, {1, 1, 1}, std::vector<float>{1, 0, 9});
    MaskVolume m({1, 1, 3}, {1, 1, 1}, std::vector<std::uint8_t>{1, 0, 1});
    const auto f = glcm_features(v, m, DiscretizationConfig::defaults());
    CHECK(f.at("asm") == 1);
    CHECK(f.at("contrast") == 0);
  }
}

TEST_CASE("glrlm: hand cases") {
  {
    auto [v, m] = strip({4, 4, 4, 4});
    const auto f = glrlm_features(v, m, axial(32));
    CHECK(f.at("run_percentage") == 0.25);
    CHECK(f.at("lre") == 16);
    CHECK(f.at("sre") == 1.0 / 16);
  }
  {
    auto [v, m] = strip({0, 1, 0, 1});
    const auto f = glrlm_features(v, m, axial(2));
    CHECK(f.at("sre") == 1);
    CHECK(f.at("run_percentage") == 1);
    CHECK(f.at("gln") == 2);
    CHECK(f.at("rln") == 4);
  }
}

TEST_CASE("glcm matrices are symmetric; glrlm runs cover the mask") {
  std::mt19937_64 rng(4);
  const Dims3 d{6, 7, 5};
  const VoxelVolume v = random_volume(d, rng);
  const MaskVolume m = blob(d, rng);
  DiscretizationConfig cfg = DiscretizationConfig::defaults();
  for (const Offset& o : cfg.glrlm_directions) {
    DiscretizationConfig one = cfg;
    one.glrlm_directions = {o};
    const auto f = glrlm_features(v, m, one);
    const double runs = f.at("run_percentage") * double(m.count());
    // rln/rlnn = number of runs; lengths average to voxels/runs.
    CHECK(f.at("rln") / f.at("rlnn") == doctest::Approx(runs));
    CHECK(runs == doctest::Approx(std::round(runs)));
  }
  for (const Offset& o : cfg.glcm_offsets) {
    DiscretizationConfig one = cfg;
    one.glcm_offsets = {o};
    oracle::FamilyError err;
    oracle::compare_case(v, m, one, err);
    CHECK(err.glcm < 1e-9);
  }
}

TEST_CASE("oracle agreement: exhaustive small lattices") {
  DiscretizationConfig cfg = DiscretizationConfig::defaults();
  cfg.bin_count = 3;
  oracle::FamilyError err;
  for (const Dims3& d : {Dims3{1, 1, 3}, Dims3{1, 2, 2}, Dims3{2, 1, 3}, Dims3{1, 3, 2}}) oracle::exhaustive(d, cfg, err);
  CAPTURE(err.cases);
  CHECK(err.first_order < 1e-9);
  CHECK(err.glcm < 1e-9);
  CHECK(err.glrlm < 1e-9);
}

TEST_CASE("oracle agreement: sampled 3x3x3 lattices, 32 bins") {
  oracle::FamilyError err;
  oracle::sampled({3, 3, 3}, DiscretizationConfig::defaults(), 300, 99, err);
  CHECK(err.first_order < 1e-9);
  CHECK(err.glcm < 1e-9);
  CHECK(err.glrlm < 1e-9);
}

TEST_CASE("extract_features: count, order, determinism, invariance") {
  std::mt19937_64 rng(12);
  const Dims3 d{8, 9, 10};
  const VoxelVolume v = random_volume(d, rng);
  const MaskVolume m = blob(d, rng);
  const auto f = extract_features(v, m);
  CHECK(f.size() == kFeatureCount);
  CHECK(f.names == feature_names());
  CHECK(f.names.front() == "first_order_mean");
  CHECK(f.names[kFirstOrderCount] == "shape_volume");
  CHECK(extract_features(v, m).values == f.values);

  VoxelVolume shifted = v;
  for (float& x : shifted.intensities) x = 2.5f * x + 40.0f;
  const auto g = extract_features(shifted, m);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::string& name = f.names[i];
    if (name.rfind("first_order_", 0) == 0 && name != "first_order_entropy" &&
        name != "first_order_uniformity")
      continue;
    CAPTURE(name);
    CHECK(g.values[i] == doctest::Approx(f.values[i]).epsilon(1e-12));
  }
  for (const auto& val : f.values) CHECK(std::isfinite(val));
}

TEST_CASE("extraction errors") {
  VoxelVolume v({2, 2, 2}, {1, 1, 1}, 1.0f);
  MaskVolume empty({2, 2, 2}, {1, 1, 1}, std::uint8_t{0});
  CHECK_THROWS_AS(extract_features(v, empty), ExtractionError);
  CHECK_THROWS_AS(shape_features(empty, {1, 1, 1}), ExtractionError);
  MaskVolume other({2, 2, 3}, {1, 1, 1}, std::uint8_t{1});
  CHECK_THROWS_AS(first_order_features(v, other), InputError);
  CHECK_THROWS_AS(VoxelVolume({2, 2, 2}, {1, 0, 1}, 1.0f), InputError);
  CHECK_THROWS_AS(MaskVolume({2, 2, 2}, {1, 1, 1}, std::vector<std::uint8_t>(7, 1)), InputError);
  DiscretizationConfig bad = DiscretizationConfig::defaults();
  bad.glcm_offsets.push_back({0, 0, -1});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = DiscretizationConfig::defaults();
  bad.bin_count = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(unit_offsets().size() == 13);
}

TEST_CASE("normalization") {
  MinMaxScaler s;
  const auto out = normalize_feature_matrix({{2, 5}, {4, 5}, {6, 5}}, &s);
  CHECK(out[0] == std::vector<double>{0, 0});
  CHECK(out[1] == std::vector<double>{0.5, 0});
  CHECK(out[2] == std::vector<double>{1, 0});
  CHECK(s.transform(std::vector<double>{10, 7}) == std::vector<double>{1, 0});
  CHECK(s.transform(std::vector<double>{-3, 5}) == std::vector<double>{0, 0});
  CHECK_THROWS_AS(MinMaxScaler::fit({}), InputError);
}

TEST_CASE("feature csv round trip") {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / "enrol_features_test.csv";
  FeatureTable t;
  t.names = {"first_order_mean", "glcm_contrast"};
  t.ids = {"s0", "s1"};
  t.rows = {{0.1, 1.0 / 3.0}, {-2e-300, 123456789.123456789}};
  write_feature_csv(t, p);
  const FeatureTable back = read_feature_csv(p);
  CHECK(back.names == t.names);
  CHECK(back.ids == t.ids);
  CHECK(back.rows == t.rows);
  fs::remove(p);
}
