// SPDX-License-Identifier: Apache-2.0
#include "enrol/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

#include "enrol/core/error.hpp"
#include "enrol/core/rng.hpp"

namespace enrol::data {
namespace {

using Json = nlohmann::json;

struct Bump {
  double cz, cy, cx, sigma, amplitude;
};

struct Lobe {
  double kz, ky, kx, phase, weight;
};

double gaussian(double d2, double sigma) { return std::exp(-d2 / (2 * sigma * sigma)); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("phantom config: " + msg);
}

}  // namespace

SequenceContrast default_contrast(const std::string& tag) {
  if (tag == "t1") return {"t1", 1.0, 0.55, 0.3};
  if (tag == "t1ce") return {"t1ce", 1.0, 0.8, 1.2};
  if (tag == "t2") return {"t2", 0.8, 1.4, 0.5};
  if (tag == "flair") return {"flair", 0.9, 1.2, 0.7};
  return {tag, 1.0, 1.0, 1.0};
}

PhantomConfig PhantomConfig::defaults() {
  PhantomConfig c;
  for (const char* tag : {"t1", "t1ce", "t2", "flair"}) c.sequences.push_back(default_contrast(tag));
  return c;
}

void PhantomConfig::validate() const {
  for (std::size_t d : volume_dims) require(d >= 8, "volume_dims must be >= 8 per axis");
  require(!sequences.empty(), "at least one sequence is required");
  std::set<std::string> tags;
  for (const auto& s : sequences) {
    require(!s.tag.empty(), "empty sequence tag");
    require(tags.insert(s.tag).second, "duplicate sequence tag '" + s.tag + "'");
    require(std::isfinite(s.background_gain) && std::isfinite(s.lesion_gain) &&
                std::isfinite(s.rim_gain),
            "sequence gains must be finite");
  }
  require(class_ratio[0] > 0 && class_ratio[1] > 0, "class_ratio entries must be positive");
  const auto counts = class_counts();
  require(counts[0] >= 2 && counts[1] >= 2, "each class needs at least 2 samples");
  require(grade0.lesion_sigma >= 0 && grade0.boundary_smoothness >= 0 && grade1.speckle_variance >= 0 &&
              grade1.boundary_perturbation >= 0 && grade1.rim_width >= 0 && noise_sigma >= 0 &&
              background_variation >= 0,
          "sigmas, variances, widths and amplitudes must be >= 0");
  require(grade1.boundary_perturbation < 0.8, "boundary_perturbation must be < 0.8");
  require(grade1.severity_range[0] >= 0 && grade1.severity_range[0] <= grade1.severity_range[1] &&
              grade1.severity_range[1] <= 1,
          "severity_range must satisfy 0 <= lo <= hi <= 1");
  require(lesion_radius_range[0] > 0 && lesion_radius_range[0] <= lesion_radius_range[1] &&
              lesion_radius_range[1] < 0.5,
          "lesion_radius_range must satisfy 0 < lo <= hi < 0.5");
}

std::array<std::size_t, 2> PhantomConfig::class_counts() const {
  const double share = class_ratio[0] / (class_ratio[0] + class_ratio[1]);
  const auto n0 = static_cast<std::size_t>(std::llround(static_cast<double>(sample_count) * share));
  return {n0, sample_count - std::min(n0, sample_count)};
}

void to_json(Json& j, const PhantomConfig& c) {
  Json seqs = Json::array();
  for (const auto& s : c.sequences)
    seqs.push_back({{"tag", s.tag},
                    {"background_gain", s.background_gain},
                    {"lesion_gain", s.lesion_gain},
                    {"rim_gain", s.rim_gain}});
  j = Json{{"volume_dims", c.volume_dims},
           {"sequences", seqs},
           {"sample_count", c.sample_count},
           {"class_ratio", c.class_ratio},
           {"grade0",
            {{"lesion_mean", c.grade0.lesion_mean},
             {"lesion_sigma", c.grade0.lesion_sigma},
             {"boundary_smoothness", c.grade0.boundary_smoothness}}},
           {"grade1",
            {{"speckle_variance", c.grade1.speckle_variance},
             {"boundary_perturbation", c.grade1.boundary_perturbation},
             {"rim_width", c.grade1.rim_width},
             {"rim_intensity", c.grade1.rim_intensity},
             {"severity_range", c.grade1.severity_range}}},
           {"noise_sigma", c.noise_sigma},
           {"background_level", c.background_level},
           {"background_variation", c.background_variation},
           {"lesion_radius_range", c.lesion_radius_range},
           {"seed", c.seed}};
}

void from_json(const Json& j, PhantomConfig& c) {
  static const std::set<std::string> known{"volume_dims",      "sequences",        "sample_count",
                                           "class_ratio",      "grade0",           "grade1",
                                           "noise_sigma",      "background_level", "background_variation",
                                           "lesion_radius_range", "seed"};
  if (!j.is_object()) throw ConfigError("phantom config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("phantom config: unknown field '" + key + "'");
  try {
    c = PhantomConfig::defaults();
    if (j.contains("volume_dims")) c.volume_dims = j.at("volume_dims").get<std::array<std::size_t, 3>>();
    if (j.contains("sequences")) {
      c.sequences.clear();
      for (const auto& s : j.at("sequences")) {
        if (s.is_string()) {
          c.sequences.push_back(default_contrast(s.get<std::string>()));
          continue;
        }
        SequenceContrast sc = default_contrast(s.at("tag").get<std::string>());
        sc.background_gain = s.value("background_gain", sc.background_gain);
        sc.lesion_gain = s.value("lesion_gain", sc.lesion_gain);
        sc.rim_gain = s.value("rim_gain", sc.rim_gain);
        c.sequences.push_back(sc);
      }
    }
    c.sample_count = j.value("sample_count", c.sample_count);
    if (j.contains("class_ratio")) c.class_ratio = j.at("class_ratio").get<std::array<double, 2>>();
    if (j.contains("grade0")) {
      const auto& g = j.at("grade0");
      c.grade0.lesion_mean = g.value("lesion_mean", c.grade0.lesion_mean);
      c.grade0.lesion_sigma = g.value("lesion_sigma", c.grade0.lesion_sigma);
      c.grade0.boundary_smoothness = g.value("boundary_smoothness", c.grade0.boundary_smoothness);
    }
    if (j.contains("grade1")) {
      const auto& g = j.at("grade1");
      c.grade1.speckle_variance = g.value("speckle_variance", c.grade1.speckle_variance);
      c.grade1.boundary_perturbation = g.value("boundary_perturbation", c.grade1.boundary_perturbation);
      c.grade1.rim_width = g.value("rim_width", c.grade1.rim_width);
      c.grade1.rim_intensity = g.value("rim_intensity", c.grade1.rim_intensity);
      if (g.contains("severity_range")) c.grade1.severity_range = g.at("severity_range").get<std::array<double, 2>>();
    }
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.background_level = j.value("background_level", c.background_level);
    c.background_variation = j.value("background_variation", c.background_variation);
    if (j.contains("lesion_radius_range"))
      c.lesion_radius_range = j.at("lesion_radius_range").get<std::array<double, 2>>();
    c.seed = j.value("seed", c.seed);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("phantom config: ") + e.what());
  }
  c.validate();
}

std::string config_hash(const PhantomConfig& cfg) {
  const std::string text = Json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string phantom_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%04zu", index);
  return buf;
}

PhantomSample generate_phantom(const PhantomConfig& cfg, std::size_t index, int label) {
  cfg.validate();
  if (label != 0 && label != 1) throw InputError("phantom label must be 0 or 1");
  std::mt19937_64 rng(derive_seed(cfg.seed, index + 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const Dims3 dims{cfg.volume_dims[0], cfg.volume_dims[1], cfg.volume_dims[2]};
  const double extent = static_cast<double>(std::min({dims[0], dims[1], dims[2]}));
  const bool high = label == 1;
  const double severity = high ? uniform(cfg.grade1.severity_range[0], cfg.grade1.severity_range[1]) : 0.0;

  std::vector<Bump> bumps(3);
  for (auto& b : bumps) {
    b.cz = uniform(0, static_cast<double>(dims[0]));
    b.cy = uniform(0, static_cast<double>(dims[1]));
    b.cx = uniform(0, static_cast<double>(dims[2]));
    b.sigma = uniform(0.25, 0.5) * extent;
    b.amplitude = uniform(-1, 1) * cfg.background_variation;
  }

  // Lesion placement: center, semi-axes and (grade 1) boundary lobes. Retried
  // until the mask is non-trivial and clears the volume border.
  std::array<double, 3> center{}, axes{};
  std::vector<Lobe> lobes;
  const double amp = severity * cfg.grade1.boundary_perturbation;
  MaskVolume mask(dims, {1, 1, 1}, std::uint8_t{0});
  std::vector<double> rho(mask.size()), radius(mask.size());
  bool placed = false;
  for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
    for (auto& a : axes)
      a = uniform(cfg.lesion_radius_range[0], cfg.lesion_radius_range[1]) * extent;
    for (int a = 0; a < 3; ++a) center[a] = uniform(0.5, static_cast<double>(dims[a]) - 0.5);
    lobes.assign(3, {});
    for (auto& l : lobes) {
      l.kz = uniform(-3, 3);
      l.ky = uniform(-3, 3);
      l.kx = uniform(-3, 3);
      l.phase = uniform(0, 2 * std::numbers::pi);
      l.weight = uniform(0.5, 1.0);
    }
    double wsum = 0;
    for (const auto& l : lobes) wsum += l.weight;
    for (auto& l : lobes) l.weight /= wsum;

    std::size_t count = 0;
    bool touches = false;
    for (std::size_t z = 0; z < dims[0]; ++z)
      for (std::size_t y = 0; y < dims[1]; ++y)
        for (std::size_t x = 0; x < dims[2]; ++x) {
          const double qz = (static_cast<double>(z) + 0.5 - center[0]) / axes[0];
          const double qy = (static_cast<double>(y) + 0.5 - center[1]) / axes[1];
          const double qx = (static_cast<double>(x) + 0.5 - center[2]) / axes[2];
          const double r = std::sqrt(qz * qz + qy * qy + qx * qx);
          double bound = 1.0;
          if (amp > 0 && r > 0) {
            double f = 0;
            for (const auto& l : lobes)
              f += l.weight * std::sin((l.kz * qz + l.ky * qy + l.kx * qx) / r + l.phase);
            bound = 1.0 + amp * f;
          }
          const std::size_t i = mask.index(z, y, x);
          rho[i] = r;
          radius[i] = bound;
          const bool in = r <= bound;
          mask.labels[i] = in ? 1 : 0;
          if (in) {
            ++count;
            if (z == 0 || y == 0 || x == 0 || z + 1 == dims[0] || y + 1 == dims[1] || x + 1 == dims[2])
              touches = true;
          }
        }
    placed = !touches && count >= 8;
  }
  if (!placed)
    throw ConfigError("phantom " + phantom_id(index) + ": lesion does not fit the volume after " +
                      std::to_string(kMaxPlacementAttempts) + " attempts");

  const double mean_axis = (axes[0] + axes[1] + axes[2]) / 3;
  const double level = cfg.grade0.lesion_mean + (high ? 0.0 : cfg.grade0.lesion_sigma * normal(rng));
  const double speckle_sd = severity * std::sqrt(cfg.grade1.speckle_variance);

  const std::size_t n = mask.size();
  std::vector<double> background(n), weight(n), lesion(n), rim(n, 0.0);
  for (std::size_t z = 0; z < dims[0]; ++z)
    for (std::size_t y = 0; y < dims[1]; ++y)
      for (std::size_t x = 0; x < dims[2]; ++x) {
        const std::size_t i = mask.index(z, y, x);
        double b = cfg.background_level;
        for (const auto& bp : bumps) {
          const double dz = static_cast<double>(z) + 0.5 - bp.cz;
          const double dy = static_cast<double>(y) + 0.5 - bp.cy;
          const double dx = static_cast<double>(x) + 0.5 - bp.cx;
          b += bp.amplitude * gaussian(dz * dz + dy * dy + dx * dx, bp.sigma);
        }
        background[i] = b;
        // Distance to the boundary in voxels, positive outside.
        const double d = (rho[i] - radius[i]) * mean_axis;
        if (mask.labels[i]) {
          weight[i] = 1.0;
          if (high) {
            lesion[i] = level + speckle_sd * normal(rng);
            if (-d < cfg.grade1.rim_width) rim[i] = severity * cfg.grade1.rim_intensity;
          } else {
            lesion[i] = level;
          }
        } else {
          const double s = high ? 0.0 : cfg.grade0.boundary_smoothness;
          weight[i] = s > 0 ? gaussian(d * d, s) : 0.0;
          lesion[i] = level;
        }
      }

  PhantomSample out;
  out.id = phantom_id(index);
  out.label = label;
  out.mask = mask;
  for (const auto& seq : cfg.sequences) {
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = seq.background_gain * background[i] * (1 - weight[i]) +
                 seq.lesion_gain * lesion[i] * weight[i] + seq.rim_gain * rim[i];
      if (cfg.noise_sigma > 0) v += cfg.noise_sigma * normal(rng);
      values[i] = static_cast<float>(v);
    }
    out.volumes.emplace_back(dims, Spacing3{1, 1, 1}, std::move(values));
  }
  return out;
}

std::vector<int> phantom_labels(const PhantomConfig& cfg) {
  cfg.validate();
  const auto counts = cfg.class_counts();
  std::vector<int> labels(counts[0], 0);
  labels.insert(labels.end(), counts[1], 1);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

std::vector<PhantomSample> generate_phantom_samples(const PhantomConfig& cfg) {
  const auto labels = phantom_labels(cfg);
  std::vector<PhantomSample> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back(generate_phantom(cfg, i, labels[i]));
  return out;
}

}  // namespace enrol::data
