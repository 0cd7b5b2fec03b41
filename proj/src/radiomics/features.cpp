// SPDX-License-Identifier: Apache-2.0
#include "enrol/radiomics/features.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "enrol/core/error.hpp"
#include "enrol/io/text.hpp"

namespace enrol::radiomics {
namespace {

constexpr double kVarianceFloor = 1e-12;
constexpr double kEigenFloor = 1e-12;

void check_pair(const VoxelVolume& vol, const MaskVolume& mask) {
  if (vol.dims != mask.dims)
    throw InputError("volume dims (" + std::to_string(vol.dims[0]) + "," +
                     std::to_string(vol.dims[1]) + "," + std::to_string(vol.dims[2]) +
                     ") do not match mask dims (" + std::to_string(mask.dims[0]) + "," +
                     std::to_string(mask.dims[1]) + "," + std::to_string(mask.dims[2]) + ")");
  if (mask.count() == 0) throw ExtractionError("mask has no foreground voxels");
}

std::vector<double> masked_values(const VoxelVolume& vol, const MaskVolume& mask) {
  std::vector<double> out;
  for (std::size_t i = 0; i < mask.labels.size(); ++i)
    if (mask.labels[i]) out.push_back(vol.intensities[i]);
  return out;
}

// Linear interpolation between closest ranks over sorted data.
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Gray level image over the full grid; -1 outside the mask.
std::vector<int> level_grid(const VoxelVolume& vol, const MaskVolume& mask, std::size_t bins) {
  const std::vector<int> levels = discretize(vol, mask, bins);
  std::vector<int> grid(mask.size(), -1);
  std::size_t k = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (mask.labels[i]) grid[i] = levels[k++];
  return grid;
}

bool step(const Dims3& d, std::size_t z, std::size_t y, std::size_t x, const Offset& o,
          std::size_t& nz, std::size_t& ny, std::size_t& nx) {
  const long tz = static_cast<long>(z) + o[0], ty = static_cast<long>(y) + o[1],
             tx = static_cast<long>(x) + o[2];
  if (tz < 0 || ty < 0 || tx < 0 || tz >= static_cast<long>(d[0]) ||
      ty >= static_cast<long>(d[1]) || tx >= static_cast<long>(d[2]))
    return false;
  nz = static_cast<std::size_t>(tz);
  ny = static_cast<std::size_t>(ty);
  nx = static_cast<std::size_t>(tx);
  return true;
}

double plogp_sum(const std::vector<double>& p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

// Features of one normalized, symmetric co-occurrence matrix (levels 1..ng).
std::vector<double> glcm_family(const std::vector<double>& p, std::size_t ng) {
  std::vector<double> px(ng, 0), psum(2 * ng + 1, 0), pdiff(ng, 0);
  double contrast = 0, dissim = 0, asm_ = 0, idm = 0, id = 0, autoc = 0, maxp = 0;
  for (std::size_t a = 0; a < ng; ++a)
    for (std::size_t b = 0; b < ng; ++b) {
      const double v = p[a * ng + b];
      if (v == 0) continue;
      const double i = static_cast<double>(a + 1), j = static_cast<double>(b + 1);
      const double d = std::abs(i - j);
      px[a] += v;
      psum[a + b + 2] += v;
      pdiff[a > b ? a - b : b - a] += v;
      contrast += d * d * v;
      dissim += d * v;
      asm_ += v * v;
      idm += v / (1 + d * d);
      id += v / (1 + d);
      autoc += i * j * v;
      maxp = std::max(maxp, v);
    }
  double mu = 0, var = 0;
  for (std::size_t a = 0; a < ng; ++a) mu += static_cast<double>(a + 1) * px[a];
  for (std::size_t a = 0; a < ng; ++a) {
    const double c = static_cast<double>(a + 1) - mu;
    var += c * c * px[a];
  }
  double tendency = 0, shade = 0, prominence = 0;
  for (std::size_t a = 0; a < ng; ++a)
    for (std::size_t b = 0; b < ng; ++b) {
      const double v = p[a * ng + b];
      if (v == 0) continue;
      const double c = static_cast<double>(a + b + 2) - 2 * mu;
      tendency += c * c * v;
      shade += c * c * c * v;
      prominence += c * c * c * c * v;
    }
  // Symmetric matrix: both marginals share mean and variance.
  const double corr = var < kVarianceFloor ? 0.0 : (autoc - mu * mu) / var;
  double sum_avg = 0, diff_avg = 0;
  for (std::size_t k = 0; k < psum.size(); ++k) sum_avg += static_cast<double>(k) * psum[k];
  for (std::size_t k = 0; k < pdiff.size(); ++k) diff_avg += static_cast<double>(k) * pdiff[k];
  return {contrast, dissim,   asm_,       idm,  id,      plogp_sum(p),   corr,     autoc,   mu,
          tendency, shade,    prominence, maxp, sum_avg, plogp_sum(psum), diff_avg, plogp_sum(pdiff)};
}

// Features of one run-length matrix r[level][length-1].
std::vector<double> glrlm_family(const std::vector<std::vector<double>>& r, double voxels) {
  const std::size_t ng = r.size(), nl = r.empty() ? 0 : r[0].size();
  double nr = 0;
  for (const auto& row : r)
    for (double v : row) nr += v;
  double sre = 0, lre = 0, gln = 0, rln = 0, lgre = 0, hgre = 0, srlge = 0, srhge = 0, lrlge = 0,
         lrhge = 0, mu_i = 0, mu_l = 0, ent = 0;
  std::vector<double> by_len(nl, 0);
  for (std::size_t a = 0; a < ng; ++a) {
    double by_level = 0;
    const double i = static_cast<double>(a + 1), i2 = i * i;
    for (std::size_t b = 0; b < nl; ++b) {
      const double v = r[a][b];
      if (v == 0) continue;
      const double l = static_cast<double>(b + 1), l2 = l * l;
      by_level += v;
      by_len[b] += v;
      sre += v / l2;
      lre += v * l2;
      lgre += v / i2;
      hgre += v * i2;
      srlge += v / (i2 * l2);
      srhge += v * i2 / l2;
      lrlge += v * l2 / i2;
      lrhge += v * i2 * l2;
      mu_i += i * v / nr;
      mu_l += l * v / nr;
      const double p = v / nr;
      ent -= p * std::log(p);
    }
    gln += by_level * by_level;
  }
  for (double v : by_len) rln += v * v;
  double var_i = 0, var_l = 0;
  for (std::size_t a = 0; a < ng; ++a)
    for (std::size_t b = 0; b < nl; ++b) {
      const double v = r[a][b];
      if (v == 0) continue;
      const double ci = static_cast<double>(a + 1) - mu_i, cl = static_cast<double>(b + 1) - mu_l;
      var_i += ci * ci * v / nr;
      var_l += cl * cl * v / nr;
    }
  return {sre / nr,   lre / nr,   gln / nr,   gln / (nr * nr), rln / nr,   rln / (nr * nr),
          nr / voxels, lgre / nr, hgre / nr,  srlge / nr,      srhge / nr, lrlge / nr,
          lrhge / nr, var_i,      var_l,      ent};
}

const std::vector<std::string>& first_order_names() {
  static const std::vector<std::string> n{"mean", "median", "minimum", "maximum", "range", "variance",
                                          "std", "skewness", "kurtosis", "energy", "rms", "mad",
                                          "p10", "p90", "iqr", "entropy", "uniformity"};
  return n;
}
const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> n{"volume",       "surface_area", "sphericity",
                                          "surface_to_volume", "max_diameter", "elongation",
                                          "flatness"};
  return n;
}
const std::vector<std::string>& glcm_names() {
  static const std::vector<std::string> n{
      "contrast",         "dissimilarity",      "asm",          "homogeneity",
      "inverse_difference", "entropy",          "correlation",  "autocorrelation",
      "joint_average",    "cluster_tendency",   "cluster_shade", "cluster_prominence",
      "max_probability",  "sum_average",        "sum_entropy",  "difference_average",
      "difference_entropy"};
  return n;
}
const std::vector<std::string>& glrlm_names() {
  static const std::vector<std::string> n{
      "sre",   "lre",   "gln",   "glnn",  "rln",   "rlnn", "run_percentage",
      "lgre",  "hgre",  "srlge", "srhge", "lrlge", "lrhge", "gray_level_variance",
      "run_length_variance", "run_entropy"};
  return n;
}

FeatureVector make(const std::vector<std::string>& names, const std::vector<double>& values) {
  FeatureVector f;
  for (std::size_t i = 0; i < names.size(); ++i) f.add(names[i], values[i]);
  return f;
}

FeatureVector prefixed(const FeatureVector& f, const std::string& prefix) {
  FeatureVector out;
  for (std::size_t i = 0; i < f.size(); ++i) out.add(prefix + f.names[i], f.values[i]);
  return out;
}

}  // namespace

std::vector<Offset> unit_offsets() {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Offset o{dz, dy, dx};
        const int lead = dz != 0 ? dz : (dy != 0 ? dy : dx);
        if (lead > 0) out.push_back(o);
      }
  return out;
}

DiscretizationConfig DiscretizationConfig::defaults() {
  DiscretizationConfig c;
  c.glcm_offsets = unit_offsets();
  c.glrlm_directions = unit_offsets();
  return c;
}

void DiscretizationConfig::validate() const {
  if (bin_count < 2) throw ConfigError("bin_count must be at least 2");
  for (const auto* list : {&glcm_offsets, &glrlm_directions}) {
    if (list->empty()) throw ConfigError("offset list must not be empty");
    std::set<Offset> seen;
    for (const Offset& o : *list) {
      if (o == Offset{0, 0, 0}) throw ConfigError("offsets must be nonzero");
      const Offset neg{-o[0], -o[1], -o[2]};
      if (seen.count(o) || seen.count(neg)) throw ConfigError("offsets must be unique up to sign");
      seen.insert(o);
    }
  }
}

void FeatureVector::add(std::string name, double value) {
  if (!std::isfinite(value)) throw NumericError("feature '" + name + "' is not finite");
  names.push_back(std::move(name));
  values.push_back(value);
}

void FeatureVector::append(const FeatureVector& other) {
  for (std::size_t i = 0; i < other.size(); ++i) add(other.names[i], other.values[i]);
}

double FeatureVector::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw InputError("no feature named '" + name + "'");
}

std::vector<std::string> feature_names() {
  std::vector<std::string> out;
  for (const auto& n : first_order_names()) out.push_back("first_order_" + n);
  for (const auto& n : shape_names()) out.push_back("shape_" + n);
  for (const auto& n : glcm_names()) out.push_back("glcm_" + n);
  for (const auto& n : glrlm_names()) out.push_back("glrlm_" + n);
  return out;
}

std::vector<int> discretize(const VoxelVolume& vol, const MaskVolume& mask, std::size_t bins) {
  check_pair(vol, mask);
  if (bins < 2) throw ConfigError("bin_count must be at least 2");
  const std::vector<double> v = masked_values(vol, mask);
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<int> out(v.size(), 0);
  if (hi > lo) {
    const double nb = static_cast<double>(bins);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double b = std::floor((v[i] - lo) / (hi - lo) * nb);
      out[i] = static_cast<int>(std::min(b, nb - 1));
    }
  }
  return out;
}

FeatureVector first_order_features(const VoxelVolume& vol, const MaskVolume& mask,
                                   std::size_t bin_count) {
  check_pair(vol, mask);
  std::vector<double> v = masked_values(vol, mask);
  const double n = static_cast<double>(v.size());
  double sum = 0, energy = 0;
  for (double x : v) {
    sum += x;
    energy += x * x;
  }
  const double mean = sum / n;
  double m2 = 0, m3 = 0, m4 = 0, mad = 0;
  for (double x : v) {
    const double c = x - mean;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
    mad += std::abs(c);
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  mad /= n;
  const bool flat = m2 < kVarianceFloor;
  const double skew = flat ? 0.0 : m3 / std::pow(m2, 1.5);
  const double kurt = flat ? 0.0 : m4 / (m2 * m2) - 3.0;

  const std::vector<int> levels = discretize(vol, mask, bin_count);
  std::vector<double> hist(bin_count, 0);
  for (int l : levels) hist[static_cast<std::size_t>(l)] += 1 / n;
  double uniformity = 0;
  for (double p : hist) uniformity += p * p;

  std::sort(v.begin(), v.end());
  const double p10 = percentile(v, 0.10), p90 = percentile(v, 0.90);
  return make(first_order_names(),
              {mean, percentile(v, 0.5), v.front(), v.back(), v.back() - v.front(), m2,
               std::sqrt(m2), skew, kurt, energy, std::sqrt(energy / n), mad, p10, p90,
               percentile(v, 0.75) - percentile(v, 0.25), plogp_sum(hist), uniformity});
}

FeatureVector shape_features(const MaskVolume& mask, const Spacing3& spacing) {
  for (double s : spacing)
    if (!(s > 0)) throw InputError("spacing must be positive");
  const std::size_t count = mask.count();
  if (count == 0) throw ExtractionError("mask has no foreground voxels");
  const Dims3& d = mask.dims;
  const double face_area[3] = {spacing[1] * spacing[2], spacing[0] * spacing[2],
                               spacing[0] * spacing[1]};
  const double volume = static_cast<double>(count) * spacing[0] * spacing[1] * spacing[2];

  double area = 0;
  std::vector<std::array<double, 3>> surface, all;
  for (std::size_t z = 0; z < d[0]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[2]; ++x) {
        if (!mask.inside(z, y, x)) continue;
        bool exposed = false;
        for (std::size_t a = 0; a < 3; ++a)
          for (int sgn : {-1, 1}) {
            Offset o{0, 0, 0};
            o[a] = sgn;
            std::size_t nz, ny, nx;
            if (!step(d, z, y, x, o, nz, ny, nx) || !mask.inside(nz, ny, nx)) {
              area += face_area[a];
              exposed = true;
            }
          }
        const std::array<double, 3> c{static_cast<double>(z) * spacing[0],
                                      static_cast<double>(y) * spacing[1],
                                      static_cast<double>(x) * spacing[2]};
        all.push_back(c);
        if (exposed) surface.push_back(c);
      }

  // The farthest pair of a finite point set lies on its hull, and hull voxels are exposed.
  double diam2 = 0;
  for (std::size_t i = 0; i < surface.size(); ++i)
    for (std::size_t j = i + 1; j < surface.size(); ++j) {
      double s = 0;
      for (std::size_t a = 0; a < 3; ++a) {
        const double t = surface[i][a] - surface[j][a];
        s += t * t;
      }
      diam2 = std::max(diam2, s);
    }

  Eigen::Vector3d mu = Eigen::Vector3d::Zero();
  for (const auto& c : all) mu += Eigen::Vector3d(c[0], c[1], c[2]);
  mu /= static_cast<double>(all.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& c : all) {
    const Eigen::Vector3d t = Eigen::Vector3d(c[0], c[1], c[2]) - mu;
    cov += t * t.transpose();
  }
  cov /= static_cast<double>(all.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov, Eigen::EigenvaluesOnly);
  Eigen::Vector3d ev = solver.eigenvalues();  // ascending
  for (int i = 0; i < 3; ++i) ev[i] = std::max(ev[i], kEigenFloor);

  const double sphericity =
      std::cbrt(std::numbers::pi) * std::pow(6 * volume, 2.0 / 3.0) / area;
  return make(shape_names(), {volume, area, sphericity, area / volume, std::sqrt(diam2),
                              std::sqrt(ev[1] / ev[2]), std::sqrt(ev[0] / ev[2])});
}

FeatureVector glcm_features(const VoxelVolume& vol, const MaskVolume& mask,
                            const DiscretizationConfig& cfg) {
  cfg.validate();
  check_pair(vol, mask);
  const std::size_t ng = cfg.bin_count;
  const std::vector<int> grid = level_grid(vol, mask, ng);
  const Dims3& d = mask.dims;
  std::vector<double> acc(glcm_names().size(), 0);
  std::size_t used = 0;
  std::vector<double> p(ng * ng);
  for (const Offset& o : cfg.glcm_offsets) {
    std::fill(p.begin(), p.end(), 0.0);
    double total = 0;
    for (std::size_t z = 0; z < d[0]; ++z)
      for (std::size_t y = 0; y < d[1]; ++y)
        for (std::size_t x = 0; x < d[2]; ++x) {
          const int a = grid[mask.index(z, y, x)];
          if (a < 0) continue;
          std::size_t nz, ny, nx;
          if (!step(d, z, y, x, o, nz, ny, nx)) continue;
          const int b = grid[mask.index(nz, ny, nx)];
          if (b < 0) continue;
          p[static_cast<std::size_t>(a) * ng + static_cast<std::size_t>(b)] += 1;
          p[static_cast<std::size_t>(b) * ng + static_cast<std::size_t>(a)] += 1;
          total += 2;
        }
    if (total == 0) continue;
    for (double& v : p) v /= total;
    const std::vector<double> f = glcm_family(p, ng);
    for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
    ++used;
  }
  if (used == 0) {
    // No neighbouring pair anywhere: treat as a constant region at level 1.
    std::fill(p.begin(), p.end(), 0.0);
    p[0] = 1;
    return make(glcm_names(), glcm_family(p, ng));
  }
  for (double& v : acc) v /= static_cast<double>(used);
  return make(glcm_names(), acc);
}

FeatureVector glrlm_features(const VoxelVolume& vol, const MaskVolume& mask,
                             const DiscretizationConfig& cfg) {
  cfg.validate();
  check_pair(vol, mask);
  const std::size_t ng = cfg.bin_count;
  const std::vector<int> grid = level_grid(vol, mask, ng);
  const Dims3& d = mask.dims;
  const std::size_t max_len = std::max({d[0], d[1], d[2]});
  const double voxels = static_cast<double>(mask.count());
  std::vector<double> acc(glrlm_names().size(), 0);
  for (const Offset& o : cfg.glrlm_directions) {
    std::vector<std::vector<double>> r(ng, std::vector<double>(max_len, 0));
    const Offset back{-o[0], -o[1], -o[2]};
    for (std::size_t z = 0; z < d[0]; ++z)
      for (std::size_t y = 0; y < d[1]; ++y)
        for (std::size_t x = 0; x < d[2]; ++x) {
          const int a = grid[mask.index(z, y, x)];
          if (a < 0) continue;
          std::size_t pz, py, px;
          // Only the first voxel of a run walks it.
          if (step(d, z, y, x, back, pz, py, px) && grid[mask.index(pz, py, px)] == a) continue;
          std::size_t len = 1, cz = z, cy = y, cx = x;
          while (step(d, cz, cy, cx, o, pz, py, px) && grid[mask.index(pz, py, px)] == a) {
            ++len;
            cz = pz;
            cy = py;
            cx = px;
          }
          r[static_cast<std::size_t>(a)][len - 1] += 1;
        }
    const std::vector<double> f = glrlm_family(r, voxels);
    for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
  }
  for (double& v : acc) v /= static_cast<double>(cfg.glrlm_directions.size());
  return make(glrlm_names(), acc);
}

FeatureVector extract_features(const VoxelVolume& vol, const MaskVolume& mask,
                               const DiscretizationConfig& cfg) {
  cfg.validate();
  FeatureVector out;
  out.append(prefixed(first_order_features(vol, mask, cfg.bin_count), "first_order_"));
  out.append(prefixed(shape_features(mask, vol.spacing), "shape_"));
  out.append(prefixed(glcm_features(vol, mask, cfg), "glcm_"));
  out.append(prefixed(glrlm_features(vol, mask, cfg), "glrlm_"));
  return out;
}

MinMaxScaler MinMaxScaler::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InputError("cannot fit a scaler on zero samples");
  MinMaxScaler s;
  s.min = rows.front();
  s.max = rows.front();
  for (const auto& r : rows) {
    if (r.size() != s.min.size()) throw ShapeError("feature rows have differing lengths");
    for (std::size_t j = 0; j < r.size(); ++j) {
      s.min[j] = std::min(s.min[j], r[j]);
      s.max[j] = std::max(s.max[j], r[j]);
    }
  }
  return s;
}

std::vector<double> MinMaxScaler::transform(const std::vector<double>& row) const {
  if (row.size() != min.size())
    throw ShapeError("row has " + std::to_string(row.size()) + " features, scaler expects " +
                     std::to_string(min.size()));
  std::vector<double> out(row.size(), 0);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!(max[j] > min[j])) continue;
    out[j] = std::clamp((row[j] - min[j]) / (max[j] - min[j]), 0.0, 1.0);
  }
  return out;
}

std::vector<std::vector<double>> MinMaxScaler::transform(
    const std::vector<std::vector<double>>& rows) const {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(transform(r));
  return out;
}

std::vector<std::vector<double>> normalize_feature_matrix(
    const std::vector<std::vector<double>>& train, MinMaxScaler* scaler_out) {
  MinMaxScaler s = MinMaxScaler::fit(train);
  auto out = s.transform(train);
  if (scaler_out) *scaler_out = std::move(s);
  return out;
}

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path) {
  if (table.ids.size() != table.rows.size())
    throw ShapeError("feature table has " + std::to_string(table.ids.size()) + " ids and " +
                     std::to_string(table.rows.size()) + " rows");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os << "id";
  for (const auto& n : table.names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].size() != table.names.size())
      throw ShapeError("feature row " + std::to_string(i) + " has the wrong width");
    os << table.ids[i];
    for (double v : table.rows[i]) os << ',' << io::format_double(v);
    os << '\n';
  }
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open feature table '" + path.string() + "'");
  FeatureTable t;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("feature table '" + path.string() + "' is empty");
  auto header = io::split_csv_line(line);
  if (header.empty() || header[0] != "id") throw FormatError("feature table header must start with 'id'");
  t.names.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = io::split_csv_line(line);
    if (cells.size() != header.size())
      throw FormatError("feature table line " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    t.ids.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      const double v = io::parse_double(cells[j], "feature table line " + std::to_string(lineno));
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace enrol::radiomics
