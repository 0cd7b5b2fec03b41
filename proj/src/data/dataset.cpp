// SPDX-License-Identifier: Apache-2.0
#include "enrol/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "enrol/core/error.hpp"
#include "enrol/data/vvol.hpp"

namespace enrol::data {
namespace {

using Json = nlohmann::json;

bool known_split(const std::string& s) {
  return s == kSplitTrain || s == kSplitValidation || s == kSplitTest;
}

}  // namespace

std::vector<const ManifestRecord*> DatasetManifest::in_split(const std::string& split) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

void to_json(Json& j, const DatasetManifest& m) {
  Json recs = Json::array();
  for (const auto& r : m.records)
    recs.push_back({{"id", r.id},
                    {"label", r.label},
                    {"volume_paths", r.volume_paths},
                    {"mask_path", r.mask_path},
                    {"split", r.split}});
  j = Json{{"sequences", m.sequences},
           {"generator_config_hash", m.generator_config_hash},
           {"generator_config", m.generator_config},
           {"records", recs}};
}

void from_json(const Json& j, DatasetManifest& m) {
  try {
    m.sequences = j.at("sequences").get<std::vector<std::string>>();
    m.generator_config_hash = j.value("generator_config_hash", std::string{});
    m.generator_config = j.value("generator_config", Json::object());
    m.records.clear();
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.label = r.at("label").get<int>();
      rec.volume_paths = r.at("volume_paths").get<std::map<std::string, std::string>>();
      rec.mask_path = r.value("mask_path", std::string{});
      rec.split = r.value("split", std::string{});
      m.records.push_back(std::move(rec));
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os << Json(m).dump(2) << '\n';
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open manifest '" + path.string() + "'");
  Json j;
  try {
    is >> j;
  } catch (const Json::exception& e) {
    throw InputError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  DatasetManifest m = j.get<DatasetManifest>();
  m.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  validate_manifest(m, false);
  return m;
}

void validate_manifest(const DatasetManifest& m, bool check_files) {
  if (m.records.empty()) throw InputError("manifest has no records");
  if (m.sequences.empty()) throw InputError("manifest lists no sequences");
  std::set<std::string> ids;
  std::vector<std::string> missing;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second) throw InputError("manifest: duplicate id '" + r.id + "'");
    if (r.label != 0 && r.label != 1) throw InputError("manifest: record '" + r.id + "' has label outside {0,1}");
    if (!r.split.empty() && !known_split(r.split))
      throw InputError("manifest: record '" + r.id + "' has unknown split '" + r.split + "'");
    for (const auto& seq : m.sequences) {
      const auto it = r.volume_paths.find(seq);
      if (it == r.volume_paths.end())
        throw InputError("manifest: record '" + r.id + "' has no '" + seq + "' volume");
      if (check_files && !std::filesystem::exists(m.resolve(it->second)))
        missing.push_back(m.resolve(it->second).string());
    }
    if (check_files && !r.mask_path.empty() && !std::filesystem::exists(m.resolve(r.mask_path)))
      missing.push_back(m.resolve(r.mask_path).string());
  }
  if (!missing.empty()) {
    std::string msg = "manifest references " + std::to_string(missing.size()) + " missing file(s):";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += "\n  " + missing[i];
    if (missing.size() > 10) msg += "\n  ...";
    throw InputError(msg);
  }
}

std::vector<std::size_t> stratified_holdout(const std::vector<int>& labels, double fraction,
                                            std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw ConfigError("holdout fraction must lie in (0,1)");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InputError("split labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  const auto total = static_cast<std::size_t>(std::floor(static_cast<double>(labels.size()) * fraction + 1e-9));
  std::array<std::size_t, 2> take{};
  std::array<double, 2> rem{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double quota = static_cast<double>(by_class[c].size()) * fraction;
    take[c] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    rem[c] = quota - static_cast<double>(take[c]);
    assigned += take[c];
  }
  // Largest remainder; ties go to class 0.
  while (assigned < total) {
    const std::size_t c = rem[1] > rem[0] ? 1 : 0;
    ++take[c];
    rem[c] = -1;
    ++assigned;
  }
  for (std::size_t c = 0; c < 2; ++c) {
    if (by_class[c].size() >= 2 && take[c] == 0) take[c] = 1;
    if (by_class[c].size() >= 2 && take[c] == by_class[c].size()) --take[c];
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetManifest split_dataset(DatasetManifest manifest, std::size_t train_parts, std::size_t test_parts,
                              std::uint64_t seed) {
  if (train_parts == 0 || test_parts == 0) throw ConfigError("split ratio parts must be positive");
  std::vector<int> labels;
  std::array<std::size_t, 2> counts{};
  for (const auto& r : manifest.records) {
    labels.push_back(r.label);
    if (r.label == 0 || r.label == 1) ++counts[static_cast<std::size_t>(r.label)];
  }
  if (counts[0] < 2 || counts[1] < 2)
    throw ConfigError("split needs at least 2 samples per class (have " + std::to_string(counts[0]) +
                      " and " + std::to_string(counts[1]) + ")");
  const double fraction =
      static_cast<double>(test_parts) / static_cast<double>(train_parts + test_parts);
  const auto test = stratified_holdout(labels, fraction, seed);
  for (auto& r : manifest.records) r.split = kSplitTrain;
  for (std::size_t i : test) manifest.records[i].split = kSplitTest;
  return manifest;
}

DatasetManifest generate_phantom_dataset(const PhantomConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  DatasetManifest m;
  for (const auto& s : cfg.sequences) m.sequences.push_back(s.tag);
  m.generator_config = cfg;
  m.generator_config_hash = config_hash(cfg);
  m.root = out_dir;
  const auto labels = phantom_labels(cfg);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const PhantomSample s = generate_phantom(cfg, i, labels[i]);
    ManifestRecord r;
    r.id = s.id;
    r.label = s.label;
    for (std::size_t q = 0; q < cfg.sequences.size(); ++q) {
      const std::string rel = "volumes/" + s.id + "_" + cfg.sequences[q].tag + ".vvol";
      save_volume(out_dir / rel, s.volumes[q]);
      r.volume_paths[cfg.sequences[q].tag] = rel;
    }
    r.mask_path = "volumes/" + s.id + "_mask.vvol";
    save_volume(out_dir / r.mask_path, s.mask);
    m.records.push_back(std::move(r));
  }
  m = split_dataset(std::move(m), 4, 1, cfg.seed);
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  for (const auto& s : samples) out.push_back(s.id);
  return out;
}

void Dataset::validate() const {
  if (samples.empty()) throw ConfigError("dataset split '" + split + "' is empty");
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) throw InputError("dataset: duplicate id '" + s.id + "'");
    if (s.label != 0 && s.label != 1) throw InputError("dataset: label of '" + s.id + "' outside {0,1}");
    if (split == kSplitTest && s.features)
      throw InputError("dataset: test sample '" + s.id + "' carries training-only features");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices, const std::string& new_split) const {
  Dataset out;
  out.split = new_split;
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

Dataset load_split(const DatasetManifest& m, const std::string& split, const LoadOptions& opts,
                   bool allow_test_masks) {
  const auto seqs = opts.sequences.empty() ? m.sequences : opts.sequences;
  for (const auto& s : seqs)
    if (std::find(m.sequences.begin(), m.sequences.end(), s) == m.sequences.end())
      throw InputError("manifest has no sequence '" + s + "'");
  const bool masks = opts.masks && (split != kSplitTest || allow_test_masks);
  Dataset ds;
  ds.split = split;
  for (const ManifestRecord* r : m.in_split(split)) {
    Sample s;
    s.id = r->id;
    s.label = r->label;
    for (const auto& seq : seqs) s.volumes.emplace(seq, load_volume(m.resolve(r->volume_paths.at(seq))));
    if (masks) {
      if (r->mask_path.empty()) throw InputError("record '" + r->id + "' has no mask");
      s.mask = load_mask(m.resolve(r->mask_path));
    }
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

Dataset dataset_from_phantoms(const std::vector<PhantomSample>& samples, const PhantomConfig& cfg,
                              const std::vector<std::size_t>& indices, const std::string& split,
                              bool attach_masks) {
  Dataset ds;
  ds.split = split;
  for (std::size_t i : indices) {
    const PhantomSample& p = samples.at(i);
    Sample s;
    s.id = p.id;
    s.label = p.label;
    for (std::size_t q = 0; q < cfg.sequences.size(); ++q) s.volumes.emplace(cfg.sequences[q].tag, p.volumes.at(q));
    if (attach_masks && split != kSplitTest) s.mask = p.mask;
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

std::pair<Dataset, Dataset> carve_validation(const Dataset& train, double fraction, std::uint64_t seed) {
  const auto held = stratified_holdout(train.labels(), fraction, seed);
  std::vector<std::size_t> keep;
  std::size_t h = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (h < held.size() && held[h] == i) {
      ++h;
      continue;
    }
    keep.push_back(i);
  }
  return {train.subset(keep, kSplitTrain), train.subset(held, kSplitValidation)};
}

Tensor image_tensor(const Dataset& ds, const std::string& sequence) {
  if (ds.samples.empty()) throw ConfigError("image_tensor: empty dataset");
  const auto first = ds.samples.front().volumes.find(sequence);
  if (first == ds.samples.front().volumes.end())
    throw InputError("sample '" + ds.samples.front().id + "' has no '" + sequence + "' volume");
  const Dims3 dims = first->second.dims;
  const std::size_t voxels = first->second.size();
  Tensor out({ds.size(), 1, dims[0], dims[1], dims[2]}, 0);
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const auto it = ds.samples[n].volumes.find(sequence);
    if (it == ds.samples[n].volumes.end())
      throw InputError("sample '" + ds.samples[n].id + "' has no '" + sequence + "' volume");
    const VoxelVolume& v = it->second;
    if (v.dims != dims) throw InputError("sample '" + ds.samples[n].id + "' has mismatched dims");
    double mean = 0;
    for (float x : v.intensities) mean += x;
    mean /= static_cast<double>(voxels);
    double var = 0;
    for (float x : v.intensities) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(voxels));
    const double inv = sd > 1e-12 ? 1.0 / sd : 1.0;
    Real* dst = out.raw() + n * voxels;
    for (std::size_t i = 0; i < voxels; ++i) dst[i] = static_cast<Real>((v.intensities[i] - mean) * inv);
  }
  return out;
}

void attach_features(Dataset& ds, const std::string& sequence, const radiomics::DiscretizationConfig& cfg) {
  if (ds.split == kSplitTest) throw InputError("features are training-only; split is test");
  for (auto& s : ds.samples) {
    if (!s.mask) throw TrainingError("sample '" + s.id + "' has no mask for feature extraction");
    const auto it = s.volumes.find(sequence);
    if (it == s.volumes.end()) throw InputError("sample '" + s.id + "' has no '" + sequence + "' volume");
    s.features = radiomics::extract_features(it->second, *s.mask, cfg);
  }
}

std::vector<std::vector<double>> feature_rows(const Dataset& ds) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : ds.samples) {
    if (!s.features) throw TrainingError("sample '" + s.id + "' has no hand-crafted features");
    rows.push_back(s.features->values);
  }
  return rows;
}

}  // namespace enrol::data
