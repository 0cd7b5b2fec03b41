// SPDX-License-Identifier: Apache-2.0
#include "enrol/pipeline/pipeline.hpp"

#include <fstream>

#include "enrol/core/error.hpp"
#include "enrol/nn/checkpoint.hpp"
#include "enrol/train/trainer.hpp"

namespace enrol::pipeline {

using Json = nlohmann::json;

void to_json(Json& j, const RunInfo& r) {
  j = Json{{"kind", r.kind}, {"sequence", r.sequence}, {"architecture", r.architecture}, {"enrol", r.enrol},
           {"lambda", r.lambda}, {"seed", r.seed}, {"cube", r.cube}};
}

void from_json(const Json& j, RunInfo& r) {
  try {
    r.kind = j.at("kind").get<std::string>();
    r.sequence = j.at("sequence").get<std::string>();
    r.architecture = j.at("architecture").get<std::string>();
    r.enrol = j.at("enrol").get<bool>();
    r.lambda = j.at("lambda").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.cube = j.value("cube", std::size_t{16});
  } catch (const Json::exception& e) {
    throw FormatError(std::string("run.json: ") + e.what());
  }
  if (r.kind != kRunGrading && r.kind != kRunSegCnn && r.kind != kRunRadiomics)
    throw FormatError("run.json: unknown run kind '" + r.kind + "'");
}

void write_json(const Json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void save_run_info(const RunInfo& r, const std::filesystem::path& dir) { write_json(r, dir / "run.json"); }

RunInfo load_run_info(const std::filesystem::path& dir) { return read_json(dir / "run.json").get<RunInfo>(); }

TrainingSplits load_training_splits(const data::DatasetManifest& m, const std::string& sequence,
                                    double validation_fraction, std::uint64_t seed, bool masks) {
  const data::Dataset all = data::load_split(m, data::kSplitTrain, {{sequence}, masks});
  auto [train, val] = data::carve_validation(all, validation_fraction, seed);
  return {std::move(train), std::move(val)};
}

radiomics::FeatureTable feature_table(const data::Dataset& ds, const std::string& sequence,
                                      const radiomics::DiscretizationConfig& cfg) {
  radiomics::FeatureTable t;
  t.names = radiomics::feature_names();
  for (const auto& s : ds.samples) {
    if (!s.mask) throw InputError("sample '" + s.id + "' has no mask for feature extraction");
    const auto it = s.volumes.find(sequence);
    if (it == s.volumes.end()) throw InputError("sample '" + s.id + "' has no '" + sequence + "' volume");
    t.ids.push_back(s.id);
    t.rows.push_back(radiomics::extract_features(it->second, *s.mask, cfg).values);
  }
  return t;
}

Json scaler_json(const radiomics::MinMaxScaler& s) { return Json{{"min", s.min}, {"max", s.max}}; }

radiomics::MinMaxScaler scaler_from_json(const Json& j) {
  radiomics::MinMaxScaler s;
  try {
    s.min = j.at("min").get<std::vector<double>>();
    s.max = j.at("max").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("scaler: ") + e.what());
  }
  if (s.min.size() != s.max.size()) throw FormatError("scaler: min and max differ in length");
  return s;
}

RadiomicsRun train_radiomics_run(const data::Dataset& train, const std::string& sequence,
                                 const train::CascadeConfig& cfg) {
  const auto table = feature_table(train, sequence);
  RadiomicsRun run;
  const auto x = radiomics::normalize_feature_matrix(table.rows, &run.scaler);
  run.classifier = train::train_radiomics_classifier(x, train.labels(), table.names, cfg);
  return run;
}

eval::PredictionSet predict_radiomics(const RadiomicsRun& run, const data::Dataset& ds, const std::string& sequence) {
  const auto table = feature_table(ds, sequence);
  eval::PredictionSet p;
  p.ids = table.ids;
  p.labels = ds.labels();
  p.scores = run.classifier.predict(run.scaler.transform(table.rows));
  return p;
}

eval::PredictionSet score_run(const std::filesystem::path& dir, const data::DatasetManifest& m) {
  const RunInfo info = load_run_info(dir);
  if (info.kind == kRunRadiomics) {
    RadiomicsRun run;
    run.classifier = train::classifier_from_json(read_json(dir / "classifier.json"));
    run.scaler = scaler_from_json(read_json(dir / "scaler.json"));
    const auto test = data::load_split(m, data::kSplitTest, {{info.sequence}, true}, true);
    return predict_radiomics(run, test, info.sequence);
  }
  auto model = nn::load_grading_model(dir / "model.ckpt");
  if (info.kind == kRunSegCnn) {
    const auto test = data::load_split(m, data::kSplitTest, {{info.sequence}, true}, true);
    std::vector<std::string> skipped;
    const auto crops = train::lesion_crops(test, info.sequence, info.cube, &skipped);
    if (!skipped.empty()) throw InputError(std::to_string(skipped.size()) + " test samples have empty masks");
    return train::predict_dataset(*model, crops, info.sequence);
  }
  const auto test = data::load_split(m, data::kSplitTest, {{info.sequence}, false});
  return train::predict_dataset(*model, test, info.sequence);
}

}  // namespace enrol::pipeline
