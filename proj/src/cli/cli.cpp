// SPDX-License-Identifier: Apache-2.0
#include "enrol/cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "enrol/core/error.hpp"
#include "enrol/data/dataset.hpp"
#include "enrol/data/phantom.hpp"
#include "enrol/eval/metrics.hpp"
#include "enrol/io/text.hpp"
#include "enrol/nn/checkpoint.hpp"
#include "enrol/pipeline/pipeline.hpp"
#include "enrol/train/trainer.hpp"

namespace enrol::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

fs::path data_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ENROL_DATA_DIR"); env && *env) return env;
  return ".";
}

std::string lambda_tag(double lambda) {
  std::string s = io::format_double(lambda);
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

void write_text(const std::string& text, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// Shared flags. Paths left empty resolve against the data root.
struct Common {
  std::string data_dir;
  std::string manifest;
  std::string sequence = "t1ce";
  std::optional<std::uint64_t> seed;

  fs::path root() const { return data_root(data_dir); }
  fs::path manifest_path() const { return manifest.empty() ? root() / "phantoms" / "manifest.json" : fs::path(manifest); }
  data::DatasetManifest load() const {
    auto m = data::load_manifest(manifest_path());
    data::validate_manifest(m, true);
    return m;
  }
};

void add_manifest(CLI::App* sub, Common& c) {
  sub->add_option("--manifest", c.manifest, "Dataset manifest (default <data-dir>/phantoms/manifest.json)");
}

void add_sequence(CLI::App* sub, Common& c) {
  sub->add_option("--sequence", c.sequence, "Sequence tag")->capture_default_str();
}

void add_seed(CLI::App* sub, Common& c) { sub->add_option("--seed", c.seed, "Random seed (overrides the config)"); }

train::TrainConfig load_or_default(const std::string& path) {
  return path.empty() ? train::TrainConfig{} : train::load_train_config(path);
}

train::ExpertTrainConfig load_expert_config(const std::string& path) {
  if (path.empty()) return {};
  try {
    return pipeline::read_json(path).get<train::ExpertTrainConfig>();
  } catch (const Json::exception& e) {
    throw ConfigError("expert config '" + path + "': " + e.what());
  }
}

void report_history(std::ostream& out, const std::string& what, const train::TrainingHistory& h) {
  out << what << ": " << h.epochs.size() << " epochs, best epoch " << h.best_epoch << " (validation AUC "
      << io::format_fixed(h.best_val_auc, 4) << ")" << (h.early_stopped ? ", stopped early" : "") << '\n';
}

// ---- gen-data ---------------------------------------------------------------

struct GenData {
  std::string config, out;
};

int run_gen_data(const Common& c, const GenData& g, std::ostream& out) {
  data::PhantomConfig cfg = data::PhantomConfig::defaults();
  if (!g.config.empty()) {
    try {
      cfg = pipeline::read_json(g.config).get<data::PhantomConfig>();
    } catch (const Json::exception& e) {
      throw ConfigError("phantom config '" + g.config + "': " + e.what());
    }
  }
  if (c.seed) cfg.seed = *c.seed;
  const fs::path dir = g.out.empty() ? c.root() / "phantoms" : fs::path(g.out);
  const auto m = data::generate_phantom_dataset(cfg, dir);
  const auto counts = cfg.class_counts();
  out << "generated " << m.records.size() << " samples (" << counts[0] << " grade 0, " << counts[1]
      << " grade 1), " << m.in_split(data::kSplitTrain).size() << " train / " << m.in_split(data::kSplitTest).size()
      << " test\nmanifest: " << (dir / "manifest.json").string() << '\n';
  return kExitOk;
}

// ---- extract ----------------------------------------------------------------

struct Extract {
  std::string split = "all", out;
  std::size_t bins = 32;
};

int run_extract(const Common& c, const Extract& x, std::ostream& out) {
  const auto m = c.load();
  auto cfg = radiomics::DiscretizationConfig::defaults();
  cfg.bin_count = x.bins;
  cfg.validate();
  std::vector<std::string> splits;
  if (x.split == "all")
    splits = {data::kSplitTrain, data::kSplitTest};
  else
    splits = {x.split};
  radiomics::FeatureTable table;
  for (const auto& split : splits) {
    if (m.in_split(split).empty()) continue;
    const auto ds = data::load_split(m, split, {{c.sequence}, true}, true);
    auto part = pipeline::feature_table(ds, c.sequence, cfg);
    table.names = part.names;
    table.ids.insert(table.ids.end(), part.ids.begin(), part.ids.end());
    table.rows.insert(table.rows.end(), part.rows.begin(), part.rows.end());
  }
  if (table.rows.empty()) throw InputError("no records in split '" + x.split + "'");
  const fs::path path = x.out.empty() ? c.root() / ("features_" + c.sequence + ".csv") : fs::path(x.out);
  ensure_parent(path);
  radiomics::write_feature_csv(table, path);
  out << "wrote " << table.rows.size() << " x " << table.names.size() << " features to " << path.string() << '\n';
  return kExitOk;
}

// ---- pretrain-expert --------------------------------------------------------

struct Pretrain {
  std::string config, out;
};

train::Expert pretrain_on(data::Dataset& train, const std::string& sequence, const train::ExpertTrainConfig& cfg,
                          std::ostream& out, train::TrainingHistory* history = nullptr) {
  data::attach_features(train, sequence);
  train::TrainingHistory h;
  train::Expert e = train::pretrain_expert(train, cfg, &h);
  report_history(out, "expert", h);
  if (history) *history = h;
  return e;
}

int run_pretrain(const Common& c, const Pretrain& p, std::ostream& out) {
  auto cfg = load_expert_config(p.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const auto m = c.load();
  // Same carve as `train` with the same seed, so the expert never sees the
  // grading model's validation samples.
  auto splits = pipeline::load_training_splits(m, c.sequence, cfg.validation_fraction, cfg.seed, true);
  train::TrainingHistory h;
  const train::Expert e = pretrain_on(splits.train, c.sequence, cfg, out, &h);
  const fs::path path =
      p.out.empty() ? c.root() / "experts" / (c.sequence + "_s" + std::to_string(cfg.seed) + ".ckpt") : fs::path(p.out);
  ensure_parent(path);
  train::save_expert(e, path);
  pipeline::write_json(train::history_json(h), path.string() + ".history.json");
  out << "expert checkpoint: " << path.string() << '\n';
  return kExitOk;
}

// ---- train / seg-cnn --------------------------------------------------------

struct Train {
  std::string config, arch, expert, expert_config, out, orientation, expert_mode;
  std::optional<double> lambda;
  std::size_t cube = 16;
};

train::TrainConfig resolve_train_config(const Common& c, const Train& t) {
  train::TrainConfig cfg = load_or_default(t.config);
  if (!t.arch.empty()) cfg.architecture = t.arch;
  if (t.lambda) cfg.lambda = *t.lambda;
  if (c.seed) cfg.seed = *c.seed;
  if (!t.orientation.empty()) cfg.gate_orientation = train::parse_gate_orientation(t.orientation);
  if (!t.expert_mode.empty()) cfg.expert_mode = train::parse_expert_mode(t.expert_mode);
  cfg.validate();
  return cfg;
}

void save_run(const fs::path& dir, const pipeline::RunInfo& info, const train::TrainConfig& cfg,
              const train::TrainResult& r) {
  fs::create_directories(dir);
  nn::save_checkpoint(*r.model, dir / "model.ckpt");
  pipeline::write_json(train::history_json(r.history), dir / "history.json");
  pipeline::write_json(cfg, dir / "train_config.json");
  pipeline::save_run_info(info, dir);
}

int run_train(const Common& c, const Train& t, std::ostream& out) {
  const auto cfg = resolve_train_config(c, t);
  const auto m = c.load();
  const bool enrol = cfg.lambda > 0;
  const bool need_expert = enrol && cfg.expert_mode == train::ExpertMode::frozen_pretrained;
  auto splits = pipeline::load_training_splits(m, c.sequence, cfg.validation_fraction, cfg.seed, enrol);
  const fs::path dir = t.out.empty() ? c.root() / "runs" /
                                           (cfg.architecture + "_" + c.sequence + "_l" + lambda_tag(cfg.lambda) +
                                            "_s" + std::to_string(cfg.seed))
                                     : fs::path(t.out);
  train::Expert expert;
  if (need_expert) {
    if (!t.expert.empty()) {
      expert = train::load_expert(t.expert);
      data::attach_features(splits.train, c.sequence);
    } else {
      auto ecfg = load_expert_config(t.expert_config);
      ecfg.seed = cfg.seed;
      expert = pretrain_on(splits.train, c.sequence, ecfg, out);
      fs::create_directories(dir);
      train::save_expert(expert, dir / "expert.ckpt");
    }
  } else if (enrol) {
    data::attach_features(splits.train, c.sequence);
  }
  out << "training " << cfg.architecture << " on " << c.sequence << " (" << splits.train.size() << " train, "
      << splits.validation.size() << " validation), lambda " << io::format_double(cfg.lambda) << ", seed "
      << cfg.seed << '\n';
  const auto r = enrol ? train::train_enrol(splits.train, splits.validation, c.sequence, cfg,
                                            need_expert ? &expert : nullptr, {}, load_expert_config(t.expert_config))
                       : train::train_baseline(splits.train, splits.validation, c.sequence, cfg);
  report_history(out, "model", r.history);
  pipeline::RunInfo info;
  info.sequence = c.sequence;
  info.architecture = cfg.architecture;
  info.enrol = enrol;
  info.lambda = cfg.lambda;
  info.seed = cfg.seed;
  save_run(dir, info, cfg, r);
  out << "run directory: " << dir.string() << '\n';
  return kExitOk;
}

int run_seg_cnn(const Common& c, const Train& t, std::ostream& out) {
  auto cfg = resolve_train_config(c, t);
  cfg.lambda = 0;
  const auto m = c.load();
  const auto splits = pipeline::load_training_splits(m, c.sequence, cfg.validation_fraction, cfg.seed, true);
  const auto r = train::train_seg_cnn(splits.train, splits.validation, c.sequence, cfg, t.cube);
  report_history(out, "seg-cnn", r.history);
  pipeline::RunInfo info;
  info.kind = pipeline::kRunSegCnn;
  info.sequence = c.sequence;
  info.architecture = "seg-cnn";
  info.seed = cfg.seed;
  info.cube = t.cube;
  const fs::path dir =
      t.out.empty() ? c.root() / "runs" / ("seg-cnn_" + c.sequence + "_s" + std::to_string(cfg.seed)) : fs::path(t.out);
  save_run(dir, info, cfg, r);
  out << "run directory: " << dir.string() << '\n';
  return kExitOk;
}

// ---- radiomics / eval / ensemble --------------------------------------------

struct Scoring {
  std::string config, out, metrics, predictions;
  std::vector<std::string> runs;
  double threshold = 0.5;
};

int finish_scoring(const pipeline::RunInfo& info, const eval::PredictionSet& p, const fs::path& metrics,
                   const fs::path& predictions, double threshold, std::ostream& out) {
  const auto report = eval::evaluate(p, info.sequence, info.architecture, info.enrol, info.lambda, info.seed, threshold);
  ensure_parent(metrics);
  eval::write_metrics_csv({report}, metrics);
  ensure_parent(predictions);
  eval::write_predictions_csv(p, predictions);
  out << eval::render_report_table({report}, eval::TableFormat::markdown) << "metrics: " << metrics.string() << '\n';
  return kExitOk;
}

int run_radiomics(const Common& c, const Scoring& s, std::ostream& out) {
  train::CascadeConfig cfg;
  if (!s.config.empty()) {
    try {
      cfg = pipeline::read_json(s.config).get<train::CascadeConfig>();
    } catch (const Json::exception& e) {
      throw ConfigError("cascade config '" + s.config + "': " + e.what());
    }
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const auto m = c.load();
  const auto train = data::load_split(m, data::kSplitTrain, {{c.sequence}, true});
  const auto run = pipeline::train_radiomics_run(train, c.sequence, cfg);
  const auto& k = run.classifier.stage_counts;
  out << "features per stage: " << k[0] << " -> " << k[1] << " -> " << k[2] << " -> " << k[3] << '\n';
  const fs::path dir =
      s.out.empty() ? c.root() / "runs" / ("radiomics_" + c.sequence + "_s" + std::to_string(cfg.seed)) : fs::path(s.out);
  fs::create_directories(dir);
  pipeline::write_json(train::classifier_json(run.classifier), dir / "classifier.json");
  pipeline::write_json(pipeline::scaler_json(run.scaler), dir / "scaler.json");
  pipeline::write_json(cfg, dir / "cascade_config.json");
  pipeline::RunInfo info;
  info.kind = pipeline::kRunRadiomics;
  info.sequence = c.sequence;
  info.architecture = "radiomics";
  info.seed = cfg.seed;
  pipeline::save_run_info(info, dir);
  const auto test = data::load_split(m, data::kSplitTest, {{c.sequence}, true}, true);
  return finish_scoring(info, pipeline::predict_radiomics(run, test, c.sequence), dir / "metrics.csv",
                        dir / "predictions.csv", s.threshold, out);
}

int run_eval(const Common& c, const Scoring& s, std::ostream& out) {
  if (s.runs.size() != 1) throw UsageError("eval takes exactly one --run directory");
  const fs::path dir = s.runs.front();
  const auto info = pipeline::load_run_info(dir);
  const auto m = c.load();
  const auto p = pipeline::score_run(dir, m);
  return finish_scoring(info, p, s.metrics.empty() ? dir / "metrics.csv" : fs::path(s.metrics),
                        s.predictions.empty() ? dir / "predictions.csv" : fs::path(s.predictions), s.threshold, out);
}

int run_ensemble(const Common& c, const Scoring& s, std::ostream& out) {
  if (s.runs.size() < 2) throw UsageError("ensemble needs at least two --run directories");
  std::vector<eval::PredictionSet> sets;
  pipeline::RunInfo info;
  for (std::size_t i = 0; i < s.runs.size(); ++i) {
    const fs::path dir = s.runs[i];
    const auto ri = pipeline::load_run_info(dir);
    if (i == 0) {
      info = ri;
    } else if (ri.architecture != info.architecture || ri.enrol != info.enrol || ri.lambda != info.lambda) {
      throw InputError("ensemble runs differ in model or method: '" + dir.string() + "'");
    }
    sets.push_back(eval::read_predictions_csv(dir / "predictions.csv"));
  }
  info.sequence = "ensemble";
  const auto p = eval::ensemble_average(sets);
  const fs::path root = c.root();
  return finish_scoring(info, p, s.metrics.empty() ? root / "ensemble_metrics.csv" : fs::path(s.metrics),
                        s.predictions.empty() ? root / "ensemble_predictions.csv" : fs::path(s.predictions),
                        s.threshold, out);
}

// ---- sweep ------------------------------------------------------------------

struct Sweep {
  std::string config, expert, out, format = "markdown";
  std::vector<double> lambdas = train::kDefaultLambdas;
  std::vector<std::uint64_t> seeds{1};
  std::size_t jobs = 1;
};

int run_sweep(const Common& c, const Sweep& s, std::ostream& out) {
  train::TrainConfig cfg = load_or_default(s.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  if (s.lambdas.empty() || s.seeds.empty()) throw UsageError("sweep needs at least one lambda and one seed");
  const auto format = eval::parse_table_format(s.format);
  const auto m = c.load();
  // One carve and one expert for the whole grid; only the model seed varies.
  auto splits = pipeline::load_training_splits(m, c.sequence, cfg.validation_fraction, cfg.seed, true);
  const auto test = data::load_split(m, data::kSplitTest, {{c.sequence}, false});
  train::Expert expert;
  if (!s.expert.empty()) {
    expert = train::load_expert(s.expert);
    data::attach_features(splits.train, c.sequence);
  } else {
    train::ExpertTrainConfig ecfg;
    ecfg.seed = cfg.seed;
    expert = pretrain_on(splits.train, c.sequence, ecfg, out);
  }
  std::vector<std::pair<double, std::uint64_t>> cells;
  for (double l : s.lambdas)
    for (std::uint64_t seed : s.seeds) cells.emplace_back(l, seed);
  auto run_cell = [&](std::size_t i) {
    return train::lambda_sweep(splits.train, splits.validation, test, c.sequence, cfg, &expert, {cells[i].first},
                               {cells[i].second})
        .front();
  };
  std::vector<train::SweepRow> rows(cells.size());
  const std::size_t jobs = std::max<std::size_t>(1, s.jobs);
  for (std::size_t start = 0; start < cells.size(); start += jobs) {
    std::vector<std::future<train::SweepRow>> batch;
    for (std::size_t i = start; i < std::min(cells.size(), start + jobs); ++i)
      batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, run_cell, i));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      rows[start + i] = batch[i].get();
      const auto& r = rows[start + i].report;
      out << "lambda " << io::format_double(r.lambda) << " seed " << r.seed << ": AUC " << io::format_fixed(r.auc, 4)
          << '\n';
    }
  }
  std::vector<eval::MetricsReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  const fs::path dir = s.out.empty() ? c.root() / "sweeps" / (cfg.architecture + "_" + c.sequence) : fs::path(s.out);
  fs::create_directories(dir);
  eval::write_metrics_csv(reports, dir / "sweep_metrics.csv");
  const std::string table = eval::render_report_table(reports, format);
  write_text(table, dir / (format == eval::TableFormat::csv ? "sweep_table.csv" : "sweep_table.md"));
  out << table << "sweep metrics: " << (dir / "sweep_metrics.csv").string() << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Expert-guided 3D grading models: phantom data, features, training and evaluation", "enrol"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--data-dir", common.data_dir, "Default root for inputs and outputs (else $ENROL_DATA_DIR, else .)");

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset and its manifest");
  gen_cmd->add_option("--config", gen.config, "PhantomConfig JSON (defaults when omitted)");
  gen_cmd->add_option("--out", gen.out, "Output directory (default <data-dir>/phantoms)");
  add_seed(gen_cmd, common);

  Extract ext;
  auto* ext_cmd = app.add_subcommand("extract", "Compute the hand-crafted feature table");
  add_manifest(ext_cmd, common);
  add_sequence(ext_cmd, common);
  ext_cmd->add_option("--split", ext.split, "train, test or all")
      ->check(CLI::IsMember({"train", "test", "all"}))
      ->capture_default_str();
  ext_cmd->add_option("--bins", ext.bins, "Gray-level bins")->capture_default_str();
  ext_cmd->add_option("--out", ext.out, "Feature CSV (default <data-dir>/features_<sequence>.csv)");

  Pretrain pre;
  auto* pre_cmd = app.add_subcommand("pretrain-expert", "Train the frozen expert encoder on hand-crafted features");
  add_manifest(pre_cmd, common);
  add_sequence(pre_cmd, common);
  add_seed(pre_cmd, common);
  pre_cmd->add_option("--config", pre.config, "Expert training JSON");
  pre_cmd->add_option("--out", pre.out, "Checkpoint path (default <data-dir>/experts/<sequence>_s<seed>.ckpt)");

  Train tr;
  auto* train_cmd = app.add_subcommand("train", "Train a grading model (baseline, or ENROL when lambda > 0)");
  add_manifest(train_cmd, common);
  add_sequence(train_cmd, common);
  add_seed(train_cmd, common);
  train_cmd->add_option("--config", tr.config, "TrainConfig JSON");
  train_cmd->add_option("--arch", tr.arch, "vgg, resnet or seresnet")
      ->check(CLI::IsMember({"vgg", "resnet", "seresnet"}));
  train_cmd->add_option("--lambda", tr.lambda, "Weight of the discrepancy term")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--gate", tr.orientation, "Gate orientation: rules or as_written");
  train_cmd->add_option("--expert-mode", tr.expert_mode, "frozen_pretrained or joint");
  train_cmd->add_option("--expert", tr.expert, "Pretrained expert checkpoint (pretrained inline when omitted)");
  train_cmd->add_option("--expert-config", tr.expert_config, "Expert training JSON for inline pretraining");
  train_cmd->add_option("--out", tr.out, "Run directory (default <data-dir>/runs/<arch>_<sequence>_l<lambda>_s<seed>)");

  Train seg;
  auto* seg_cmd = app.add_subcommand("seg-cnn", "Train the lesion-crop comparison model");
  add_manifest(seg_cmd, common);
  add_sequence(seg_cmd, common);
  add_seed(seg_cmd, common);
  seg_cmd->add_option("--config", seg.config, "TrainConfig JSON");
  seg_cmd->add_option("--arch", seg.arch, "vgg, resnet or seresnet")
      ->check(CLI::IsMember({"vgg", "resnet", "seresnet"}));
  seg_cmd->add_option("--cube", seg.cube, "Edge length of the resized crop")->capture_default_str();
  seg_cmd->add_option("--out", seg.out, "Run directory");

  Scoring rad;
  auto* rad_cmd = app.add_subcommand("radiomics", "Fit the feature-selection + logistic comparison model and score it");
  add_manifest(rad_cmd, common);
  add_sequence(rad_cmd, common);
  add_seed(rad_cmd, common);
  rad_cmd->add_option("--config", rad.config, "CascadeConfig JSON");
  rad_cmd->add_option("--out", rad.out, "Run directory");
  rad_cmd->add_option("--threshold", rad.threshold, "Decision threshold for Acc/Sen")->capture_default_str();

  Scoring ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a run directory on the test split");
  add_manifest(eval_cmd, common);
  eval_cmd->add_option("--run", ev.runs, "Run directory")->required()->expected(1);
  eval_cmd->add_option("--metrics", ev.metrics, "Metrics CSV (default <run>/metrics.csv)");
  eval_cmd->add_option("--predictions", ev.predictions, "Predictions CSV (default <run>/predictions.csv)");
  eval_cmd->add_option("--threshold", ev.threshold, "Decision threshold for Acc/Sen")->capture_default_str();

  Scoring ens;
  auto* ens_cmd = app.add_subcommand("ensemble", "Average evaluated runs across sequences and score the mean");
  ens_cmd->add_option("--run", ens.runs, "Evaluated run directories")->required();
  ens_cmd->add_option("--metrics", ens.metrics, "Metrics CSV (default <data-dir>/ensemble_metrics.csv)");
  ens_cmd->add_option("--predictions", ens.predictions, "Predictions CSV");
  ens_cmd->add_option("--threshold", ens.threshold, "Decision threshold for Acc/Sen")->capture_default_str();

  Sweep sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and score every (lambda, seed) pair");
  add_manifest(sweep_cmd, common);
  add_sequence(sweep_cmd, common);
  sweep_cmd->add_option("--config", sw.config, "TrainConfig JSON");
  sweep_cmd->add_option("--lambdas", sw.lambdas, "Lambda grid")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--seeds", sw.seeds, "Model seeds")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--expert", sw.expert, "Pretrained expert checkpoint");
  sweep_cmd->add_option("--format", sw.format, "Table format: markdown or csv")->capture_default_str();
  sweep_cmd->add_option("--jobs", sw.jobs, "Runs trained concurrently")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sw.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(common, gen, out);
    if (ext_cmd->parsed()) return run_extract(common, ext, out);
    if (pre_cmd->parsed()) return run_pretrain(common, pre, out);
    if (train_cmd->parsed()) return run_train(common, tr, out);
    if (seg_cmd->parsed()) return run_seg_cnn(common, seg, out);
    if (rad_cmd->parsed()) return run_radiomics(common, rad, out);
    if (eval_cmd->parsed()) return run_eval(common, ev, out);
    if (ens_cmd->parsed()) return run_ensemble(common, ens, out);
    if (sweep_cmd->parsed()) return run_sweep(common, sw, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace enrol::cli
