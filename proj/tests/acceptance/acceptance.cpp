// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion. Arguments select
// criteria by number (default: all). Criterion 6 also writes its per-seed
// table and the lambda table to acceptance_learning.md in the working directory.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "auc_oracle.hpp"
#include "enrol/cli/cli.hpp"
#include "enrol/core/error.hpp"
#include "enrol/data/dataset.hpp"
#include "enrol/data/vvol.hpp"
#include "enrol/eval/metrics.hpp"
#include "enrol/io/text.hpp"
#include "enrol/radiomics/features.hpp"
#include "enrol/train/radiomics_classifier.hpp"
#include "enrol/train/trainer.hpp"
#include "gradient_suite.hpp"
#include "radiomics_oracle.hpp"
#include "trainer_checks.hpp"

namespace fs = std::filesystem;
using namespace enrol;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int d = 4) { return io::format_fixed(v, d); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// Phantom samples split into train / validation / test the way the desk runs do.
struct PhantomSplits {
  data::Dataset train_all, test;
};

PhantomSplits phantom_splits(const data::PhantomConfig& cfg) {
  const auto samples = data::generate_phantom_samples(cfg);
  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  const auto test_idx = data::stratified_holdout(labels, 0.2, cfg.seed);
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0, h = 0; i < samples.size(); ++i) {
    if (h < test_idx.size() && test_idx[h] == i) {
      ++h;
      continue;
    }
    train_idx.push_back(i);
  }
  return {data::dataset_from_phantoms(samples, cfg, train_idx, data::kSplitTrain, true),
          data::dataset_from_phantoms(samples, cfg, test_idx, data::kSplitTest, false)};
}

// ---- 1 ----------------------------------------------------------------------
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::size_t prims = 0, graphs = 0, bad = 0;
  for (const auto& c : testing::primitive_cases()) {
    const auto r = testing::run_grad_case(c);
    worst = std::max<double>(worst, r.max_rel_error);
    bad += !(r.max_rel_error < 1e-4) || !r.kink_free;
    ++prims;
  }
  for (const auto& c : testing::random_graph_cases(20)) {
    const auto r = testing::run_grad_case(c);
    worst = std::max<double>(worst, r.max_rel_error);
    bad += !(r.max_rel_error < 1e-4);
    ++graphs;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && graphs == 20 && secs < 60,
          std::to_string(prims) + " primitive cases, " + std::to_string(graphs) + " random graphs, max rel err " +
              sci(worst) + ", " + fmt(secs, 1) + " s"};
}

// ---- 2 ----------------------------------------------------------------------
Outcome gate_law() {
  const auto r = oracle::gate_law(1000, 2024);
  return {r.ok() && r.trials == 1000,
          std::to_string(r.trials) + " triples, negative " + std::to_string(r.negative) + ", open when closed " +
              std::to_string(r.open_when_closed) + ", non-monotone " + std::to_string(r.non_monotone) +
              ", worked example Dist " + io::format_fixed(r.example_dist, 6) + " (err " + sci(r.example_error) + ")"};
}

// ---- 3 ----------------------------------------------------------------------
Outcome objective_identity() {
  const auto t0 = Clock::now();
  auto cfg = data::PhantomConfig::defaults();
  cfg.sample_count = 20;
  cfg.seed = 7;
  const auto s = phantom_splits(cfg);
  bool ok = true;
  double worst = 0;
  std::size_t steps = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    train::TrainConfig tc;
    tc.seed = seed;
    tc.max_epochs = 6;
    const auto [train, val] = data::carve_validation(s.train_all, tc.validation_fraction, seed);
    const auto r = oracle::trajectory_identity(train, val, "t1ce", tc);
    ok = ok && r.ok();
    worst = std::max(worst, r.max_abs_diff);
    steps += r.steps_enrol;
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120, "3 seeds, " + std::to_string(steps) + " optimizer steps compared, max abs diff " +
                                sci(worst) + ", " + fmt(secs, 1) + " s"};
}

// ---- 4 ----------------------------------------------------------------------
Outcome metric_oracle() {
  const auto r = oracle::exhaustive_auc(8);
  return {r.mismatches == 0 && r.single_class_throws == r.single_class_total && r.checked > 0,
          std::to_string(r.checked) + " vectors with n <= 8 on {0, 0.5, 1}, " + std::to_string(r.mismatches) +
              " mismatches, " + std::to_string(r.single_class_throws) + "/" + std::to_string(r.single_class_total) +
              " single-class inputs rejected"};
}

// ---- 5 ----------------------------------------------------------------------
Outcome feature_oracles() {
  const auto t0 = Clock::now();
  auto cfg = radiomics::DiscretizationConfig::defaults();
  cfg.bin_count = 3;
  oracle::FamilyError err;
  std::size_t lattices = 0;
  for (std::size_t a = 1; a <= 3; ++a)
    for (std::size_t b = 1; b <= 3; ++b)
      for (std::size_t c = 1; c <= 3; ++c)
        if (a * b * c <= 9) {
          oracle::exhaustive({a, b, c}, cfg, err);
          ++lattices;
        }
  const std::size_t exhaustive_cases = err.cases;
  oracle::sampled({3, 3, 3}, cfg, 2000, 5, err);
  oracle::sampled({3, 3, 3}, radiomics::DiscretizationConfig::defaults(), 2000, 6, err);

  bool shape_ok = true;
  {
    const auto f = radiomics::shape_features(MaskVolume({1, 1, 1}, {1, 1, 1}, std::uint8_t{1}), {1, 1, 1});
    shape_ok = shape_ok && f.at("volume") == 1 && f.at("surface_area") == 6 &&
               f.at("surface_to_volume") == 6 && f.at("max_diameter") == 0 &&
               f.at("sphericity") == std::cbrt(std::numbers::pi) * std::pow(6.0, 2.0 / 3.0) / 6 &&
               f.at("elongation") == 1 && f.at("flatness") == 1;
    const auto g = radiomics::shape_features(MaskVolume({1, 1, 2}, {1, 1, 1}, std::uint8_t{1}), {1, 1, 1});
    shape_ok = shape_ok && g.at("volume") == 2 && g.at("surface_area") == 10 &&
               g.at("surface_to_volume") == 5 && g.at("max_diameter") == 1 &&
               g.at("sphericity") == std::cbrt(std::numbers::pi) * std::pow(12.0, 2.0 / 3.0) / 10;
  }
  const double secs = seconds_since(t0);
  return {err.worst() < 1e-9 && shape_ok,
          std::to_string(lattices) + " lattices up to 9 voxels exhaustively (" + std::to_string(exhaustive_cases) +
              " cases) plus 4000 sampled 3x3x3 cases, max abs err first-order " + sci(err.first_order) + ", GLCM " +
              sci(err.glcm) + ", GLRLM " + sci(err.glrlm) + "; shape unit voxel and bar " +
              (shape_ok ? "exact" : "WRONG") + ", " + fmt(secs, 1) + " s"};
}

// ---- 6 ----------------------------------------------------------------------
Outcome desk_learning() {
  const auto cfg = data::PhantomConfig::defaults();
  const auto s = phantom_splits(cfg);
  const std::string seq = "t1ce";
  std::vector<eval::MetricsReport> base, enrol_rows, sweep;
  std::vector<double> base_secs;
  std::vector<std::size_t> base_epochs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    train::TrainConfig tc;
    tc.seed = seed;
    auto [train, val] = data::carve_validation(s.train_all, tc.validation_fraction, seed);
    auto t0 = Clock::now();
    const auto b = train::train_baseline(train, val, seq, tc);
    base_secs.push_back(seconds_since(t0));
    base_epochs.push_back(b.history.epochs.size());
    base.push_back(eval::evaluate(train::predict_dataset(*b.model, s.test, seq), seq, "vgg", false, 0, seed));

    data::attach_features(train, seq);
    train::ExpertTrainConfig ec;
    ec.seed = seed;
    const auto expert = train::pretrain_expert(train, ec);
    auto run_enrol = [&](double lambda) {
      tc.lambda = lambda;
      const auto e = train::train_enrol(train, val, seq, tc, &expert);
      return eval::evaluate(train::predict_dataset(*e.model, s.test, seq), seq, "vgg", true, lambda, seed);
    };
    enrol_rows.push_back(run_enrol(0.1));
    if (seed == 1) {
      sweep.push_back(base.back());
      for (double l : {0.5, 0.05, 0.01}) sweep.push_back(run_enrol(l));
      sweep.push_back(enrol_rows.back());
    }
    std::cout << "  seed " << seed << ": baseline " << fmt(base.back().auc) << " (" << fmt(base_secs.back(), 1)
              << " s, " << base_epochs.back() << " epochs), ENROL " << fmt(enrol_rows.back().auc) << std::endl;
  }
  auto mean_auc = [](const std::vector<eval::MetricsReport>& r) {
    double m = 0;
    for (const auto& x : r) m += x.auc / static_cast<double>(r.size());
    return m;
  };
  const double mb = mean_auc(base), me = mean_auc(enrol_rows);
  const double slowest = *std::max_element(base_secs.begin(), base_secs.end());
  const std::size_t most_epochs = *std::max_element(base_epochs.begin(), base_epochs.end());

  std::ostringstream md;
  md << "Per-seed test AUC, " << seq << ", " << s.train_all.size() << " train / " << s.test.size() << " test\n\n";
  std::vector<eval::MetricsReport> all = base;
  all.insert(all.end(), enrol_rows.begin(), enrol_rows.end());
  md << eval::render_report_table(all, eval::TableFormat::markdown) << "\nbaseline mean " << fmt(mb)
     << ", ENROL(lambda=0.1) mean " << fmt(me) << "\n\nLambda table, seed 1\n\n"
     << eval::render_report_table(sweep, eval::TableFormat::markdown);
  std::ofstream("acceptance_learning.md") << md.str();
  std::cout << md.str();

  const bool pass = mb >= 0.85 && slowest < 300 && most_epochs <= 100 && me >= mb - 0.02;
  return {pass, "baseline mean AUC " + fmt(mb) + " (>= 0.85), slowest run " + fmt(slowest, 1) + " s (< 300), " +
                    "ENROL(lambda=0.1) mean " + fmt(me) + " (>= " + fmt(mb - 0.02) + ")"};
}

// ---- 7 ----------------------------------------------------------------------
Outcome split_arithmetic() {
  data::DatasetManifest m;
  m.sequences = {"t1"};
  for (int i = 0; i < 369; ++i) {
    data::ManifestRecord r;
    r.id = data::phantom_id(static_cast<std::size_t>(i));
    r.label = i < 293 ? 1 : 0;
    r.volume_paths["t1"] = r.id + ".vvol";
    m.records.push_back(r);
  }
  bool ok = true;
  std::string counts;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = data::split_dataset(m, 4, 1, seed);
    std::size_t train = 0, test = 0, test_pos = 0;
    for (const auto& r : s.records) {
      if (r.split == data::kSplitTrain) ++train;
      if (r.split == data::kSplitTest) {
        ++test;
        test_pos += r.label == 1;
      }
    }
    ok = ok && train == 296 && test == 73;
    if (seed == 1) counts = std::to_string(train) + "/" + std::to_string(test) + " (test " +
                            std::to_string(test_pos) + " grade 1, " + std::to_string(test - test_pos) + " grade 0)";
  }
  return {ok, "369 samples (293/76) at 4:1 -> " + counts + " for 3 seeds"};
}

// ---- 8 ----------------------------------------------------------------------
Outcome early_stopping() {
  auto cfg = data::PhantomConfig::defaults();
  cfg.sample_count = 24;
  cfg.seed = 11;
  const auto s = phantom_splits(cfg);
  train::TrainConfig tc;
  tc.model = nn::ModelSpec{};
  tc.model->stage_channels = {4, 8};
  tc.model->encoder_hidden = 8;
  tc.model->latent_dim = 4;
  tc.model->groups_for_norm = 2;
  tc.model->se_reduction = 2;
  const auto [train, val] = data::carve_validation(s.train_all, tc.validation_fraction, 1);
  bool ok = true;
  std::string detail;
  for (std::size_t peak : {3, 9}) {
    const auto r = oracle::plateau_check(train, val, "t1", tc, peak);
    ok = ok && r.ok() && r.best_epoch == peak;
    detail += (detail.empty() ? "" : "; ") + std::string("peak ") + std::to_string(peak) + " -> best " +
              std::to_string(r.best_epoch) + ", stop " + std::to_string(r.stop_epoch) + ", params " +
              (r.params_restored ? "restored" : "NOT restored");
  }
  return {ok, "patience " + std::to_string(tc.patience) + ": " + detail};
}

// ---- 9 ----------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "enrol");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

template <class E, class F>
bool raises(F&& f, const std::string& needle) {
  try {
    f();
  } catch (const E& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome determinism_formats() {
  const fs::path root = fs::temp_directory_path() / "enrol_acceptance_9";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "ph.json") << R"({"volume_dims":[8,8,8],"sample_count":30,"class_ratio":[1,1],"seed":3})";
  std::ofstream(root / "tc.json") << R"({"max_epochs":4,"batch_size":4,"model":{"stage_channels":[4,8],)"
                                     R"("encoder_hidden":8,"latent_dim":4,"groups_for_norm":2,"se_reduction":2}})";
  bool same = true;
  std::string csv[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = root / ("rep" + std::to_string(rep));
    same = same && cli({"--data-dir", d.string(), "gen-data", "--config", (root / "ph.json").string()}) == 0;
    same = same && cli({"--data-dir", d.string(), "train", "--config", (root / "tc.json").string(), "--lambda", "0.1",
                        "--seed", "4", "--out", (d / "run").string()}) == 0;
    same = same && cli({"--data-dir", d.string(), "eval", "--run", (d / "run").string()}) == 0;
    csv[rep] = slurp(d / "run" / "metrics.csv");
  }
  same = same && !csv[0].empty() && csv[0] == csv[1] &&
         slurp(root / "rep0" / "phantoms" / "volumes" / "P0000_t1.vvol") ==
             slurp(root / "rep1" / "phantoms" / "volumes" / "P0000_t1.vvol");

  // Round trip with awkward values.
  std::mt19937_64 rng(1);
  std::vector<float> v(5 * 6 * 7);
  for (auto& x : v) x = std::bit_cast<float>(static_cast<std::uint32_t>(rng()) & 0xbf7fffffu);
  v[0] = -0.0f;
  v[1] = std::numeric_limits<float>::denorm_min();
  const VoxelVolume vol({5, 6, 7}, {0.5f, 1.25f, 3.0f}, v);
  const fs::path vp = root / "rt.vvol";
  data::save_volume(vp, vol);
  const VoxelVolume back = data::load_volume(vp);
  bool round = back.dims == vol.dims && back.spacing == vol.spacing &&
               std::equal(v.begin(), v.end(), back.intensities.begin(),
                          [](float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); });
  MaskVolume mask({2, 3, 4}, {1, 1, 1}, std::uint8_t{0});
  mask.labels[5] = 1;
  data::save_volume(root / "m.vvol", mask);
  round = round && data::load_mask(root / "m.vvol").labels == mask.labels;

  const std::string bytes = slurp(vp);
  auto write = [&](const std::string& name, const std::string& b) {
    std::ofstream(root / name, std::ios::binary) << b;
    return root / name;
  };
  std::string bad_magic = bytes, bad_version = bytes, bad_dtype = bytes;
  bad_magic[0] = 'X';
  bad_version[4] = 9;
  bad_dtype[6] = 7;
  const bool errors =
      raises<FormatError>([&] { data::load_volume(write("a", bad_magic)); }, "unrecognized format") &&
      raises<FormatError>([&] { data::load_volume(write("b", bytes.substr(0, bytes.size() - 4))); },
                          "payload size mismatch") &&
      raises<FormatError>([&] { data::load_volume(write("c", bytes + "xx")); }, "payload size mismatch") &&
      raises<FormatError>([&] { data::load_volume(write("d", bytes.substr(0, 12))); }, "corrupt header") &&
      raises<FormatError>([&] { data::load_volume(write("e", bad_version)); }, "unsupported version") &&
      raises<FormatError>([&] { data::load_volume(write("f", bad_dtype)); }, "unknown dtype") &&
      raises<FormatError>([&] { data::load_mask(vp); }, "dtype mismatch");
  fs::remove_all(root);
  return {same && round && errors, std::string("metrics CSV ") + (same ? "byte-identical" : "DIFFERS") +
                                       " across two full CLI runs; volume round trip " + (round ? "bit-exact" : "BROKEN") +
                                       "; corrupt-file errors " + (errors ? "as specified" : "WRONG")};
}

// ---- 10 ---------------------------------------------------------------------
Outcome radiomics_cascade() {
  double worst_planted = 1, lo_null = 1, hi_null = 0, mean_null = 0;
  bool selected = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    auto make = [&](std::size_t n, bool shuffle) {
      std::vector<std::vector<double>> x;
      std::vector<int> y;
      for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(rng() % 2);
        std::vector<double> row(51);
        for (double& v : row) v = u(rng);
        row[23] = label ? 0.5 + 0.5 * u(rng) : 0.5 * u(rng);
        x.push_back(std::move(row));
        y.push_back(label);
      }
      if (shuffle) std::shuffle(y.begin(), y.end(), rng);
      return std::pair{x, y};
    };
    for (bool shuffled : {false, true}) {
      auto [xtr, ytr] = make(200, shuffled);
      auto [xte, yte] = make(400, shuffled);
      radiomics::MinMaxScaler sc;
      const auto ntr = radiomics::normalize_feature_matrix(xtr, &sc);
      train::CascadeConfig cc;
      cc.seed = seed;
      const auto c = train::train_radiomics_classifier(ntr, ytr, {}, cc);
      eval::PredictionSet p;
      p.scores = c.predict(sc.transform(xte));
      p.labels = yte;
      const double auc = eval::compute_auc(p);
      if (shuffled) {
        lo_null = std::min(lo_null, auc);
        hi_null = std::max(hi_null, auc);
        mean_null += auc / 5;
      } else {
        worst_planted = std::min(worst_planted, auc);
        selected = selected && std::find(c.selected.begin(), c.selected.end(), 23u) != c.selected.end();
      }
    }
  }
  return {selected && worst_planted >= 0.95 && lo_null >= 0.35 && hi_null <= 0.65,
          std::string("planted feature ") + (selected ? "selected" : "MISSED") + " in 5/5 seeds, lowest test AUC " +
              fmt(worst_planted) + "; shuffled labels AUC range [" + fmt(lo_null) + ", " + fmt(hi_null) +
              "], mean " + fmt(mean_null)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},         {"gate law", gate_law},
      {"objective identity", objective_identity}, {"metric oracle", metric_oracle},
      {"feature oracles", feature_oracles},       {"desk-scale learning", desk_learning},
      {"split arithmetic", split_arithmetic},     {"early stopping", early_stopping},
      {"determinism and formats", determinism_formats}, {"radiomics cascade", radiomics_cascade}};
  std::set<std::size_t> pick;
  for (int i = 1; i < argc; ++i) pick.insert(static_cast<std::size_t>(std::stoul(argv[i])));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!pick.empty() && !pick.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
