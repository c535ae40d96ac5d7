// Copyright 2026 The Invarilab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: dataset synthesis, transform calibration, experiment
// training, invariance analysis, report aggregation and num_seen sweeps.

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ilab/checkpoint.hpp"
#include "ilab/report.hpp"
#include "ilab/version.hpp"

namespace fs = std::filesystem;
using namespace ilab;

namespace {

// Files created by the running subcommand; removed when it fails so no
// partial outputs survive.
class OutputGuard {
 public:
  std::string track(const std::string& path) {
    files_.push_back(path);
    return path;
  }
  void commit() { files_.clear(); }
  ~OutputGuard() {
    for (const std::string& f : files_) {
      std::error_code ec;
      fs::remove(f, ec);
    }
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::vector<std::string> files_;
};

void apply_thread_cap() {
  const char* env = std::getenv("INVARILAB_THREADS");
  if (env == nullptr) return;
  const int n = std::atoi(env);
  if (n >= 1) omp_set_num_threads(std::min(n, omp_get_max_threads()));
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::map<std::string, double> stages;
  void mark(const std::string& stage) {
    stages[stage] = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
  }
};

ExperimentConfig load_config_file(const std::string& path) {
  if (!fs::exists(path)) throw ParseError("config file '" + path + "' not found");
  return parse_config(read_file(path));
}

std::string run_dir_for(const std::string& out_dir, const std::string& id) {
  const std::string dir = out_dir + "/" + id;
  fs::create_directories(dir);
  return dir;
}

int cmd_synth(int categories, int samples, int size, std::uint64_t seed, const std::string& out) {
  OutputGuard guard;
  const LabeledDataset ds = generate_synthetic(categories, samples, size, seed);
  guard.track(out);
  save_tensor_archive(ds, out);
  std::cout << "wrote " << out << " (" << ds.size() << " samples, " << ds.category_count
            << " categories)\n";
  guard.commit();
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  Timer timer;
  OutputGuard guard;
  const ExperimentConfig cfg = load_config_file(config_path);
  const std::string id = experiment_id(cfg);
  const LabeledDataset dataset = load_tensor_archive(cfg.dataset_path);
  timer.mark("load");

  const TrainOutcome outcome = train_experiment(cfg, dataset);
  timer.mark("train");

  const std::string dir = run_dir_for(out_dir, id);
  const std::string ckpt = dir + "/checkpoint.ilmc";
  guard.track(ckpt);
  save_checkpoint(outcome.model, ckpt);
  const std::string stats = dir + "/epoch_stats.csv";
  guard.track(stats);
  write_epoch_stats_csv(stats, id, outcome.stats);

  RunManifest manifest;
  manifest.id = id;
  manifest.config_json = config_to_json(cfg);
  manifest.timings_sec = timer.stages;
  manifest.outputs = {ckpt, stats};
  const std::string mpath = dir + "/train_manifest.json";
  guard.track(mpath);
  write_file(mpath, manifest_json(manifest));

  std::cout << id << "\n";
  guard.commit();
  return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& out_dir,
                std::string checkpoint_path) {
  Timer timer;
  OutputGuard guard;
  const ExperimentConfig cfg = load_config_file(config_path);
  const std::string id = experiment_id(cfg);
  const std::string dir = run_dir_for(out_dir, id);
  if (checkpoint_path.empty()) checkpoint_path = dir + "/checkpoint.ilmc";
  const Model model = load_checkpoint(checkpoint_path);
  const LabeledDataset dataset = load_tensor_archive(cfg.dataset_path);
  if (model.categories != dataset.category_count)
    throw ConfigError("checkpoint categories (" + std::to_string(model.categories) +
                      ") do not match dataset (" + std::to_string(dataset.category_count) + ")");
  timer.mark("load");

  const AnalysisOutputs out = analyze_experiment(model, cfg, dataset);
  timer.mark("analyze");

  const std::string rob = guard.track(dir + "/robustness.csv");
  write_robustness_csv(rob, out);
  const std::string con = guard.track(dir + "/confusion.csv");
  write_confusion_csv(con, out);
  const std::string inv = guard.track(dir + "/invariance.csv");
  write_invariance_csv(inv, out);
  const std::string act = guard.track(dir + "/active_stats.csv");
  write_active_stats_csv(act, out);
  const std::string summary = guard.track(dir + "/summary.json");
  write_file(summary, summary_json(out));

  RunManifest manifest;
  manifest.id = id;
  manifest.config_json = config_to_json(cfg);
  manifest.timings_sec = timer.stages;
  manifest.outputs = {rob, con, inv, act, summary};
  const std::string mpath = guard.track(dir + "/analyze_manifest.json");
  write_file(mpath, manifest_json(manifest));

  std::cout << id << "\n";
  guard.commit();
  return 0;
}

int cmd_calibrate(const std::string& data_path, const std::string& checkpoint_path,
                  const std::string& kind_name, double step, double threshold,
                  std::uint64_t split_seed, double test_fraction, std::uint64_t transform_seed,
                  const std::string& out) {
  OutputGuard guard;
  const TransformKind kind = transform_kind_from_name(kind_name);
  const Model model = load_checkpoint(checkpoint_path);
  const LabeledDataset dataset = load_tensor_archive(data_path);
  const Split split = train_test_split(dataset, SplitConfig{test_fraction, split_seed, true});
  const LabeledDataset& eval = split.test;

  const auto accuracy_of = [&](const TransformSpec& spec) {
    const std::vector<Tensor> images = standardized_transformed(eval, spec, transform_seed);
    return top1_accuracy(model, images, eval.labels);
  };
  try {
    const CalibrationResult result = calibrate_transform(kind, step, accuracy_of, threshold);
    guard.track(out);
    write_calibration_csv(out, result);
    std::cout << transform_info(kind).name << " calibrated: param " << result.chosen_param
              << " (top-1 " << result.sweep.back().second * 100.0 << "%)\n";
  } catch (const CalibrationError& e) {
    // The trace is still useful when the sweep fails; keep it on disk.
    CalibrationResult partial;
    partial.kind = kind;
    partial.threshold_acc = threshold;
    partial.sweep = e.sweep;
    write_calibration_csv(out, partial);
    throw;
  }
  guard.commit();
  return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& out) {
  OutputGuard guard;
  std::vector<std::string> dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "summary.json"))
      dirs.push_back(entry.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw InputError("no summary.json found under '" + runs_dir + "'");
  std::vector<std::string> docs;
  for (const std::string& d : dirs) docs.push_back(read_file(d + "/summary.json"));
  guard.track(out);
  write_file(out, aggregate_summaries(docs));
  std::cout << "aggregated " << docs.size() << " experiments into " << out << "\n";
  guard.commit();
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  Timer timer;
  OutputGuard guard;
  if (!fs::exists(config_path)) throw ParseError("config file '" + config_path + "' not found");
  const SweepConfig sweep = parse_sweep_config(read_file(config_path));
  const LabeledDataset dataset = load_tensor_archive(sweep.base.dataset_path);

  std::vector<std::string> docs;
  std::vector<std::string> ids;
  for (const std::uint64_t seed : sweep.seeds) {
    for (const int num_seen : sweep.num_seen_grid) {
      const ExperimentConfig cfg = sweep_point(sweep, num_seen, seed);
      const std::string id = experiment_id(cfg);
      ids.push_back(id);
      const std::string dir = run_dir_for(out_dir, id);

      const TrainOutcome outcome = train_experiment(cfg, dataset);
      const std::string ckpt = guard.track(dir + "/checkpoint.ilmc");
      save_checkpoint(outcome.model, ckpt);
      const std::string stats = guard.track(dir + "/epoch_stats.csv");
      write_epoch_stats_csv(stats, id, outcome.stats);

      const AnalysisOutputs out = analyze_experiment(outcome.model, cfg, dataset);
      write_robustness_csv(guard.track(dir + "/robustness.csv"), out);
      write_confusion_csv(guard.track(dir + "/confusion.csv"), out);
      write_invariance_csv(guard.track(dir + "/invariance.csv"), out);
      write_active_stats_csv(guard.track(dir + "/active_stats.csv"), out);
      const std::string doc = summary_json(out);
      write_file(guard.track(dir + "/summary.json"), doc);
      docs.push_back(doc);
      std::cout << "seed " << seed << " num_seen " << num_seen << " -> " << id << "\n";
    }
  }
  timer.mark("sweep");

  const std::string agg = guard.track(out_dir + "/summary.json");
  write_file(agg, aggregate_summaries(docs));

  RunManifest manifest;
  manifest.id = "sweep";
  manifest.config_json = sweep_config_to_json(sweep);
  manifest.timings_sec = timer.stages;
  manifest.outputs = ids;
  write_file(guard.track(out_dir + "/sweep_manifest.json"), manifest_json(manifest));
  guard.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"invariance laboratory: train small CNNs under category-restricted "
               "transformations and measure neuron-level invariance"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic glyph dataset (ILAB archive)");
  int categories = 10, samples = 120, size = 32;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "data.ilab";
  synth->add_option("--categories", categories)->check(CLI::Range(2, 1000000));
  synth->add_option("--samples", samples, "samples per category");
  synth->add_option("--size", size, "image side length")->check(CLI::Range(16, 4096));
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out)->required();

  // train
  auto* train = app.add_subcommand("train", "train one experiment from a JSON config");
  std::string train_config, train_out = "runs";
  train->add_option("--config", train_config)->required();
  train->add_option("--out", train_out, "runs directory");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "run the invariance analysis for a trained model");
  std::string analyze_config, analyze_out = "runs", analyze_ckpt;
  analyze->add_option("--config", analyze_config)->required();
  analyze->add_option("--out", analyze_out, "runs directory");
  analyze->add_option("--checkpoint", analyze_ckpt, "defaults to <out>/<id>/checkpoint.ilmc");

  // calibrate
  auto* calibrate = app.add_subcommand(
      "calibrate", "sweep a transform parameter until a baseline model drops below a threshold");
  std::string cal_data, cal_ckpt, cal_kind, cal_out = "calibration.csv";
  double cal_step = 0.5, cal_threshold = 0.10, cal_test_fraction = 0.2;
  std::uint64_t cal_split_seed = 0, cal_seed = 0;
  calibrate->add_option("--data", cal_data)->required();
  calibrate->add_option("--checkpoint", cal_ckpt)->required();
  calibrate->add_option("--kind", cal_kind, "gaussian-blur or white-noise")->required();
  calibrate->add_option("--step", cal_step);
  calibrate->add_option("--threshold", cal_threshold, "accuracy fraction, e.g. 0.10");
  calibrate->add_option("--split-seed", cal_split_seed, "seed of the train/test split");
  calibrate->add_option("--test-fraction", cal_test_fraction);
  calibrate->add_option("--seed", cal_seed, "transform randomness seed");
  calibrate->add_option("--out", cal_out);

  // report
  auto* report = app.add_subcommand("report", "aggregate per-run summary.json files");
  std::string report_runs = "runs", report_out = "summary.json";
  report->add_option("--runs", report_runs);
  report->add_option("--out", report_out);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train+analyze across a num_seen grid and seeds");
  std::string sweep_config, sweep_out = "runs";
  sweep->add_option("--config", sweep_config)->required();
  sweep->add_option("--out", sweep_out, "runs directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(categories, samples, size, synth_seed, synth_out);
    if (train->parsed()) return cmd_train(train_config, train_out);
    if (analyze->parsed()) return cmd_analyze(analyze_config, analyze_out, analyze_ckpt);
    if (calibrate->parsed())
      return cmd_calibrate(cal_data, cal_ckpt, cal_kind, cal_step, cal_threshold, cal_split_seed,
                           cal_test_fraction, cal_seed, cal_out);
    if (report->parsed()) return cmd_report(report_runs, report_out);
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
