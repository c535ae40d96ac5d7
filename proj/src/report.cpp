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

#include "ilab/report.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ilab/version.hpp"

namespace ilab {

namespace {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const char* cell_names[] = {"clean_seen", "clean_unseen", "trans_seen", "trans_unseen"};

const RobustnessReport::Cell& cell_by_index(const RobustnessReport& r, int i) {
  switch (i) {
    case 0: return r.clean_seen;
    case 1: return r.clean_unseen;
    case 2: return r.trans_seen;
    default: return r.trans_unseen;
  }
}

}  // namespace

std::string experiment_id(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a64(config_to_json(cfg));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

AnalysisOutputs analyze_experiment(const Model& model, const ExperimentConfig& cfg,
                                   const LabeledDataset& dataset) {
  AnalysisOutputs out;
  out.id = experiment_id(cfg);
  out.cfg = cfg;

  const Split split = train_test_split(dataset, SplitConfig{cfg.test_fraction, cfg.seed, true});
  const CategoryPartition partition =
      partition_categories(dataset.category_count, cfg.num_seen, cfg.partition_seed, nullptr);
  const LabeledDataset& test = split.test;

  out.robustness = evaluate_robustness(model, test, cfg.transform, partition, cfg.seed);
  if (!partition.seen.empty() && !partition.unseen.empty())
    out.confusion = confusion_quadrants(model, test, cfg.transform, partition, cfg.seed);

  // Tau search over the evaluation population: originals plus transformed
  // versions, thresholds from the per-unit union max.
  std::vector<int> selection;
  if (cfg.ablation_layers == "penultimate")
    selection = {model.penultimate_trace()};
  else
    selection = all_trace_points(model);

  std::vector<Tensor> population = standardized_clean(test);
  {
    std::vector<Tensor> transformed = standardized_transformed(test, cfg.transform, cfg.seed);
    population.insert(population.end(), transformed.begin(), transformed.end());
  }
  std::vector<std::int32_t> pop_labels = test.labels;
  pop_labels.insert(pop_labels.end(), test.labels.begin(), test.labels.end());

  const AblationEvaluator evaluator =
      make_ablation_evaluator(model, population, pop_labels, selection);
  out.tau = search_tau(evaluator);
  out.active_ablation_accuracy = evaluator.accuracy(out.tau.selected, AblationMode::kActive);

  {
    std::vector<Tensor> clean_test = standardized_clean(test);
    out.clean_test_accuracy = top1_accuracy(model, clean_test, test.labels);
  }

  // Active-unit statistics at the selected tau, per layer and pooled.
  const std::vector<ActivationMatrix> orig =
      collect_activations(model, standardized_clean(test), selection);
  const std::vector<ActivationMatrix> trans = collect_activations(
      model, standardized_transformed(test, cfg.transform, cfg.seed), selection);
  ActiveSet pooled;
  std::int64_t pooled_units = 0;
  for (std::size_t k = 0; k < orig.size(); ++k) {
    const Thresholds th = compute_thresholds(orig[k], trans[k], out.tau.selected);
    out.active_per_layer.emplace_back(orig[k].layer_id,
                                      active_stats(th.active, orig[k].units, orig[k].images));
    for (const auto& members : th.active.members) {
      pooled.members.push_back(members);
      ++pooled_units;
    }
  }
  out.active_network =
      active_stats(pooled, pooled_units, static_cast<std::int64_t>(test.size()));

  out.invariance = invariance_report(model, test, cfg.transform, partition, out.tau.selected,
                                     selection, cfg.seed);
  return out;
}

namespace {

void write_csv(const std::string& path, const std::string& contents) {
  write_file(path, contents);
}

}  // namespace

void write_robustness_csv(const std::string& path, const AnalysisOutputs& out) {
  std::string csv = "experiment_id,transform,num_seen,cell,top1,count\n";
  for (int i = 0; i < 4; ++i) {
    const auto& cell = cell_by_index(out.robustness, i);
    if (!cell.top1.has_value()) continue;  // absent cell, no row
    csv += out.id + "," + out.cfg.transform.to_string() + "," + std::to_string(out.cfg.num_seen) +
           "," + cell_names[i] + "," + format_double(*cell.top1) + "," +
           std::to_string(cell.count) + "\n";
  }
  write_csv(path, csv);
}

void write_confusion_csv(const std::string& path, const AnalysisOutputs& out) {
  std::string csv = "experiment_id,true_set,pred_set,percent\n";
  if (out.confusion.has_value()) {
    const ConfusionQuadrants& q = *out.confusion;
    csv += out.id + ",seen,seen," + format_double(q.seen_as_seen) + "\n";
    csv += out.id + ",seen,unseen," + format_double(q.seen_as_unseen) + "\n";
    csv += out.id + ",unseen,seen," + format_double(q.unseen_as_seen) + "\n";
    csv += out.id + ",unseen,unseen," + format_double(q.unseen_as_unseen) + "\n";
  }
  write_csv(path, csv);
}

void write_invariance_csv(const std::string& path, const AnalysisOutputs& out) {
  std::string csv = "experiment_id,layer,unit,partition,invariance,active_count\n";
  for (const InvarianceRecord& r : out.invariance.records) {
    csv += out.id + "," + r.layer_id + "," + std::to_string(r.unit) + "," + r.partition + "," +
           format_double(r.invariance) + "," + std::to_string(r.active_count) + "\n";
  }
  write_csv(path, csv);
}

void write_active_stats_csv(const std::string& path, const AnalysisOutputs& out) {
  std::string csv = "experiment_id,layer,kind,entity_id,fraction\n";
  const auto emit = [&](const std::string& layer, const ActiveStats& st) {
    for (std::size_t i = 0; i < st.unit_ids.size(); ++i)
      csv += out.id + "," + layer + ",images_per_unit," + std::to_string(st.unit_ids[i]) + "," +
             format_double(st.images_per_unit[i]) + "\n";
    for (std::size_t i = 0; i < st.image_columns.size(); ++i)
      csv += out.id + "," + layer + ",units_per_image," + std::to_string(st.image_columns[i]) +
             "," + format_double(st.units_per_image[i]) + "\n";
  };
  for (const auto& [layer, st] : out.active_per_layer) emit(layer, st);
  emit("all", out.active_network);
  write_csv(path, csv);
}

void write_calibration_csv(const std::string& path, const CalibrationResult& result) {
  std::string csv = "kind,param,top1\n";
  for (const auto& [param, acc] : result.sweep)
    csv += std::string(transform_info(result.kind).name) + "," + format_double(param) + "," +
           format_double(acc * 100.0) + "\n";
  write_csv(path, csv);
}

void write_epoch_stats_csv(const std::string& path, const std::string& id,
                           const std::vector<EpochStats>& stats) {
  std::string csv = "experiment_id,epoch,train_loss,holdout_top1\n";
  for (const EpochStats& s : stats)
    csv += id + "," + std::to_string(s.epoch) + "," + format_double(s.train_loss) + "," +
           format_double(s.holdout_accuracy) + "\n";
  write_csv(path, csv);
}

std::string summary_json(const AnalysisOutputs& out) {
  json j;
  j["schema_version"] = kOutputSchemaVersion;
  j["experiment_id"] = out.id;
  j["config"] = json::parse(config_to_json(out.cfg));

  json cells;
  for (int i = 0; i < 4; ++i) {
    const auto& cell = cell_by_index(out.robustness, i);
    json c;
    c["count"] = cell.count;
    if (cell.top1.has_value())
      c["top1"] = *cell.top1;
    else
      c["top1"] = nullptr;
    cells[cell_names[i]] = c;
  }
  j["robustness"] = cells;
  j["clean_test_top1"] = out.clean_test_accuracy * 100.0;

  if (out.confusion.has_value()) {
    const ConfusionQuadrants& q = *out.confusion;
    j["confusion"] = {{"seen_as_seen", q.seen_as_seen},
                      {"seen_as_unseen", q.seen_as_unseen},
                      {"unseen_as_seen", q.unseen_as_seen},
                      {"unseen_as_unseen", q.unseen_as_unseen},
                      {"seen_count", q.seen_count},
                      {"unseen_count", q.unseen_count}};
  } else {
    j["confusion"] = nullptr;
  }

  json tau;
  tau["selected"] = out.tau.selected;
  tau["warning"] = out.tau.warning;
  tau["unablated_top1"] = out.tau.unablated * 100.0;
  tau["active_ablation_top1"] = out.active_ablation_accuracy * 100.0;
  json trace = json::array();
  for (const auto& [t, acc] : out.tau.trace)
    trace.push_back(json{{"tau", t}, {"inactive_top1", acc * 100.0}});
  tau["trace"] = trace;
  j["tau_search"] = tau;

  json inv = json::array();
  for (const LayerSummary& s : out.invariance.summaries) {
    inv.push_back(json{{"layer", s.layer_id},
                       {"partition", s.partition},
                       {"mean", s.mean_invariance},
                       {"stderr", s.stderr_invariance},
                       {"units", s.units_with_records}});
  }
  j["invariance"] = inv;
  return j.dump(2) + "\n";
}

std::string aggregate_summaries(const std::vector<std::string>& summary_documents) {
  json j;
  j["schema_version"] = kOutputSchemaVersion;
  json arr = json::array();
  for (const std::string& doc : summary_documents) arr.push_back(json::parse(doc));
  j["experiments"] = arr;
  return j.dump(2) + "\n";
}

std::string manifest_json(const RunManifest& m) {
  json j;
  j["schema_version"] = kOutputSchemaVersion;
  j["experiment_id"] = m.id;
  j["tool_version"] = std::string(kToolName) + " " + kVersion;
  j["config"] = json::parse(m.config_json);
  json t;
  for (const auto& [stage, sec] : m.timings_sec) t[stage] = sec;
  j["timings_sec"] = t;
  j["outputs"] = m.outputs;
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp + "' for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace ilab
