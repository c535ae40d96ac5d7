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

#pragma once

// Analysis orchestration and report emission: the CSV/JSON surface that
// downstream plotting tools consume. All outputs are byte-deterministic for
// a given config + seed.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ilab/analysis.hpp"
#include "ilab/config.hpp"
#include "ilab/paradigm.hpp"

namespace ilab {

inline constexpr int kOutputSchemaVersion = 1;

/// Stable experiment identity: FNV-1a 64 hash of the canonical config JSON,
/// as 16 hex characters.
std::string experiment_id(const ExperimentConfig& cfg);

/// Shortest round-trip decimal rendering (used for every CSV number).
std::string format_double(double v);

struct AnalysisOutputs {
  std::string id;
  ExperimentConfig cfg;
  RobustnessReport robustness;
  std::optional<ConfusionQuadrants> confusion;  // absent when a side is empty
  TauSearch tau;
  double active_ablation_accuracy = 0.0;  // at the selected tau, fraction
  InvarianceReport invariance;
  std::vector<std::pair<std::string, ActiveStats>> active_per_layer;  // (layer id, stats)
  ActiveStats active_network;  // all selected layers pooled ("all" rows)
  double clean_test_accuracy = 0.0;  // fraction, whole test set
};

/// The full post-training analysis pass for one experiment: robustness
/// cells, confusion quadrants, tau search over originals + transformed,
/// active-unit statistics at the selected tau and the three-way invariance
/// report.
AnalysisOutputs analyze_experiment(const Model& model, const ExperimentConfig& cfg,
                                   const LabeledDataset& dataset);

// CSV emitters (schemas are part of the external contract).
void write_robustness_csv(const std::string& path, const AnalysisOutputs& out);
void write_confusion_csv(const std::string& path, const AnalysisOutputs& out);
void write_invariance_csv(const std::string& path, const AnalysisOutputs& out);
void write_active_stats_csv(const std::string& path, const AnalysisOutputs& out);
void write_calibration_csv(const std::string& path, const CalibrationResult& result);
void write_epoch_stats_csv(const std::string& path, const std::string& id,
                           const std::vector<EpochStats>& stats);

/// Per-experiment summary document (accuracy cells, invariance summaries,
/// selected tau + trace, confusion quadrants, config snapshot).
std::string summary_json(const AnalysisOutputs& out);

/// Aggregates per-experiment summary.json documents into one file with an
/// "experiments" array, ordered as given.
std::string aggregate_summaries(const std::vector<std::string>& summary_documents);

struct RunManifest {
  std::string id;
  std::string config_json;                     // canonical snapshot
  std::map<std::string, double> timings_sec;   // per stage
  std::vector<std::string> outputs;            // emitted files
};

std::string manifest_json(const RunManifest& m);

/// Writes a file atomically enough for this tool: to <path>.tmp then rename.
void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace ilab
