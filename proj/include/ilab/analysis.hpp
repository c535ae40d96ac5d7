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

// Neuron-level invariance analysis: activation capture, activity thresholds,
// tau search via ablation, active/inactive ablation accuracy, invariance
// coefficients, partition splits and layer-wise aggregation.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ilab/dataset.hpp"
#include "ilab/model.hpp"
#include "ilab/transforms.hpp"

namespace ilab {

/// units x images table of post-ReLU activations for one trace point.
/// Convolutional units are individual (channel, y, x) activations.
struct ActivationMatrix {
  std::string layer_id;
  std::int64_t units = 0;
  std::int64_t images = 0;
  std::vector<float> values;                  // unit-major: values[u*images + j]
  std::vector<std::int32_t> image_index_map;  // column -> dataset index

  float at(std::int64_t u, std::int64_t j) const {
    return values[static_cast<std::size_t>(u * images + j)];
  }
  bool aligned_with(const ActivationMatrix& o) const {
    return units == o.units && images == o.images && image_index_map == o.image_index_map;
  }
};

/// One matrix per selected trace point over already-standardized CHW images.
/// Column j equals the forward_collect trace of image j.
std::vector<ActivationMatrix> collect_activations(const Model& model,
                                                  const std::vector<Tensor>& standardized_chw,
                                                  const std::vector<int>& trace_selection);

/// All trace points, in order.
std::vector<int> all_trace_points(const Model& model);

struct ThresholdConfig {
  double tau = 0.0;
  std::vector<float> per_unit;  // Th_i = tau * max over orig+trans row i
};

/// Per-unit active image sets: j is in set i when orig[i,j] or trans[i,j]
/// meets the unit's threshold (> 0 when the threshold is 0).
struct ActiveSet {
  std::vector<std::vector<std::int32_t>> members;  // per unit, ascending column index
};

struct Thresholds {
  ThresholdConfig config;
  ActiveSet active;
};

Thresholds compute_thresholds(const ActivationMatrix& orig, const ActivationMatrix& trans,
                              double tau);

struct ActiveStats {
  // Fraction of images activating each unit; units with empty active sets
  // carry no evidence and are excluded.
  std::vector<std::int32_t> unit_ids;
  std::vector<double> images_per_unit;
  // Fraction of units active in each image (all columns).
  std::vector<std::int32_t> image_columns;
  std::vector<double> units_per_image;
};

ActiveStats active_stats(const ActiveSet& active, std::int64_t units, std::int64_t images);

/// Accuracy of the model on `images` with per-unit ablation applied at every
/// thresholded trace point (empty per-layer vectors skip that point).
double ablate_evaluate(const Model& model, const std::vector<Tensor>& standardized_chw,
                       const std::vector<std::int32_t>& labels,
                       const std::vector<std::vector<float>>& per_layer_thresholds,
                       AblationMode mode);

/// Ablation accuracies as a function of tau for a fixed model + evaluation
/// population. The product evaluator derives thresholds from the per-unit
/// activation maxima over that population; tests may script their own.
struct AblationEvaluator {
  double unablated = 0.0;  // top-1 fraction without ablation
  std::function<double(double tau, AblationMode)> accuracy;
};

AblationEvaluator make_ablation_evaluator(const Model& model,
                                          const std::vector<Tensor>& standardized_chw,
                                          const std::vector<std::int32_t>& labels,
                                          const std::vector<int>& trace_selection);

struct TauSearch {
  double selected = 0.0;
  bool warning = false;  // no grid value qualified (tau = 0 fallback)
  double unablated = 0.0;
  std::vector<std::pair<double, double>> trace;  // (tau, inactive-ablation accuracy)
};

inline std::vector<double> default_tau_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(0.05 * i);
  return g;
}

/// Highest grid tau whose inactive-ablation accuracy stays within one
/// percentage point of the unablated accuracy. The full trace is retained.
TauSearch search_tau(const AblationEvaluator& evaluator,
                     const std::vector<double>& grid = default_tau_grid());

struct InvarianceRecord {
  std::int32_t unit = 0;
  std::string layer_id;
  std::string partition;  // kPartitionAll | kPartitionSeen | kPartitionUnseen
  double invariance = 0.0;
  std::int64_t active_count = 0;
};

inline constexpr const char* kPartitionAll = "all";
inline constexpr const char* kPartitionSeen = "seen";
inline constexpr const char* kPartitionUnseen = "unseen";

/// Per-unit invariance over the active samples:
///   I_i = mean_j 1 - |trans - orig| / (trans + orig)
/// Units with empty active sets yield no record. Negative activations are an
/// input error (the capture is post-ReLU).
std::vector<InvarianceRecord> invariance_coefficients(const ActivationMatrix& orig,
                                                      const ActivationMatrix& trans,
                                                      const ActiveSet& active,
                                                      const std::string& partition_tag);

struct LayerSummary {
  std::string layer_id;
  std::string partition;
  double mean_invariance = 0.0;
  double stderr_invariance = 0.0;
  std::int64_t units_with_records = 0;
};

struct InvarianceReport {
  std::vector<InvarianceRecord> records;
  std::vector<LayerSummary> summaries;
};

/// Coefficients per selected layer, three times: over all test images, over
/// seen-category images, over unseen-category images (thresholds recomputed
/// on each subset's own union max). Unseen split is absent when the
/// partition has no unseen categories.
InvarianceReport invariance_report(const Model& model, const LabeledDataset& test,
                                   const TransformSpec& spec, const CategoryPartition& partition,
                                   double tau, const std::vector<int>& trace_selection,
                                   std::uint64_t experiment_seed);

}  // namespace ilab
