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

// The seen-/unseen-transformed experimental paradigm: category-restricted
// runtime transformation during training, experiment training, and
// within-/across-category robustness evaluation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ilab/dataset.hpp"
#include "ilab/model.hpp"
#include "ilab/train.hpp"
#include "ilab/transforms.hpp"

namespace ilab {

struct ExperimentConfig {
  std::string dataset_path;
  std::vector<LayerSpec> hidden_layers = default_hidden_layers();
  TransformSpec transform;
  int num_seen = 0;
  double transform_probability = 0.5;
  int epochs = 45;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::uint64_t partition_seed = 0;  // defaults to seed when unset in JSON
  double test_fraction = 0.2;
  double holdout_fraction = 0.1;
  bool grid_search = false;
  std::string ablation_layers = "all";  // "all" | "penultimate"
  int schema_version = 1;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double holdout_accuracy = 0.0;  // top-1 %, clean held-out images
};

struct TrainingError : Error {
  TrainingError(const std::string& what, std::vector<EpochStats> stats)
      : Error(what), epoch_stats(std::move(stats)) {}
  std::vector<EpochStats> epoch_stats;
};

/// One epoch's worth of training samples: a fresh shuffle where each
/// seen-category sample is transformed with independent probability p
/// (unseen-category samples never are), then standardized. Randomness is
/// derived per (seed, epoch, dataset index) so parallel and serial
/// materialization agree bitwise.
class TrainingStream {
 public:
  TrainingStream(const LabeledDataset& train, const CategoryPartition& partition,
                 const TransformSpec& spec, double p, std::uint64_t seed);

  struct Item {
    Tensor image;  // CHW, standardized
    std::int32_t label = 0;
    std::int32_t dataset_index = 0;
    bool transformed = false;
  };

  /// Shuffled sample order for one epoch.
  std::vector<std::int32_t> epoch_order(int epoch) const;

  /// Materializes one sample of one epoch.
  Item materialize(int epoch, std::int32_t dataset_index) const;

  std::size_t size() const { return train_->size(); }

 private:
  const LabeledDataset* train_;
  const CategoryPartition* partition_;
  TransformSpec spec_;
  double p_;
  std::uint64_t seed_;
};

struct TrainOutcome {
  Model model;
  std::vector<EpochStats> stats;
  CategoryPartition partition;
  Split split;                       // train/test of the source dataset
  std::vector<std::int32_t> holdout; // indices into split.train used for epoch stats
  double chosen_lr = 0.0;            // after optional grid search
  double chosen_weight_decay = 0.0;
};

/// Trains one experiment end to end: split, partition, optional 5x5 grid
/// search for lr/weight decay, then the full run. Deterministic in cfg.seed.
TrainOutcome train_experiment(const ExperimentConfig& cfg, const LabeledDataset& dataset);

struct RobustnessReport {
  struct Cell {
    std::optional<double> top1;  // percent; absent when the cell has no samples
    std::int64_t count = 0;
  };
  Cell clean_seen, clean_unseen, trans_seen, trans_unseen;
};

/// Four-cell top-1 accuracy: {clean, transformed} x {seen, unseen}.
/// Transformed cells apply `spec` with per-image seeds derived from
/// (experiment seed, image index), then standardize; clean cells only
/// standardize. Empty cells are marked absent.
RobustnessReport evaluate_robustness(const Model& model, const LabeledDataset& test,
                                     const TransformSpec& spec, const CategoryPartition& partition,
                                     std::uint64_t experiment_seed);

struct ConfusionQuadrants {
  // Percentages per true set; each row sums to 100.
  double seen_as_seen = 0.0, seen_as_unseen = 0.0;
  double unseen_as_seen = 0.0, unseen_as_unseen = 0.0;
  std::int64_t seen_count = 0, unseen_count = 0;
};

/// Set-level confusion for transformed test images: prediction bucketed by
/// membership in the seen/unseen partition side. Both sides must be
/// nonempty.
ConfusionQuadrants confusion_quadrants(const Model& model, const LabeledDataset& test,
                                       const TransformSpec& spec,
                                       const CategoryPartition& partition,
                                       std::uint64_t experiment_seed);

/// Top-1 accuracy (fraction in [0,1]) of the model on already-standardized
/// CHW images. Parallel over images with an ordered integer reduction.
double top1_accuracy(const Model& model, const std::vector<Tensor>& standardized_chw,
                     const std::vector<std::int32_t>& labels);

/// Standardized CHW views of a test set: clean, or transformed with
/// per-image seeds derived from (seed, image index).
std::vector<Tensor> standardized_clean(const LabeledDataset& ds);
std::vector<Tensor> standardized_transformed(const LabeledDataset& ds, const TransformSpec& spec,
                                             std::uint64_t seed);

/// Per-image transform seed: mix of the base seed and the image index.
std::uint64_t per_image_seed(std::uint64_t base, std::int64_t image_index);

}  // namespace ilab
