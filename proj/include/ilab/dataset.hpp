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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ilab/errors.hpp"
#include "ilab/tensor.hpp"

namespace ilab {

/// Labeled image collection. Images are HWC tensors of one shared shape
/// holding integral values in [0, 255] (the "u8-valued" contract that lets
/// ILAB archives round-trip losslessly).
struct LabeledDataset {
  std::vector<Tensor> images;
  std::vector<std::int32_t> labels;
  int category_count = 0;
  std::string provenance;

  std::size_t size() const { return images.size(); }
  /// Throws InputError on any broken invariant. Source datasets need two
  /// samples per category (so they can be split); split halves need one.
  void validate(int min_per_category = 2) const;
};

/// Procedural glyph dataset: each category is a distinct stroke/arc glyph,
/// rendered with per-sample jitter (position ±10%, scale ±15%, brightness
/// ±20%) over a noisy background. Deterministic in `seed`.
LabeledDataset generate_synthetic(int category_count, int samples_per_category,
                                  int image_size, std::uint64_t seed);

// ILAB tensor archive:
//   magic "ILAB" | version u16 LE | dtype u8 (0=u8, 1=f32) | count u32 LE |
//   rank u8 | extents u32 LE each | labels u32 LE each | raw sample data,
//   row-major, samples consecutive.
inline constexpr std::uint16_t kArchiveVersion = 1;

void save_tensor_archive(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_tensor_archive(const std::string& path);

/// Seen-/unseen-transformed category split. Nested growth: the seen set of
/// a larger partition contains every smaller one in the same lineage.
struct CategoryPartition {
  std::vector<int> seen;    // sorted ascending
  std::vector<int> unseen;  // sorted ascending
  std::vector<int> lineage; // seen-set sizes recorded along the chain
  std::uint64_t seed = 0;
  int category_count = 0;

  bool is_seen(int category) const;
};

struct LineageError : InputError {
  using InputError::InputError;
};

/// Draws `num_seen` seen categories. With `previous`, keeps its seen set and
/// draws the additions uniformly from its unseen set (same seed required).
CategoryPartition partition_categories(int category_count, int num_seen, std::uint64_t seed,
                                       const CategoryPartition* previous = nullptr);

struct SplitConfig {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct Split {
  LabeledDataset train, test;
  std::vector<std::int32_t> train_indices, test_indices;  // into the source dataset
};

/// Disjoint, exhaustive split; stratified per category when flagged. Every
/// category keeps at least one train and one test sample or the call throws.
Split train_test_split(const LabeledDataset& ds, const SplitConfig& cfg);

}  // namespace ilab
