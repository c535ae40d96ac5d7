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

#include <string>
#include <vector>

#include "ilab/paradigm.hpp"

namespace ilab {

/// Strict experiment config parser: unknown keys are rejected with their
/// JSON path, omitted keys get the standard defaults (momentum 0.9, batch
/// 32, epoch cap 45, lr 1e-4, weight decay 5e-4, p 0.5). Required keys:
/// dataset, transform, num_seen, seed.
ExperimentConfig parse_config(const std::string& json_text);

/// Canonical serialization with every default filled in;
/// parse(serialize(parse(x))) is a fixed point.
std::string config_to_json(const ExperimentConfig& cfg);

struct SweepConfig {
  ExperimentConfig base;           // num_seen ignored; filled per grid point
  std::vector<int> num_seen_grid;
  std::vector<std::uint64_t> seeds;
};

/// Sweep config: an experiment config with "num_seen" replaced by
/// "num_seen_grid" and "seed" by "seeds".
SweepConfig parse_sweep_config(const std::string& json_text);

std::string sweep_config_to_json(const SweepConfig& cfg);

/// Materializes one grid point: base with (num_seen, seed) substituted and
/// partition_seed set to the training seed so every num_seen value of one
/// seed shares a partition lineage.
ExperimentConfig sweep_point(const SweepConfig& sweep, int num_seen, std::uint64_t seed);

}  // namespace ilab
