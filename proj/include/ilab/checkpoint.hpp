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

#include "ilab/model.hpp"

namespace ilab {

// ILMC checkpoint container:
//   magic "ILMC" | version u16 LE | config length u32 LE | config JSON bytes |
//   per parameter tensor (model layer order, weights then bias):
//     rank u32 LE | extents u32 LE each | data f32 LE row-major
// The config JSON fully determines the layer stack, so the parameter list
// needs no count field.

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Canonical JSON description of a built model (input shape, categories,
/// seed, hidden layers). This is the config text stored in checkpoints.
std::string model_config_json(const Model& m);

/// Rebuilds an uninitialized model (fresh init from the stored seed) from
/// config text produced by model_config_json.
Model model_from_config_json(const std::string& text);

void save_checkpoint(const Model& m, const std::string& path);

/// Throws FormatError (with byte offset) on bad magic/version/truncation.
Model load_checkpoint(const std::string& path);

}  // namespace ilab
