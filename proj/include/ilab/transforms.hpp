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
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ilab/errors.hpp"
#include "ilab/rng.hpp"
#include "ilab/tensor.hpp"

namespace ilab {

/// The identity plus the twelve image transformations, in four families:
/// color (grayscale, hue rotation), convolutional (blur, high-pass,
/// horizontal/vertical filtering, contrast inversion), noise (white,
/// salt & pepper) and geometric (rotations, thinning).
enum class TransformKind {
  kIdentity,
  kGrayscale,
  kHueRotate180,
  kGaussianBlur,
  kHighPass,
  kHorizontalFilter,
  kVerticalFilter,
  kContrastInversion,
  kWhiteNoise,
  kSaltPepper,
  kRotate90,
  kRotate180,
  kThinning,
};

enum class TransformFamily { kNone, kColor, kConvolutional, kNoise, kGeometric };

struct TransformInfo {
  TransformKind kind;
  const char* name;
  TransformFamily family;
  bool parameterized;  // takes a blur / noise sigma
  bool stochastic;     // needs a seed
  bool color_only;     // requires 3 channels
};

const std::vector<TransformInfo>& transform_table();
const TransformInfo& transform_info(TransformKind kind);
TransformKind transform_kind_from_name(const std::string& name);

struct TransformSpec {
  TransformKind kind = TransformKind::kIdentity;
  double param = 0.0;                 // blur sigma / noise sigma
  std::optional<std::uint64_t> seed;  // stochastic kinds only

  std::string to_string() const;
};

/// Parses "kind[:param][:seed]". Parameter-free kinds reject a param value
/// but accept an empty slot ("salt-pepper::7") to carry a seed.
TransformSpec parse_transform_spec(const std::string& text);

/// Applies one transformation to an HWC image with values in [0, 255].
/// Output is real-valued: linear filters are left unclipped (the pipeline
/// standardizes right after), noise kinds clip back to [0, 255].
/// Stochastic kinds draw from `rng`; same seed, same bytes.
Tensor apply_transform(const Tensor& image, const TransformSpec& spec, Rng& rng);

/// Convenience overload for stochastic kinds: seeds a fresh stream from
/// spec.seed (configuration error when the kind needs one and none is set).
Tensor apply_transform(const Tensor& image, const TransformSpec& spec);

struct CalibrationResult {
  TransformKind kind = TransformKind::kIdentity;
  double chosen_param = 0.0;
  std::vector<std::pair<double, double>> sweep;  // (param, top-1 accuracy)
  double threshold_acc = 0.0;
};

struct CalibrationError : Error {
  CalibrationError(const std::string& what, std::vector<std::pair<double, double>> trace)
      : Error(what), sweep(std::move(trace)) {}
  std::vector<std::pair<double, double>> sweep;
};

inline constexpr int kCalibrationSweepCap = 100;

/// Sweeps param = step, 2*step, ... and returns the first value whose
/// accuracy (as reported by `accuracy_of`) drops strictly below
/// `threshold_acc`. Throws CalibrationError with the trace at the sweep cap.
CalibrationResult calibrate_transform(TransformKind kind, double param_step,
                                      const std::function<double(const TransformSpec&)>& accuracy_of,
                                      double threshold_acc);

}  // namespace ilab
