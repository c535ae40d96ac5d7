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

#include <cmath>
#include <cstdint>

#include "ilab/tensor.hpp"

namespace ilab {

/// Per-image standardization over all pixels and channels:
/// (x - mean) / max(std, eps). Moments accumulate in double; the epsilon
/// guard makes a constant image map to all zeros.
template <class T>
TensorT<T> standardize(const TensorT<T>& image) {
  constexpr double kEps = 1e-6;
  const std::int64_t n = image.numel();
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) sum += static_cast<double>(image(i));
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(image(i)) - mean;
    sq += d * d;
  }
  const double stddev = std::sqrt(sq / static_cast<double>(n));
  const double scale = 1.0 / std::max(stddev, kEps);
  TensorT<T> out(image.shape);
  for (std::int64_t i = 0; i < n; ++i)
    out(i) = static_cast<T>((static_cast<double>(image(i)) - mean) * scale);
  return out;
}

/// HWC -> CHW, the layout the conv engine consumes.
template <class T>
TensorT<T> hwc_to_chw(const TensorT<T>& img) {
  if (img.rank() != 3) throw InputError("expected HWC image, got rank " + std::to_string(img.rank()));
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  TensorT<T> out({c, h, w});
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t ch = 0; ch < c; ++ch)
        out(ch, y, x) = img(y, x, ch);
  return out;
}

template <class T>
TensorT<T> chw_to_hwc(const TensorT<T>& img) {
  if (img.rank() != 3) throw InputError("expected CHW image, got rank " + std::to_string(img.rank()));
  const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  TensorT<T> out({h, w, c});
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        out(y, x, ch) = img(ch, y, x);
  return out;
}

}  // namespace ilab
