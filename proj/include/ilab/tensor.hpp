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

#include <cassert>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ilab/errors.hpp"

namespace ilab {

/// Dense n-dimensional array, row-major. The one numeric carrier of the
/// engine: images (HWC), batches (NCHW), parameters, activations.
template <class T>
struct TensorT {
  std::vector<std::int64_t> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<std::int64_t> s)
      : shape(std::move(s)), data(checked_numel(shape), T(0)) {}
  TensorT(std::vector<std::int64_t> s, T fill)
      : shape(std::move(s)), data(checked_numel(shape), fill) {}

  static std::int64_t checked_numel(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto e : s) {
      if (e <= 0) throw InputError("tensor extent must be positive, got " + std::to_string(e));
      n *= e;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator()(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  T operator()(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  T& operator()(std::int64_t i, std::int64_t j) {
    assert(rank() == 2);
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  T operator()(std::int64_t i, std::int64_t j) const {
    assert(rank() == 2);
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  T& operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
    assert(rank() == 3);
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  T operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    assert(rank() == 3);
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  T& operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
    assert(rank() == 4);
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  T operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
    assert(rank() == 4);
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const T& v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }
};

using Tensor = TensorT<float>;

inline std::string shape_string(const std::vector<std::int64_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace ilab
