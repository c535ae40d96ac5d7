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
#include <vector>

#include "ilab/errors.hpp"
#include "ilab/model.hpp"

namespace ilab {

/// SGD-with-momentum state. Velocity buffers mirror parameter shapes.
template <class T>
struct TrainStateT {
  std::vector<TensorT<T>> vel_weights, vel_biases;
  std::int64_t epoch = 0;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  double momentum = 0.9;

  static TrainStateT init(const ModelT<T>& m, double lr, double weight_decay, double momentum) {
    TrainStateT st;
    st.lr = lr;
    st.weight_decay = weight_decay;
    st.momentum = momentum;
    st.vel_weights.resize(m.layers.size());
    st.vel_biases.resize(m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (m.weights[i].numel() > 0) {
        st.vel_weights[i] = TensorT<T>(m.weights[i].shape);
        st.vel_biases[i] = TensorT<T>(m.biases[i].shape);
      }
    }
    return st;
  }
};

using TrainState = TrainStateT<float>;

namespace detail {

// Classical momentum with coupled weight decay:
//   v <- m*v + g + wd*w ;  w <- w - lr*v
template <class T>
void sgd_update(TensorT<T>& w, TensorT<T>& v, const TensorT<T>& g,
                double lr, double wd, double momentum) {
  const std::int64_t n = w.numel();
  if (v.numel() != n || g.numel() != n)
    throw InputError("sgd step shapes misaligned: " + shape_string(w.shape));
  T* wp = w.ptr();
  T* vp = v.ptr();
  const T* gp = g.ptr();
  const T m = static_cast<T>(momentum);
  const T d = static_cast<T>(wd);
  const T l = static_cast<T>(lr);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    vp[i] = m * vp[i] + gp[i] + d * wp[i];
    wp[i] = wp[i] - l * vp[i];
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(wp[i])) || !std::isfinite(static_cast<double>(vp[i])))
      throw NumericError("non-finite parameter after sgd step");
  }
}

}  // namespace detail

template <class T>
void sgd_momentum_step(TrainStateT<T>& state, ModelT<T>& model, const Gradients<T>& grads) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.weights[i].numel() == 0) continue;
    detail::sgd_update(model.weights[i], state.vel_weights[i], grads.weights[i],
                       state.lr, state.weight_decay, state.momentum);
    detail::sgd_update(model.biases[i], state.vel_biases[i], grads.biases[i],
                       state.lr, state.weight_decay, state.momentum);
  }
}

}  // namespace ilab
