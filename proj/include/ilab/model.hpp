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

// The CNN engine: layer specs, model building/initialization, batched
// forward/backward, activation tracing and per-unit ablation.
//
// Everything is templated on the scalar type. The product path runs float
// (storage width of checkpoints); tests instantiate double where a spec
// tolerance is below float resolution (gradient checks, probability sums).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ilab/errors.hpp"
#include "ilab/kernels.hpp"
#include "ilab/rng.hpp"
#include "ilab/tensor.hpp"

namespace ilab {

enum class LayerKind { kConv, kRelu, kMaxPool, kDense, kSoftmaxOutput };

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  // conv
  std::int64_t out_channels = 0, kernel = 0, stride = 1, padding = 0;
  // maxpool
  std::int64_t window = 0, pool_stride = 0;
  // dense
  std::int64_t units = 0;

  static LayerSpec conv(std::int64_t oc, std::int64_t k, std::int64_t stride = 1, std::int64_t pad = 0) {
    LayerSpec s;
    s.kind = LayerKind::kConv;
    s.out_channels = oc;
    s.kernel = k;
    s.stride = stride;
    s.padding = pad;
    return s;
  }
  static LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::kRelu;
    return s;
  }
  static LayerSpec maxpool(std::int64_t window, std::int64_t stride) {
    LayerSpec s;
    s.kind = LayerKind::kMaxPool;
    s.window = window;
    s.pool_stride = stride;
    return s;
  }
  static LayerSpec dense(std::int64_t units) {
    LayerSpec s;
    s.kind = LayerKind::kDense;
    s.units = units;
    return s;
  }
  static LayerSpec softmax_output() {
    LayerSpec s;
    s.kind = LayerKind::kSoftmaxOutput;
    return s;
  }
};

/// Activation capture point: the output of a ReLU layer. These are the
/// "hidden layers" of all analysis (thresholds, ablation, invariance); the
/// last one fed from a dense layer is the penultimate layer.
struct TracePoint {
  int layer_index;        // index into Model::layers (the relu layer)
  std::string id;         // stable name used in reports, e.g. "h0"
  std::int64_t units;     // flattened unit count (C*H*W or dense width)
  bool after_dense;       // true when the relu follows a dense layer
};

template <class T>
struct ModelT {
  std::vector<std::int64_t> input_shape;  // CHW
  std::vector<LayerSpec> layers;          // full stack incl. output dense + softmax
  std::vector<TensorT<T>> weights;        // indexed by layer; empty for non-param layers
  std::vector<TensorT<T>> biases;
  std::uint64_t rng_seed = 0;

  std::vector<std::vector<std::int64_t>> out_shapes;  // per layer, without batch dim
  std::vector<TracePoint> trace_points;
  int categories = 0;

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (std::size_t i = 0; i < layers.size(); ++i)
      n += weights[i].numel() + biases[i].numel();
    return n;
  }
  int penultimate_trace() const {
    for (int i = static_cast<int>(trace_points.size()) - 1; i >= 0; --i)
      if (trace_points[static_cast<std::size_t>(i)].after_dense) return i;
    return static_cast<int>(trace_points.size()) - 1;
  }
};

using Model = ModelT<float>;

namespace detail {

inline std::int64_t flat(const std::vector<std::int64_t>& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

}  // namespace detail

/// Validates layer chaining against an input shape and computes every
/// intermediate shape. Throws ConfigError naming the offending layer.
std::vector<std::vector<std::int64_t>> resolve_shapes(
    const std::vector<LayerSpec>& layers, const std::vector<std::int64_t>& input_chw,
    int categories);

/// Builds a model from hidden layers + an appended dense(categories) +
/// softmax output. Weights are uniform in ±1/sqrt(fan_in), biases zero,
/// drawn in a fixed order so the same seed gives identical parameters.
template <class T>
ModelT<T> build_model(const std::vector<LayerSpec>& hidden_layers,
                      const std::vector<std::int64_t>& input_chw, int categories,
                      std::uint64_t seed) {
  if (categories < 2) throw ConfigError("model needs at least 2 categories");
  ModelT<T> m;
  m.input_shape = input_chw;
  m.layers = hidden_layers;
  m.layers.push_back(LayerSpec::dense(categories));
  m.layers.push_back(LayerSpec::softmax_output());
  m.categories = categories;
  m.out_shapes = resolve_shapes(m.layers, input_chw, categories);

  m.weights.resize(m.layers.size());
  m.biases.resize(m.layers.size());
  Rng rng(mix_seed(seed, 0x696e6974ULL));  // one stream, fixed draw order
  std::vector<std::int64_t> cur = input_chw;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    if (l.kind == LayerKind::kConv) {
      const std::int64_t ic = cur[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(ic * l.kernel * l.kernel));
      m.weights[i] = TensorT<T>({l.out_channels, ic, l.kernel, l.kernel});
      for (auto& v : m.weights[i].data) v = static_cast<T>(rng.uniform(-bound, bound));
      m.biases[i] = TensorT<T>({l.out_channels});
    } else if (l.kind == LayerKind::kDense) {
      const std::int64_t f = detail::flat(cur);
      const double bound = 1.0 / std::sqrt(static_cast<double>(f));
      m.weights[i] = TensorT<T>({l.units, f});
      for (auto& v : m.weights[i].data) v = static_cast<T>(rng.uniform(-bound, bound));
      m.biases[i] = TensorT<T>({l.units});
    }
    cur = m.out_shapes[i];
  }

  int trace_id = 0;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (m.layers[i].kind != LayerKind::kRelu) continue;
    TracePoint tp;
    tp.layer_index = static_cast<int>(i);
    tp.id = "h" + std::to_string(trace_id++);
    tp.units = detail::flat(m.out_shapes[i]);
    tp.after_dense = i > 0 && m.layers[i - 1].kind == LayerKind::kDense;
    m.trace_points.push_back(tp);
  }
  return m;
}

/// The desk-scale default architecture (hidden layers only; output dense +
/// softmax are appended at build time).
std::vector<LayerSpec> default_hidden_layers();

enum class AblationMode { kInactive, kActive };

/// Per-trace-point unit thresholds for ablated forward passes. A unit is
/// active when act >= threshold, except threshold == 0 where activity means
/// act > 0 (otherwise every non-negative activation would count).
template <class T>
struct AblationPlan {
  std::vector<std::vector<T>> thresholds;  // [trace_point][unit]
  AblationMode mode = AblationMode::kInactive;
};

template <class T>
bool unit_is_active(T act, T threshold) {
  return threshold > T(0) ? act >= threshold : act > T(0);
}

/// Scratch buffers for batched passes; reuse across batches to avoid
/// reallocation.
template <class T>
struct Workspace {
  std::vector<TensorT<T>> acts;                   // per layer output, batch-major
  std::vector<std::vector<std::int32_t>> pool_argmax;  // per layer
  std::vector<TensorT<T>> grads;                  // per layer act gradients
};

namespace detail {

template <class T>
void ensure_ws(const ModelT<T>& m, std::int64_t batch, Workspace<T>& ws, bool for_backward) {
  ws.acts.resize(m.layers.size());
  ws.pool_argmax.resize(m.layers.size());
  if (for_backward) ws.grads.resize(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    std::vector<std::int64_t> s = m.out_shapes[i];
    s.insert(s.begin(), batch);
    if (ws.acts[i].shape != s) ws.acts[i] = TensorT<T>(s);
    if (m.layers[i].kind == LayerKind::kMaxPool) {
      const std::size_t n = static_cast<std::size_t>(flat(s));
      if (ws.pool_argmax[i].size() != n) ws.pool_argmax[i].assign(n, 0);
    }
    if (for_backward && ws.grads[i].shape != s) ws.grads[i] = TensorT<T>(s);
  }
}

template <class T>
void check_finite(const TensorT<T>& t, const char* stage, int layer_index) {
  if (!t.all_finite())
    throw NumericError(std::string("non-finite value in ") + stage + " at layer " +
                       std::to_string(layer_index));
}

}  // namespace detail

/// Batched forward pass. Input: N x C x H x W. Returns the logits tensor
/// (N x categories) held in the workspace. When `ablation` is given, units
/// at every trace point are zeroed per image according to the plan.
template <class T>
const TensorT<T>& forward_batch(const ModelT<T>& m, const TensorT<T>& input, Workspace<T>& ws,
                                const AblationPlan<T>* ablation = nullptr) {
  if (input.rank() != 4 || input.dim(1) != m.input_shape[0] ||
      input.dim(2) != m.input_shape[1] || input.dim(3) != m.input_shape[2])
    throw ConfigError("forward input shape " + shape_string(input.shape) +
                      " does not match model input " + shape_string(m.input_shape));
  const std::int64_t batch = input.dim(0);
  detail::ensure_ws(m, batch, ws, false);

  const TensorT<T>* cur = &input;
  std::vector<std::int64_t> cur_shape = m.input_shape;
  int trace_idx = 0;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    TensorT<T>& out = ws.acts[i];
    switch (l.kind) {
      case LayerKind::kConv: {
        const auto s = kernels::conv_shape(batch, cur_shape[0], cur_shape[1], cur_shape[2],
                                           l.out_channels, l.kernel, l.stride, l.padding);
        kernels::conv2d_forward(s, cur->ptr(), m.weights[i].ptr(), m.biases[i].ptr(), out.ptr());
        break;
      }
      case LayerKind::kRelu: {
        kernels::relu_forward(cur->numel(), cur->ptr(), out.ptr());
        if (ablation != nullptr) {
          const std::vector<T>& th = ablation->thresholds[static_cast<std::size_t>(trace_idx)];
          const std::int64_t units = static_cast<std::int64_t>(th.size());
          const bool zero_active = ablation->mode == AblationMode::kActive;
          T* p = out.ptr();
#pragma omp parallel for schedule(static)
          for (std::int64_t n = 0; n < batch; ++n) {
            T* row = p + n * units;
            for (std::int64_t u = 0; u < units; ++u) {
              if (unit_is_active(row[u], th[static_cast<std::size_t>(u)]) == zero_active)
                row[u] = T(0);
            }
          }
        }
        ++trace_idx;
        break;
      }
      case LayerKind::kMaxPool: {
        const auto s = kernels::pool_shape(batch, cur_shape[0], cur_shape[1], cur_shape[2],
                                           l.window, l.pool_stride);
        kernels::maxpool_forward(s, cur->ptr(), out.ptr(), ws.pool_argmax[i].data());
        break;
      }
      case LayerKind::kDense: {
        const std::int64_t f = detail::flat(cur_shape);
        kernels::dense_forward(batch, f, l.units, cur->ptr(), m.weights[i].ptr(),
                               m.biases[i].ptr(), out.ptr());
        break;
      }
      case LayerKind::kSoftmaxOutput:
        // Marker layer: forward output is the logits of the dense below.
        out.data.assign(cur->data.begin(), cur->data.end());
        break;
    }
    detail::check_finite(out, "forward", static_cast<int>(i));
    cur = &out;
    cur_shape = m.out_shapes[i];
  }
  return *cur;
}

template <class T>
struct Gradients {
  std::vector<TensorT<T>> weights, biases;  // same indexing as model layers
};

template <class T>
Gradients<T> zero_gradients(const ModelT<T>& m) {
  Gradients<T> g;
  g.weights.resize(m.layers.size());
  g.biases.resize(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (m.weights[i].numel() > 0) {
      g.weights[i] = TensorT<T>(m.weights[i].shape);
      g.biases[i] = TensorT<T>(m.biases[i].shape);
    }
  }
  return g;
}

/// Mean-over-batch cross-entropy loss and its gradient for every parameter.
/// Returns the mean loss (double accumulation); per-example losses go to
/// `example_losses` when non-null.
template <class T>
double model_backward(const ModelT<T>& m, const TensorT<T>& input,
                      const std::vector<std::int32_t>& labels, Workspace<T>& ws,
                      Gradients<T>& grads, std::vector<double>* example_losses = nullptr,
                      TensorT<T>* probs_out = nullptr) {
  const std::int64_t batch = input.dim(0);
  if (batch == 0 || static_cast<std::size_t>(batch) != labels.size())
    throw InputError("batch of " + std::to_string(batch) + " images has " +
                     std::to_string(labels.size()) + " labels");
  forward_batch(m, input, ws);
  detail::ensure_ws(m, batch, ws, true);

  const int last = static_cast<int>(m.layers.size()) - 1;
  const TensorT<T>& logits = ws.acts[static_cast<std::size_t>(last)];
  const std::int64_t k = m.categories;
  TensorT<T> probs({batch, k});
  std::vector<double> losses(static_cast<std::size_t>(batch));
  kernels::softmax_xent_batch(batch, k, logits.ptr(), labels.data(), probs.ptr(), losses.data());
  kernels::softmax_xent_grad(batch, k, probs.ptr(), labels.data(),
                             ws.grads[static_cast<std::size_t>(last)].ptr());
  double loss = 0.0;
  for (double l : losses) loss += l;  // fixed order
  loss /= static_cast<double>(batch);
  if (example_losses != nullptr) *example_losses = losses;
  if (probs_out != nullptr) *probs_out = probs;
  if (!std::isfinite(loss)) throw NumericError("non-finite loss in backward pass");

  for (int i = last; i >= 0; --i) {
    const LayerSpec& l = m.layers[static_cast<std::size_t>(i)];
    const TensorT<T>& gout = ws.grads[static_cast<std::size_t>(i)];
    const TensorT<T>& lin = i == 0 ? input : ws.acts[static_cast<std::size_t>(i - 1)];
    TensorT<T>* gin = i == 0 ? nullptr : &ws.grads[static_cast<std::size_t>(i - 1)];
    const std::vector<std::int64_t>& in_shape =
        i == 0 ? m.input_shape : m.out_shapes[static_cast<std::size_t>(i - 1)];
    switch (l.kind) {
      case LayerKind::kSoftmaxOutput:
        if (gin != nullptr) gin->data.assign(gout.data.begin(), gout.data.end());
        break;
      case LayerKind::kDense: {
        const std::int64_t f = detail::flat(in_shape);
        kernels::dense_backward_params(batch, f, l.units, lin.ptr(), gout.ptr(),
                                       grads.weights[static_cast<std::size_t>(i)].ptr(),
                                       grads.biases[static_cast<std::size_t>(i)].ptr());
        if (gin != nullptr)
          kernels::dense_backward_input(batch, f, l.units, m.weights[static_cast<std::size_t>(i)].ptr(),
                                        gout.ptr(), gin->ptr());
        break;
      }
      case LayerKind::kRelu:
        if (gin != nullptr)
          kernels::relu_backward(gout.numel(), ws.acts[static_cast<std::size_t>(i)].ptr(),
                                 gout.ptr(), gin->ptr());
        break;
      case LayerKind::kMaxPool: {
        const auto s = kernels::pool_shape(batch, in_shape[0], in_shape[1], in_shape[2],
                                           l.window, l.pool_stride);
        if (gin != nullptr)
          kernels::maxpool_backward(s, gout.ptr(), ws.pool_argmax[static_cast<std::size_t>(i)].data(),
                                    gin->ptr());
        break;
      }
      case LayerKind::kConv: {
        const auto s = kernels::conv_shape(batch, in_shape[0], in_shape[1], in_shape[2],
                                           l.out_channels, l.kernel, l.stride, l.padding);
        kernels::conv2d_backward_params(s, lin.ptr(), gout.ptr(),
                                        grads.weights[static_cast<std::size_t>(i)].ptr(),
                                        grads.biases[static_cast<std::size_t>(i)].ptr());
        if (gin != nullptr) kernels::conv2d_backward_input(s, m.weights[static_cast<std::size_t>(i)].ptr(),
                                                           gout.ptr(), gin->ptr());
        break;
      }
    }
    if (m.weights[static_cast<std::size_t>(i)].numel() > 0) {
      detail::check_finite(grads.weights[static_cast<std::size_t>(i)], "backward", i);
      detail::check_finite(grads.biases[static_cast<std::size_t>(i)], "backward", i);
    }
  }
  return loss;
}

/// Post-ReLU activations of every hidden layer plus the logits for a single
/// image (CHW, already standardized).
template <class T>
struct ActivationTrace {
  std::vector<TensorT<T>> hidden;  // one per trace point, flattened unit order
  TensorT<T> logits;
};

template <class T>
ActivationTrace<T> forward_collect(const ModelT<T>& m, const TensorT<T>& image_chw) {
  TensorT<T> batch({1, image_chw.dim(0), image_chw.dim(1), image_chw.dim(2)});
  batch.data = image_chw.data;
  Workspace<T> ws;
  const TensorT<T>& logits = forward_batch(m, batch, ws);
  ActivationTrace<T> tr;
  for (const TracePoint& tp : m.trace_points) {
    TensorT<T> h({tp.units});
    h.data = ws.acts[static_cast<std::size_t>(tp.layer_index)].data;
    tr.hidden.push_back(std::move(h));
  }
  tr.logits = TensorT<T>({m.categories});
  tr.logits.data = logits.data;
  return tr;
}

// ---- Spec-level single-instance operations ---------------------------------

/// Single-image convolution: input CHW, kernel OCxICxKxK.
template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& kernel,
                          const TensorT<T>& bias, std::int64_t stride, std::int64_t padding) {
  if (input.rank() != 3) throw ConfigError("conv2d_forward expects CHW input");
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3))
    throw ConfigError("conv2d_forward expects OCxICxKxK kernel, got " + shape_string(kernel.shape));
  if (kernel.dim(1) != input.dim(0))
    throw ConfigError("kernel input channels " + std::to_string(kernel.dim(1)) +
                      " != image channels " + std::to_string(input.dim(0)));
  if (bias.numel() != kernel.dim(0))
    throw ConfigError("bias length " + std::to_string(bias.numel()) +
                      " != output channels " + std::to_string(kernel.dim(0)));
  const auto s = kernels::conv_shape(1, input.dim(0), input.dim(1), input.dim(2),
                                     kernel.dim(0), kernel.dim(2), stride, padding);
  TensorT<T> out({s.oc, s.oh, s.ow});
  kernels::conv2d_forward(s, input.ptr(), kernel.ptr(), bias.ptr(), out.ptr());
  return out;
}

template <class T>
TensorT<T> dense_forward(const TensorT<T>& input, const TensorT<T>& weights,
                         const TensorT<T>& bias) {
  if (weights.rank() != 2 || weights.dim(1) != input.numel())
    throw ConfigError("dense weights " + shape_string(weights.shape) +
                      " incompatible with input length " + std::to_string(input.numel()));
  if (bias.numel() != weights.dim(0))
    throw ConfigError("dense bias length " + std::to_string(bias.numel()) +
                      " != unit count " + std::to_string(weights.dim(0)));
  TensorT<T> out({weights.dim(0)});
  kernels::dense_forward(1, weights.dim(1), weights.dim(0), input.ptr(), weights.ptr(),
                         bias.ptr(), out.ptr());
  return out;
}

/// Stable log-sum-exp cross-entropy for one logit vector.
template <class T>
std::pair<double, TensorT<T>> softmax_xent_loss(const TensorT<T>& logits, std::int32_t label) {
  const std::int64_t k = logits.numel();
  TensorT<T> probs({k});
  double loss = 0.0;
  kernels::softmax_xent_batch(1, k, logits.ptr(), &label, probs.ptr(), &loss);
  return {loss, probs};
}

}  // namespace ilab
