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

// Batched layer kernels, OpenMP-parallel over independent output slots.
//
// Every output element is accumulated by exactly one thread in a fixed
// serial order, so results are bitwise identical for any thread count and
// match the serial reference kernels in kernels_ref.hpp element for element
// (the project builds with -ffp-contract=off for this reason).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ilab/errors.hpp"
#include "ilab/tensor.hpp"

namespace ilab::kernels {

struct ConvShape {
  std::int64_t n, ic, ih, iw;   // input batch
  std::int64_t oc, k;           // kernel
  std::int64_t stride, pad;
  std::int64_t oh, ow;          // derived
};

inline ConvShape conv_shape(std::int64_t n, std::int64_t ic, std::int64_t ih, std::int64_t iw,
                            std::int64_t oc, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  if (stride < 1) throw ConfigError("conv stride must be >= 1, got " + std::to_string(stride));
  if (pad < 0) throw ConfigError("conv padding must be >= 0, got " + std::to_string(pad));
  const std::int64_t eh = ih + 2 * pad - k;
  const std::int64_t ew = iw + 2 * pad - k;
  if (eh < 0 || ew < 0)
    throw ConfigError("conv kernel " + std::to_string(k) + " exceeds padded input " +
                      std::to_string(ih + 2 * pad) + "x" + std::to_string(iw + 2 * pad));
  return ConvShape{n, ic, ih, iw, oc, k, stride, pad, eh / stride + 1, ew / stride + 1};
}

// Valid output-column range [lo, hi) for a kernel column kx: the ox values
// whose input column ox*stride + kx - pad lands inside [0, iw).
inline void conv_ox_range(const ConvShape& s, std::int64_t kx, std::int64_t& lo, std::int64_t& hi) {
  const std::int64_t off = kx - s.pad;
  lo = off >= 0 ? 0 : (-off + s.stride - 1) / s.stride;
  hi = std::min(s.ow, off < s.iw ? (s.iw - 1 - off) / s.stride + 1 : 0);
  if (hi < lo) hi = lo;
}

/// Cross-correlation with zero padding. in: N*IC*IH*IW, w: OC*IC*K*K,
/// b: OC, out: N*OC*OH*OW.
template <class T>
void conv2d_forward(const ConvShape& s, const T* in, const T* w, const T* b, T* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t oc = 0; oc < s.oc; ++oc) {
      T* o = out + (n * s.oc + oc) * s.oh * s.ow;
      for (std::int64_t i = 0; i < s.oh * s.ow; ++i) o[i] = b[oc];
      for (std::int64_t ic = 0; ic < s.ic; ++ic) {
        const T* x = in + (n * s.ic + ic) * s.ih * s.iw;
        const T* wk = w + (oc * s.ic + ic) * s.k * s.k;
        for (std::int64_t ky = 0; ky < s.k; ++ky) {
          for (std::int64_t kx = 0; kx < s.k; ++kx) {
            const T wv = wk[ky * s.k + kx];
            std::int64_t lo, hi;
            conv_ox_range(s, kx, lo, hi);
            for (std::int64_t oy = 0; oy < s.oh; ++oy) {
              const std::int64_t iy = oy * s.stride + ky - s.pad;
              if (iy < 0 || iy >= s.ih) continue;
              const T* xr = x + iy * s.iw + kx - s.pad;
              T* orow = o + oy * s.ow;
              for (std::int64_t ox = lo; ox < hi; ++ox)
                orow[ox] += wv * xr[ox * s.stride];
            }
          }
        }
      }
    }
  }
}

/// Gradient w.r.t. the conv input. gout: N*OC*OH*OW, gin: N*IC*IH*IW.
template <class T>
void conv2d_backward_input(const ConvShape& s, const T* w, const T* gout, T* gin) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t ic = 0; ic < s.ic; ++ic) {
      T* g = gin + (n * s.ic + ic) * s.ih * s.iw;
      for (std::int64_t i = 0; i < s.ih * s.iw; ++i) g[i] = T(0);
      for (std::int64_t oc = 0; oc < s.oc; ++oc) {
        const T* go = gout + (n * s.oc + oc) * s.oh * s.ow;
        const T* wk = w + (oc * s.ic + ic) * s.k * s.k;
        for (std::int64_t ky = 0; ky < s.k; ++ky) {
          for (std::int64_t kx = 0; kx < s.k; ++kx) {
            const T wv = wk[ky * s.k + kx];
            std::int64_t lo, hi;
            conv_ox_range(s, kx, lo, hi);
            for (std::int64_t oy = 0; oy < s.oh; ++oy) {
              const std::int64_t iy = oy * s.stride + ky - s.pad;
              if (iy < 0 || iy >= s.ih) continue;
              T* gr = g + iy * s.iw + kx - s.pad;
              const T* gorow = go + oy * s.ow;
              for (std::int64_t ox = lo; ox < hi; ++ox)
                gr[ox * s.stride] += wv * gorow[ox];
            }
          }
        }
      }
    }
  }
}

/// Gradients w.r.t. conv weights and bias, summed over the batch.
template <class T>
void conv2d_backward_params(const ConvShape& s, const T* in, const T* gout, T* gw, T* gb) {
#pragma omp parallel for schedule(static)
  for (std::int64_t oc = 0; oc < s.oc; ++oc) {
    T bacc = T(0);
    for (std::int64_t n = 0; n < s.n; ++n) {
      const T* go = gout + (n * s.oc + oc) * s.oh * s.ow;
      for (std::int64_t i = 0; i < s.oh * s.ow; ++i) bacc += go[i];
    }
    gb[oc] = bacc;
    for (std::int64_t ic = 0; ic < s.ic; ++ic) {
      for (std::int64_t ky = 0; ky < s.k; ++ky) {
        for (std::int64_t kx = 0; kx < s.k; ++kx) {
          std::int64_t lo, hi;
          conv_ox_range(s, kx, lo, hi);
          T acc = T(0);
          for (std::int64_t n = 0; n < s.n; ++n) {
            const T* x = in + (n * s.ic + ic) * s.ih * s.iw;
            const T* go = gout + (n * s.oc + oc) * s.oh * s.ow;
            for (std::int64_t oy = 0; oy < s.oh; ++oy) {
              const std::int64_t iy = oy * s.stride + ky - s.pad;
              if (iy < 0 || iy >= s.ih) continue;
              const T* xr = x + iy * s.iw + kx - s.pad;
              const T* gorow = go + oy * s.ow;
              for (std::int64_t ox = lo; ox < hi; ++ox)
                acc += gorow[ox] * xr[ox * s.stride];
            }
          }
          gw[((oc * s.ic + ic) * s.k + ky) * s.k + kx] = acc;
        }
      }
    }
  }
}

/// out[n][u] = b[u] + sum_f w[u][f] * in[n][f]
template <class T>
void dense_forward(std::int64_t n, std::int64_t f, std::int64_t u,
                   const T* in, const T* w, const T* b, T* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < u; ++j) {
      const T* x = in + i * f;
      const T* wr = w + j * f;
      T acc = b[j];
      for (std::int64_t k = 0; k < f; ++k) acc += wr[k] * x[k];
      out[i * u + j] = acc;
    }
  }
}

template <class T>
void dense_backward_input(std::int64_t n, std::int64_t f, std::int64_t u,
                          const T* w, const T* gout, T* gin) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    T* g = gin + i * f;
    for (std::int64_t k = 0; k < f; ++k) g[k] = T(0);
    for (std::int64_t j = 0; j < u; ++j) {
      const T gv = gout[i * u + j];
      const T* wr = w + j * f;
      for (std::int64_t k = 0; k < f; ++k) g[k] += wr[k] * gv;
    }
  }
}

template <class T>
void dense_backward_params(std::int64_t n, std::int64_t f, std::int64_t u,
                           const T* in, const T* gout, T* gw, T* gb) {
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < u; ++j) {
    T bacc = T(0);
    T* wr = gw + j * f;
    for (std::int64_t k = 0; k < f; ++k) wr[k] = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
      const T gv = gout[i * u + j];
      bacc += gv;
      const T* x = in + i * f;
      for (std::int64_t k = 0; k < f; ++k) wr[k] += gv * x[k];
    }
    gb[j] = bacc;
  }
}

template <class T>
void relu_forward(std::int64_t n, const T* in, T* out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

/// Backward through ReLU using the stored *output* (out > 0 <=> in > 0).
template <class T>
void relu_backward(std::int64_t n, const T* out, const T* gout, T* gin) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) gin[i] = out[i] > T(0) ? gout[i] : T(0);
}

struct PoolShape {
  std::int64_t n, c, ih, iw;
  std::int64_t window, stride;
  std::int64_t oh, ow;
};

inline PoolShape pool_shape(std::int64_t n, std::int64_t c, std::int64_t ih, std::int64_t iw,
                            std::int64_t window, std::int64_t stride) {
  if (window < 1 || stride < 1)
    throw ConfigError("maxpool window and stride must be >= 1");
  if (ih < window || iw < window)
    throw ConfigError("maxpool window " + std::to_string(window) + " exceeds input " +
                      std::to_string(ih) + "x" + std::to_string(iw));
  return PoolShape{n, c, ih, iw, window, stride,
                   (ih - window) / stride + 1, (iw - window) / stride + 1};
}

/// Max pooling; argmax stores the flat in-plane index of the winning element
/// (first encountered on ties, fixed scan order).
template <class T>
void maxpool_forward(const PoolShape& s, const T* in, T* out, std::int32_t* argmax) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const T* x = in + (n * s.c + c) * s.ih * s.iw;
      T* o = out + (n * s.c + c) * s.oh * s.ow;
      std::int32_t* a = argmax + (n * s.c + c) * s.oh * s.ow;
      for (std::int64_t oy = 0; oy < s.oh; ++oy) {
        for (std::int64_t ox = 0; ox < s.ow; ++ox) {
          const std::int64_t y0 = oy * s.stride, x0 = ox * s.stride;
          T best = x[y0 * s.iw + x0];
          std::int64_t besti = y0 * s.iw + x0;
          for (std::int64_t dy = 0; dy < s.window; ++dy) {
            for (std::int64_t dx = 0; dx < s.window; ++dx) {
              const std::int64_t idx = (y0 + dy) * s.iw + (x0 + dx);
              if (x[idx] > best) {
                best = x[idx];
                besti = idx;
              }
            }
          }
          o[oy * s.ow + ox] = best;
          a[oy * s.ow + ox] = static_cast<std::int32_t>(besti);
        }
      }
    }
  }
}

template <class T>
void maxpool_backward(const PoolShape& s, const T* gout, const std::int32_t* argmax, T* gin) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      T* g = gin + (n * s.c + c) * s.ih * s.iw;
      for (std::int64_t i = 0; i < s.ih * s.iw; ++i) g[i] = T(0);
      const T* go = gout + (n * s.c + c) * s.oh * s.ow;
      const std::int32_t* a = argmax + (n * s.c + c) * s.oh * s.ow;
      for (std::int64_t i = 0; i < s.oh * s.ow; ++i) g[a[i]] += go[i];
    }
  }
}

/// Numerically stable softmax + cross-entropy over a batch of logit rows.
/// probs: N*K (row sums to 1), losses: per-example -log p[label], in double.
/// Throws InputError when a label is out of range.
template <class T>
void softmax_xent_batch(std::int64_t n, std::int64_t k, const T* logits,
                        const std::int32_t* labels, T* probs, double* losses) {
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k)
      throw InputError("label " + std::to_string(labels[i]) + " out of range for " +
                       std::to_string(k) + " categories");
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const T* l = logits + i * k;
    double m = static_cast<double>(l[0]);
    for (std::int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(l[j]));
    double se = 0.0;
    for (std::int64_t j = 0; j < k; ++j) se += std::exp(static_cast<double>(l[j]) - m);
    const double logz = m + std::log(se);
    losses[i] = logz - static_cast<double>(l[labels[i]]);
    T* p = probs + i * k;
    for (std::int64_t j = 0; j < k; ++j)
      p[j] = static_cast<T>(std::exp(static_cast<double>(l[j]) - m) / se);
  }
}

/// d(mean loss)/d(logits) = (probs - onehot) / N.
template <class T>
void softmax_xent_grad(std::int64_t n, std::int64_t k, const T* probs,
                       const std::int32_t* labels, T* glogits) {
  const double inv_n = 1.0 / static_cast<double>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const T* p = probs + i * k;
    T* g = glogits + i * k;
    for (std::int64_t j = 0; j < k; ++j) {
      const double onehot = (j == labels[i]) ? 1.0 : 0.0;
      g[j] = static_cast<T>((static_cast<double>(p[j]) - onehot) * inv_n);
    }
  }
}

}  // namespace ilab::kernels
