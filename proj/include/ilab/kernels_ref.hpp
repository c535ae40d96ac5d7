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

// Serial reference kernels. Single-threaded twins of kernels.hpp with the
// same per-element accumulation order, kept for correctness tests and for
// the kernel benchmark. Not used by the engine.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "ilab/kernels.hpp"

namespace ilab::ref {

using kernels::ConvShape;
using kernels::PoolShape;
using kernels::conv_ox_range;

template <class T>
void conv2d_forward(const ConvShape& s, const T* in, const T* w, const T* b, T* out) {
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

template <class T>
void conv2d_backward_input(const ConvShape& s, const T* w, const T* gout, T* gin) {
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

template <class T>
void conv2d_backward_params(const ConvShape& s, const T* in, const T* gout, T* gw, T* gb) {
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

template <class T>
void dense_forward(std::int64_t n, std::int64_t f, std::int64_t u,
                   const T* in, const T* w, const T* b, T* out) {
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
void maxpool_forward(const PoolShape& s, const T* in, T* out, std::int32_t* argmax) {
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

}  // namespace ilab::ref
