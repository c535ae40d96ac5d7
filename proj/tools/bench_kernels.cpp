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

// Times the OpenMP kernels against the serial reference implementations on
// the training-sized workloads and prints per-kernel throughput.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "ilab/kernels.hpp"
#include "ilab/kernels_ref.hpp"
#include "ilab/rng.hpp"
#include "ilab/tensor.hpp"

using namespace ilab;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (dt < best) best = dt;
  }
  return best;
}

void fill_random(std::vector<float>& v, Rng& rng) {
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
}

void report(const char* name, double flops, double serial_s, double omp_s) {
  std::printf("%-24s serial %8.2f ms (%6.2f GF/s)   omp %8.2f ms (%6.2f GF/s)   speedup %.2fx\n",
              name, serial_s * 1e3, flops / serial_s * 1e-9, omp_s * 1e3,
              flops / omp_s * 1e-9, serial_s / omp_s);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  Rng rng(7);
  const int reps = 5;

  // Batch-32 training shapes of the default 32x32 architecture.
  {
    const auto s = kernels::conv_shape(32, 16, 16, 16, 32, 3, 1, 1);
    std::vector<float> in(static_cast<std::size_t>(s.n * s.ic * s.ih * s.iw));
    std::vector<float> w(static_cast<std::size_t>(s.oc * s.ic * s.k * s.k));
    std::vector<float> b(static_cast<std::size_t>(s.oc));
    std::vector<float> out(static_cast<std::size_t>(s.n * s.oc * s.oh * s.ow));
    std::vector<float> gin(in.size()), gw(w.size()), gb(b.size());
    fill_random(in, rng);
    fill_random(w, rng);
    fill_random(b, rng);

    const double fwd_flops = 2.0 * s.n * s.oc * s.oh * s.ow * s.ic * s.k * s.k;
    report("conv2d_forward", fwd_flops,
           time_best_of(reps, [&] { ref::conv2d_forward(s, in.data(), w.data(), b.data(), out.data()); }),
           time_best_of(reps, [&] { kernels::conv2d_forward(s, in.data(), w.data(), b.data(), out.data()); }));
    report("conv2d_backward_input", fwd_flops,
           time_best_of(reps, [&] { ref::conv2d_backward_input(s, w.data(), out.data(), gin.data()); }),
           time_best_of(reps, [&] { kernels::conv2d_backward_input(s, w.data(), out.data(), gin.data()); }));
    report("conv2d_backward_params", fwd_flops,
           time_best_of(reps, [&] { ref::conv2d_backward_params(s, in.data(), out.data(), gw.data(), gb.data()); }),
           time_best_of(reps, [&] { kernels::conv2d_backward_params(s, in.data(), out.data(), gw.data(), gb.data()); }));
  }

  {
    const std::int64_t n = 32, f = 2048, u = 64;
    std::vector<float> in(static_cast<std::size_t>(n * f)), w(static_cast<std::size_t>(u * f));
    std::vector<float> b(static_cast<std::size_t>(u)), out(static_cast<std::size_t>(n * u));
    std::vector<float> gin(in.size()), gw(w.size()), gb(b.size());
    fill_random(in, rng);
    fill_random(w, rng);
    fill_random(b, rng);
    const double flops = 2.0 * n * f * u;
    report("dense_forward", flops,
           time_best_of(reps, [&] { ref::dense_forward(n, f, u, in.data(), w.data(), b.data(), out.data()); }),
           time_best_of(reps, [&] { kernels::dense_forward(n, f, u, in.data(), w.data(), b.data(), out.data()); }));
    report("dense_backward_params", flops,
           time_best_of(reps, [&] { ref::dense_backward_params(n, f, u, in.data(), out.data(), gw.data(), gb.data()); }),
           time_best_of(reps, [&] { kernels::dense_backward_params(n, f, u, in.data(), out.data(), gw.data(), gb.data()); }));
    report("dense_backward_input", flops,
           time_best_of(reps, [&] { ref::dense_backward_input(n, f, u, w.data(), out.data(), gin.data()); }),
           time_best_of(reps, [&] { kernels::dense_backward_input(n, f, u, w.data(), out.data(), gin.data()); }));
  }

  {
    const auto s = kernels::pool_shape(32, 16, 32, 32, 2, 2);
    std::vector<float> in(static_cast<std::size_t>(s.n * s.c * s.ih * s.iw));
    std::vector<float> out(static_cast<std::size_t>(s.n * s.c * s.oh * s.ow));
    std::vector<std::int32_t> arg(out.size());
    fill_random(in, rng);
    const double flops = static_cast<double>(in.size());  // comparisons
    report("maxpool_forward", flops,
           time_best_of(reps, [&] { ref::maxpool_forward(s, in.data(), out.data(), arg.data()); }),
           time_best_of(reps, [&] { kernels::maxpool_forward(s, in.data(), out.data(), arg.data()); }));
  }

  return 0;
}
