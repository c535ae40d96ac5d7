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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <vector>

#include "ilab/image.hpp"
#include "ilab/kernels.hpp"
#include "ilab/kernels_ref.hpp"
#include "ilab/model.hpp"
#include "ilab/rng.hpp"
#include "ilab/train.hpp"

using namespace ilab;

namespace {

template <class T>
TensorT<T> random_tensor(std::vector<std::int64_t> shape, Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
  TensorT<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Independent gather-form convolution oracle: a plain quadruple loop per
// output element, structured differently from the engine kernels.
template <class T>
TensorT<T> conv_oracle(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b,
                       std::int64_t stride, std::int64_t pad) {
  const std::int64_t ic = in.dim(0), ih = in.dim(1), iw = in.dim(2);
  const std::int64_t oc = w.dim(0), k = w.dim(2);
  const std::int64_t oh = (ih + 2 * pad - k) / stride + 1;
  const std::int64_t ow = (iw + 2 * pad - k) / stride + 1;
  TensorT<T> out({oc, oh, ow});
  for (std::int64_t o = 0; o < oc; ++o)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x) {
        double acc = static_cast<double>(b(o));
        for (std::int64_t c = 0; c < ic; ++c)
          for (std::int64_t ky = 0; ky < k; ++ky)
            for (std::int64_t kx = 0; kx < k; ++kx) {
              const std::int64_t yy = y * stride + ky - pad;
              const std::int64_t xx = x * stride + kx - pad;
              if (yy < 0 || yy >= ih || xx < 0 || xx >= iw) continue;
              acc += static_cast<double>(w(o, c, ky, kx)) * static_cast<double>(in(c, yy, xx));
            }
        out(o, y, x) = static_cast<T>(acc);
      }
  return out;
}

// Loss plus the activation-pattern signature (ReLU signs, pool argmaxes).
// Along a single-coordinate segment every pre-activation is linear while the
// pattern below it is fixed, so an identical pattern at w-eps, w and w+eps
// proves the segment is kink-free and the central difference is a valid
// derivative oracle there.
double loss_and_pattern(const ModelT<double>& m, const TensorT<double>& batch,
                        const std::vector<std::int32_t>& labels,
                        std::vector<std::int32_t>* pattern) {
  Workspace<double> ws;
  const TensorT<double>& logits = forward_batch(m, batch, ws);
  if (pattern != nullptr) {
    pattern->clear();
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      const TensorT<double>& in = i == 0 ? batch : ws.acts[i - 1];
      if (m.layers[i].kind == LayerKind::kRelu) {
        for (const double v : in.data) pattern->push_back(v > 0.0 ? 1 : 0);
      } else if (m.layers[i].kind == LayerKind::kMaxPool) {
        pattern->insert(pattern->end(), ws.pool_argmax[i].begin(), ws.pool_argmax[i].end());
      }
    }
  }
  const std::int64_t n = batch.dim(0);
  TensorT<double> probs({n, static_cast<std::int64_t>(m.categories)});
  std::vector<double> losses(static_cast<std::size_t>(n));
  kernels::softmax_xent_batch(n, m.categories, logits.ptr(), labels.data(), probs.ptr(),
                              losses.data());
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(n);
}

struct GradCheck {
  double worst_rel = 0.0;
  std::int64_t checked = 0;
  std::int64_t skipped = 0;  // coordinates whose FD window straddles a kink
};

// Central-difference gradient check over every parameter coordinate.
GradCheck gradcheck(ModelT<double>& m, const TensorT<double>& batch,
                    const std::vector<std::int32_t>& labels, double eps) {
  Workspace<double> ws;
  Gradients<double> grads = zero_gradients(m);
  model_backward(m, batch, labels, ws, grads);
  std::vector<std::int32_t> base_pattern, pat_plus, pat_minus;
  loss_and_pattern(m, batch, labels, &base_pattern);

  GradCheck result;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    if (m.weights[li].numel() == 0) continue;
    for (int which = 0; which < 2; ++which) {
      TensorT<double>& param = which == 0 ? m.weights[li] : m.biases[li];
      const TensorT<double>& analytic = which == 0 ? grads.weights[li] : grads.biases[li];
      for (std::int64_t i = 0; i < param.numel(); ++i) {
        const double orig = param(i);
        param(i) = orig + eps;
        const double lp = loss_and_pattern(m, batch, labels, &pat_plus);
        param(i) = orig - eps;
        const double lm = loss_and_pattern(m, batch, labels, &pat_minus);
        param(i) = orig;
        if (pat_plus != base_pattern || pat_minus != base_pattern) {
          ++result.skipped;
          continue;
        }
        const double numeric = (lp - lm) / (2.0 * eps);
        const double a = analytic(i);
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        result.worst_rel = std::max(result.worst_rel, rel);
        ++result.checked;
      }
    }
  }
  return result;
}

void run_gradcheck(const std::vector<LayerSpec>& hidden, const std::vector<std::int64_t>& input,
                   int categories, std::int64_t batch_size, std::uint64_t seed, double eps) {
  ModelT<double> m = build_model<double>(hidden, input, categories, seed);
  Rng rng(mix_seed(seed, 0xda7aULL));
  TensorT<double> batch({batch_size, input[0], input[1], input[2]});
  for (auto& v : batch.data) v = rng.uniform(-1.0, 1.0);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(batch_size));
  for (auto& l : labels)
    l = static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(categories)));

  const GradCheck r = gradcheck(m, batch, labels, eps);
  CHECK(r.worst_rel < 1e-4);
  CHECK(r.checked > 0);
  // Kink-straddling coordinates (where the FD is not a derivative estimate)
  // must stay a small minority.
  CHECK(r.skipped * 10 <= (r.checked + r.skipped));
}

}  // namespace

TEST_CASE("conv2d_forward scalar kernel scales the image") {
  Tensor in({1, 2, 2});
  in.data = {1, 2, 3, 4};
  Tensor w({1, 1, 1, 1});
  w.data = {2};
  Tensor b({1});
  const Tensor out = conv2d_forward(in, w, b, 1, 0);
  CHECK(out.shape == std::vector<std::int64_t>{1, 2, 2});
  CHECK(out.data == std::vector<float>{2, 4, 6, 8});
}

TEST_CASE("conv2d_forward all-zero kernel annihilates any input") {
  Rng rng(3);
  const Tensor in = random_tensor<float>({3, 5, 5}, rng, 0.0, 255.0);
  Tensor w({2, 3, 3, 3});
  Tensor b({2});
  const Tensor out = conv2d_forward(in, w, b, 1, 1);
  for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d_forward matches the quadruple-loop oracle") {
  Rng rng(11);
  const TensorT<double> in = random_tensor<double>({1, 4, 4}, rng);
  const TensorT<double> w = random_tensor<double>({1, 1, 3, 3}, rng);
  TensorT<double> b({1});
  const TensorT<double> out = conv2d_forward(in, w, b, 1, 0);
  const TensorT<double> expect = conv_oracle(in, w, b, 1, 0);
  REQUIRE(out.shape == std::vector<std::int64_t>{1, 2, 2});
  for (std::int64_t i = 0; i < out.numel(); ++i)
    CHECK(out(i) == doctest::Approx(expect(i)).epsilon(1e-12));
}

TEST_CASE("conv2d_forward oracle agreement across strides and paddings") {
  Rng rng(12);
  for (const auto& [stride, pad] : std::vector<std::pair<std::int64_t, std::int64_t>>{
           {1, 0}, {1, 1}, {2, 0}, {2, 2}, {3, 1}}) {
    const TensorT<double> in = random_tensor<double>({3, 9, 8}, rng);
    const TensorT<double> w = random_tensor<double>({4, 3, 3, 3}, rng);
    const TensorT<double> b = random_tensor<double>({4}, rng);
    const TensorT<double> out = conv2d_forward(in, w, b, stride, pad);
    const TensorT<double> expect = conv_oracle(in, w, b, stride, pad);
    REQUIRE(out.shape == expect.shape);
    for (std::int64_t i = 0; i < out.numel(); ++i)
      CHECK(out(i) == doctest::Approx(expect(i)).epsilon(1e-12));
  }
}

TEST_CASE("conv2d_forward rejects mismatched dimensions with names") {
  Tensor in({2, 4, 4});
  Tensor w({1, 3, 3, 3});  // 3 input channels vs 2
  Tensor b({1});
  CHECK_THROWS_WITH_AS(conv2d_forward(in, w, b, 1, 0),
                       doctest::Contains("kernel input channels 3"), ConfigError);
  Tensor w2({1, 2, 5, 5});
  Tensor b2({1});
  CHECK_THROWS_AS(conv2d_forward(in, w2, b2, 1, 0), ConfigError);  // kernel exceeds input
}

TEST_CASE("OpenMP kernels match the serial reference bitwise") {
  Rng rng(21);
  const auto s = kernels::conv_shape(3, 4, 10, 9, 5, 3, 1, 1);
  std::vector<float> in(static_cast<std::size_t>(s.n * s.ic * s.ih * s.iw));
  std::vector<float> w(static_cast<std::size_t>(s.oc * s.ic * s.k * s.k));
  std::vector<float> b(static_cast<std::size_t>(s.oc));
  for (auto& v : in) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));

  std::vector<float> out_omp(static_cast<std::size_t>(s.n * s.oc * s.oh * s.ow));
  std::vector<float> out_ref(out_omp.size());
  kernels::conv2d_forward(s, in.data(), w.data(), b.data(), out_omp.data());
  ref::conv2d_forward(s, in.data(), w.data(), b.data(), out_ref.data());
  CHECK(out_omp == out_ref);

  std::vector<float> gin_omp(in.size()), gin_ref(in.size());
  kernels::conv2d_backward_input(s, w.data(), out_omp.data(), gin_omp.data());
  ref::conv2d_backward_input(s, w.data(), out_ref.data(), gin_ref.data());
  CHECK(gin_omp == gin_ref);

  std::vector<float> gw_omp(w.size()), gw_ref(w.size()), gb_omp(b.size()), gb_ref(b.size());
  kernels::conv2d_backward_params(s, in.data(), out_omp.data(), gw_omp.data(), gb_omp.data());
  ref::conv2d_backward_params(s, in.data(), out_ref.data(), gw_ref.data(), gb_ref.data());
  CHECK(gw_omp == gw_ref);
  CHECK(gb_omp == gb_ref);

  const std::int64_t n = 4, f = 33, u = 7;
  std::vector<float> din(static_cast<std::size_t>(n * f)), dw(static_cast<std::size_t>(u * f));
  std::vector<float> db(static_cast<std::size_t>(u));
  for (auto& v : din) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : dw) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : db) v = static_cast<float>(rng.uniform(-1, 1));
  std::vector<float> do_omp(static_cast<std::size_t>(n * u)), do_ref(do_omp.size());
  kernels::dense_forward(n, f, u, din.data(), dw.data(), db.data(), do_omp.data());
  ref::dense_forward(n, f, u, din.data(), dw.data(), db.data(), do_ref.data());
  CHECK(do_omp == do_ref);

  const auto ps = kernels::pool_shape(2, 3, 8, 8, 2, 2);
  std::vector<float> pin(static_cast<std::size_t>(ps.n * ps.c * ps.ih * ps.iw));
  for (auto& v : pin) v = static_cast<float>(rng.uniform(-1, 1));
  std::vector<float> pout_omp(static_cast<std::size_t>(ps.n * ps.c * ps.oh * ps.ow));
  std::vector<float> pout_ref(pout_omp.size());
  std::vector<std::int32_t> parg_omp(pout_omp.size()), parg_ref(pout_omp.size());
  kernels::maxpool_forward(ps, pin.data(), pout_omp.data(), parg_omp.data());
  ref::maxpool_forward(ps, pin.data(), pout_ref.data(), parg_ref.data());
  CHECK(pout_omp == pout_ref);
  CHECK(parg_omp == parg_ref);
}

TEST_CASE("kernel results are identical for any thread count") {
  Rng rng(22);
  const auto s = kernels::conv_shape(2, 3, 12, 12, 4, 3, 1, 1);
  std::vector<float> in(static_cast<std::size_t>(s.n * s.ic * s.ih * s.iw));
  std::vector<float> w(static_cast<std::size_t>(s.oc * s.ic * s.k * s.k));
  std::vector<float> b(static_cast<std::size_t>(s.oc));
  for (auto& v : in) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
  std::vector<float> out1(static_cast<std::size_t>(s.n * s.oc * s.oh * s.ow)), out2(out1.size());

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  kernels::conv2d_forward(s, in.data(), w.data(), b.data(), out1.data());
  omp_set_num_threads(saved);
  kernels::conv2d_forward(s, in.data(), w.data(), b.data(), out2.data());
  CHECK(out1 == out2);
}

TEST_CASE("dense_forward identity and bias cases") {
  TensorT<double> in({3});
  in.data = {1.5, -2.0, 3.25};
  TensorT<double> w({3, 3});
  w.data = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  TensorT<double> b({3});
  CHECK(dense_forward(in, w, b).data == in.data);

  TensorT<double> wz({3, 3});
  TensorT<double> bb({3});
  bb.data = {4.0, 5.0, 6.0};
  CHECK(dense_forward(in, wz, bb).data == bb.data);
}

TEST_CASE("dense_forward matches naive matvec to 1e-12") {
  Rng rng(31);
  const TensorT<double> in = random_tensor<double>({7}, rng);
  const TensorT<double> w = random_tensor<double>({5, 7}, rng);
  const TensorT<double> b = random_tensor<double>({5}, rng);
  const TensorT<double> out = dense_forward(in, w, b);
  for (std::int64_t u = 0; u < 5; ++u) {
    double acc = b(u);
    for (std::int64_t f = 0; f < 7; ++f) acc += w(u, f) * in(f);
    CHECK(std::abs(out(u) - acc) < 1e-12);
  }
}

TEST_CASE("dense_forward rejects dimension mismatch") {
  TensorT<double> in({4});
  TensorT<double> w({5, 7});
  TensorT<double> b({5});
  CHECK_THROWS_AS(dense_forward(in, w, b), ConfigError);
}

TEST_CASE("softmax_xent_loss on uniform logits gives ln K") {
  TensorT<double> logits({4});
  logits.data = {0.7, 0.7, 0.7, 0.7};
  const auto [loss, probs] = softmax_xent_loss(logits, 2);
  CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  for (std::int64_t i = 0; i < 4; ++i) CHECK(probs(i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax_xent_loss saturated case has near-zero loss") {
  TensorT<double> logits({3});
  logits.data = {100.0, 0.0, 0.0};
  const auto [loss, probs] = softmax_xent_loss(logits, 0);
  CHECK(loss < 1e-9);
  CHECK(loss >= 0.0);
}

TEST_CASE("softmax_xent_loss matches an extended-precision oracle") {
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const std::int64_t k = 2 + static_cast<std::int64_t>(rng.uniform_below(9));
    const TensorT<double> logits = random_tensor<double>({k}, rng, -30.0, 30.0);
    const auto label = static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(k)));
    const auto [loss, probs] = softmax_xent_loss(logits, label);

    long double se = 0.0L;
    for (std::int64_t i = 0; i < k; ++i) se += expl(static_cast<long double>(logits(i)));
    const long double want_loss = logl(se) - static_cast<long double>(logits(label));
    CHECK(loss == doctest::Approx(static_cast<double>(want_loss)).epsilon(1e-12));
    double psum = 0.0;
    for (std::int64_t i = 0; i < k; ++i) {
      const long double p = expl(static_cast<long double>(logits(i))) / se;
      CHECK(probs(i) == doctest::Approx(static_cast<double>(p)).epsilon(1e-10));
      psum += probs(i);
    }
    CHECK(std::abs(psum - 1.0) < 1e-9);  // conservation, double path
  }
}

TEST_CASE("softmax_xent_loss rejects out-of-range labels") {
  TensorT<double> logits({3});
  CHECK_THROWS_AS(softmax_xent_loss(logits, 3), InputError);
  CHECK_THROWS_AS(softmax_xent_loss(logits, -1), InputError);
}

TEST_CASE("gradients match central differences per layer kind") {
  const double eps = 1e-3;

  SUBCASE("dense + relu") {
    run_gradcheck({LayerSpec::dense(8), LayerSpec::relu()}, {1, 2, 3}, 3, 2, 7, eps);
  }
  SUBCASE("conv + relu") {
    run_gradcheck({LayerSpec::conv(2, 3, 1, 1), LayerSpec::relu()}, {1, 5, 5}, 3, 2, 8, eps);
  }
  SUBCASE("conv stride 2, no padding") {
    run_gradcheck({LayerSpec::conv(3, 3, 2, 0), LayerSpec::relu()}, {2, 7, 7}, 3, 2, 9, eps);
  }
  SUBCASE("maxpool") {
    run_gradcheck({LayerSpec::conv(2, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2)},
                  {1, 6, 6}, 3, 2, 10, eps);
  }
}

TEST_CASE("gradients of a 3-layer convnet match central differences") {
  run_gradcheck(
      {LayerSpec::conv(2, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
       LayerSpec::conv(3, 3, 1, 0), LayerSpec::relu(), LayerSpec::dense(10), LayerSpec::relu()},
      {2, 8, 8}, 4, 3, 11, 1e-3);
}

TEST_CASE("single dense softmax layer has the closed-form gradient") {
  // gradient of weights = outer(probs - onehot(label), input)
  Rng rng(53);
  ModelT<double> m = build_model<double>({}, {1, 1, 4}, 3, 13);
  const TensorT<double> batch = random_tensor<double>({1, 1, 1, 4}, rng);
  Workspace<double> ws;
  Gradients<double> grads = zero_gradients(m);
  TensorT<double> probs;
  model_backward(m, batch, {1}, ws, grads, nullptr, &probs);
  for (std::int64_t u = 0; u < 3; ++u) {
    const double delta = probs(0, u) - (u == 1 ? 1.0 : 0.0);
    CHECK(grads.biases[0](u) == doctest::Approx(delta).epsilon(1e-12));
    for (std::int64_t f = 0; f < 4; ++f)
      CHECK(grads.weights[0](u, f) == doctest::Approx(delta * batch(f)).epsilon(1e-12));
  }
}

TEST_CASE("batch gradient equals the mean of per-example gradients") {
  Rng rng(54);
  ModelT<double> m = build_model<double>(
      {LayerSpec::conv(2, 3, 1, 1), LayerSpec::relu(), LayerSpec::dense(6), LayerSpec::relu()},
      {1, 5, 5}, 3, 17);
  const std::int64_t n = 4;
  const TensorT<double> batch = random_tensor<double>({n, 1, 5, 5}, rng);
  const std::vector<std::int32_t> labels = {0, 2, 1, 2};

  Workspace<double> ws;
  Gradients<double> batch_grads = zero_gradients(m);
  model_backward(m, batch, labels, ws, batch_grads);

  Gradients<double> mean_grads = zero_gradients(m);
  for (std::int64_t i = 0; i < n; ++i) {
    TensorT<double> one({1, 1, 5, 5});
    std::copy(batch.data.begin() + i * 25, batch.data.begin() + (i + 1) * 25, one.data.begin());
    Gradients<double> g = zero_gradients(m);
    model_backward(m, one, {labels[static_cast<std::size_t>(i)]}, ws, g);
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
      if (m.weights[li].numel() == 0) continue;
      for (std::int64_t j = 0; j < g.weights[li].numel(); ++j)
        mean_grads.weights[li](j) += g.weights[li](j) / static_cast<double>(n);
      for (std::int64_t j = 0; j < g.biases[li].numel(); ++j)
        mean_grads.biases[li](j) += g.biases[li](j) / static_cast<double>(n);
    }
  }
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    if (m.weights[li].numel() == 0) continue;
    for (std::int64_t j = 0; j < batch_grads.weights[li].numel(); ++j)
      CHECK(std::abs(batch_grads.weights[li](j) - mean_grads.weights[li](j)) < 1e-10);
    for (std::int64_t j = 0; j < batch_grads.biases[li].numel(); ++j)
      CHECK(std::abs(batch_grads.biases[li](j) - mean_grads.biases[li](j)) < 1e-10);
  }
}

TEST_CASE("sgd momentum step") {
  ModelT<double> m = build_model<double>({}, {1, 1, 2}, 2, 1);

  SUBCASE("zero gradient and velocity is a fixed point") {
    TrainStateT<double> st = TrainStateT<double>::init(m, 0.1, 0.0, 0.9);
    const auto before = m.weights[0].data;
    Gradients<double> g = zero_gradients(m);
    sgd_momentum_step(st, m, g);
    CHECK(m.weights[0].data == before);
  }

  SUBCASE("one and two steps follow the closed form") {
    // v <- 0.9 v + g + wd w ; w <- w - 0.1 v with g = 1, wd = 0, w0 = 1
    m.weights[0].data.assign(m.weights[0].data.size(), 1.0);
    TrainStateT<double> st = TrainStateT<double>::init(m, 0.1, 0.0, 0.9);
    Gradients<double> g = zero_gradients(m);
    g.weights[0].data.assign(g.weights[0].data.size(), 1.0);
    sgd_momentum_step(st, m, g);
    CHECK(st.vel_weights[0](0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.weights[0](0) == doctest::Approx(0.9).epsilon(1e-15));
    sgd_momentum_step(st, m, g);
    CHECK(st.vel_weights[0](0) == doctest::Approx(1.9).epsilon(1e-15));
    CHECK(m.weights[0](0) == doctest::Approx(0.71).epsilon(1e-15));
  }

  SUBCASE("non-finite update raises a numeric error") {
    TrainStateT<double> st = TrainStateT<double>::init(m, 1.0, 0.0, 0.9);
    Gradients<double> g = zero_gradients(m);
    g.weights[0](0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sgd_momentum_step(st, m, g), NumericError);
  }
}

TEST_CASE("standardize maps a constant image to zeros") {
  Tensor img({4, 4, 3});
  img.data.assign(img.data.size(), 87.0f);
  const Tensor out = standardize(img);
  for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("standardize is affine invariant") {
  Rng rng(61);
  TensorT<double> img({6, 5, 3});
  for (auto& v : img.data) v = rng.uniform(0.0, 255.0);
  const TensorT<double> base = standardize(img);
  TensorT<double> scaled(img.shape);
  for (std::int64_t i = 0; i < img.numel(); ++i) scaled(i) = 3.7 * img(i) + 41.0;
  const TensorT<double> out = standardize(scaled);
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(std::abs(out(i) - base(i)) < 1e-9);
}

TEST_CASE("standardize output has zero mean and unit variance") {
  Rng rng(62);
  TensorT<double> img({8, 8, 3});
  for (auto& v : img.data) v = rng.uniform(0.0, 255.0);
  const TensorT<double> out = standardize(img);
  double mean = 0.0;
  for (std::int64_t i = 0; i < out.numel(); ++i) mean += out(i);
  mean /= static_cast<double>(out.numel());
  CHECK(std::abs(mean) < 1e-9);
  double var = 0.0;
  for (std::int64_t i = 0; i < out.numel(); ++i) var += (out(i) - mean) * (out(i) - mean);
  var /= static_cast<double>(out.numel());
  CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
}
