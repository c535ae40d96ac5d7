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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ilab/checkpoint.hpp"
#include "ilab/image.hpp"
#include "ilab/model.hpp"
#include "ilab/rng.hpp"

using namespace ilab;

namespace {

Tensor random_image_chw(std::vector<std::int64_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  return t;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("models built from the same config and seed are bit-identical") {
  const Model a = build_model<float>(default_hidden_layers(), {3, 32, 32}, 10, 42);
  const Model b = build_model<float>(default_hidden_layers(), {3, 32, 32}, 10, 42);
  REQUIRE(a.layers.size() == b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    CHECK(a.weights[i].data == b.weights[i].data);
    CHECK(a.biases[i].data == b.biases[i].data);
  }
  const Model c = build_model<float>(default_hidden_layers(), {3, 32, 32}, 10, 43);
  CHECK(a.weights[0].data != c.weights[0].data);
}

TEST_CASE("weight init is zero-mean uniform scaled by fan-in, biases zero") {
  const Model m = build_model<float>(default_hidden_layers(), {3, 32, 32}, 10, 7);
  const float bound0 = 1.0f / std::sqrt(3.0f * 9.0f);
  for (float v : m.weights[0].data) {
    CHECK(v >= -bound0);
    CHECK(v <= bound0);
  }
  for (std::size_t i = 0; i < m.layers.size(); ++i)
    for (float v : m.biases[i].data) CHECK(v == 0.0f);
}

TEST_CASE("model build rejects inconsistent layer chains") {
  // dense then conv: conv needs CHW input
  CHECK_THROWS_AS(build_model<float>({LayerSpec::dense(8), LayerSpec::conv(4, 3)}, {3, 16, 16},
                                     5, 1),
                  ConfigError);
  // pool window larger than the image
  CHECK_THROWS_AS(build_model<float>({LayerSpec::maxpool(20, 20)}, {3, 16, 16}, 5, 1),
                  ConfigError);
  // kernel exceeding padded input, with the offending dimensions named
  CHECK_THROWS_WITH_AS(build_model<float>({LayerSpec::conv(4, 19)}, {3, 16, 16}, 5, 1),
                       doctest::Contains("exceeds padded input"), ConfigError);
  CHECK_THROWS_AS(build_model<float>(default_hidden_layers(), {3, 32, 32}, 1, 1), ConfigError);
}

TEST_CASE("forward_collect traces every hidden relu and the logits") {
  const Model m = build_model<float>(default_hidden_layers(), {3, 24, 24}, 6, 3);
  REQUIRE(m.trace_points.size() == 3);  // two conv relus + one dense relu
  CHECK(m.trace_points[0].units == 16 * 24 * 24);
  CHECK(m.trace_points[1].units == 32 * 12 * 12);
  CHECK(m.trace_points[2].units == 64);
  CHECK(m.trace_points[2].after_dense);
  CHECK(m.penultimate_trace() == 2);

  const Tensor img = random_image_chw({3, 24, 24}, 99);
  const ActivationTrace<float> tr = forward_collect(m, img);
  REQUIRE(tr.hidden.size() == 3);
  for (const auto& h : tr.hidden)
    for (float v : h.data) CHECK(v >= 0.0f);

  // Logits must be bitwise identical to a plain forward pass.
  Tensor batch({1, 3, 24, 24});
  batch.data = img.data;
  Workspace<float> ws;
  const Tensor& logits = forward_batch(m, batch, ws);
  CHECK(tr.logits.data == logits.data);
}

TEST_CASE("forward rejects input that does not match the model") {
  const Model m = build_model<float>(default_hidden_layers(), {3, 32, 32}, 4, 1);
  Workspace<float> ws;
  Tensor wrong({1, 1, 32, 32});
  CHECK_THROWS_AS(forward_batch(m, wrong, ws), ConfigError);
}

TEST_CASE("non-finite input is caught with the layer named") {
  const Model m = build_model<float>({LayerSpec::dense(4), LayerSpec::relu()}, {1, 2, 2}, 3, 5);
  Tensor batch({1, 1, 2, 2});
  batch.data = {1.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f, 0.0f};
  Workspace<float> ws;
  CHECK_THROWS_AS(forward_batch(m, batch, ws), NumericError);
}

TEST_CASE("checkpoint round-trips bitwise") {
  const std::string path = temp_path("ilab_test_ckpt.ilmc");
  Model m = build_model<float>(default_hidden_layers(), {3, 16, 16}, 5, 2024);
  m.rng_seed = 2024;
  save_checkpoint(m, path);
  const Model loaded = load_checkpoint(path);
  CHECK(loaded.categories == m.categories);
  CHECK(loaded.input_shape == m.input_shape);
  CHECK(loaded.rng_seed == m.rng_seed);
  REQUIRE(loaded.layers.size() == m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    CHECK(loaded.weights[i].data == m.weights[i].data);
    CHECK(loaded.biases[i].data == m.biases[i].data);
  }
  // Saving the loaded model reproduces the file byte for byte.
  const std::string path2 = temp_path("ilab_test_ckpt2.ilmc");
  save_checkpoint(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("checkpoint loader reports malformed files with byte offsets") {
  const std::string path = temp_path("ilab_test_bad.ilmc");
  Model m = build_model<float>({LayerSpec::dense(4), LayerSpec::relu()}, {1, 4, 4}, 3, 7);
  save_checkpoint(m, path);

  SUBCASE("bad magic") {
    std::string bytes;
    {
      std::ifstream f(path, std::ios::binary);
      bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
    bytes[0] = 'X';
    std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), FormatError);
  }

  SUBCASE("truncation names expected vs actual") {
    std::string bytes;
    {
      std::ifstream f(path, std::ios::binary);
      bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
    bytes.resize(bytes.size() - 7);
    std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    try {
      load_checkpoint(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset >= 0);
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }

  SUBCASE("trailing garbage is rejected") {
    std::ofstream f(path, std::ios::binary | std::ios::app);
    f << "junk";
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }

  std::filesystem::remove(path);
}

TEST_CASE("ablated forward with zero thresholds") {
  const Model m = build_model<float>(default_hidden_layers(), {3, 16, 16}, 4, 31);
  Tensor batch({2, 3, 16, 16});
  Rng rng(5);
  for (auto& v : batch.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  Workspace<float> ws;
  const Tensor plain = forward_batch(m, batch, ws);

  AblationPlan<float> inactive;
  inactive.mode = AblationMode::kInactive;
  for (const TracePoint& tp : m.trace_points)
    inactive.thresholds.push_back(std::vector<float>(static_cast<std::size_t>(tp.units), 0.0f));
  // Zero thresholds, inactive mode: only exact zeros are zeroed, a no-op.
  const Tensor ablated = forward_batch(m, batch, ws, &inactive);
  CHECK(ablated.data == plain.data);

  // Active mode with zero thresholds kills every positive hidden unit, so
  // the logits collapse to the output layer's response to a zero vector.
  AblationPlan<float> active = inactive;
  active.mode = AblationMode::kActive;
  const Tensor collapsed = forward_batch(m, batch, ws, &active);
  const std::size_t out_layer = m.layers.size() - 2;
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t k = 0; k < 4; ++k)
      CHECK(collapsed(n, k) == m.biases[out_layer](k));
}
