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

#include "ilab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "ilab/errors.hpp"

namespace ilab {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmaxOutput: return "softmax-output";
  }
  return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::kConv;
  if (name == "relu") return LayerKind::kRelu;
  if (name == "maxpool") return LayerKind::kMaxPool;
  if (name == "dense") return LayerKind::kDense;
  if (name == "softmax-output") return LayerKind::kSoftmaxOutput;
  throw ConfigError("unknown layer kind '" + name + "'");
}

std::vector<std::vector<std::int64_t>> resolve_shapes(
    const std::vector<LayerSpec>& layers, const std::vector<std::int64_t>& input_chw,
    int categories) {
  if (input_chw.size() != 3) throw ConfigError("model input shape must be CHW");
  std::vector<std::vector<std::int64_t>> shapes;
  std::vector<std::int64_t> cur = input_chw;
  bool saw_output = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
    if (saw_output) throw ConfigError(where + ": no layers allowed after softmax-output");
    switch (l.kind) {
      case LayerKind::kConv: {
        if (cur.size() != 3) throw ConfigError(where + ": conv needs CHW input, have " + shape_string(cur));
        if (l.out_channels < 1 || l.kernel < 1) throw ConfigError(where + ": bad conv parameters");
        const auto s = kernels::conv_shape(1, cur[0], cur[1], cur[2], l.out_channels, l.kernel,
                                           l.stride, l.padding);
        cur = {s.oc, s.oh, s.ow};
        break;
      }
      case LayerKind::kRelu:
        break;
      case LayerKind::kMaxPool: {
        if (cur.size() != 3) throw ConfigError(where + ": maxpool needs CHW input, have " + shape_string(cur));
        const auto s = kernels::pool_shape(1, cur[0], cur[1], cur[2], l.window, l.pool_stride);
        cur = {s.c, s.oh, s.ow};
        break;
      }
      case LayerKind::kDense: {
        if (l.units < 1) throw ConfigError(where + ": dense units must be positive");
        std::int64_t f = 1;
        for (auto e : cur) f *= e;
        cur = {l.units};
        (void)f;
        break;
      }
      case LayerKind::kSoftmaxOutput: {
        if (cur.size() != 1 || cur[0] != categories)
          throw ConfigError(where + ": output layer has " + shape_string(cur) + " units, expected " +
                            std::to_string(categories) + " (one per category)");
        saw_output = true;
        break;
      }
    }
    shapes.push_back(cur);
  }
  if (!saw_output) throw ConfigError("model must end with softmax-output");
  return shapes;
}

std::vector<LayerSpec> default_hidden_layers() {
  return {
      LayerSpec::conv(16, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
      LayerSpec::conv(32, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2),
      LayerSpec::dense(64),         LayerSpec::relu(),
  };
}

namespace {

using nlohmann::json;

json layer_to_json(const LayerSpec& l) {
  json j;
  j["kind"] = layer_kind_name(l.kind);
  switch (l.kind) {
    case LayerKind::kConv:
      j["out_channels"] = l.out_channels;
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      j["padding"] = l.padding;
      break;
    case LayerKind::kMaxPool:
      j["window"] = l.window;
      j["stride"] = l.pool_stride;
      break;
    case LayerKind::kDense:
      j["units"] = l.units;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const LayerKind kind = layer_kind_from_name(j.at("kind").get<std::string>());
  switch (kind) {
    case LayerKind::kConv:
      return LayerSpec::conv(j.at("out_channels").get<std::int64_t>(),
                             j.at("kernel").get<std::int64_t>(),
                             j.value("stride", std::int64_t{1}),
                             j.value("padding", std::int64_t{0}));
    case LayerKind::kMaxPool:
      return LayerSpec::maxpool(j.at("window").get<std::int64_t>(),
                                j.at("stride").get<std::int64_t>());
    case LayerKind::kDense:
      return LayerSpec::dense(j.at("units").get<std::int64_t>());
    case LayerKind::kRelu:
      return LayerSpec::relu();
    case LayerKind::kSoftmaxOutput:
      return LayerSpec::softmax_output();
  }
  throw ConfigError("unreachable layer kind");
}

}  // namespace

std::string model_config_json(const Model& m) {
  json j;
  j["input_shape"] = m.input_shape;
  j["categories"] = m.categories;
  j["seed"] = m.rng_seed;
  json layers = json::array();
  // Hidden layers only: build_model re-appends the output stack.
  for (std::size_t i = 0; i + 2 < m.layers.size(); ++i) layers.push_back(layer_to_json(m.layers[i]));
  j["hidden_layers"] = layers;
  return j.dump();
}

Model model_from_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  std::vector<LayerSpec> hidden;
  for (const auto& lj : j.at("hidden_layers")) hidden.push_back(layer_from_json(lj));
  const std::vector<std::int64_t> input = j.at("input_shape").get<std::vector<std::int64_t>>();
  Model m = build_model<float>(hidden, input, j.at("categories").get<int>(),
                               j.at("seed").get<std::uint64_t>());
  m.rng_seed = j.at("seed").get<std::uint64_t>();
  return m;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw FormatError(std::string("truncated checkpoint: need ") + std::to_string(n) +
                            " bytes for " + what + ", have " + std::to_string(buf.size() - pos),
                        static_cast<long long>(pos));
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void append_tensor(std::string& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape) put_u32(out, static_cast<std::uint32_t>(e));
  for (float v : t.data) put_f32(out, v);
}

void read_tensor_into(Reader& r, Tensor& t) {
  const std::uint32_t rank = r.u32("tensor rank");
  if (rank != static_cast<std::uint32_t>(t.rank()))
    throw FormatError("parameter rank " + std::to_string(rank) + " does not match model (" +
                          std::to_string(t.rank()) + ")",
                      static_cast<long long>(r.pos));
  for (int i = 0; i < t.rank(); ++i) {
    const std::uint32_t e = r.u32("tensor extent");
    if (static_cast<std::int64_t>(e) != t.dim(i))
      throw FormatError("parameter extent " + std::to_string(e) + " does not match model " +
                            shape_string(t.shape),
                        static_cast<long long>(r.pos));
  }
  for (auto& v : t.data) v = r.f32("tensor data");
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::string out;
  out += "ILMC";
  put_u16(out, kCheckpointVersion);
  const std::string cfg = model_config_json(m);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (m.weights[i].numel() == 0) continue;
    append_tensor(out, m.weights[i]);
    append_tensor(out, m.biases[i]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};
  if (r.bytes(4, "magic") != "ILMC") throw FormatError("bad checkpoint magic, expected ILMC", 0);
  const std::uint16_t version = r.u16("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  const std::uint32_t cfg_len = r.u32("config length");
  const std::string cfg = r.bytes(cfg_len, "config text");
  Model m = model_from_config_json(cfg);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (m.weights[i].numel() == 0) continue;
    read_tensor_into(r, m.weights[i]);
    read_tensor_into(r, m.biases[i]);
  }
  if (r.pos != buf.size())
    throw FormatError("trailing bytes after parameters: expected length " +
                          std::to_string(r.pos) + ", actual " + std::to_string(buf.size()),
                      static_cast<long long>(r.pos));
  return m;
}

}  // namespace ilab
