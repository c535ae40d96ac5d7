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

#include "ilab/config.hpp"

#include <set>

#include <json.hpp>

namespace ilab {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& path, const std::string& what) {
  throw ParseError("config error at " + path + ": " + what);
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (known.find(it.key()) == known.end())
      bad_key(path + "." + it.key(), "unknown key");
  }
}

template <class T>
T require(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) bad_key(path + "." + key, "missing required key");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad_key(path + "." + key, "wrong type");
  }
}

template <class T>
T optional_of(const json& obj, const char* key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad_key(path + "." + key, "wrong type");
  }
}

LayerSpec layer_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) bad_key(path, "layer must be an object");
  const std::string kind_name = require<std::string>(j, "kind", path);
  LayerKind kind;
  try {
    kind = layer_kind_from_name(kind_name);
  } catch (const ConfigError& e) {
    bad_key(path + ".kind", e.what());
  }
  switch (kind) {
    case LayerKind::kConv:
      reject_unknown(j, {"kind", "out_channels", "kernel", "stride", "padding"}, path);
      return LayerSpec::conv(require<std::int64_t>(j, "out_channels", path),
                             require<std::int64_t>(j, "kernel", path),
                             optional_of<std::int64_t>(j, "stride", path, 1),
                             optional_of<std::int64_t>(j, "padding", path, 0));
    case LayerKind::kMaxPool:
      reject_unknown(j, {"kind", "window", "stride"}, path);
      return LayerSpec::maxpool(require<std::int64_t>(j, "window", path),
                                require<std::int64_t>(j, "stride", path));
    case LayerKind::kDense:
      reject_unknown(j, {"kind", "units"}, path);
      return LayerSpec::dense(require<std::int64_t>(j, "units", path));
    case LayerKind::kRelu:
      reject_unknown(j, {"kind"}, path);
      return LayerSpec::relu();
    case LayerKind::kSoftmaxOutput:
      bad_key(path + ".kind", "softmax-output is appended automatically and cannot be configured");
  }
  bad_key(path + ".kind", "unsupported layer kind");
}

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

const std::set<std::string> kExperimentKeys = {
    "schema_version", "dataset", "transform", "num_seen", "seed", "partition_seed",
    "model", "transform_probability", "epochs", "lr", "weight_decay", "momentum",
    "batch_size", "test_fraction", "holdout_fraction", "grid_search", "ablation_layers"};

ExperimentConfig experiment_from_json(const json& j, bool with_num_seen_and_seed,
                                      const std::string& path) {
  if (!j.is_object()) bad_key(path, "config must be a JSON object");
  std::set<std::string> known = kExperimentKeys;
  if (!with_num_seen_and_seed) {
    known.erase("num_seen");
    known.erase("seed");
    known.insert("num_seen_grid");
    known.insert("seeds");
  }
  reject_unknown(j, known, path);

  ExperimentConfig cfg;
  cfg.schema_version = optional_of<int>(j, "schema_version", path, 1);
  if (cfg.schema_version != 1) bad_key(path + ".schema_version", "unsupported schema version");
  cfg.dataset_path = require<std::string>(j, "dataset", path);
  try {
    cfg.transform = parse_transform_spec(require<std::string>(j, "transform", path));
  } catch (const ParseError& e) {
    bad_key(path + ".transform", e.what());
  }
  if (with_num_seen_and_seed) {
    cfg.num_seen = require<int>(j, "num_seen", path);
    cfg.seed = require<std::uint64_t>(j, "seed", path);
  }
  cfg.partition_seed = optional_of<std::uint64_t>(j, "partition_seed", path, cfg.seed);
  cfg.transform_probability = optional_of<double>(j, "transform_probability", path, 0.5);
  if (cfg.transform_probability < 0.0 || cfg.transform_probability > 1.0)
    bad_key(path + ".transform_probability", "must be in [0,1]");
  cfg.epochs = optional_of<int>(j, "epochs", path, 45);
  cfg.lr = optional_of<double>(j, "lr", path, 1e-4);
  cfg.weight_decay = optional_of<double>(j, "weight_decay", path, 5e-4);
  cfg.momentum = optional_of<double>(j, "momentum", path, 0.9);
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) bad_key(path + ".momentum", "must be in [0,1)");
  cfg.batch_size = optional_of<int>(j, "batch_size", path, 32);
  cfg.test_fraction = optional_of<double>(j, "test_fraction", path, 0.2);
  cfg.holdout_fraction = optional_of<double>(j, "holdout_fraction", path, 0.1);
  cfg.grid_search = optional_of<bool>(j, "grid_search", path, false);
  cfg.ablation_layers = optional_of<std::string>(j, "ablation_layers", path, "all");
  if (cfg.ablation_layers != "all" && cfg.ablation_layers != "penultimate")
    bad_key(path + ".ablation_layers", "must be 'all' or 'penultimate'");

  if (j.contains("model")) {
    const json& mj = j.at("model");
    if (!mj.is_object()) bad_key(path + ".model", "must be an object");
    reject_unknown(mj, {"hidden_layers"}, path + ".model");
    if (!mj.contains("hidden_layers") || !mj.at("hidden_layers").is_array())
      bad_key(path + ".model.hidden_layers", "missing layer array");
    cfg.hidden_layers.clear();
    int i = 0;
    for (const auto& lj : mj.at("hidden_layers"))
      cfg.hidden_layers.push_back(
          layer_from_json(lj, path + ".model.hidden_layers[" + std::to_string(i++) + "]"));
  }
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg, bool with_num_seen_and_seed) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["dataset"] = cfg.dataset_path;
  j["transform"] = cfg.transform.to_string();
  if (with_num_seen_and_seed) {
    j["num_seen"] = cfg.num_seen;
    j["seed"] = cfg.seed;
  }
  j["partition_seed"] = cfg.partition_seed;
  j["transform_probability"] = cfg.transform_probability;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["momentum"] = cfg.momentum;
  j["batch_size"] = cfg.batch_size;
  j["test_fraction"] = cfg.test_fraction;
  j["holdout_fraction"] = cfg.holdout_fraction;
  j["grid_search"] = cfg.grid_search;
  j["ablation_layers"] = cfg.ablation_layers;
  json layers = json::array();
  for (const auto& l : cfg.hidden_layers) layers.push_back(layer_to_json(l));
  j["model"] = json{{"hidden_layers", layers}};
  return j;
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), e.byte);
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  return experiment_from_json(parse_document(json_text), true, "$");
}

std::string config_to_json(const ExperimentConfig& cfg) {
  return experiment_to_json(cfg, true).dump(2) + "\n";
}

SweepConfig parse_sweep_config(const std::string& json_text) {
  const json j = parse_document(json_text);
  SweepConfig sweep;
  sweep.base = experiment_from_json(j, false, "$");
  if (!j.contains("num_seen_grid")) bad_key("$.num_seen_grid", "missing required key");
  if (!j.contains("seeds")) bad_key("$.seeds", "missing required key");
  try {
    sweep.num_seen_grid = j.at("num_seen_grid").get<std::vector<int>>();
    sweep.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const json::exception&) {
    bad_key("$.num_seen_grid/seeds", "wrong type");
  }
  if (sweep.num_seen_grid.empty()) bad_key("$.num_seen_grid", "must be nonempty");
  if (sweep.seeds.empty()) bad_key("$.seeds", "must be nonempty");
  return sweep;
}

std::string sweep_config_to_json(const SweepConfig& cfg) {
  json j = experiment_to_json(cfg.base, false);
  j["num_seen_grid"] = cfg.num_seen_grid;
  j["seeds"] = cfg.seeds;
  return j.dump(2) + "\n";
}

ExperimentConfig sweep_point(const SweepConfig& sweep, int num_seen, std::uint64_t seed) {
  ExperimentConfig cfg = sweep.base;
  cfg.num_seen = num_seen;
  cfg.seed = seed;
  cfg.partition_seed = seed;
  return cfg;
}

}  // namespace ilab
