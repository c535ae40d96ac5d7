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

#include "ilab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "ilab/parallel.hpp"
#include "ilab/paradigm.hpp"

namespace ilab {

std::vector<int> all_trace_points(const Model& model) {
  std::vector<int> sel(model.trace_points.size());
  for (std::size_t i = 0; i < sel.size(); ++i) sel[i] = static_cast<int>(i);
  return sel;
}

std::vector<ActivationMatrix> collect_activations(const Model& model,
                                                  const std::vector<Tensor>& standardized_chw,
                                                  const std::vector<int>& trace_selection) {
  if (standardized_chw.empty()) throw InputError("activation capture over an empty image set");
  for (const int t : trace_selection) {
    if (t < 0 || static_cast<std::size_t>(t) >= model.trace_points.size())
      throw ConfigError("trace point " + std::to_string(t) + " out of range (model has " +
                        std::to_string(model.trace_points.size()) + ")");
  }
  const auto m = static_cast<std::int64_t>(standardized_chw.size());
  std::vector<ActivationMatrix> mats(trace_selection.size());
  for (std::size_t k = 0; k < trace_selection.size(); ++k) {
    const TracePoint& tp = model.trace_points[static_cast<std::size_t>(trace_selection[k])];
    mats[k].layer_id = tp.id;
    mats[k].units = tp.units;
    mats[k].images = m;
    mats[k].values.assign(static_cast<std::size_t>(tp.units * m), 0.0f);
    mats[k].image_index_map.resize(static_cast<std::size_t>(m));
    for (std::int64_t j = 0; j < m; ++j)
      mats[k].image_index_map[static_cast<std::size_t>(j)] = static_cast<std::int32_t>(j);
  }

  parallel_for(m, [&](std::int64_t j) {
    thread_local Workspace<float> ws;
    const Tensor& img = standardized_chw[static_cast<std::size_t>(j)];
    Tensor batch({1, img.dim(0), img.dim(1), img.dim(2)});
    batch.data = img.data;
    forward_batch(model, batch, ws);
    for (std::size_t k = 0; k < trace_selection.size(); ++k) {
      const TracePoint& tp = model.trace_points[static_cast<std::size_t>(trace_selection[k])];
      const float* act = ws.acts[static_cast<std::size_t>(tp.layer_index)].ptr();
      float* col = mats[k].values.data();
      for (std::int64_t u = 0; u < tp.units; ++u) col[u * m + j] = act[u];
    }
  });
  return mats;
}

Thresholds compute_thresholds(const ActivationMatrix& orig, const ActivationMatrix& trans,
                              double tau) {
  if (!orig.aligned_with(trans))
    throw InputError("activation matrices misaligned: " + std::to_string(orig.units) + "x" +
                     std::to_string(orig.images) + " vs " + std::to_string(trans.units) + "x" +
                     std::to_string(trans.images));
  Thresholds out;
  out.config.tau = tau;
  out.config.per_unit.resize(static_cast<std::size_t>(orig.units));
  out.active.members.resize(static_cast<std::size_t>(orig.units));
  const std::int64_t m = orig.images;
  for (std::int64_t u = 0; u < orig.units; ++u) {
    float mx = 0.0f;
    for (std::int64_t j = 0; j < m; ++j)
      mx = std::max({mx, orig.at(u, j), trans.at(u, j)});
    const float th = static_cast<float>(tau) * mx;
    out.config.per_unit[static_cast<std::size_t>(u)] = th;
    auto& set = out.active.members[static_cast<std::size_t>(u)];
    for (std::int64_t j = 0; j < m; ++j) {
      if (unit_is_active(orig.at(u, j), th) || unit_is_active(trans.at(u, j), th))
        set.push_back(static_cast<std::int32_t>(j));
    }
  }
  return out;
}

ActiveStats active_stats(const ActiveSet& active, std::int64_t units, std::int64_t images) {
  if (static_cast<std::int64_t>(active.members.size()) != units)
    throw InputError("active set has " + std::to_string(active.members.size()) +
                     " units, expected " + std::to_string(units));
  ActiveStats st;
  std::vector<std::int64_t> per_image(static_cast<std::size_t>(images), 0);
  for (std::int64_t u = 0; u < units; ++u) {
    const auto& set = active.members[static_cast<std::size_t>(u)];
    if (!set.empty()) {
      st.unit_ids.push_back(static_cast<std::int32_t>(u));
      st.images_per_unit.push_back(static_cast<double>(set.size()) / static_cast<double>(images));
    }
    for (const std::int32_t j : set) ++per_image[static_cast<std::size_t>(j)];
  }
  for (std::int64_t j = 0; j < images; ++j) {
    st.image_columns.push_back(static_cast<std::int32_t>(j));
    st.units_per_image.push_back(static_cast<double>(per_image[static_cast<std::size_t>(j)]) /
                                 static_cast<double>(units));
  }
  return st;
}

double ablate_evaluate(const Model& model, const std::vector<Tensor>& standardized_chw,
                       const std::vector<std::int32_t>& labels,
                       const std::vector<std::vector<float>>& per_layer_thresholds,
                       AblationMode mode) {
  if (per_layer_thresholds.size() != model.trace_points.size())
    throw InputError("ablation thresholds cover " + std::to_string(per_layer_thresholds.size()) +
                     " trace points, model has " + std::to_string(model.trace_points.size()));
  const auto n = static_cast<std::int64_t>(standardized_chw.size());
  if (n == 0) throw InputError("ablation accuracy over an empty image set");
  AblationPlan<float> plan;
  plan.thresholds = per_layer_thresholds;
  plan.mode = mode;
  std::vector<std::uint8_t> correct(static_cast<std::size_t>(n), 0);
  parallel_for(n, [&](std::int64_t i) {
    thread_local Workspace<float> ws;
    const Tensor& img = standardized_chw[static_cast<std::size_t>(i)];
    Tensor batch({1, img.dim(0), img.dim(1), img.dim(2)});
    batch.data = img.data;
    const Tensor& logits = forward_batch(model, batch, ws, &plan);
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < logits.numel(); ++k)
      if (logits(k) > logits(best)) best = k;
    correct[static_cast<std::size_t>(i)] = best == labels[static_cast<std::size_t>(i)] ? 1 : 0;
  });
  std::int64_t hits = 0;
  for (auto c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(n);
}

AblationEvaluator make_ablation_evaluator(const Model& model,
                                          const std::vector<Tensor>& standardized_chw,
                                          const std::vector<std::int32_t>& labels,
                                          const std::vector<int>& trace_selection) {
  // Per-unit activation maxima over the evaluation population, per trace
  // point; selected points get tau-scaled thresholds, the rest are skipped.
  auto maxima = std::make_shared<std::vector<std::vector<float>>>(model.trace_points.size());
  {
    const std::vector<ActivationMatrix> mats =
        collect_activations(model, standardized_chw, trace_selection);
    for (std::size_t k = 0; k < trace_selection.size(); ++k) {
      const ActivationMatrix& mat = mats[k];
      std::vector<float> mx(static_cast<std::size_t>(mat.units), 0.0f);
      for (std::int64_t u = 0; u < mat.units; ++u) {
        float v = 0.0f;
        for (std::int64_t j = 0; j < mat.images; ++j) v = std::max(v, mat.at(u, j));
        mx[static_cast<std::size_t>(u)] = v;
      }
      (*maxima)[static_cast<std::size_t>(trace_selection[k])] = std::move(mx);
    }
  }

  AblationEvaluator ev;
  ev.unablated = top1_accuracy(model, standardized_chw, labels);
  // The image list is copied into the closure; evaluation sets are small.
  ev.accuracy = [&model, maxima, images = standardized_chw, labels](double tau,
                                                                    AblationMode mode) {
    std::vector<std::vector<float>> th(maxima->size());
    for (std::size_t k = 0; k < maxima->size(); ++k) {
      th[k].resize((*maxima)[k].size());
      for (std::size_t u = 0; u < th[k].size(); ++u)
        th[k][u] = static_cast<float>(tau) * (*maxima)[k][u];
    }
    return ablate_evaluate(model, images, labels, th, mode);
  };
  return ev;
}

TauSearch search_tau(const AblationEvaluator& evaluator, const std::vector<double>& grid) {
  TauSearch out;
  out.unablated = evaluator.unablated;
  double best = -1.0;
  for (const double tau : grid) {
    const double acc = evaluator.accuracy(tau, AblationMode::kInactive);
    out.trace.emplace_back(tau, acc);
    if ((evaluator.unablated - acc) * 100.0 <= 1.0 && tau > best) best = tau;
  }
  if (best < 0.0) {
    out.selected = 0.0;
    out.warning = true;
  } else {
    out.selected = best;
  }
  return out;
}

std::vector<InvarianceRecord> invariance_coefficients(const ActivationMatrix& orig,
                                                      const ActivationMatrix& trans,
                                                      const ActiveSet& active,
                                                      const std::string& partition_tag) {
  if (!orig.aligned_with(trans)) throw InputError("activation matrices misaligned");
  if (static_cast<std::int64_t>(active.members.size()) != orig.units)
    throw InputError("active set does not match matrix unit count");
  std::vector<InvarianceRecord> records;
  for (std::int64_t u = 0; u < orig.units; ++u) {
    const auto& set = active.members[static_cast<std::size_t>(u)];
    if (set.empty()) continue;  // no evidence, no record
    double sum = 0.0;
    for (const std::int32_t j : set) {
      const double a = orig.at(u, j);
      const double b = trans.at(u, j);
      if (a < 0.0 || b < 0.0)
        throw InputError("negative activation in invariance input (unit " + std::to_string(u) +
                         "); capture must be post-ReLU");
      const double denom = a + b;
      // Both zero is only reachable with a zero threshold; identical
      // activations count as perfectly invariant.
      sum += denom == 0.0 ? 1.0 : 1.0 - std::abs(b - a) / denom;
    }
    InvarianceRecord r;
    r.unit = static_cast<std::int32_t>(u);
    r.layer_id = orig.layer_id;
    r.partition = partition_tag;
    r.invariance = sum / static_cast<double>(set.size());
    r.active_count = static_cast<std::int64_t>(set.size());
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

ActivationMatrix submatrix(const ActivationMatrix& src, const std::vector<std::int32_t>& columns) {
  ActivationMatrix out;
  out.layer_id = src.layer_id;
  out.units = src.units;
  out.images = static_cast<std::int64_t>(columns.size());
  out.values.resize(static_cast<std::size_t>(out.units * out.images));
  out.image_index_map.resize(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j)
    out.image_index_map[j] = src.image_index_map[static_cast<std::size_t>(columns[j])];
  for (std::int64_t u = 0; u < out.units; ++u)
    for (std::size_t j = 0; j < columns.size(); ++j)
      out.values[static_cast<std::size_t>(u) * columns.size() + j] = src.at(u, columns[j]);
  return out;
}

LayerSummary summarize(const std::vector<InvarianceRecord>& records, const std::string& layer_id,
                       const std::string& partition) {
  LayerSummary s;
  s.layer_id = layer_id;
  s.partition = partition;
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& r : records) {
    if (r.layer_id == layer_id && r.partition == partition) {
      sum += r.invariance;
      ++n;
    }
  }
  s.units_with_records = n;
  if (n == 0) return s;
  const double mean = sum / static_cast<double>(n);
  s.mean_invariance = mean;
  if (n > 1) {
    double sq = 0.0;
    for (const auto& r : records) {
      if (r.layer_id == layer_id && r.partition == partition) {
        const double d = r.invariance - mean;
        sq += d * d;
      }
    }
    s.stderr_invariance = std::sqrt(sq / static_cast<double>(n - 1)) /
                          std::sqrt(static_cast<double>(n));
  }
  return s;
}

}  // namespace

InvarianceReport invariance_report(const Model& model, const LabeledDataset& test,
                                   const TransformSpec& spec, const CategoryPartition& partition,
                                   double tau, const std::vector<int>& trace_selection,
                                   std::uint64_t experiment_seed) {
  const std::vector<Tensor> clean = standardized_clean(test);
  const std::vector<Tensor> transformed = standardized_transformed(test, spec, experiment_seed);
  const std::vector<ActivationMatrix> orig = collect_activations(model, clean, trace_selection);
  const std::vector<ActivationMatrix> trans =
      collect_activations(model, transformed, trace_selection);

  std::vector<std::int32_t> seen_cols, unseen_cols, all_cols;
  for (std::size_t i = 0; i < test.size(); ++i) {
    all_cols.push_back(static_cast<std::int32_t>(i));
    if (partition.is_seen(test.labels[i]))
      seen_cols.push_back(static_cast<std::int32_t>(i));
    else
      unseen_cols.push_back(static_cast<std::int32_t>(i));
  }

  InvarianceReport report;
  for (std::size_t k = 0; k < trace_selection.size(); ++k) {
    const auto run_subset = [&](const std::vector<std::int32_t>& cols, const char* tag) {
      if (cols.empty()) return;  // absent split (e.g. all categories seen)
      const ActivationMatrix o = submatrix(orig[k], cols);
      const ActivationMatrix t = submatrix(trans[k], cols);
      const Thresholds th = compute_thresholds(o, t, tau);
      auto recs = invariance_coefficients(o, t, th.active, tag);
      report.records.insert(report.records.end(), recs.begin(), recs.end());
      report.summaries.push_back(summarize(report.records, o.layer_id, tag));
    };
    run_subset(all_cols, kPartitionAll);
    run_subset(seen_cols, kPartitionSeen);
    run_subset(unseen_cols, kPartitionUnseen);
  }
  return report;
}

}  // namespace ilab
