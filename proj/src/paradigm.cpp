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

#include "ilab/paradigm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ilab/image.hpp"
#include "ilab/parallel.hpp"

namespace ilab {

std::uint64_t per_image_seed(std::uint64_t base, std::int64_t image_index) {
  return mix_seed(base, 0x696d67ULL, static_cast<std::uint64_t>(image_index));
}

TrainingStream::TrainingStream(const LabeledDataset& train, const CategoryPartition& partition,
                               const TransformSpec& spec, double p, std::uint64_t seed)
    : train_(&train), partition_(&partition), spec_(spec), p_(p), seed_(seed) {
  if (p < 0.0 || p > 1.0) throw InputError("transform probability must be in [0,1]");
}

std::vector<std::int32_t> TrainingStream::epoch_order(int epoch) const {
  std::vector<std::int32_t> order(train_->size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed_, 0x73687566ULL, static_cast<std::uint64_t>(epoch)));
  for (std::int64_t i = static_cast<std::int64_t>(order.size()) - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

TrainingStream::Item TrainingStream::materialize(int epoch, std::int32_t dataset_index) const {
  const Tensor& raw = train_->images[static_cast<std::size_t>(dataset_index)];
  const std::int32_t label = train_->labels[static_cast<std::size_t>(dataset_index)];
  Item item;
  item.label = label;
  item.dataset_index = dataset_index;

  // Fresh randomness every epoch ("computed at runtime with every forward
  // pass"); the transform decision and the stochastic transform draws share
  // one per-sample stream.
  Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(epoch),
                   static_cast<std::uint64_t>(dataset_index)));
  const bool transform = partition_->is_seen(label) && rng.bernoulli(p_);
  item.transformed = transform;
  if (transform) {
    const Tensor t = apply_transform(raw, spec_, rng);
    item.image = hwc_to_chw(standardize(t));
  } else {
    item.image = hwc_to_chw(standardize(raw));
  }
  return item;
}

double top1_accuracy(const Model& model, const std::vector<Tensor>& standardized_chw,
                     const std::vector<std::int32_t>& labels) {
  if (standardized_chw.empty()) throw InputError("accuracy over an empty image set");
  const auto n = static_cast<std::int64_t>(standardized_chw.size());
  std::vector<std::uint8_t> correct(static_cast<std::size_t>(n), 0);
  parallel_for(n, [&](std::int64_t i) {
    thread_local Workspace<float> ws;
    const Tensor& img = standardized_chw[static_cast<std::size_t>(i)];
    Tensor batch({1, img.dim(0), img.dim(1), img.dim(2)});
    batch.data = img.data;
    const Tensor& logits = forward_batch(model, batch, ws);
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < logits.numel(); ++k)
      if (logits(k) > logits(best)) best = k;
    correct[static_cast<std::size_t>(i)] = best == labels[static_cast<std::size_t>(i)] ? 1 : 0;
  });
  std::int64_t hits = 0;
  for (auto c : correct) hits += c;  // fixed order
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<Tensor> standardized_clean(const LabeledDataset& ds) {
  std::vector<Tensor> out(ds.size());
  parallel_for(static_cast<std::int64_t>(ds.size()), [&](std::int64_t i) {
    out[static_cast<std::size_t>(i)] = hwc_to_chw(standardize(ds.images[static_cast<std::size_t>(i)]));
  });
  return out;
}

std::vector<Tensor> standardized_transformed(const LabeledDataset& ds, const TransformSpec& spec,
                                             std::uint64_t seed) {
  std::vector<Tensor> out(ds.size());
  parallel_for(static_cast<std::int64_t>(ds.size()), [&](std::int64_t i) {
    Rng rng(per_image_seed(spec.seed.value_or(seed), i));
    const Tensor t = apply_transform(ds.images[static_cast<std::size_t>(i)], spec, rng);
    out[static_cast<std::size_t>(i)] = hwc_to_chw(standardize(t));
  });
  return out;
}

namespace {

std::vector<std::int32_t> predictions(const Model& model, const std::vector<Tensor>& images) {
  std::vector<std::int32_t> pred(images.size(), 0);
  parallel_for(static_cast<std::int64_t>(images.size()), [&](std::int64_t i) {
    thread_local Workspace<float> ws;
    const Tensor& img = images[static_cast<std::size_t>(i)];
    Tensor batch({1, img.dim(0), img.dim(1), img.dim(2)});
    batch.data = img.data;
    const Tensor& logits = forward_batch(model, batch, ws);
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < logits.numel(); ++k)
      if (logits(k) > logits(best)) best = k;
    pred[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best);
  });
  return pred;
}

struct CellAccum {
  std::int64_t hits = 0, count = 0;
  void add(bool hit) {
    hits += hit ? 1 : 0;
    ++count;
  }
  RobustnessReport::Cell cell() const {
    RobustnessReport::Cell c;
    c.count = count;
    if (count > 0) c.top1 = 100.0 * static_cast<double>(hits) / static_cast<double>(count);
    return c;
  }
};

}  // namespace

RobustnessReport evaluate_robustness(const Model& model, const LabeledDataset& test,
                                     const TransformSpec& spec, const CategoryPartition& partition,
                                     std::uint64_t experiment_seed) {
  const std::vector<Tensor> clean = standardized_clean(test);
  const std::vector<Tensor> transformed = standardized_transformed(test, spec, experiment_seed);
  const std::vector<std::int32_t> pred_clean = predictions(model, clean);
  const std::vector<std::int32_t> pred_trans = predictions(model, transformed);

  CellAccum cs, cu, ts, tu;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::int32_t label = test.labels[i];
    const bool seen = partition.is_seen(label);
    (seen ? cs : cu).add(pred_clean[i] == label);
    (seen ? ts : tu).add(pred_trans[i] == label);
  }
  RobustnessReport r;
  r.clean_seen = cs.cell();
  r.clean_unseen = cu.cell();
  r.trans_seen = ts.cell();
  r.trans_unseen = tu.cell();
  return r;
}

ConfusionQuadrants confusion_quadrants(const Model& model, const LabeledDataset& test,
                                       const TransformSpec& spec,
                                       const CategoryPartition& partition,
                                       std::uint64_t experiment_seed) {
  if (partition.seen.empty() || partition.unseen.empty())
    throw InputError("confusion quadrants need both partition sides nonempty");
  const std::vector<Tensor> transformed = standardized_transformed(test, spec, experiment_seed);
  const std::vector<std::int32_t> pred = predictions(model, transformed);

  std::int64_t s_as_s = 0, s_as_u = 0, u_as_s = 0, u_as_u = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool true_seen = partition.is_seen(test.labels[i]);
    const bool pred_seen = partition.is_seen(pred[i]);
    if (true_seen)
      (pred_seen ? s_as_s : s_as_u) += 1;
    else
      (pred_seen ? u_as_s : u_as_u) += 1;
  }
  ConfusionQuadrants q;
  q.seen_count = s_as_s + s_as_u;
  q.unseen_count = u_as_s + u_as_u;
  if (q.seen_count > 0) {
    q.seen_as_seen = 100.0 * static_cast<double>(s_as_s) / static_cast<double>(q.seen_count);
    q.seen_as_unseen = 100.0 * static_cast<double>(s_as_u) / static_cast<double>(q.seen_count);
  }
  if (q.unseen_count > 0) {
    q.unseen_as_seen = 100.0 * static_cast<double>(u_as_s) / static_cast<double>(q.unseen_count);
    q.unseen_as_unseen = 100.0 * static_cast<double>(u_as_u) / static_cast<double>(q.unseen_count);
  }
  return q;
}

namespace {

// One full training run at fixed hyperparameters.
std::pair<Model, std::vector<EpochStats>> run_training(
    const ExperimentConfig& cfg, const LabeledDataset& train_set,
    const std::vector<std::int32_t>& train_pool, const std::vector<std::int32_t>& holdout,
    const CategoryPartition& partition, double lr, double weight_decay, int epochs) {
  const Tensor& first = train_set.images[0];
  const std::vector<std::int64_t> input_chw = {first.dim(2), first.dim(0), first.dim(1)};
  Model model = build_model<float>(cfg.hidden_layers, input_chw, train_set.category_count, cfg.seed);
  model.rng_seed = cfg.seed;
  TrainState state = TrainState::init(model, lr, weight_decay, cfg.momentum);
  TrainingStream stream(train_set, partition, cfg.transform, cfg.transform_probability, cfg.seed);

  std::vector<Tensor> holdout_images;
  std::vector<std::int32_t> holdout_labels;
  for (const std::int32_t i : holdout) {
    holdout_images.push_back(hwc_to_chw(standardize(train_set.images[static_cast<std::size_t>(i)])));
    holdout_labels.push_back(train_set.labels[static_cast<std::size_t>(i)]);
  }

  const std::int64_t c = input_chw[0], h = input_chw[1], w = input_chw[2];
  std::vector<EpochStats> stats;
  Workspace<float> ws;
  Gradients<float> grads = zero_gradients(model);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    // Shuffle the epoch over the training pool only (holdout stays out).
    std::vector<std::int32_t> order = stream.epoch_order(epoch);
    std::vector<std::int32_t> pool_order;
    pool_order.reserve(train_pool.size());
    {
      std::vector<std::uint8_t> in_pool(train_set.size(), 0);
      for (const std::int32_t i : train_pool) in_pool[static_cast<std::size_t>(i)] = 1;
      for (const std::int32_t i : order)
        if (in_pool[static_cast<std::size_t>(i)]) pool_order.push_back(i);
    }

    double loss_sum = 0.0;
    std::int64_t loss_count = 0;
    for (std::size_t start = 0; start < pool_order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size),
                                       pool_order.size() - start);
      Tensor batch({static_cast<std::int64_t>(bsz), c, h, w});
      std::vector<std::int32_t> labels(bsz);
      parallel_for(static_cast<std::int64_t>(bsz), [&](std::int64_t b) {
        const TrainingStream::Item item =
            stream.materialize(epoch, pool_order[start + static_cast<std::size_t>(b)]);
        std::copy(item.image.data.begin(), item.image.data.end(),
                  batch.data.begin() + b * item.image.numel());
        labels[static_cast<std::size_t>(b)] = item.label;
      });
      double loss = 0.0;
      try {
        loss = model_backward(model, batch, labels, ws, grads);
        sgd_momentum_step(state, model, grads);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("training diverged: ") + e.what(), stats);
      }
      loss_sum += loss * static_cast<double>(bsz);
      loss_count += static_cast<std::int64_t>(bsz);
    }
    state.epoch = epoch + 1;

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(loss_count);
    es.holdout_accuracy =
        holdout_images.empty() ? 0.0 : 100.0 * top1_accuracy(model, holdout_images, holdout_labels);
    stats.push_back(es);
  }
  return {std::move(model), std::move(stats)};
}

}  // namespace

TrainOutcome train_experiment(const ExperimentConfig& cfg, const LabeledDataset& dataset) {
  dataset.validate();
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");

  TrainOutcome out;
  out.split = train_test_split(dataset, SplitConfig{cfg.test_fraction, cfg.seed, true});
  out.partition = partition_categories(dataset.category_count, cfg.num_seen,
                                       cfg.partition_seed, nullptr);

  // Carve the held-out stat/evaluation images from the train split.
  const auto ntrain = static_cast<std::int64_t>(out.split.train.size());
  std::vector<std::int32_t> idx(static_cast<std::size_t>(ntrain));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(cfg.seed, 0x686f6c64ULL));
  for (std::int64_t i = ntrain - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::int64_t nhold = std::llround(static_cast<double>(ntrain) * cfg.holdout_fraction);
  nhold = std::clamp<std::int64_t>(nhold, 1, ntrain - 1);
  out.holdout.assign(idx.begin(), idx.begin() + nhold);
  std::vector<std::int32_t> pool(idx.begin() + nhold, idx.end());
  std::sort(out.holdout.begin(), out.holdout.end());
  std::sort(pool.begin(), pool.end());

  double lr = cfg.lr, wd = cfg.weight_decay;
  if (cfg.grid_search) {
    // 5x5 grid around the configured values, scored on clean held-out
    // accuracy after a short run.
    const double lr_mults[] = {0.25, 0.5, 1.0, 2.0, 4.0};
    const double wd_mults[] = {0.0, 0.25, 1.0, 4.0, 16.0};
    double best_acc = -1.0;
    const int probe_epochs = std::max(1, cfg.epochs / 5);
    for (const double lm : lr_mults) {
      for (const double wm : wd_mults) {
        auto [m, st] = run_training(cfg, out.split.train, pool, out.holdout, out.partition,
                                    cfg.lr * lm, cfg.weight_decay * wm, probe_epochs);
        const double acc = st.empty() ? 0.0 : st.back().holdout_accuracy;
        if (acc > best_acc) {
          best_acc = acc;
          lr = cfg.lr * lm;
          wd = cfg.weight_decay * wm;
        }
      }
    }
  }
  out.chosen_lr = lr;
  out.chosen_weight_decay = wd;

  auto [model, stats] = run_training(cfg, out.split.train, pool, out.holdout, out.partition,
                                     lr, wd, cfg.epochs);
  out.model = std::move(model);
  out.stats = std::move(stats);
  return out;
}

}  // namespace ilab
