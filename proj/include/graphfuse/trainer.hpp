// Copyright 2026 The GraphFuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Training and evaluation harness.
//
// A batch is gradient accumulation over `batch_size` sample graphs followed
// by one Adam step. Every time a training sample is used, a fresh EDS
// fraction is drawn from the training range and a fresh point subset is
// sampled. Evaluation samples at a fixed fraction with a per-sample seed, so
// results do not depend on thread count or split order.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "graphfuse/autodiff.hpp"
#include "graphfuse/errors.hpp"
#include "graphfuse/gat.hpp"
#include "graphfuse/graph.hpp"
#include "graphfuse/metrics.hpp"
#include "graphfuse/optim.hpp"
#include "graphfuse/synth.hpp"

namespace graphfuse {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// kernel after every op. Large graphs otherwise spend a third of each
/// training step in page faults. No-op outside glibc.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

/// `requested` if positive, else GRAPHFUSE_THREADS, else the core count.
inline std::size_t resolve_threads(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GRAPHFUSE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Shuffled partition of sample indices 0..n-1. Train and validation take
/// floor(ratio * n) samples; test takes the remainder.
inline Split split_dataset(std::size_t n, std::uint64_t seed, double train_ratio = 0.8,
                           double val_ratio = 0.1, double test_ratio = 0.1) {
  if (n < 10) throw ContractViolation("split_dataset: need at least 10 samples, got " + std::to_string(n));
  if (!(train_ratio >= 0.0 && val_ratio >= 0.0 && test_ratio >= 0.0) ||
      std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw ContractViolation("split_dataset: ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5EED));
  std::shuffle(order.begin(), order.end(), rng);
  const auto count = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_train = count(train_ratio);
  const std::size_t n_val = std::min(count(val_ratio), n - n_train);
  Split s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  std::size_t epochs = 40;
  double fraction_min = 0.0;
  double fraction_max = 0.7;
  double val_fraction = 0.05;
  GraphConstruction construction = GraphConstruction::delaunay();
  std::uint64_t seed = 0;
  std::size_t layers = 3;
  std::size_t hidden = 56;
  std::size_t heads = 4;
  std::size_t threads = 0;  // evaluation workers; 0 = resolve_threads()

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  void validate() const {
    if (batch_size == 0) throw ConfigError("train: batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("train: learning rate must be a finite non-negative number");
    }
    if (epochs == 0) throw ConfigError("train: epochs must be at least 1");
    if (!(fraction_min >= 0.0 && fraction_max <= 1.0 && fraction_min <= fraction_max)) {
      throw ConfigError("train: fraction range must satisfy 0 <= min <= max <= 1");
    }
    if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) {
      throw ConfigError("train: validation fraction outside [0, 1]");
    }
    if (construction.kind == GraphConstruction::Kind::kKnn && construction.k == 0) {
      throw ConfigError("train: kNN construction needs k >= 1");
    }
    if (layers == 0 || heads == 0) throw ConfigError("train: layers and heads must be positive");
    if (layers > 1 && (hidden == 0 || hidden % heads != 0)) {
      throw ConfigError("train: hidden width must be a positive multiple of the head count");
    }
  }

  GatConfig network(std::size_t classes) const {
    GatConfig c;
    c.layers = layers;
    c.hidden = hidden;
    c.heads = heads;
    c.in_dim = kFeatureDim;
    c.classes = classes;
    return c;
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;  // NaN without a validation split
};

struct TrainResult {
  GatNetwork network;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_f1 = std::numeric_limits<double>::quiet_NaN();
};

/// Joint graph of a sample with the given spectral subset.
inline MultimodalGraph sample_graph(const Sample& sample, const PointSet& points,
                                    const GraphConstruction& construction) {
  return assemble_graph(sample.bse, sample.height, sample.width, points, construction,
                        sample.validity, sample.labels);
}

/// Masked cross-entropy of one graph; adds d(loss)/d(param) into `grads`.
/// Returns NaN-free loss or throws DivergenceError.
inline double accumulate_gradients(const GatNetwork& net, const MultimodalGraph& graph,
                                   std::vector<Tensor>& grads) {
  const MessageGraph mg =
      make_message_graph(add_self_loops(graph.edges, graph.num_nodes()), graph.num_nodes());
  std::vector<std::uint16_t> labels(graph.num_nodes(), 0);
  std::vector<std::uint8_t> mask(graph.num_nodes(), 0);
  for (std::size_t i = 0; i < graph.num_image_nodes(); ++i) {
    labels[i] = graph.labels.empty() ? 0 : graph.labels[i];
    mask[i] = graph.labels.empty() ? 0 : graph.validity[i];
  }
  ad::Tape tape;
  const ad::Var x = tape.constant(graph.features);
  const ForwardTrace trace = network_forward(tape, net, x, mg, true);
  const ad::Var loss = ad::cross_entropy(tape, trace.logits, labels, mask);
  const double value = tape.value(loss)[0];
  if (!std::isfinite(value)) throw DivergenceError("training loss is not finite");
  tape.backward(loss);
  for (std::size_t p = 0; p < trace.params.size(); ++p) {
    auto g = tape.grad(trace.params[p]);
    auto dst = grads[p].data();
    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
  }
  return value;
}

/// Image-node predictions for one graph.
inline std::vector<std::uint16_t> predict_graph(const GatNetwork& net, const MultimodalGraph& graph) {
  return predict(extract_image_logits(network_forward(graph, net), graph));
}

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers and rethrows the
/// first failure.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Segments the listed samples with EDS points sampled at `fraction` and
/// scores valid pixels.
inline Metrics evaluate(const GatNetwork& net, const Dataset& data,
                        std::span<const std::size_t> indices, double fraction, std::uint64_t seed,
                        const GraphConstruction& construction, std::size_t threads = 0) {
  if (indices.empty()) throw ContractViolation("evaluate: empty split");
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractViolation("evaluate: fraction " + std::to_string(fraction) + " outside [0, 1]");
  }
  std::vector<ConfusionMatrix> per_sample(indices.size());
  parallel_for(indices.size(), resolve_threads(threads), [&](std::size_t k) {
    const Sample& s = data.samples.at(indices[k]);
    Rng rng(derive_seed(seed, indices[k]));
    const PointSet points = sample_eds_points(s, fraction, rng);
    const auto predicted = predict_graph(net, sample_graph(s, points, construction));
    ConfusionMatrix cm(data.classes);
    accumulate_confusion(cm, predicted, s.labels, s.validity);
    per_sample[k] = std::move(cm);
  });
  return summarize_metrics(per_sample, fraction, data.classes);
}

/// One Metrics row per fraction, all from the same network and seed.
inline std::vector<Metrics> sweep_fractions(const GatNetwork& net, const Dataset& data,
                                            std::span<const std::size_t> indices,
                                            std::span<const double> fractions, std::uint64_t seed,
                                            const GraphConstruction& construction,
                                            std::size_t threads = 0) {
  if (fractions.empty()) throw ContractViolation("sweep_fractions: no fractions given");
  std::vector<Metrics> rows;
  for (double f : fractions) rows.push_back(evaluate(net, data, indices, f, seed, construction, threads));
  return rows;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains `init` on the `train` samples and returns the parameters with the
/// best validation macro-F1 (the earliest epoch wins ties). Without a
/// validation split the final parameters are returned.
inline TrainResult train(const Dataset& data, std::span<const std::size_t> train_idx,
                         std::span<const std::size_t> val_idx, GatNetwork init,
                         const TrainConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train_idx.empty()) throw ContractViolation("train: empty training split");
  if (init.config().in_dim != kFeatureDim) {
    throw ShapeError("train: network input width " + std::to_string(init.config().in_dim) +
                     " but graphs carry " + std::to_string(kFeatureDim) + " features");
  }
  if (init.config().classes < data.classes) {
    throw ShapeError("train: network predicts " + std::to_string(init.config().classes) +
                     " classes, dataset has " + std::to_string(data.classes));
  }

  TrainResult result;
  GatNetwork net = std::move(init);
  result.network = net;
  AdamHyper hyper;
  hyper.learning_rate = config.learning_rate;
  AdamState adam(hyper);
  Rng rng(derive_seed(config.seed, 0x7EA1));
  std::uniform_real_distribution<double> fraction_dist(config.fraction_min, config.fraction_max);
  const std::uint64_t val_seed = derive_seed(config.seed, 0x0A11);

  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  const std::vector<Tensor*> params = net.parameters();
  std::vector<Tensor> grads;
  for (const Tensor* p : params) grads.emplace_back(p->rows(), p->cols());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (Tensor& g : grads) std::fill(g.data().begin(), g.data().end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& s = data.samples.at(order[b]);
        const double fraction = config.fraction_min == config.fraction_max
                                    ? config.fraction_min
                                    : fraction_dist(rng);
        const PointSet points = sample_eds_points(s, fraction, rng);
        try {
          loss_sum += accumulate_gradients(net, sample_graph(s, points, config.construction), grads);
        } catch (const DivergenceError&) {
          throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                " on sample " + std::to_string(order[b]) + " (EDS fraction " +
                                std::to_string(fraction) + ")");
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (Tensor& g : grads) {
        for (double& v : g.data()) v *= inv;
      }
      adam_step(params, grads, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_f1 = std::numeric_limits<double>::quiet_NaN();
    if (!val_idx.empty()) {
      rec.val_f1 = evaluate(net, data, val_idx, config.val_fraction, val_seed,
                            config.construction, config.threads)
                       .macro_f1();
      if (result.best_epoch == 0 || rec.val_f1 > result.best_val_f1) {
        result.best_epoch = epoch;
        result.best_val_f1 = rec.val_f1;
        result.network = net;
      }
    } else {
      result.best_epoch = epoch;
      result.network = net;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

struct EvaluatedRun {
  std::string label;
  TrainResult training;
  Metrics test;
};

/// The same network trained and tested on grid-only graphs (EDS fraction
/// pinned to 0), the reference for what the grey-level image alone yields.
inline EvaluatedRun ablation_bse_only(const Dataset& data, const Split& split, GatNetwork init,
                                      TrainConfig config, const EpochCallback& on_epoch = {}) {
  config.fraction_min = config.fraction_max = 0.0;
  config.val_fraction = 0.0;
  EvaluatedRun run;
  run.label = "bse-only";
  run.training = train(data, split.train, split.val, std::move(init), config, on_epoch);
  run.test = evaluate(run.training.network, data, split.test, 0.0,
                      derive_seed(config.seed, 0x7E57), config.construction, config.threads);
  return run;
}

/// Trains and tests one pipeline per construction from the same initial
/// network and seed.
inline std::vector<EvaluatedRun> compare_constructions(
    const Dataset& data, const Split& split, const GatNetwork& init, const TrainConfig& config,
    std::span<const GraphConstruction> constructions, double test_fraction,
    const EpochCallback& on_epoch = {}) {
  std::vector<EvaluatedRun> runs;
  for (const GraphConstruction& c : constructions) {
    TrainConfig cfg = config;
    cfg.construction = c;
    EvaluatedRun run;
    run.label = c.name();
    run.training = train(data, split.train, split.val, init, cfg, on_epoch);
    run.test = evaluate(run.training.network, data, split.test, test_fraction,
                        derive_seed(config.seed, 0x7E57), c, config.threads);
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace graphfuse
