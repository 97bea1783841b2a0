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

// Command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "graphfuse/errors.hpp"
#include "graphfuse/gat.hpp"
#include "graphfuse/io.hpp"
#include "graphfuse/synth.hpp"
#include "graphfuse/trainer.hpp"

namespace graphfuse {

namespace detail {

inline constexpr std::uint64_t kInitStream = 0x1417;
inline constexpr std::uint64_t kTestStream = 0x7E57;

struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir = ".";
  std::string data_path;
  std::string checkpoint_path;
  double fraction = 0.05;
  std::string fractions = "0,0.01,0.05,0.1,0.3";
  std::string split = "test";
  std::string construction = "delaunay";
  std::size_t k = 8;
  std::size_t sample = 0;
  bool quiet = false;
};

class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

inline RunConfig resolve_config(const CliOptions& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

inline std::filesystem::path out_path(const CliOptions& o, const std::string& name) {
  std::filesystem::create_directories(o.out_dir);
  return std::filesystem::path(o.out_dir) / name;
}

inline std::string data_path(const CliOptions& o) {
  return o.data_path.empty() ? (std::filesystem::path(o.out_dir) / "dataset.bin").string()
                             : o.data_path;
}

inline std::string checkpoint_path(const CliOptions& o) {
  return o.checkpoint_path.empty()
             ? (std::filesystem::path(o.out_dir) / "checkpoint.bin").string()
             : o.checkpoint_path;
}

inline void check_fraction(double f, const std::string& what) {
  if (!(f >= 0.0 && f <= 1.0)) {
    throw UsageError(what + " must lie in [0, 1], got " + format_double(f));
  }
}

inline std::vector<double> parse_fraction_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw UsageError("empty entry in fraction list '" + text + "'");
    double v = 0.0;
    try {
      v = parse_number<double>("fractions", item);
    } catch (const ConfigError&) {
      throw UsageError("invalid fraction '" + item + "'");
    }
    check_fraction(v, "fraction");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("no fractions given");
  return out;
}

inline GraphConstruction parse_construction(const std::string& name, std::size_t k) {
  if (name == "delaunay") return GraphConstruction::delaunay();
  if (name == "knn") {
    if (k == 0) throw UsageError("--k must be at least 1");
    return GraphConstruction::knn(k);
  }
  throw UsageError("construction must be 'delaunay' or 'knn', got '" + name + "'");
}

inline const std::vector<std::size_t>& pick_split(const Split& s, const std::string& name,
                                                  std::vector<std::size_t>& all, std::size_t n) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  if (name == "all") {
    all.resize(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  throw UsageError("split must be train, val, test or all, got '" + name + "'");
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline int cmd_generate(const CliOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const Dataset d = generate_dataset(cfg.generator, cfg.seed);
  const auto path = out_path(o, "dataset.bin");
  save_dataset(d, path);
  out << "wrote " << d.samples.size() << " samples (" << d.config.height << "x" << d.config.width
      << ", " << d.classes << " phases) to " << path.string() << "\n";
  return 0;
}

inline int cmd_train(const CliOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  const Dataset d = load_dataset(data_path(o));
  cfg.generator = d.config;
  const Split split = split_dataset(d.samples.size(), cfg.seed);
  const GatNetwork init =
      GatNetwork::initialize(cfg.train.network(d.classes), derive_seed(cfg.seed, kInitStream));
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const TrainResult r = train(d, split.train, split.val, init, tc, [&](const EpochRecord& e) {
    if (!o.quiet) {
      out << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " val_f1 "
          << format_double(e.val_f1) << "\n" << std::flush;
    }
  });
  Checkpoint c{r.network, cfg, r.best_val_f1, r.best_epoch};
  save_checkpoint(c, out_path(o, "checkpoint.bin"));
  write_text_atomic(out_path(o, "history.csv"), history_csv(r.history));
  out << "best epoch " << r.best_epoch << " val_f1 " << format_double(r.best_val_f1) << "\n";
  return 0;
}

struct LoadedModel {
  Checkpoint checkpoint;
  Dataset data;
  Split split;
  std::uint64_t eval_seed = 0;
};

inline LoadedModel load_model(const CliOptions& o) {
  LoadedModel m;
  m.checkpoint = load_checkpoint(checkpoint_path(o));
  m.data = load_dataset(data_path(o));
  if (m.checkpoint.network.config().classes < m.data.classes) {
    throw ShapeError("checkpoint predicts fewer classes than the dataset has");
  }
  m.split = split_dataset(m.data.samples.size(), m.checkpoint.config.seed);
  m.eval_seed = derive_seed(o.seed.value_or(m.checkpoint.config.seed), kTestStream);
  return m;
}

inline int cmd_evaluate(const CliOptions& o, std::ostream& out) {
  check_fraction(o.fraction, "--fraction");
  const LoadedModel m = load_model(o);
  std::vector<std::size_t> all;
  const auto& idx = pick_split(m.split, o.split, all, m.data.samples.size());
  const TrainConfig& tc = m.checkpoint.config.train;
  const Metrics metrics = evaluate(m.checkpoint.network, m.data, idx, o.fraction, m.eval_seed,
                                   tc.construction, tc.threads);
  nlohmann::json j = metrics_to_json(metrics);
  j["split"] = o.split;
  j["construction"] = tc.construction.name();
  write_text_atomic(out_path(o, "metrics.json"), dump_json(j));
  write_text_atomic(out_path(o, "confusion.csv"), confusion_csv(metrics.confusion));
  out << "macro precision " << format_double(metrics.sample_mean.precision) << " recall "
      << format_double(metrics.sample_mean.recall) << " f1 " << format_double(metrics.macro_f1())
      << "\n";
  return 0;
}

inline int cmd_sweep(const CliOptions& o, std::ostream& out) {
  const std::vector<double> fractions = parse_fraction_list(o.fractions);
  const LoadedModel m = load_model(o);
  std::vector<std::size_t> all;
  const auto& idx = pick_split(m.split, o.split, all, m.data.samples.size());
  const TrainConfig& tc = m.checkpoint.config.train;
  const auto rows = sweep_fractions(m.checkpoint.network, m.data, idx, fractions, m.eval_seed,
                                    tc.construction, tc.threads);
  nlohmann::json j = nlohmann::json::array();
  for (const Metrics& r : rows) j.push_back(metrics_to_json(r));
  write_text_atomic(out_path(o, "sweep.csv"), sweep_csv(rows));
  write_text_atomic(out_path(o, "sweep.json"), dump_json(j));
  out << sweep_csv(rows);
  return 0;
}

inline int cmd_compare(const CliOptions& o, std::ostream& out) {
  check_fraction(o.fraction, "--fraction");
  if (o.k == 0) throw UsageError("--k must be at least 1");
  RunConfig cfg = resolve_config(o);
  const Dataset d = load_dataset(data_path(o));
  cfg.generator = d.config;
  const Split split = split_dataset(d.samples.size(), cfg.seed);
  const GatNetwork init =
      GatNetwork::initialize(cfg.train.network(d.classes), derive_seed(cfg.seed, kInitStream));
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const std::vector<GraphConstruction> kinds{GraphConstruction::delaunay(),
                                             GraphConstruction::knn(o.k)};
  const auto runs = compare_constructions(d, split, init, tc, kinds, o.fraction,
                                          [&](const EpochRecord& e) {
                                            if (!o.quiet) {
                                              out << "epoch " << e.epoch << " loss "
                                                  << format_double(e.train_loss) << "\n"
                                                  << std::flush;
                                            }
                                          });
  std::ostringstream csv;
  csv << "construction,precision,recall,f1,pooled_f1,accuracy,best_val_f1\n";
  nlohmann::json j = nlohmann::json::array();
  for (const EvaluatedRun& r : runs) {
    csv << r.label << ',' << format_double(r.test.sample_mean.precision) << ','
        << format_double(r.test.sample_mean.recall) << ',' << format_double(r.test.macro_f1())
        << ',' << format_double(r.test.pooled.f1) << ',' << format_double(r.test.accuracy) << ','
        << format_double(r.training.best_val_f1) << "\n";
    nlohmann::json row = metrics_to_json(r.test);
    row["construction"] = r.label;
    j.push_back(row);
  }
  write_text_atomic(out_path(o, "comparison.csv"), csv.str());
  write_text_atomic(out_path(o, "comparison.json"), dump_json(j));
  out << csv.str();
  return 0;
}

inline int cmd_inspect(const CliOptions& o, std::ostream& out) {
  check_fraction(o.fraction, "--fraction");
  const GraphConstruction construction = parse_construction(o.construction, o.k);
  const RunConfig cfg = resolve_config(o);
  const Dataset d = load_dataset(data_path(o));
  if (o.sample >= d.samples.size()) {
    throw UsageError("--sample " + std::to_string(o.sample) + " out of range (dataset has " +
                     std::to_string(d.samples.size()) + ")");
  }
  const Sample& s = d.samples[o.sample];
  Rng rng(derive_seed(cfg.seed, o.sample));
  const MultimodalGraph g = sample_graph(s, sample_eds_points(s, o.fraction, rng), construction);
  const auto path = out_path(o, "graph.txt");
  export_graph(g, path);
  out << "wrote " << g.num_nodes() << " nodes and " << g.edges.size() << " edges to "
      << path.string() << "\n";
  return 0;
}

}  // namespace detail

/// Runs one command line. Diagnostics go to `err`, progress to `out`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fuse BSE images with sparse EDS spectra via graph attention networks"};
  app.require_subcommand(1);
  detail::CliOptions o;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides the config file)");
  app.add_option("--config", o.config_path, "run configuration file (key = value)");
  app.add_option("--out", o.out_dir, "output directory")->capture_default_str();
  app.add_flag("--quiet", o.quiet, "suppress per-epoch progress");

  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
  auto* tr = app.add_subcommand("train", "train a network, write checkpoint and history");
  auto* ev = app.add_subcommand("evaluate", "score a checkpoint at one EDS fraction");
  auto* sw = app.add_subcommand("sweep", "score a checkpoint over several EDS fractions");
  auto* cmp = app.add_subcommand("compare-construction", "train and score Delaunay vs kNN");
  auto* ins = app.add_subcommand("inspect-graph", "dump the graph of one sample");
  for (auto* sub : {gen, tr, ev, sw, cmp, ins}) sub->fallthrough();

  for (auto* sub : {tr, ev, sw, cmp, ins}) {
    sub->add_option("--data", o.data_path, "dataset file (default <out>/dataset.bin)");
  }
  for (auto* sub : {ev, sw}) {
    sub->add_option("--checkpoint", o.checkpoint_path, "checkpoint (default <out>/checkpoint.bin)");
    sub->add_option("--split", o.split, "train, val, test or all")->capture_default_str();
  }
  for (auto* sub : {ev, cmp, ins}) {
    sub->add_option("--fraction", o.fraction, "EDS fraction in [0, 1]")->capture_default_str();
  }
  sw->add_option("--fractions", o.fractions, "comma-separated EDS fractions")->capture_default_str();
  cmp->add_option("--k", o.k, "neighbours for the kNN pipeline")->capture_default_str();
  ins->add_option("--construction", o.construction, "delaunay or knn")->capture_default_str();
  ins->add_option("--k", o.k, "neighbours for knn")->capture_default_str();
  ins->add_option("--sample", o.sample, "sample index")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; every other parse failure is a usage error.
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) o.seed = seed;

  try {
    if (gen->parsed()) return detail::cmd_generate(o, out);
    if (tr->parsed()) return detail::cmd_train(o, out);
    if (ev->parsed()) return detail::cmd_evaluate(o, out);
    if (sw->parsed()) return detail::cmd_sweep(o, out);
    if (cmp->parsed()) return detail::cmd_compare(o, out);
    if (ins->parsed()) return detail::cmd_inspect(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace graphfuse
