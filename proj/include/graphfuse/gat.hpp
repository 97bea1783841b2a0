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

// Graph attention network with scalar edge attributes.
//
// For a directed edge j -> i with attribute e_ij and head h:
//
//   logit_ij = leaky_relu(c_h . W x_i + n_h . W x_j + g_h . (w_h e_ij))
//   alpha_ij = softmax of logit_ij over the in-neighbourhood of i
//   x'_i     = act( sum_j alpha_ij W x_j + b )
//
// where W is the shared feature transform of the head, w_h its edge-attribute
// transform and c_h, n_h, g_h its attention vectors for the receiving node,
// the sending node and the edge. Hidden layers concatenate heads and apply
// ELU; the output layer averages heads and emits raw logits.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphfuse/autodiff.hpp"
#include "graphfuse/errors.hpp"
#include "graphfuse/graph.hpp"
#include "graphfuse/tensor.hpp"

namespace graphfuse {

struct GatConfig {
  std::size_t layers = 3;
  std::size_t hidden = 56;
  std::size_t heads = 4;
  std::size_t in_dim = kFeatureDim;
  std::size_t classes = 50;

  friend bool operator==(const GatConfig&, const GatConfig&) = default;
};

struct GatLayerParams {
  std::size_t heads = 1;
  std::size_t head_dim = 1;
  bool concat = true;

  Tensor weight;        // in_dim x (heads * head_dim); head h owns columns [h*D, (h+1)*D)
  Tensor edge_weight;   // 1 x (heads * head_dim)
  Tensor att_center;    // heads x head_dim, scores the receiving node
  Tensor att_neighbor;  // heads x head_dim, scores the sending node
  Tensor att_edge;      // heads x head_dim
  Tensor bias;          // 1 x out_dim

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return concat ? heads * head_dim : head_dim; }

  std::vector<Tensor*> tensors() {
    return {&weight, &edge_weight, &att_center, &att_neighbor, &att_edge, &bias};
  }
  std::vector<const Tensor*> tensors() const {
    return {&weight, &edge_weight, &att_center, &att_neighbor, &att_edge, &bias};
  }

  /// Zero-valued parameters of the right shapes.
  static GatLayerParams zeros(std::size_t in_dim, std::size_t heads, std::size_t head_dim,
                              bool concat) {
    detail::require(heads >= 1 && head_dim >= 1 && in_dim >= 1,
                    "GatLayerParams: dimensions must be positive");
    GatLayerParams p;
    p.heads = heads;
    p.head_dim = head_dim;
    p.concat = concat;
    p.weight = Tensor(in_dim, heads * head_dim);
    p.edge_weight = Tensor(1, heads * head_dim);
    p.att_center = Tensor(heads, head_dim);
    p.att_neighbor = Tensor(heads, head_dim);
    p.att_edge = Tensor(heads, head_dim);
    p.bias = Tensor(1, concat ? heads * head_dim : head_dim);
    return p;
  }
};

enum class Activation { kIdentity, kElu };

/// Directed message-passing view of an undirected edge list: every edge in
/// both directions, self-loops once, grouped by receiving node.
struct MessageGraph {
  std::size_t num_nodes = 0;
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;
  Tensor attr;  // E x 1

  std::size_t num_edges() const noexcept { return src.size(); }
};

/// `edges` must already contain the self-loops; every node must receive at
/// least one message.
inline MessageGraph make_message_graph(const EdgeList& edges, std::size_t num_nodes) {
  struct Directed {
    std::uint32_t src, dst;
    double attr;
  };
  std::vector<Directed> dir;
  dir.reserve(2 * edges.size());
  for (const Edge& e : edges) {
    if (e.source >= num_nodes || e.target >= num_nodes) {
      throw ContractViolation("make_message_graph: edge (" + std::to_string(e.source) + ", " +
                              std::to_string(e.target) + ") outside " +
                              std::to_string(num_nodes) + " nodes");
    }
    dir.push_back({e.source, e.target, e.attr});
    if (e.source != e.target) dir.push_back({e.target, e.source, e.attr});
  }
  // Counting sort by receiver keeps (dst, src) order stable and linear time.
  std::vector<std::size_t> start(num_nodes + 1, 0);
  for (const Directed& d : dir) ++start[d.dst + 1];
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (start[i + 1] == 0) {
      throw ContractViolation("gat: node " + std::to_string(i) + " has no incoming edge");
    }
    start[i + 1] += start[i];
  }
  MessageGraph mg;
  mg.num_nodes = num_nodes;
  mg.src.resize(dir.size());
  mg.dst.resize(dir.size());
  mg.attr = Tensor(dir.size(), 1);
  for (const Directed& d : dir) {
    const std::size_t slot = start[d.dst]++;
    mg.src[slot] = d.src;
    mg.dst[slot] = d.dst;
    mg.attr[slot] = d.attr;
  }
  return mg;
}

/// Tape handles of one layer's parameters.
struct LayerVars {
  ad::Var weight, edge_weight, att_center, att_neighbor, att_edge, bias;
};

inline LayerVars bind_layer(ad::Tape& tape, const GatLayerParams& p, bool track) {
  auto bind = [&](const Tensor& t) {
    Tensor copy = t;
    copy.drop_grad();
    return track ? tape.parameter(std::move(copy)) : tape.constant(std::move(copy));
  };
  return {bind(p.weight),       bind(p.edge_weight), bind(p.att_center),
          bind(p.att_neighbor), bind(p.att_edge),    bind(p.bias)};
}

/// One attention layer on the tape. `attention`, when given, receives the
/// E x heads attention coefficients.
inline ad::Var gat_layer(ad::Tape& tape, ad::Var features, const MessageGraph& graph,
                         ad::Var edge_attr, const LayerVars& p, std::size_t heads, bool concat,
                         Activation activation, ad::Var* attention = nullptr) {
  const Tensor& x = tape.value(features);
  const Tensor& w = tape.value(p.weight);
  if (x.cols() != w.rows()) {
    throw ShapeError("gat_layer: feature width " + std::to_string(x.cols()) +
                     " does not match layer input width " + std::to_string(w.rows()));
  }
  if (x.rows() != graph.num_nodes) {
    throw ShapeError("gat_layer: " + std::to_string(x.rows()) + " feature rows for " +
                     std::to_string(graph.num_nodes) + " nodes");
  }
  const ad::Var h = ad::matmul(tape, features, p.weight);
  const ad::Var score_center = ad::head_dot(tape, h, p.att_center);
  const ad::Var score_neighbor = ad::head_dot(tape, h, p.att_neighbor);
  const ad::Var edge_gain = ad::head_dot(tape, p.edge_weight, p.att_edge);  // 1 x heads
  const ad::Var score_edge = ad::matmul(tape, edge_attr, edge_gain);        // E x heads

  const ad::Var logits = ad::leaky_relu(
      tape,
      ad::add(tape,
              ad::add(tape, ad::gather_rows(tape, score_center, graph.dst),
                      ad::gather_rows(tape, score_neighbor, graph.src)),
              score_edge));
  const ad::Var alpha = ad::segment_softmax(tape, logits, graph.dst, graph.num_nodes);
  if (attention) *attention = alpha;

  ad::Var out = ad::attention_aggregate(tape, alpha, h, graph.src, graph.dst, graph.num_nodes);
  if (!concat) out = ad::head_mean(tape, out, heads);
  out = ad::add_row(tape, out, p.bias);
  if (activation == Activation::kElu) out = ad::elu(tape, out);
  return out;
}

/// Value-only layer evaluation.
inline Tensor gat_layer_forward(const Tensor& features, const MessageGraph& graph,
                                const GatLayerParams& params, Activation activation,
                                Tensor* attention = nullptr) {
  ad::Tape tape;
  const ad::Var x = tape.constant(features);
  const ad::Var attr = tape.constant(graph.attr);
  const LayerVars vars = bind_layer(tape, params, false);
  ad::Var alpha;
  const ad::Var out = gat_layer(tape, x, graph, attr, vars, params.heads, params.concat,
                                activation, &alpha);
  if (attention) *attention = tape.value(alpha);
  return tape.value(out);
}

class GatNetwork {
 public:
  GatNetwork() = default;

  /// Glorot-uniform weights and attention vectors, zero biases.
  static GatNetwork initialize(const GatConfig& config, std::uint64_t seed) {
    GatNetwork net = zeros(config);
    std::mt19937_64 rng(seed);
    auto glorot = [&rng](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : t.data()) v = dist(rng);
    };
    for (GatLayerParams& layer : net.layers_) {
      const std::size_t width = layer.heads * layer.head_dim;
      glorot(layer.weight, layer.in_dim(), width);
      glorot(layer.edge_weight, 1, width);
      glorot(layer.att_center, layer.head_dim, 1);
      glorot(layer.att_neighbor, layer.head_dim, 1);
      glorot(layer.att_edge, layer.head_dim, 1);
    }
    return net;
  }

  static GatNetwork zeros(const GatConfig& config) {
    detail::require(config.layers >= 1, "GatNetwork: need at least one layer");
    detail::require(config.heads >= 1, "GatNetwork: need at least one head");
    detail::require(config.classes >= 1, "GatNetwork: need at least one class");
    detail::require(config.in_dim >= 1, "GatNetwork: input width must be positive");
    if (config.layers > 1 && (config.hidden == 0 || config.hidden % config.heads != 0)) {
      throw ContractViolation("GatNetwork: hidden width " + std::to_string(config.hidden) +
                              " not divisible by " + std::to_string(config.heads) + " heads");
    }
    GatNetwork net;
    net.config_ = config;
    std::size_t width = config.in_dim;
    for (std::size_t l = 0; l + 1 < config.layers; ++l) {
      net.layers_.push_back(
          GatLayerParams::zeros(width, config.heads, config.hidden / config.heads, true));
      width = config.hidden;
    }
    net.layers_.push_back(GatLayerParams::zeros(width, config.heads, config.classes, false));
    return net;
  }

  const GatConfig& config() const noexcept { return config_; }
  std::vector<GatLayerParams>& layers() noexcept { return layers_; }
  const std::vector<GatLayerParams>& layers() const noexcept { return layers_; }

  /// All parameter tensors in a fixed order (layer by layer).
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
      for (Tensor* t : l.tensors()) out.push_back(t);
    }
    return out;
  }
  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_) {
      for (const Tensor* t : l.tensors()) out.push_back(t);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : parameters()) n += t->size();
    return n;
  }

  friend bool operator==(const GatNetwork& a, const GatNetwork& b) {
    if (!(a.config_ == b.config_) || a.layers_.size() != b.layers_.size()) return false;
    auto pa = a.parameters();
    auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (!(*pa[i] == *pb[i])) return false;
    }
    return true;
  }

 private:
  GatConfig config_;
  std::vector<GatLayerParams> layers_;
};

/// Result of a recorded forward pass.
struct ForwardTrace {
  ad::Var logits;                  // N x classes
  std::vector<ad::Var> attention;  // per layer, E x heads
  std::vector<ad::Var> params;     // same order as GatNetwork::parameters()
};

/// Runs the whole stack on the tape. Parameters are bound as tracked leaves
/// when `track_params` is set.
inline ForwardTrace network_forward(ad::Tape& tape, const GatNetwork& net, ad::Var features,
                                    const MessageGraph& graph, bool track_params) {
  const Tensor& x = tape.value(features);
  if (x.cols() != net.config().in_dim) {
    throw ShapeError("network_forward: feature width " + std::to_string(x.cols()) +
                     " but network expects " + std::to_string(net.config().in_dim));
  }
  ForwardTrace trace;
  const ad::Var attr = tape.constant(graph.attr);
  ad::Var h = features;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerVars vars = bind_layer(tape, layers[l], track_params);
    for (ad::Var v : {vars.weight, vars.edge_weight, vars.att_center, vars.att_neighbor,
                      vars.att_edge, vars.bias}) {
      trace.params.push_back(v);
    }
    const bool last = l + 1 == layers.size();
    ad::Var alpha;
    h = gat_layer(tape, h, graph, attr, vars, layers[l].heads, layers[l].concat,
                  last ? Activation::kIdentity : Activation::kElu, &alpha);
    trace.attention.push_back(alpha);
  }
  trace.logits = h;
  return trace;
}

/// Logits for every node of an arbitrary graph given without self-loops.
inline Tensor network_forward(const Tensor& features, const EdgeList& edges,
                              const GatNetwork& net) {
  const MessageGraph mg = make_message_graph(add_self_loops(edges, features.rows()),
                                             features.rows());
  ad::Tape tape;
  const ad::Var x = tape.constant(features);
  return tape.value(network_forward(tape, net, x, mg, false).logits);
}

/// Per-node class logits (image and spectral nodes) of a joint graph.
inline Tensor network_forward(const MultimodalGraph& graph, const GatNetwork& net) {
  return network_forward(graph.features, graph.edges, net);
}

/// Image part of the node logits, laid out as an H x W x C map.
struct ClassMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  Tensor scores;  // (H*W) x C, row r*W + c is pixel (r, c)

  double at(std::size_t r, std::size_t c, std::size_t k) const {
    return scores(r * width + c, k);
  }
};

inline ClassMap extract_image_logits(const Tensor& logits, const MultimodalGraph& graph) {
  const std::size_t pixels = graph.num_image_nodes();
  if (logits.rows() < pixels) {
    throw ShapeError("extract_image_logits: " + std::to_string(logits.rows()) +
                     " logit rows for " + std::to_string(pixels) + " pixels");
  }
  ClassMap map;
  map.height = graph.height;
  map.width = graph.width;
  map.classes = logits.cols();
  const auto data = logits.data();
  map.scores = Tensor(pixels, logits.cols(),
                      std::vector<double>(data.begin(), data.begin() + pixels * logits.cols()));
  return map;
}

/// Per-pixel argmax; ties go to the lowest class index.
inline std::vector<std::uint16_t> predict(const ClassMap& map) {
  detail::require(map.classes >= 1, "predict: need at least one class");
  std::vector<std::uint16_t> out(map.height * map.width, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = map.scores.row(i);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    out[i] = static_cast<std::uint16_t>(best);
  }
  return out;
}

}  // namespace graphfuse
