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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "graphfuse/errors.hpp"
#include "graphfuse/gat.hpp"
#include "graphfuse/gradcheck.hpp"

namespace graphfuse {
namespace {

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
}

GatLayerParams random_layer(std::size_t in, std::size_t heads, std::size_t dim, bool concat,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GatLayerParams p = GatLayerParams::zeros(in, heads, dim, concat);
  for (Tensor* t : p.tensors()) fill_uniform(*t, rng);
  return p;
}

// Random connected graph: a spanning path in shuffled order plus extra edges.
EdgeList random_graph(std::size_t n, std::size_t extra, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> len(0.5, 3.0);
  std::vector<Edge> raw;
  for (std::size_t i = 0; i + 1 < n; ++i) raw.push_back({order[i], order[i + 1], len(rng)});
  std::uniform_int_distribution<std::uint32_t> node(0, static_cast<std::uint32_t>(n - 1));
  for (std::size_t i = 0; i < extra; ++i) {
    const auto a = node(rng), b = node(rng);
    if (a != b) raw.push_back({a, b, len(rng)});
  }
  return EdgeList::canonical(std::move(raw));
}

Tensor random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor x(n, d);
  fill_uniform(x, rng);
  return x;
}

// Direct per-node evaluation of one attention layer.
Tensor oracle_layer(const Tensor& x, const EdgeList& edges_with_loops, const GatLayerParams& p,
                    bool elu_out) {
  const std::size_t n = x.rows(), H = p.heads, D = p.head_dim;
  std::vector<std::vector<std::pair<std::size_t, double>>> in(n);
  for (const Edge& e : edges_with_loops) {
    in[e.target].push_back({e.source, e.attr});
    if (e.source != e.target) in[e.source].push_back({e.target, e.attr});
  }
  Tensor z(n, H * D);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < H * D; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) acc += x(i, k) * p.weight(k, c);
      z(i, c) = acc;
    }
  }
  Tensor out(n, p.out_dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < H; ++h) {
      double gain = 0.0;
      for (std::size_t d = 0; d < D; ++d) gain += p.edge_weight(0, h * D + d) * p.att_edge(h, d);
      std::vector<double> e;
      for (auto [j, attr] : in[i]) {
        double s = attr * gain;
        for (std::size_t d = 0; d < D; ++d) {
          s += p.att_center(h, d) * z(i, h * D + d) + p.att_neighbor(h, d) * z(j, h * D + d);
        }
        e.push_back(s >= 0.0 ? s : 0.2 * s);
      }
      const double top = *std::max_element(e.begin(), e.end());
      double total = 0.0;
      for (double& v : e) total += (v = std::exp(v - top));
      for (std::size_t d = 0; d < D; ++d) {
        double acc = 0.0;
        for (std::size_t m = 0; m < in[i].size(); ++m) acc += e[m] / total * z(in[i][m].first, h * D + d);
        if (p.concat) {
          out(i, h * D + d) = acc;
        } else {
          out(i, d) += acc / static_cast<double>(H);
        }
      }
    }
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(i, c) += p.bias(0, c);
      if (elu_out) out(i, c) = out(i, c) >= 0.0 ? out(i, c) : std::expm1(out(i, c));
    }
  }
  return out;
}

GatConfig small_config() { return GatConfig{3, 8, 2, 5, 4}; }

TEST(GatLayer, MatchesDirectEvaluation) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::size_t n = 3 + seed * 2;
    const EdgeList edges = add_self_loops(random_graph(n, n, seed), n);
    const MessageGraph mg = make_message_graph(edges, n);
    const Tensor x = random_features(n, 5, seed + 100);
    for (bool concat : {true, false}) {
      const GatLayerParams p = random_layer(5, 3, 4, concat, seed + 200);
      const Tensor got = gat_layer_forward(x, mg, p, concat ? Activation::kElu : Activation::kIdentity);
      const Tensor want = oracle_layer(x, edges, p, concat);
      ASSERT_TRUE(got.same_shape(want));
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
    }
  }
}

TEST(GatLayer, IsolatedNodeSeesOnlyItself) {
  const GatLayerParams p = random_layer(3, 1, 2, true, 7);
  const Tensor x = Tensor::from_rows({{0.3, -0.7, 1.1}});
  const MessageGraph mg = make_message_graph(add_self_loops(EdgeList{}, 1), 1);
  Tensor alpha;
  const Tensor out = gat_layer_forward(x, mg, p, Activation::kElu, &alpha);
  EXPECT_EQ(alpha[0], 1.0);
  for (std::size_t c = 0; c < 2; ++c) {
    double pre = p.bias(0, c);
    for (std::size_t k = 0; k < 3; ++k) pre += x(0, k) * p.weight(k, c);
    EXPECT_NEAR(out(0, c), pre >= 0.0 ? pre : std::expm1(pre), 1e-15);
  }
}

TEST(GatLayer, ZeroParametersGiveUniformAttentionAndZeroOutput) {
  const std::size_t n = 6;
  const MessageGraph mg = make_message_graph(add_self_loops(random_graph(n, 4, 3), n), n);
  const GatLayerParams p = GatLayerParams::zeros(4, 2, 3, true);
  Tensor alpha;
  const Tensor out = gat_layer_forward(random_features(n, 4, 1), mg, p, Activation::kIdentity, &alpha);
  std::vector<std::size_t> degree(n, 0);
  for (auto d : mg.dst) ++degree[d];
  for (std::size_t e = 0; e < mg.num_edges(); ++e) {
    for (std::size_t h = 0; h < 2; ++h) {
      EXPECT_NEAR(alpha(e, h), 1.0 / static_cast<double>(degree[mg.dst[e]]), 1e-15);
    }
  }
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(GatLayer, IdenticalNeighboursShareAttention) {
  // Node 0 with neighbours 1 and 2 that carry equal features and edge lengths.
  const EdgeList edges = add_self_loops(EdgeList::canonical({{0, 1, 1.5}, {0, 2, 1.5}}), 3);
  const MessageGraph mg = make_message_graph(edges, 3);
  const Tensor x = Tensor::from_rows({{1.0, 0.2}, {-0.4, 0.9}, {-0.4, 0.9}});
  Tensor alpha;
  gat_layer_forward(x, mg, random_layer(2, 2, 3, true, 11), Activation::kElu, &alpha);
  std::vector<std::size_t> into_zero;
  for (std::size_t e = 0; e < mg.num_edges(); ++e) {
    if (mg.dst[e] == 0 && mg.src[e] != 0) into_zero.push_back(e);
  }
  ASSERT_EQ(into_zero.size(), 2u);
  for (std::size_t h = 0; h < 2; ++h) EXPECT_EQ(alpha(into_zero[0], h), alpha(into_zero[1], h));
}

TEST(GatLayer, AttentionRowsNormalizePerReceiver) {
  const std::size_t n = 30;
  const MessageGraph mg = make_message_graph(add_self_loops(random_graph(n, 60, 5), n), n);
  Tensor alpha;
  gat_layer_forward(random_features(n, 5, 2), mg, random_layer(5, 4, 3, true, 9),
                    Activation::kElu, &alpha);
  for (std::size_t h = 0; h < 4; ++h) {
    std::vector<double> total(n, 0.0);
    for (std::size_t e = 0; e < mg.num_edges(); ++e) total[mg.dst[e]] += alpha(e, h);
    for (double t : total) EXPECT_LE(std::abs(t - 1.0), 1e-12);
  }
}

TEST(GatLayer, RejectsWidthMismatch) {
  const MessageGraph mg = make_message_graph(add_self_loops(EdgeList{}, 2), 2);
  EXPECT_THROW(gat_layer_forward(Tensor(2, 3), mg, GatLayerParams::zeros(4, 1, 1, true),
                                 Activation::kElu),
               ShapeError);
  EXPECT_THROW(gat_layer_forward(Tensor(3, 4), mg, GatLayerParams::zeros(4, 1, 1, true),
                                 Activation::kElu),
               ShapeError);
}

TEST(MessageGraph, NodeWithoutIncomingEdgeIsRejected) {
  EXPECT_THROW(make_message_graph(EdgeList::canonical({{0, 1, 1.0}}), 3), ContractViolation);
}

TEST(MessageGraph, EdgesInBothDirectionsSelfLoopsOnce) {
  const EdgeList edges = add_self_loops(EdgeList::canonical({{0, 1, 2.0}}), 2);
  const MessageGraph mg = make_message_graph(edges, 2);
  EXPECT_EQ(mg.num_edges(), 4u);
  for (std::size_t e = 1; e < mg.num_edges(); ++e) EXPECT_LE(mg.dst[e - 1], mg.dst[e]);
}

TEST(GatNetwork, ShapesAndParameterCount) {
  const GatNetwork net = GatNetwork::zeros(GatConfig{});
  ASSERT_EQ(net.layers().size(), 3u);
  EXPECT_EQ(net.layers()[0].in_dim(), kFeatureDim);
  EXPECT_EQ(net.layers()[0].out_dim(), 56u);
  EXPECT_EQ(net.layers()[1].out_dim(), 56u);
  EXPECT_EQ(net.layers()[2].out_dim(), 50u);
  EXPECT_EQ(net.parameters().size(), 18u);
  std::size_t expected = 0;
  for (const GatLayerParams& l : net.layers()) {
    const std::size_t width = l.heads * l.head_dim;
    expected += l.in_dim() * width + width + 3 * width + l.out_dim();
  }
  EXPECT_EQ(net.parameter_count(), expected);
}

TEST(GatNetwork, RejectsIndivisibleHiddenWidth) {
  EXPECT_THROW(GatNetwork::zeros(GatConfig{3, 10, 4, 5, 2}), ContractViolation);
}

TEST(GatNetwork, InitializationIsSeededGlorotWithZeroBias) {
  const GatConfig cfg = small_config();
  const GatNetwork a = GatNetwork::initialize(cfg, 42);
  EXPECT_TRUE(a == GatNetwork::initialize(cfg, 42));
  EXPECT_FALSE(a == GatNetwork::initialize(cfg, 43));
  for (const GatLayerParams& l : a.layers()) {
    for (double b : l.bias.data()) EXPECT_EQ(b, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.heads * l.head_dim));
    for (double w : l.weight.data()) EXPECT_LE(std::abs(w), limit);
  }
}

TEST(GatNetwork, ZeroNetworkGivesZeroLogits) {
  const std::size_t n = 9;
  const Tensor logits = network_forward(random_features(n, 5, 3), random_graph(n, 6, 3),
                                        GatNetwork::zeros(small_config()));
  EXPECT_EQ(logits.rows(), n);
  EXPECT_EQ(logits.cols(), 4u);
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(GatNetwork, MatchesStackedOracleLayers) {
  const std::size_t n = 11;
  const EdgeList edges = random_graph(n, 12, 8);
  const GatNetwork net = GatNetwork::initialize(small_config(), 8);
  const Tensor x = random_features(n, 5, 8);
  const EdgeList loops = add_self_loops(edges, n);
  Tensor h = x;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    h = oracle_layer(h, loops, net.layers()[l], l + 1 < net.layers().size());
  }
  const Tensor got = network_forward(x, edges, net);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], h[i], 1e-12);
}

TEST(GatNetwork, GradientsMatchFiniteDifferences) {
  const std::size_t n = 7;
  GatNetwork net = GatNetwork::initialize(GatConfig{2, 4, 2, 3, 3}, 5);
  std::mt19937_64 rng(6);
  for (GatLayerParams& l : net.layers()) fill_uniform(l.bias, rng, -0.5, 0.5);
  const MessageGraph mg = make_message_graph(add_self_loops(random_graph(n, 5, 6), n), n);
  const Tensor x = random_features(n, 3, 6);
  const std::vector<std::uint16_t> labels{0, 1, 2, 1, 0, 2, 1};
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1, 0};
  const std::size_t per_layer = 6;

  std::vector<Tensor> params;
  for (const Tensor* t : net.parameters()) params.push_back(*t);
  const auto result = grad_check(
      [&](ad::Tape& tape, std::span<const ad::Var> p) {
        const ad::Var features = tape.constant(x);
        const ad::Var attr = tape.constant(mg.attr);
        ad::Var h = features;
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
          const ad::Var* v = &p[l * per_layer];
          const LayerVars vars{v[0], v[1], v[2], v[3], v[4], v[5]};
          const bool last = l + 1 == net.layers().size();
          h = gat_layer(tape, h, mg, attr, vars, net.layers()[l].heads, net.layers()[l].concat,
                        last ? Activation::kIdentity : Activation::kElu);
        }
        return ad::cross_entropy(tape, h, labels, mask);
      },
      params);
  EXPECT_LT(result.max_relative_error, 1e-4)
      << "param " << result.worst_param << " entry " << result.worst_index;
}

TEST(GatNetwork, PermutingNodesPermutesLogits) {
  const std::size_t n = 14;
  const EdgeList edges = random_graph(n, 20, 12);
  const Tensor x = random_features(n, 5, 12);
  const GatNetwork net = GatNetwork::initialize(small_config(), 12);
  const Tensor base = network_forward(x, edges, net);

  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(12);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor px(n, 5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 5; ++c) px(perm[i], c) = x(i, c);
  }
  std::vector<Edge> raw;
  for (const Edge& e : edges) raw.push_back({perm[e.source], perm[e.target], e.attr});
  const Tensor permuted = network_forward(px, EdgeList::canonical(raw), net);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < base.cols(); ++c) {
      EXPECT_NEAR(permuted(perm[i], c), base(i, c), 1e-12);
    }
  }
}

TEST(GatNetwork, ReceptiveFieldIsBoundedByDepth) {
  // Path 0 - 1 - ... - 9; three layers reach at most three hops.
  std::vector<Edge> raw;
  for (std::uint32_t i = 0; i + 1 < 10; ++i) raw.push_back({i, i + 1, 1.0});
  const EdgeList path = EdgeList::canonical(raw);
  const GatNetwork net = GatNetwork::initialize(small_config(), 2);
  Tensor x = random_features(10, 5, 2);
  const Tensor before = network_forward(x, path, net);
  for (std::size_t c = 0; c < 5; ++c) x(0, c) += 0.75;
  const Tensor after = network_forward(x, path, net);
  for (std::size_t node = 0; node < 10; ++node) {
    bool same = true;
    for (std::size_t c = 0; c < before.cols(); ++c) same = same && before(node, c) == after(node, c);
    if (node > 3) {
      EXPECT_TRUE(same) << "node " << node;
    } else {
      EXPECT_FALSE(same) << "node " << node;
    }
  }
}

TEST(GatNetwork, ForwardIsDeterministic) {
  const std::size_t n = 20;
  const EdgeList edges = random_graph(n, 30, 4);
  const Tensor x = random_features(n, 5, 4);
  const GatNetwork net = GatNetwork::initialize(small_config(), 4);
  EXPECT_EQ(network_forward(x, edges, net), network_forward(x, edges, net));
}

TEST(GatNetwork, RejectsWrongFeatureWidth) {
  EXPECT_THROW(network_forward(Tensor(3, 6), random_graph(3, 0, 1),
                               GatNetwork::zeros(small_config())),
               ShapeError);
}

TEST(ClassMapTest, ExtractsImageRowsAndPredictsLowestOnTies) {
  MultimodalGraph g = assemble_graph(std::vector<double>{0.1, 0.2, 0.3, 0.4}, 2, 2,
                                     PointSet(std::vector<Point2>{{1, 1}}),
                                     GraphConstruction::delaunay());
  const Tensor logits = Tensor::from_rows(
      {{1, 3, 2}, {5, 5, 0}, {0, 0, 0}, {-1, -2, -0.5}, {9, 9, 9}});
  const ClassMap map = extract_image_logits(logits, g);
  EXPECT_EQ(map.height, 2u);
  EXPECT_EQ(map.width, 2u);
  EXPECT_EQ(map.classes, 3u);
  EXPECT_EQ(map.at(1, 0, 0), 0.0);
  EXPECT_EQ(map.at(0, 1, 1), 5.0);
  EXPECT_EQ(predict(map), (std::vector<std::uint16_t>{1, 0, 0, 2}));
  EXPECT_THROW(extract_image_logits(Tensor(3, 3), g), ShapeError);
}

}  // namespace
}  // namespace graphfuse
