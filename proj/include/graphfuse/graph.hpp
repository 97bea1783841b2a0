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

// Joint graph over an image grid and a sparse set of spectral sample points.
//
// Node ids: the H*W image pixels come first in row-major order, followed by
// the spectral points in PointSet order. Pixel (row r, column c) sits at
// (x = c, y = r). For cross-modal matching both layers are lifted into 3-D,
// the image at z = 0 and the spectral layer at z = 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphfuse/delaunay.hpp"
#include "graphfuse/errors.hpp"
#include "graphfuse/predicates.hpp"
#include "graphfuse/spatial_index.hpp"
#include "graphfuse/tensor.hpp"

namespace graphfuse {

inline constexpr std::size_t kSpectrumDim = 64;
inline constexpr std::size_t kFeatureDim = 1 + kSpectrumDim;

/// Height of the spectral layer above the image layer.
inline constexpr double kLayerOffset = 1.0;

struct Edge {
  std::uint32_t source = 0;
  std::uint32_t target = 0;
  double attr = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected edges stored once with source <= target, sorted by
/// (source, target) and free of duplicates. source == target only for
/// self-loops.
class EdgeList {
 public:
  EdgeList() = default;

  /// Orients, sorts and deduplicates raw edges. When the same pair appears
  /// twice the first occurrence's attribute is kept.
  static EdgeList canonical(std::vector<Edge> raw) {
    for (Edge& e : raw) {
      if (e.source > e.target) std::swap(e.source, e.target);
    }
    std::stable_sort(raw.begin(), raw.end(), [](const Edge& a, const Edge& b) {
      return a.source != b.source ? a.source < b.source : a.target < b.target;
    });
    raw.erase(std::unique(raw.begin(), raw.end(),
                          [](const Edge& a, const Edge& b) {
                            return a.source == b.source && a.target == b.target;
                          }),
              raw.end());
    EdgeList out;
    out.edges_ = std::move(raw);
    return out;
  }

  /// Union of several canonical lists.
  static EdgeList merge(std::initializer_list<const EdgeList*> parts) {
    std::vector<Edge> all;
    for (const EdgeList* p : parts) all.insert(all.end(), p->edges_.begin(), p->edges_.end());
    return canonical(std::move(all));
  }

  std::size_t size() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return edges_.empty(); }
  const Edge& operator[](std::size_t i) const { return edges_[i]; }
  auto begin() const noexcept { return edges_.begin(); }
  auto end() const noexcept { return edges_.end(); }
  std::span<const Edge> edges() const noexcept { return edges_; }

  bool contains(std::uint32_t a, std::uint32_t b) const {
    if (a > b) std::swap(a, b);
    auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{a, b, 0.0},
                               [](const Edge& x, const Edge& y) {
                                 return x.source != y.source ? x.source < y.source
                                                             : x.target < y.target;
                               });
    return it != edges_.end() && it->source == a && it->target == b;
  }

  /// Shifts every endpoint by `offset` (used to place spectral-only edges
  /// after the image nodes).
  EdgeList shifted(std::uint32_t offset) const {
    EdgeList out = *this;
    for (Edge& e : out.edges_) {
      e.source += offset;
      e.target += offset;
    }
    return out;
  }

  friend bool operator==(const EdgeList&, const EdgeList&) = default;

 private:
  std::vector<Edge> edges_;
};

/// Sparse spectral samples: planar positions in pixel units plus one
/// kSpectrumDim-wide payload per point. Positions are pairwise distinct.
class PointSet {
 public:
  PointSet() = default;

  /// Positions with all-zero payloads.
  explicit PointSet(std::vector<Point2> points)
      : PointSet(points, std::vector<double>(points.size() * kSpectrumDim, 0.0)) {}

  PointSet(std::vector<Point2> points, std::vector<double> payloads)
      : points_(std::move(points)), payloads_(std::move(payloads)) {
    if (payloads_.size() != points_.size() * kSpectrumDim) {
      throw ContractViolation("PointSet: " + std::to_string(payloads_.size()) +
                              " payload values for " + std::to_string(points_.size()) +
                              " points");
    }
    std::vector<Point2> sorted = points_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i] == sorted[i - 1]) {
        throw ContractViolation("PointSet: duplicate point (" + std::to_string(sorted[i].x) +
                                ", " + std::to_string(sorted[i].y) + ")");
      }
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  std::span<const Point2> points() const noexcept { return points_; }
  const Point2& point(std::size_t i) const { return points_[i]; }
  std::span<const double> payload(std::size_t i) const {
    return {payloads_.data() + i * kSpectrumDim, kSpectrumDim};
  }
  std::span<const double> payloads() const noexcept { return payloads_; }

 private:
  std::vector<Point2> points_;
  std::vector<double> payloads_;
};

/// How edges among the spectral points are formed.
struct GraphConstruction {
  enum class Kind { kDelaunay, kKnn };
  Kind kind = Kind::kDelaunay;
  std::size_t k = 8;

  static GraphConstruction delaunay() { return {Kind::kDelaunay, 8}; }
  static GraphConstruction knn(std::size_t k = 8) { return {Kind::kKnn, k}; }

  std::string name() const {
    return kind == Kind::kDelaunay ? "delaunay" : "knn" + std::to_string(k);
  }
  friend bool operator==(const GraphConstruction&, const GraphConstruction&) = default;
};

struct NodePosition {
  double x = 0.0;
  double y = 0.0;
  std::uint8_t layer = 0;  // 0 image, 1 spectral
};

struct MultimodalGraph {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<NodePosition> positions;
  /// num_nodes x kFeatureDim. Column 0 holds the BSE value of image nodes,
  /// columns 1.. the reduced spectrum of spectral nodes; the rest is zero.
  Tensor features;
  EdgeList edges;
  /// Per image node; excluded pixels are 0.
  std::vector<std::uint8_t> validity;
  /// Per image node, may be empty.
  std::vector<std::uint16_t> labels;

  std::size_t num_nodes() const noexcept { return positions.size(); }
  std::size_t num_image_nodes() const noexcept { return height * width; }
  bool is_image_node(std::size_t id) const noexcept { return id < num_image_nodes(); }
};

// ---------------------------------------------------------------------------
// Edge builders

/// 8-neighbourhood over an H x W pixel grid; distance 1 or sqrt(2).
inline EdgeList build_grid_edges(std::size_t height, std::size_t width) {
  std::vector<Edge> raw;
  raw.reserve(height * width * 4);
  const double diag = std::sqrt(2.0);
  auto id = [width](std::size_t r, std::size_t c) {
    return static_cast<std::uint32_t>(r * width + c);
  };
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c + 1 < width) raw.push_back({id(r, c), id(r, c + 1), 1.0});
      if (r + 1 < height) {
        raw.push_back({id(r, c), id(r + 1, c), 1.0});
        if (c + 1 < width) raw.push_back({id(r, c), id(r + 1, c + 1), diag});
        if (c > 0) raw.push_back({id(r, c), id(r + 1, c - 1), diag});
      }
    }
  }
  return EdgeList::canonical(std::move(raw));
}

inline double planar_distance(const Point2& a, const Point2& b) {
  return std::sqrt(squared_distance(a, b));
}

/// Edges of the Delaunay triangulation of the points (ids = point indices).
inline EdgeList delaunay_edges(const PointSet& points) {
  if (points.size() < 2) {
    throw ContractViolation("delaunay_edges: need at least 2 points, got " +
                            std::to_string(points.size()));
  }
  const Triangulation tri = delaunay_triangulate(points.points());
  std::vector<Edge> raw;
  raw.reserve(tri.edges.size());
  for (auto [a, b] : tri.edges) {
    raw.push_back({a, b, planar_distance(points.point(a), points.point(b))});
  }
  return EdgeList::canonical(std::move(raw));
}

/// Each point linked to its min(k, N-1) nearest points, symmetrized.
///
/// Equal distances resolve by the neighbour's coordinates, so the edge set
/// does not depend on the input order.
inline EdgeList knn_edges(const PointSet& points, std::size_t k) {
  detail::require(k >= 1, "knn_edges: k must be at least 1");
  if (points.size() < 2) {
    throw ContractViolation("knn_edges: need at least 2 points, got " +
                            std::to_string(points.size()));
  }
  const auto pts = points.points();
  const SpatialGrid grid(pts);
  const std::size_t kk = std::min(k, pts.size() - 1);
  std::vector<Edge> raw;
  raw.reserve(pts.size() * kk);
  auto by_position = [&](std::uint32_t a, std::uint32_t b) { return pts[a] < pts[b]; };
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    for (std::uint32_t j : grid.k_nearest(pts[i], kk, i, by_position)) {
      raw.push_back({i, j, planar_distance(pts[i], pts[j])});
    }
  }
  return EdgeList::canonical(std::move(raw));
}

namespace detail {

/// Nearest grid coordinate to `v` in [0, n); ties go to the lower index.
inline std::size_t nearest_grid_coordinate(double v, std::size_t n) {
  if (v <= 0.0) return 0;
  const double hi = static_cast<double>(n - 1);
  if (v >= hi) return n - 1;
  const double lo = std::floor(v);
  return static_cast<std::size_t>(v - lo <= (lo + 1.0) - v ? lo : lo + 1.0);
}

inline double lifted_distance(const Point2& image_pos, const Point2& spectral_pos) {
  return std::sqrt(squared_distance(image_pos, spectral_pos) + kLayerOffset * kLayerOffset);
}

}  // namespace detail

/// Cross-modal edges between an H x W image and spectral points, in joint ids
/// (image nodes first). Every image node is linked to its nearest spectral
/// node and every spectral node to its nearest image node, by lifted 3-D
/// distance; ties resolve to the lowest node id.
inline EdgeList cross_modal_edges(std::size_t height, std::size_t width,
                                  const PointSet& spectral) {
  if (spectral.empty()) throw ContractViolation("cross_modal_edges: empty spectral point set");
  const auto pts = spectral.points();
  const auto offset = static_cast<std::uint32_t>(height * width);
  std::vector<Edge> raw;
  raw.reserve(height * width + pts.size());

  // Both layers are flat, so the nearest node in 3-D is the nearest in 2-D.
  const SpatialGrid grid(pts);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const Point2 pos{static_cast<double>(c), static_cast<double>(r)};
      const std::uint32_t j = grid.nearest(pos);
      raw.push_back({static_cast<std::uint32_t>(r * width + c), offset + j,
                     detail::lifted_distance(pos, pts[j])});
    }
  }
  for (std::uint32_t j = 0; j < pts.size(); ++j) {
    const std::size_t c = detail::nearest_grid_coordinate(pts[j].x, width);
    const std::size_t r = detail::nearest_grid_coordinate(pts[j].y, height);
    const Point2 pos{static_cast<double>(c), static_cast<double>(r)};
    raw.push_back({static_cast<std::uint32_t>(r * width + c), offset + j,
                   detail::lifted_distance(pos, pts[j])});
  }
  return EdgeList::canonical(std::move(raw));
}

/// Adds one zero-length self-loop per node. The input must not contain any.
inline EdgeList add_self_loops(const EdgeList& edges, std::size_t num_nodes) {
  std::vector<Edge> raw(edges.begin(), edges.end());
  for (const Edge& e : raw) {
    if (e.source == e.target) {
      throw ContractViolation("add_self_loops: node " + std::to_string(e.source) +
                              " already has a self-loop");
    }
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    raw.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), 0.0});
  }
  return EdgeList::canonical(std::move(raw));
}

inline MultimodalGraph add_self_loops(MultimodalGraph graph) {
  graph.edges = add_self_loops(graph.edges, graph.num_nodes());
  return graph;
}

/// Builds the joint graph of a BSE image and spectral samples.
///
/// `bse` holds H*W values in [0, 1], row-major. `validity` and `labels` are
/// per pixel; pass an empty `validity` for an all-valid image and empty
/// `labels` when there is no ground truth. With no spectral points the graph
/// is the image grid alone.
inline MultimodalGraph assemble_graph(std::span<const double> bse, std::size_t height,
                                      std::size_t width, const PointSet& spectral,
                                      const GraphConstruction& construction,
                                      std::span<const std::uint8_t> validity = {},
                                      std::span<const std::uint16_t> labels = {}) {
  detail::require(height >= 1 && width >= 1, "assemble_graph: empty image");
  const std::size_t pixels = height * width;
  if (bse.size() != pixels) {
    throw ShapeError("assemble_graph: " + std::to_string(bse.size()) + " BSE values for a " +
                     std::to_string(height) + "x" + std::to_string(width) + " image");
  }
  if (!validity.empty() && validity.size() != pixels) {
    throw ShapeError("assemble_graph: validity mask size mismatch");
  }
  if (!labels.empty() && labels.size() != pixels) {
    throw ShapeError("assemble_graph: label map size mismatch");
  }
  for (double v : bse) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractViolation("assemble_graph: BSE value " + std::to_string(v) +
                              " outside [0, 1]");
    }
  }
  for (std::size_t i = 0; i < spectral.size(); ++i) {
    const Point2& p = spectral.point(i);
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(width - 1) &&
          p.y <= static_cast<double>(height - 1))) {
      throw ContractViolation("assemble_graph: spectral point " + std::to_string(i) + " at (" +
                              std::to_string(p.x) + ", " + std::to_string(p.y) +
                              ") lies outside the image");
    }
  }

  MultimodalGraph g;
  g.height = height;
  g.width = width;
  const std::size_t n = pixels + spectral.size();
  g.positions.reserve(n);
  g.features = Tensor(n, kFeatureDim);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      g.positions.push_back({static_cast<double>(c), static_cast<double>(r), 0});
      g.features(r * width + c, 0) = bse[r * width + c];
    }
  }
  for (std::size_t i = 0; i < spectral.size(); ++i) {
    const Point2& p = spectral.point(i);
    g.positions.push_back({p.x, p.y, 1});
    auto payload = spectral.payload(i);
    std::copy(payload.begin(), payload.end(), g.features.row(pixels + i).begin() + 1);
  }
  g.validity.assign(validity.begin(), validity.end());
  if (g.validity.empty()) g.validity.assign(pixels, 1);
  g.labels.assign(labels.begin(), labels.end());

  const EdgeList grid = build_grid_edges(height, width);
  if (spectral.empty()) {
    g.edges = grid;
    return g;
  }
  EdgeList intra;
  if (spectral.size() >= 2) {
    intra = construction.kind == GraphConstruction::Kind::kDelaunay
                ? delaunay_edges(spectral)
                : knn_edges(spectral, construction.k);
  }
  const EdgeList intra_joint = intra.shifted(static_cast<std::uint32_t>(pixels));
  const EdgeList cross = cross_modal_edges(height, width, spectral);
  g.edges = EdgeList::merge({&grid, &intra_joint, &cross});
  return g;
}

}  // namespace graphfuse
