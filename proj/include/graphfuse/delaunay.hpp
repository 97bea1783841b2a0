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

// Incremental Bowyer-Watson Delaunay triangulation.
//
// The unbounded outside is represented by "ghost" triangles that share a
// single vertex at infinity. A ghost triangle (a, b, inf) stands for the open
// half-plane left of the hull edge a->b plus the open segment ab, which is the
// limit of a circumcircle whose centre moves to infinity. With that reading,
// points outside the current hull are inserted by the same cavity rule as
// interior points and no finite bounding triangle ever enters a predicate.
//
// Points are inserted in lexicographic (x, y) order, so the result depends
// only on the point coordinates and not on their input order. Cocircular
// configurations resolve by that insertion order: a point on a circumcircle
// does not invalidate the triangle.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphfuse/errors.hpp"
#include "graphfuse/predicates.hpp"

namespace graphfuse {

/// Counter-clockwise vertex triples, indices into the caller's point array.
struct Triangulation {
  std::vector<std::array<std::uint32_t, 3>> triangles;
  /// Undirected edges (i < j), sorted. Collinear input yields a path here
  /// and no triangles.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

namespace detail {

class BowyerWatson {
 public:
  static constexpr std::uint32_t kInfinite = std::numeric_limits<std::uint32_t>::max();
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  explicit BowyerWatson(std::vector<Point2> pts) : pts_(std::move(pts)) {}

  /// Returns false when all points are collinear (nothing was triangulated).
  bool run() {
    const std::size_t n = pts_.size();
    std::size_t apex = 2;
    while (apex < n && orient2d(pts_[0], pts_[1], pts_[apex]) == 0) ++apex;
    if (apex == n) return false;

    std::array<std::uint32_t, 3> first{0, 1, static_cast<std::uint32_t>(apex)};
    if (orient2d(pts_[0], pts_[1], pts_[apex]) < 0) std::swap(first[0], first[1]);
    seed_triangle(first);

    for (std::size_t i = 2; i < n; ++i) {
      if (i != apex) insert(static_cast<std::uint32_t>(i));
    }
    return true;
  }

  std::vector<std::array<std::uint32_t, 3>> real_triangles() const {
    std::vector<std::array<std::uint32_t, 3>> out;
    for (const Tri& t : tris_) {
      if (t.alive && !is_ghost(t)) out.push_back(t.v);
    }
    return out;
  }

 private:
  struct Tri {
    std::array<std::uint32_t, 3> v{};
    // nbr[i] lies across the edge opposite v[i].
    std::array<std::uint32_t, 3> nbr{kNone, kNone, kNone};
    bool alive = true;
  };

  struct BoundaryEdge {
    std::uint32_t from, to, outside;
  };

  static bool is_ghost(const Tri& t) {
    return t.v[0] == kInfinite || t.v[1] == kInfinite || t.v[2] == kInfinite;
  }

  // Hull edge a->b of a ghost triangle, with the outside on its left.
  static std::pair<std::uint32_t, std::uint32_t> ghost_edge(const Tri& t) {
    std::size_t g = 0;
    while (t.v[g] != kInfinite) ++g;
    return {t.v[(g + 1) % 3], t.v[(g + 2) % 3]};
  }

  bool strictly_between(const Point2& p, const Point2& a, const Point2& b) const {
    if (a.x != b.x) return std::min(a.x, b.x) < p.x && p.x < std::max(a.x, b.x);
    return std::min(a.y, b.y) < p.y && p.y < std::max(a.y, b.y);
  }

  bool circumcircle_contains(const Tri& t, const Point2& p) const {
    if (is_ghost(t)) {
      auto [a, b] = ghost_edge(t);
      const int o = orient2d(pts_[a], pts_[b], p);
      if (o > 0) return true;
      return o == 0 && strictly_between(p, pts_[a], pts_[b]);
    }
    return incircle(pts_[t.v[0]], pts_[t.v[1]], pts_[t.v[2]], p) > 0;
  }

  std::uint32_t allocate(const std::array<std::uint32_t, 3>& v) {
    Tri t;
    t.v = v;
    if (!free_.empty()) {
      const std::uint32_t id = free_.back();
      free_.pop_back();
      tris_[id] = t;
      return id;
    }
    tris_.push_back(t);
    stamp_.push_back(0);
    return static_cast<std::uint32_t>(tris_.size() - 1);
  }

  void seed_triangle(const std::array<std::uint32_t, 3>& v) {
    const std::uint32_t inner = allocate(v);
    std::array<BoundaryEdge, 3> ring{};
    for (std::size_t i = 0; i < 3; ++i) {
      // Edge v[i+1] -> v[i+2] of the inner triangle; its ghost runs reversed.
      const std::uint32_t a = v[(i + 1) % 3], b = v[(i + 2) % 3];
      const std::uint32_t ghost = allocate({b, a, kInfinite});
      tris_[inner].nbr[i] = ghost;
      tris_[ghost].nbr[2] = inner;
      ring[i] = {b, a, ghost};
    }
    // Ghosts meet each other across their edges through infinity.
    for (std::size_t i = 0; i < 3; ++i) {
      Tri& gi = tris_[ring[i].outside];
      for (std::size_t j = 0; j < 3; ++j) {
        if (i == j) continue;
        const Tri& gj = tris_[ring[j].outside];
        // Edge (b, inf) of gi is opposite a = v[0]; it is shared with the ghost
        // whose first vertex is b.
        if (gj.v[0] == gi.v[1]) gi.nbr[0] = ring[j].outside;
        if (gj.v[1] == gi.v[0]) gi.nbr[1] = ring[j].outside;
      }
    }
    last_ = inner;
  }

  std::uint32_t locate(const Point2& p) {
    std::uint32_t cur = last_;
    const std::size_t limit = 4 * tris_.size() + 16;
    for (std::size_t steps = 0; steps < limit; ++steps) {
      const Tri& t = tris_[cur];
      if (is_ghost(t)) return cur;
      bool moved = false;
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t i = (k + steps) % 3;
        const std::uint32_t a = t.v[(i + 1) % 3], b = t.v[(i + 2) % 3];
        if (orient2d(pts_[a], pts_[b], p) < 0) {
          cur = t.nbr[i];
          moved = true;
          break;
        }
      }
      if (!moved) return cur;
    }
    // Walk did not settle; any triangle whose circumcircle holds p seeds the cavity.
    for (std::uint32_t id = 0; id < tris_.size(); ++id) {
      if (tris_[id].alive && circumcircle_contains(tris_[id], p)) return id;
    }
    throw Error("delaunay: failed to locate point");
  }

  void insert(std::uint32_t pi) {
    const Point2& p = pts_[pi];
    const std::uint32_t seed = locate(p);

    ++epoch_;
    cavity_.clear();
    boundary_.clear();
    std::vector<std::uint32_t>& stack = stack_;
    stack.clear();
    stack.push_back(seed);
    stamp_[seed] = epoch_;
    while (!stack.empty()) {
      const std::uint32_t id = stack.back();
      stack.pop_back();
      cavity_.push_back(id);
      const Tri t = tris_[id];
      for (std::size_t i = 0; i < 3; ++i) {
        const std::uint32_t nb = t.nbr[i];
        const std::uint32_t from = t.v[(i + 1) % 3], to = t.v[(i + 2) % 3];
        if (stamp_[nb] == epoch_) continue;
        if (circumcircle_contains(tris_[nb], p)) {
          stamp_[nb] = epoch_;
          stack.push_back(nb);
        } else {
          boundary_.push_back({from, to, nb});
        }
      }
    }

    for (std::uint32_t id : cavity_) {
      tris_[id].alive = false;
      free_.push_back(id);
    }

    fresh_.clear();
    for (const BoundaryEdge& e : boundary_) {
      const std::uint32_t id = allocate({e.from, e.to, pi});
      fresh_.push_back(id);
      tris_[id].nbr[2] = e.outside;
      Tri& out = tris_[e.outside];
      for (std::size_t k = 0; k < 3; ++k) {
        if (out.v[(k + 1) % 3] == e.to && out.v[(k + 2) % 3] == e.from) out.nbr[k] = id;
      }
    }
    // Fan around p: triangle (u, v, p) meets the one starting at v across (v, p)
    // and the one ending at u across (p, u).
    for (std::uint32_t id : fresh_) {
      Tri& t = tris_[id];
      for (std::uint32_t other : fresh_) {
        if (other == id) continue;
        const Tri& o = tris_[other];
        if (o.v[0] == t.v[1]) t.nbr[0] = other;
        if (o.v[1] == t.v[0]) t.nbr[1] = other;
      }
      if (!is_ghost(t)) last_ = id;
    }
  }

  std::vector<Point2> pts_;
  std::vector<Tri> tris_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::uint32_t> free_;
  std::vector<std::uint32_t> cavity_;
  std::vector<std::uint32_t> stack_;
  std::vector<std::uint32_t> fresh_;
  std::vector<BoundaryEdge> boundary_;
  std::uint32_t epoch_ = 0;
  std::uint32_t last_ = 0;
};

}  // namespace detail

/// Delaunay triangulation of `points` (at least 2, pairwise distinct).
inline Triangulation delaunay_triangulate(std::span<const Point2> points) {
  if (points.size() < 2) {
    throw ContractViolation("delaunay: need at least 2 points, got " +
                            std::to_string(points.size()));
  }
  std::vector<std::uint32_t> order(points.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return points[a] < points[b];
  });
  std::vector<Point2> sorted;
  sorted.reserve(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.push_back(points[order[i]]);
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw ContractViolation("delaunay: duplicate point at index " + std::to_string(order[i]));
    }
  }

  Triangulation out;
  auto add_edge = [&](std::uint32_t a, std::uint32_t b) {
    a = order[a];
    b = order[b];
    out.edges.emplace_back(std::min(a, b), std::max(a, b));
  };

  detail::BowyerWatson bw(std::move(sorted));
  if (!bw.run()) {
    // Collinear input: lexicographic order walks along the line.
    for (std::uint32_t i = 0; i + 1 < order.size(); ++i) add_edge(i, i + 1);
  } else {
    for (const auto& t : bw.real_triangles()) {
      out.triangles.push_back({order[t[0]], order[t[1]], order[t[2]]});
      add_edge(t[0], t[1]);
      add_edge(t[1], t[2]);
      add_edge(t[2], t[0]);
    }
  }
  std::sort(out.edges.begin(), out.edges.end());
  out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
  return out;
}

}  // namespace graphfuse
