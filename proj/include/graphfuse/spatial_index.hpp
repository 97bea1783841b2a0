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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "graphfuse/predicates.hpp"

namespace graphfuse {

inline double squared_distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Uniform bucket grid for exact nearest-neighbour queries in the plane.
///
/// Queries visit buckets in growing Chebyshev rings and stop once no
/// unvisited bucket can hold a point as close as the current k-th best, so
/// results are identical to an exhaustive scan under the same ordering.
class SpatialGrid {
 public:
  explicit SpatialGrid(std::span<const Point2> points) : points_(points) {
    if (points_.empty()) return;
    min_x_ = max_x_ = points_[0].x;
    min_y_ = max_y_ = points_[0].y;
    for (const Point2& p : points_) {
      min_x_ = std::min(min_x_, p.x);
      max_x_ = std::max(max_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_y_ = std::max(max_y_, p.y);
    }
    const double span_x = max_x_ - min_x_, span_y = max_y_ - min_y_;
    const double extent = std::max(span_x, span_y);
    if (extent > 0.0) {
      // About two points per bucket, at most 4096 buckets per axis.
      const double area = std::max(span_x, extent / 4096.0) * std::max(span_y, extent / 4096.0);
      cell_ = std::max(std::sqrt(2.0 * area / static_cast<double>(points_.size())),
                       extent / 4096.0);
    }
    nx_ = static_cast<std::ptrdiff_t>(span_x / cell_) + 1;
    ny_ = static_cast<std::ptrdiff_t>(span_y / cell_) + 1;

    start_.assign(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    std::vector<std::size_t> cell_of(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      cell_of[i] = cell_index(cell_x(points_[i].x), cell_y(points_[i].y));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(points_.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      items_[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
    }
  }

  /// The `k` points nearest to `query`, best first, skipping index `skip`.
  /// `before(a, b)` orders two indices at equal distance.
  template <class TieBreak>
  std::vector<std::uint32_t> k_nearest(const Point2& query, std::size_t k, std::uint32_t skip,
                                       TieBreak before) const {
    std::vector<std::pair<double, std::uint32_t>> best;
    if (points_.empty() || k == 0) return {};
    auto worse = [&](const std::pair<double, std::uint32_t>& a,
                     const std::pair<double, std::uint32_t>& b) {
      if (a.first != b.first) return a.first < b.first;
      return before(a.second, b.second);
    };
    const std::ptrdiff_t qx = cell_x_unclamped(query.x), qy = cell_y_unclamped(query.y);
    // Chebyshev ring distances from the query cell to the nearest and the
    // farthest bucket of the grid.
    const std::ptrdiff_t r_min =
        std::max<std::ptrdiff_t>({0, -qx, qx - (nx_ - 1), -qy, qy - (ny_ - 1)});
    const std::ptrdiff_t r_max = std::max({std::abs(qx), std::abs(qx - (nx_ - 1)), std::abs(qy),
                                           std::abs(qy - (ny_ - 1))});
    for (std::ptrdiff_t r = r_min; r <= r_max; ++r) {
      visit_ring(qx, qy, r, [&](std::uint32_t idx) {
        if (idx == skip) return;
        best.emplace_back(squared_distance(points_[idx], query), idx);
      });
      if (best.size() >= k) {
        std::sort(best.begin(), best.end(), worse);
        best.resize(k);
        const double reach = static_cast<double>(r) * cell_;
        if (best.back().first < reach * reach) break;
      }
    }
    std::sort(best.begin(), best.end(), worse);
    if (best.size() > k) best.resize(k);
    std::vector<std::uint32_t> out;
    out.reserve(best.size());
    for (const auto& b : best) out.push_back(b.second);
    return out;
  }

  /// Nearest point to `query`; equal distances resolve to the lowest index.
  std::uint32_t nearest(const Point2& query) const {
    auto r = k_nearest(query, 1, std::numeric_limits<std::uint32_t>::max(),
                       [](std::uint32_t a, std::uint32_t b) { return a < b; });
    return r.front();
  }

 private:
  std::ptrdiff_t cell_x_unclamped(double x) const {
    return static_cast<std::ptrdiff_t>(std::floor((x - min_x_) / cell_));
  }
  std::ptrdiff_t cell_y_unclamped(double y) const {
    return static_cast<std::ptrdiff_t>(std::floor((y - min_y_) / cell_));
  }
  std::ptrdiff_t cell_x(double x) const {
    return std::clamp<std::ptrdiff_t>(cell_x_unclamped(x), 0, nx_ - 1);
  }
  std::ptrdiff_t cell_y(double y) const {
    return std::clamp<std::ptrdiff_t>(cell_y_unclamped(y), 0, ny_ - 1);
  }
  std::size_t cell_index(std::ptrdiff_t cx, std::ptrdiff_t cy) const {
    return static_cast<std::size_t>(cy * nx_ + cx);
  }

  template <class Fn>
  void visit_cell(std::ptrdiff_t cx, std::ptrdiff_t cy, Fn& fn) const {
    if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) return;
    const std::size_t c = cell_index(cx, cy);
    for (std::size_t i = start_[c]; i < start_[c + 1]; ++i) fn(items_[i]);
  }

  template <class Fn>
  void visit_ring(std::ptrdiff_t qx, std::ptrdiff_t qy, std::ptrdiff_t r, Fn fn) const {
    if (r == 0) {
      visit_cell(qx, qy, fn);
      return;
    }
    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(qx - r, 0);
    const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(qx + r, nx_ - 1);
    for (std::ptrdiff_t x = x0; x <= x1; ++x) {
      visit_cell(x, qy - r, fn);
      visit_cell(x, qy + r, fn);
    }
    const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(qy - r + 1, 0);
    const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(qy + r - 1, ny_ - 1);
    for (std::ptrdiff_t y = y0; y <= y1; ++y) {
      visit_cell(qx - r, y, fn);
      visit_cell(qx + r, y, fn);
    }
  }

  std::span<const Point2> points_;
  double min_x_ = 0, max_x_ = 0, min_y_ = 0, max_y_ = 0;
  double cell_ = 1.0;
  std::ptrdiff_t nx_ = 1, ny_ = 1;
  std::vector<std::size_t> start_;
  std::vector<std::uint32_t> items_;
};

}  // namespace graphfuse
