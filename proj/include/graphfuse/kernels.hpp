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

// Value-level numeric kernels. The differentiable versions in autodiff.hpp
// call into these for their forward passes.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "graphfuse/errors.hpp"
#include "graphfuse/tensor.hpp"

namespace graphfuse {

/// Default negative-side slope of the attention nonlinearity.
inline constexpr double kLeakySlope = 0.2;

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<RowMatrix> as_matrix(std::span<double> data, std::size_t rows, std::size_t cols) {
  return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

inline Eigen::Map<const RowMatrix> as_matrix(std::span<const double> data, std::size_t rows,
                                             std::size_t cols) {
  return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

/// Picks the zero-skipping row kernel for sparse operands such as the
/// zero-padded node features.
inline bool mostly_zero(const Tensor& a) {
  std::size_t zeros = 0;
  for (double v : a.data()) zeros += v == 0.0;
  return 2 * zeros > a.size();
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape() + " x " + b.shape());
  }
  Tensor out(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  if (detail::mostly_zero(a)) {
    const std::size_t k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double* out_row = out.row(i).data();
      const double* a_row = a.row(i).data();
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a_row[p];
        if (aip == 0.0) continue;
        const double* b_row = b.row(p).data();
        for (std::size_t j = 0; j < n; ++j) out_row[j] += aip * b_row[j];
      }
    }
    return out;
  }
  detail::as_matrix(out.data(), out.rows(), out.cols()).noalias() =
      detail::as_matrix(a.data(), a.rows(), a.cols()) * detail::as_matrix(b.data(), b.rows(), b.cols());
  return out;
}

/// da += dc * b^T for row-major buffers; da is m x k, dc is m x n, b is k x n.
inline void matmul_grad_lhs(std::span<const double> dc, const Tensor& b, std::span<double> da,
                            std::size_t m) {
  const std::size_t k = b.rows(), n = b.cols();
  if (m == 0 || k == 0 || n == 0) return;
  detail::as_matrix(da, m, k).noalias() +=
      detail::as_matrix(dc, m, n) * detail::as_matrix(b.data(), k, n).transpose();
}

/// db += a^T * dc for row-major buffers; db is k x n, a is m x k, dc is m x n.
inline void matmul_grad_rhs(const Tensor& a, std::span<const double> dc, std::span<double> db,
                            std::size_t n) {
  const std::size_t m = a.rows(), k = a.cols();
  if (m == 0 || k == 0 || n == 0) return;
  if (detail::mostly_zero(a)) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* dc_row = dc.data() + i * n;
      const double* a_row = a.row(i).data();
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a_row[p];
        if (aip == 0.0) continue;
        double* db_row = db.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) db_row[j] += aip * dc_row[j];
      }
    }
    return;
  }
  detail::as_matrix(db, k, n).noalias() +=
      detail::as_matrix(a.data(), m, k).transpose() * detail::as_matrix(dc, m, n);
}

inline double leaky_relu(double x, double slope = kLeakySlope) { return x >= 0.0 ? x : slope * x; }

inline Tensor leaky_relu(const Tensor& x, double slope = kLeakySlope) {
  detail::require(slope > 0.0 && slope < 1.0, "leaky_relu: slope must lie in (0, 1)");
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = leaky_relu(x[i], slope);
  return out;
}

inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

inline Tensor elu(const Tensor& x) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = elu(x[i]);
  return out;
}

namespace detail {

inline void check_segments(std::span<const std::uint32_t> segments, std::size_t num_segments) {
  if (segments.empty()) throw ContractViolation("segment_softmax: empty segment set");
  std::vector<std::uint8_t> seen(num_segments, 0);
  for (auto s : segments) {
    if (s >= num_segments) {
      throw ContractViolation("segment_softmax: segment id " + std::to_string(s) +
                              " out of range " + std::to_string(num_segments));
    }
    seen[s] = 1;
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (!seen[s]) {
      throw ContractViolation("segment_softmax: segment " + std::to_string(s) + " has no entries");
    }
  }
}

}  // namespace detail

/// Column-wise softmax within segments: rows sharing a segment id are
/// normalized together, independently for each column.
inline Tensor segment_softmax(const Tensor& logits, std::span<const std::uint32_t> segments,
                              std::size_t num_segments) {
  if (segments.size() != logits.rows()) {
    throw ShapeError("segment_softmax: " + std::to_string(segments.size()) +
                     " segment ids for logits " + logits.shape());
  }
  detail::check_segments(segments, num_segments);
  const std::size_t cols = logits.cols();
  std::vector<double> peak(num_segments * cols, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < logits.rows(); ++e) {
    double* p = &peak[segments[e] * cols];
    for (std::size_t c = 0; c < cols; ++c) p[c] = std::max(p[c], logits(e, c));
  }
  std::vector<double> total(num_segments * cols, 0.0);
  Tensor out(logits.rows(), cols);
  for (std::size_t e = 0; e < logits.rows(); ++e) {
    const double* p = &peak[segments[e] * cols];
    double* t = &total[segments[e] * cols];
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = std::exp(logits(e, c) - p[c]);
      out(e, c) = v;
      t[c] += v;
    }
  }
  for (std::size_t e = 0; e < logits.rows(); ++e) {
    const double* t = &total[segments[e] * cols];
    for (std::size_t c = 0; c < cols; ++c) out(e, c) /= t[c];
  }
  return out;
}

/// Vector form: one logit per entry, segment count inferred as max id + 1.
inline std::vector<double> segment_softmax(std::span<const double> logits,
                                           std::span<const std::uint32_t> segments) {
  if (segments.empty()) throw ContractViolation("segment_softmax: empty segment set");
  std::uint32_t max_id = 0;
  for (auto s : segments) max_id = std::max(max_id, s);
  Tensor t(logits.size(), 1, std::vector<double>(logits.begin(), logits.end()));
  Tensor y = segment_softmax(t, segments, std::size_t{max_id} + 1);
  return {y.data().begin(), y.data().end()};
}

/// Mean over masked rows of -log softmax(row)[label].
inline double cross_entropy(const Tensor& logits, std::span<const std::uint16_t> labels,
                            std::span<const std::uint8_t> mask) {
  if (labels.size() != logits.rows() || mask.size() != logits.rows()) {
    throw ShapeError("cross_entropy: labels/mask length does not match logits " + logits.shape());
  }
  double loss = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    if (labels[i] >= logits.cols()) {
      throw ContractViolation("cross_entropy: label " + std::to_string(labels[i]) +
                              " out of range for " + std::to_string(logits.cols()) + " classes");
    }
    auto row = logits.row(i);
    double peak = row[0];
    for (double v : row) peak = std::max(peak, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - peak);
    loss += peak + std::log(sum) - row[labels[i]];
    ++count;
  }
  if (count == 0) throw ContractViolation("cross_entropy: mask selects no rows");
  return loss / static_cast<double>(count);
}

}  // namespace graphfuse
