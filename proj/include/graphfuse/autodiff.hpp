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

// Reverse-mode differentiation over a recorded tape.
//
// Every op appends one node holding its value and a closure that pushes the
// node's gradient into its inputs. `Tape::backward` replays the closures in
// reverse order. Nodes that do not depend on any tracked leaf carry no
// closure and no gradient buffer.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphfuse/errors.hpp"
#include "graphfuse/kernels.hpp"
#include "graphfuse/tensor.hpp"

namespace graphfuse::ad {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self)>;

  /// Untracked input; receives no gradient.
  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }

  /// Tracked leaf; its gradient is available after backward().
  Var parameter(Tensor value) {
    value.enable_grad();
    return push(std::move(value), true, nullptr);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool tracked(Var v) const { return nodes_.at(v.id).tracked; }

  /// Gradient of a tracked node; empty span for untracked nodes.
  std::span<const double> grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (!n.tracked) return {};
    return n.value.grad();
  }

  /// Mutable gradient buffer for op implementations.
  std::span<double> grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    n.value.enable_grad();
    return n.value.grad();
  }

  /// Records an op result. The closure is dropped when no input is tracked.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool tracked = false;
    for (Var in : inputs) tracked = tracked || nodes_.at(in.id).tracked;
    return push(std::move(value), tracked, tracked ? std::move(fn) : nullptr);
  }

  /// Seeds d(output)/d(output) = 1 and propagates to every tracked node.
  void backward(Var output) {
    const Tensor& out = value(output);
    if (out.size() != 1) {
      throw ShapeError("backward: output must be a scalar, got " + out.shape());
    }
    if (!tracked(output)) return;
    grad_buffer(output)[0] += 1.0;
    for (std::size_t i = output.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || !n.value.has_grad()) continue;
      n.backward(*this, Var{i});
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    bool tracked = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool tracked, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), tracked, std::move(fn)});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Ops

inline Var matmul(Tape& tape, Var a, Var b) {
  Tensor out = graphfuse::matmul(tape.value(a), tape.value(b));
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    auto dc = t.grad(self);
    if (t.tracked(a)) graphfuse::matmul_grad_lhs(dc, bv, t.grad_buffer(a), av.rows());
    if (t.tracked(b)) graphfuse::matmul_grad_rhs(av, dc, t.grad_buffer(b), bv.cols());
  });
}

inline Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv)) throw ShapeError("add: " + av.shape() + " vs " + bv.shape());
  Tensor out = av;
  out.drop_grad();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    auto g = t.grad(self);
    for (Var in : {a, b}) {
      if (!t.tracked(in)) continue;
      auto d = t.grad_buffer(in);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

/// Adds a 1 x cols row vector to every row of `a`.
inline Var add_row(Tape& tape, Var a, Var row) {
  const Tensor& av = tape.value(a);
  const Tensor& rv = tape.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: cannot broadcast " + rv.shape() + " onto " + av.shape());
  }
  Tensor out = av;
  out.drop_grad();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] += rv[c];
  }
  return tape.record(std::move(out), {a, row}, [a, row](Tape& t, Var self) {
    auto g = t.grad(self);
    const std::size_t cols = t.value(row).cols();
    if (t.tracked(a)) {
      auto d = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (t.tracked(row)) {
      auto d = t.grad_buffer(row);
      for (std::size_t i = 0; i < g.size(); i += cols) {
        for (std::size_t c = 0; c < cols; ++c) d[c] += g[i + c];
      }
    }
  });
}

inline Var hadamard(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (!av.same_shape(bv)) throw ShapeError("hadamard: " + av.shape() + " vs " + bv.shape());
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
    auto g = t.grad(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.tracked(a)) {
      auto d = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (t.tracked(b)) {
      auto d = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

inline Var scale(Tape& tape, Var a, double factor) {
  Tensor out = tape.value(a);
  out.drop_grad();
  for (auto& v : out.data()) v *= factor;
  return tape.record(std::move(out), {a}, [a, factor](Tape& t, Var self) {
    auto g = t.grad(self);
    auto d = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += factor * g[i];
  });
}

/// Sum of all entries as a 1 x 1 tensor.
inline Var sum(Tape& tape, Var a) {
  double total = 0.0;
  for (double v : tape.value(a).data()) total += v;
  return tape.record(Tensor(1, 1, total), {a}, [a](Tape& t, Var self) {
    const double g = t.grad(self)[0];
    for (auto& d : t.grad_buffer(a)) d += g;
  });
}

inline Var leaky_relu(Tape& tape, Var a, double slope = kLeakySlope) {
  Tensor out = graphfuse::leaky_relu(tape.value(a), slope);
  return tape.record(std::move(out), {a}, [a, slope](Tape& t, Var self) {
    auto g = t.grad(self);
    const Tensor& x = t.value(a);
    auto d = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += x[i] >= 0.0 ? g[i] : slope * g[i];
  });
}

inline Var elu(Tape& tape, Var a) {
  Tensor out = graphfuse::elu(tape.value(a));
  return tape.record(std::move(out), {a}, [a](Tape& t, Var self) {
    auto g = t.grad(self);
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(self);
    auto d = t.grad_buffer(a);
    // For x < 0, d/dx (e^x - 1) = y + 1.
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += x[i] >= 0.0 ? g[i] : g[i] * (y[i] + 1.0);
  });
}

/// Selects rows of `a` by index; rows may repeat.
inline Var gather_rows(Tape& tape, Var a, std::span<const std::uint32_t> index) {
  const Tensor& av = tape.value(a);
  const std::size_t cols = av.cols();
  Tensor out(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range for " +
                       av.shape());
    }
    auto src = av.row(index[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return tape.record(std::move(out), {a}, [a, idx = std::move(idx), cols](Tape& t, Var self) {
    auto g = t.grad(self);
    auto d = t.grad_buffer(a);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = d.data() + idx[i] * cols;
      const double* src = g.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

/// Column-wise softmax over rows grouped by `segments`.
inline Var segment_softmax(Tape& tape, Var logits, std::span<const std::uint32_t> segments,
                           std::size_t num_segments) {
  Tensor out = graphfuse::segment_softmax(tape.value(logits), segments, num_segments);
  std::vector<std::uint32_t> seg(segments.begin(), segments.end());
  return tape.record(
      std::move(out), {logits},
      [logits, seg = std::move(seg), num_segments](Tape& t, Var self) {
        const Tensor& y = t.value(self);
        auto g = t.grad(self);
        const std::size_t cols = y.cols();
        // dx_e = y_e * (g_e - sum_{e' in seg(e)} y_e' g_e')
        std::vector<double> dot(num_segments * cols, 0.0);
        for (std::size_t e = 0; e < y.rows(); ++e) {
          double* acc = &dot[seg[e] * cols];
          for (std::size_t c = 0; c < cols; ++c) acc[c] += y(e, c) * g[e * cols + c];
        }
        auto d = t.grad_buffer(logits);
        for (std::size_t e = 0; e < y.rows(); ++e) {
          const double* acc = &dot[seg[e] * cols];
          for (std::size_t c = 0; c < cols; ++c) {
            d[e * cols + c] += y(e, c) * (g[e * cols + c] - acc[c]);
          }
        }
      });
}

/// Per-head dot product: out[n, h] = sum_d a[n, h*D + d] * vec[h, d].
inline Var head_dot(Tape& tape, Var a, Var vec) {
  const Tensor& av = tape.value(a);
  const Tensor& vv = tape.value(vec);
  const std::size_t heads = vv.rows(), dim = vv.cols();
  if (av.cols() != heads * dim) {
    throw ShapeError("head_dot: " + av.shape() + " is not split by heads " + vv.shape());
  }
  Tensor out(av.rows(), heads);
  for (std::size_t n = 0; n < av.rows(); ++n) {
    const double* r = av.row(n).data();
    for (std::size_t h = 0; h < heads; ++h) {
      double acc = 0.0;
      for (std::size_t d = 0; d < dim; ++d) acc += r[h * dim + d] * vv(h, d);
      out(n, h) = acc;
    }
  }
  return tape.record(std::move(out), {a, vec}, [a, vec, heads, dim](Tape& t, Var self) {
    auto g = t.grad(self);
    const Tensor& av = t.value(a);
    const Tensor& vv = t.value(vec);
    if (t.tracked(a)) {
      auto d = t.grad_buffer(a);
      for (std::size_t n = 0; n < av.rows(); ++n) {
        for (std::size_t h = 0; h < heads; ++h) {
          const double gn = g[n * heads + h];
          for (std::size_t k = 0; k < dim; ++k) d[n * heads * dim + h * dim + k] += gn * vv(h, k);
        }
      }
    }
    if (t.tracked(vec)) {
      auto d = t.grad_buffer(vec);
      for (std::size_t n = 0; n < av.rows(); ++n) {
        const double* r = av.row(n).data();
        for (std::size_t h = 0; h < heads; ++h) {
          const double gn = g[n * heads + h];
          if (gn == 0.0) continue;
          for (std::size_t k = 0; k < dim; ++k) d[h * dim + k] += gn * r[h * dim + k];
        }
      }
    }
  });
}

/// Averages `heads` equal column blocks: N x (heads*D) -> N x D.
inline Var head_mean(Tape& tape, Var a, std::size_t heads) {
  const Tensor& av = tape.value(a);
  if (heads == 0 || av.cols() % heads != 0) {
    throw ShapeError("head_mean: " + av.shape() + " not divisible into " + std::to_string(heads) +
                     " heads");
  }
  const std::size_t dim = av.cols() / heads;
  const double inv = 1.0 / static_cast<double>(heads);
  Tensor out(av.rows(), dim);
  for (std::size_t n = 0; n < av.rows(); ++n) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t d = 0; d < dim; ++d) out(n, d) += av(n, h * dim + d);
    }
    for (std::size_t d = 0; d < dim; ++d) out(n, d) *= inv;
  }
  return tape.record(std::move(out), {a}, [a, heads, dim, inv](Tape& t, Var self) {
    auto g = t.grad(self);
    auto d = t.grad_buffer(a);
    const std::size_t rows = g.size() / dim;
    for (std::size_t n = 0; n < rows; ++n) {
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t k = 0; k < dim; ++k) d[n * heads * dim + h * dim + k] += inv * g[n * dim + k];
      }
    }
  });
}

/// Attention-weighted message sum.
///
/// For each directed edge e = (src -> dst) and head h:
///   out[dst, h*D + d] += alpha[e, h] * values[src, h*D + d].
inline Var attention_aggregate(Tape& tape, Var alpha, Var values,
                               std::span<const std::uint32_t> src,
                               std::span<const std::uint32_t> dst, std::size_t num_nodes) {
  const Tensor& al = tape.value(alpha);
  const Tensor& vals = tape.value(values);
  const std::size_t heads = al.cols();
  if (src.size() != al.rows() || dst.size() != al.rows()) {
    throw ShapeError("attention_aggregate: edge arrays do not match alpha " + al.shape());
  }
  if (heads == 0 || vals.cols() % heads != 0) {
    throw ShapeError("attention_aggregate: values " + vals.shape() + " not split into " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t dim = vals.cols() / heads;
  const std::size_t width = vals.cols();
  Tensor out(num_nodes, width);
  for (std::size_t e = 0; e < src.size(); ++e) {
    if (src[e] >= vals.rows() || dst[e] >= num_nodes) {
      throw ShapeError("attention_aggregate: edge " + std::to_string(e) + " out of range");
    }
    const double* v = vals.row(src[e]).data();
    double* o = out.row(dst[e]).data();
    for (std::size_t h = 0; h < heads; ++h) {
      const double w = al(e, h);
      for (std::size_t d = 0; d < dim; ++d) o[h * dim + d] += w * v[h * dim + d];
    }
  }
  std::vector<std::uint32_t> s(src.begin(), src.end());
  std::vector<std::uint32_t> r(dst.begin(), dst.end());
  return tape.record(
      std::move(out), {alpha, values},
      [alpha, values, s = std::move(s), r = std::move(r), heads, dim, width](Tape& t, Var self) {
        auto g = t.grad(self);
        const Tensor& al = t.value(alpha);
        const Tensor& vals = t.value(values);
        const bool want_alpha = t.tracked(alpha), want_values = t.tracked(values);
        std::span<double> da, dv;
        if (want_alpha) da = t.grad_buffer(alpha);
        if (want_values) dv = t.grad_buffer(values);
        for (std::size_t e = 0; e < s.size(); ++e) {
          const double* v = vals.row(s[e]).data();
          const double* go = g.data() + r[e] * width;
          double* dv_row = want_values ? dv.data() + s[e] * width : nullptr;
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dim;
            if (want_alpha) {
              double acc = 0.0;
              for (std::size_t k = 0; k < dim; ++k) acc += go[off + k] * v[off + k];
              da[e * heads + h] += acc;
            }
            if (want_values) {
              const double w = al(e, h);
              for (std::size_t k = 0; k < dim; ++k) dv_row[off + k] += w * go[off + k];
            }
          }
        }
      });
}

/// Masked mean cross-entropy of row-wise softmax against integer labels.
inline Var cross_entropy(Tape& tape, Var logits, std::span<const std::uint16_t> labels,
                         std::span<const std::uint8_t> mask) {
  const double loss = graphfuse::cross_entropy(tape.value(logits), labels, mask);
  std::vector<std::uint16_t> lab(labels.begin(), labels.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  return tape.record(
      Tensor(1, 1, loss), {logits},
      [logits, lab = std::move(lab), msk = std::move(msk)](Tape& t, Var self) {
        const double g = t.grad(self)[0];
        const Tensor& x = t.value(logits);
        std::size_t count = 0;
        for (auto m : msk) count += m ? 1 : 0;
        const double w = g / static_cast<double>(count);
        auto d = t.grad_buffer(logits);
        const std::size_t cols = x.cols();
        for (std::size_t i = 0; i < x.rows(); ++i) {
          if (!msk[i]) continue;
          auto row = x.row(i);
          double peak = row[0];
          for (double v : row) peak = std::max(peak, v);
          double total = 0.0;
          for (double v : row) total += std::exp(v - peak);
          for (std::size_t c = 0; c < cols; ++c) {
            const double p = std::exp(row[c] - peak) / total;
            d[i * cols + c] += w * (p - (c == lab[i] ? 1.0 : 0.0));
          }
        }
      });
}

}  // namespace graphfuse::ad
