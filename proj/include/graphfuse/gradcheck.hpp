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
#include <functional>
#include <span>
#include <vector>

#include "graphfuse/autodiff.hpp"
#include "graphfuse/errors.hpp"
#include "graphfuse/tensor.hpp"

namespace graphfuse {

/// Builds a scalar loss on `tape` from the given parameter handles.
using Computation = std::function<ad::Var(ad::Tape& tape, std::span<const ad::Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients against central differences
/// (f(x + eps) - f(x - eps)) / (2 eps) for every parameter entry.
///
/// The relative error of an entry is |a - n| / max(|a|, |n|, scale_floor);
/// the floor keeps round-off on near-zero gradients from dominating.
inline GradCheckResult grad_check(const Computation& computation, std::vector<Tensor> params,
                                  double eps = 1e-6, double scale_floor = 1e-4) {
  detail::require(eps > 0.0, "grad_check: eps must be positive");

  auto evaluate = [&](const std::vector<Tensor>& values, bool with_grad,
                      std::vector<std::vector<double>>* grads) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    vars.reserve(values.size());
    for (const Tensor& v : values) {
      Tensor copy = v;
      copy.drop_grad();
      vars.push_back(with_grad ? tape.parameter(std::move(copy)) : tape.constant(std::move(copy)));
    }
    ad::Var loss = computation(tape, vars);
    const Tensor& out = tape.value(loss);
    if (out.size() != 1) throw ShapeError("grad_check: computation must return a scalar");
    const double f = out[0];
    if (!std::isfinite(f)) throw DivergenceError("grad_check: non-finite loss");
    if (with_grad) {
      tape.backward(loss);
      grads->clear();
      for (ad::Var v : vars) {
        auto g = tape.grad(v);
        if (g.empty()) {
          grads->emplace_back(tape.value(v).size(), 0.0);
        } else {
          grads->emplace_back(g.begin(), g.end());
        }
      }
    }
    return f;
  };

  std::vector<std::vector<double>> analytic;
  evaluate(params, true, &analytic);

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double original = params[p][i];
      params[p][i] = original + eps;
      const double up = evaluate(params, false, nullptr);
      params[p][i] = original - eps;
      const double down = evaluate(params, false, nullptr);
      params[p][i] = original;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      const double scale = std::max({std::abs(a), std::abs(numeric), scale_floor});
      const double err = std::abs(a - numeric) / scale;
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = p;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace graphfuse
