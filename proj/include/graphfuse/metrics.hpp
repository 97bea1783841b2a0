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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "graphfuse/errors.hpp"

namespace graphfuse {

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), cells_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return cells_[truth * classes_ + predicted];
  }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1) {
    if (truth >= classes_ || predicted >= classes_) {
      throw ContractViolation("confusion matrix: class (" + std::to_string(truth) + ", " +
                              std::to_string(predicted) + ") outside " +
                              std::to_string(classes_) + " classes");
    }
    cells_[truth * classes_ + predicted] += count;
  }
  void merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw ShapeError("confusion matrix: class count mismatch");
    for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
  }

  std::uint64_t row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
    return s;
  }
  std::uint64_t col_sum(std::size_t predicted) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < classes_; ++t) s += at(t, predicted);
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : cells_) s += c;
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t k = 0; k < classes_; ++k) s += at(k, k);
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> cells_;
};

/// Counts valid pixels only.
inline void accumulate_confusion(ConfusionMatrix& cm, std::span<const std::uint16_t> predicted,
                                 std::span<const std::uint16_t> truth,
                                 std::span<const std::uint8_t> validity) {
  if (predicted.size() != truth.size() || validity.size() != truth.size()) {
    throw ShapeError("accumulate_confusion: prediction, truth and mask sizes differ");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (validity[i]) cm.add(truth[i], predicted[i]);
  }
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;    // ground-truth pixels
  std::uint64_t predicted = 0;  // predicted pixels
};

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t classes_counted = 0;
};

inline std::vector<ClassScores> class_scores(const ConfusionMatrix& cm) {
  std::vector<ClassScores> out(cm.classes());
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    ClassScores& s = out[k];
    s.support = cm.row_sum(k);
    s.predicted = cm.col_sum(k);
    const auto tp = static_cast<double>(cm.at(k, k));
    s.precision = s.predicted ? tp / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                                        : 0.0;
  }
  return out;
}

/// Unweighted means over classes that occur in the ground truth or in the
/// prediction. An empty matrix scores zero.
inline MacroScores macro_scores(const ConfusionMatrix& cm) {
  MacroScores m;
  for (const ClassScores& s : class_scores(cm)) {
    if (s.support == 0 && s.predicted == 0) continue;
    m.precision += s.precision;
    m.recall += s.recall;
    m.f1 += s.f1;
    ++m.classes_counted;
  }
  if (m.classes_counted) {
    const auto n = static_cast<double>(m.classes_counted);
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
  }
  return m;
}

struct Metrics {
  double fraction = 0.0;
  std::size_t samples = 0;
  std::uint64_t pixels = 0;
  ConfusionMatrix confusion;
  std::vector<ClassScores> per_class;
  MacroScores pooled;       // macro scores of the summed confusion matrix
  MacroScores sample_mean;  // macro scores per sample, averaged over samples
  double accuracy = 0.0;

  /// The score used for model selection and reporting.
  double macro_f1() const noexcept { return sample_mean.f1; }
};

inline Metrics summarize_metrics(const std::vector<ConfusionMatrix>& per_sample, double fraction,
                                 std::size_t classes) {
  Metrics m;
  m.fraction = fraction;
  m.samples = per_sample.size();
  m.confusion = ConfusionMatrix(classes);
  for (const ConfusionMatrix& cm : per_sample) {
    m.confusion.merge(cm);
    const MacroScores s = macro_scores(cm);
    m.sample_mean.precision += s.precision;
    m.sample_mean.recall += s.recall;
    m.sample_mean.f1 += s.f1;
  }
  if (!per_sample.empty()) {
    const auto n = static_cast<double>(per_sample.size());
    m.sample_mean.precision /= n;
    m.sample_mean.recall /= n;
    m.sample_mean.f1 /= n;
  }
  m.per_class = class_scores(m.confusion);
  m.pooled = macro_scores(m.confusion);
  m.sample_mean.classes_counted = m.pooled.classes_counted;
  m.pixels = m.confusion.total();
  m.accuracy = m.pixels ? static_cast<double>(m.confusion.trace()) / static_cast<double>(m.pixels)
                        : 0.0;
  return m;
}

}  // namespace graphfuse
