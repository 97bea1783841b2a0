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
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "graphfuse/errors.hpp"
#include "graphfuse/synth.hpp"

namespace graphfuse {
namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.height = 12;
  c.width = 10;
  c.phases = 4;
  c.confounded_pairs = 1;
  c.voronoi_seeds = 9;
  c.samples = 3;
  return c;
}

TEST(PhaseMap, SinglePhaseIsConstant) {
  Rng rng(1);
  const auto labels = generate_phase_map(8, 8, 1, 5, rng);
  for (auto l : labels) EXPECT_EQ(l, 0);
}

TEST(PhaseMap, LabelsMatchBruteForceNearestSeed) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t h = 5 + seed % 17, w = 4 + (seed * 3) % 19;
    const std::size_t phases = 1 + seed % 5, seeds = phases + seed % 11;
    Rng a(seed), b(seed);
    const auto placed = place_voronoi_seeds(h, w, phases, seeds, a);
    const auto labels = generate_phase_map(h, w, phases, seeds, b);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        double best = std::numeric_limits<double>::infinity();
        std::uint16_t want = 0;
        for (const VoronoiSeed& s : placed) {
          const double d = std::hypot(static_cast<double>(s.row) - static_cast<double>(r),
                                      static_cast<double>(s.col) - static_cast<double>(c));
          if (d < best) {
            best = d;
            want = s.phase;
          }
        }
        ASSERT_EQ(labels[r * w + c], want) << "seed " << seed << " pixel " << r << "," << c;
      }
    }
  }
}

TEST(PhaseMap, SeedsAreDistinctAndEveryPhaseAppears) {
  Rng rng(3);
  const auto placed = place_voronoi_seeds(16, 16, 6, 40, rng);
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& s : placed) cells.insert({s.row, s.col});
  EXPECT_EQ(cells.size(), 40u);
  const auto labels = label_voronoi(16, 16, placed);
  for (std::uint16_t k = 0; k < 6; ++k) {
    EXPECT_NE(std::find(labels.begin(), labels.end(), k), labels.end()) << "phase " << k;
  }
}

TEST(PhaseMap, SameRngStateGivesSameMap) {
  Rng a(77), b(77);
  EXPECT_EQ(generate_phase_map(20, 30, 6, 40, a), generate_phase_map(20, 30, 6, 40, b));
}

TEST(PhaseMap, TooFewSeedsIsRejected) {
  Rng rng(1);
  EXPECT_THROW(generate_phase_map(8, 8, 6, 5, rng), ContractViolation);
  EXPECT_THROW(generate_phase_map(2, 2, 1, 5, rng), ContractViolation);
}

TEST(Bse, ZeroNoiseReproducesMeans) {
  auto specs = default_phase_specs(3, 0, 0.0);
  const std::vector<std::uint16_t> labels{0, 1, 2, 2, 1, 0};
  Rng rng(1);
  const auto bse = render_bse(labels, specs, rng);
  for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(bse[i], specs[labels[i]].bse_mean);
}

TEST(Bse, ConfoundedPairsShareStatistics) {
  const auto specs = default_phase_specs(6, 2);
  EXPECT_EQ(specs[0].bse_mean, specs[1].bse_mean);
  EXPECT_EQ(specs[2].bse_mean, specs[3].bse_mean);
  EXPECT_EQ(specs[0].bse_sigma, specs[1].bse_sigma);
  std::set<double> levels;
  for (const auto& s : specs) levels.insert(s.bse_mean);
  EXPECT_EQ(levels.size(), 4u);
}

TEST(Bse, SampleMeanWithinThreeStandardErrors) {
  const auto specs = default_phase_specs(2, 0, 0.03);
  const std::vector<std::uint16_t> labels(1000, 1);
  Rng rng(5);
  const auto bse = render_bse(labels, specs, rng);
  const double mean = std::accumulate(bse.begin(), bse.end(), 0.0) / 1000.0;
  EXPECT_LE(std::abs(mean - specs[1].bse_mean), 3.0 * 0.03 / std::sqrt(1000.0));
  for (double v : bse) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Bse, UnknownLabelIsRejected) {
  const auto specs = default_phase_specs(2, 0);
  const std::vector<std::uint16_t> labels{0, 5};
  Rng rng(1);
  EXPECT_THROW(render_bse(labels, specs, rng), ContractViolation);
}

TEST(Spectrum, ExpectedCountsSumToExposureWithTruncatedSupport) {
  PhaseSpec s;
  s.peaks = {{100.0, 1.0, 5.0}, {2990.0, 0.5, 4.0}};
  const ExpectedSpectrum e = expected_spectrum(s, 750.0);
  EXPECT_NEAR(std::accumulate(e.mean.begin(), e.mean.end(), 0.0), 750.0, 1e-9);
  EXPECT_EQ(e.first, 70u);
  EXPECT_EQ(e.last, kSpectrumChannels);
  EXPECT_EQ(e.mean[69], 0.0);
  EXPECT_GT(e.mean[70], 0.0);
  EXPECT_EQ(e.mean[131], 0.0);
}

TEST(Spectrum, PoissonMomentsMatch) {
  for (double lambda : {0.7, 3.0, 29.5, 120.0}) {
    Rng rng(static_cast<std::uint64_t>(lambda * 10));
    const int n = 40000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = detail::poisson(lambda, rng);
      sum += k;
      sq += k * k;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_LE(std::abs(mean - lambda), 5.0 * std::sqrt(lambda / n)) << lambda;
    EXPECT_NEAR(var / lambda, 1.0, 0.05) << lambda;
  }
}

TEST(Spectrum, HighExposureConvergesToExpectation) {
  const auto specs = default_phase_specs(6, 2);
  const std::vector<std::uint16_t> labels{3};
  const auto raw = render_spectra(labels, specs, 1e6, 9);
  const auto got = reduce_spectrum(raw);
  const auto want = expected_reduced_spectrum(specs[3]);
  double l1 = 0.0;
  for (std::size_t b = 0; b < kSpectrumDim; ++b) l1 += std::abs(got[b] - want[b]);
  EXPECT_LT(l1, 0.01);
}

TEST(Spectrum, PixelsDrawIndependentlyButDeterministically) {
  const auto specs = default_phase_specs(2, 0);
  const std::vector<std::uint16_t> labels{0, 0, 1};
  const auto a = render_spectra(labels, specs, 500.0, 4);
  const auto b = render_spectra(labels, specs, 500.0, 4);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(std::equal(a.begin(), a.begin() + kSpectrumChannels, a.begin() + kSpectrumChannels));
  // A pixel's draw depends on its index, not on the other pixels.
  const std::vector<std::uint16_t> other{1, 0, 1};
  const auto c = render_spectra(other, specs, 500.0, 4);
  EXPECT_TRUE(std::equal(a.begin() + kSpectrumChannels, a.end(), c.begin() + kSpectrumChannels));
  for (double v : a) EXPECT_EQ(v, std::floor(v));
}

TEST(ReduceSpectrum, ZeroSpectrumStaysZero) {
  const std::vector<double> zero(kSpectrumChannels, 0.0);
  for (double v : reduce_spectrum(zero)) EXPECT_EQ(v, 0.0);
}

TEST(ReduceSpectrum, FlatSpectrumFollowsBinWidths) {
  const std::vector<double> ones(kSpectrumChannels, 1.0);
  const auto r = reduce_spectrum(ones);
  std::size_t total_width = 0;
  for (std::size_t b = 0; b < kSpectrumDim; ++b) {
    const std::size_t width = (b + 1) * 3000 / 64 - b * 3000 / 64;
    EXPECT_TRUE(width == 46 || width == 47);
    EXPECT_DOUBLE_EQ(r[b], static_cast<double>(width) / 3000.0);
    total_width += width;
  }
  EXPECT_EQ(total_width, 3000u);
  EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-12);
}

TEST(ReduceSpectrum, SingleCountLandsInFirstBin) {
  std::vector<double> s(kSpectrumChannels, 0.0);
  s[0] = 1.0;
  const auto r = reduce_spectrum(s);
  EXPECT_EQ(r[0], 1.0);
  for (std::size_t b = 1; b < kSpectrumDim; ++b) EXPECT_EQ(r[b], 0.0);
  s[0] = 0.0;
  s[2999] = 7.0;
  EXPECT_EQ(reduce_spectrum(s)[63], 1.0);
}

TEST(ReduceSpectrum, RandomCountsNormalize) {
  Rng rng(2);
  std::uniform_int_distribution<int> count(0, 50);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> s(kSpectrumChannels);
    for (double& v : s) v = count(rng);
    const auto r = reduce_spectrum(s);
    EXPECT_LE(std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0), 1e-12);
  }
}

TEST(ReduceSpectrum, RejectsBadInput) {
  std::vector<double> s(kSpectrumChannels, 1.0);
  s[1234] = -1.0;
  EXPECT_THROW(reduce_spectrum(s), ContractViolation);
  EXPECT_THROW(reduce_spectrum(std::vector<double>(10, 1.0)), ShapeError);
}

TEST(ConfoundedPairs, DefaultSpecsAreSeparable) {
  EXPECT_NO_THROW(check_confounded_pairs(default_phase_specs(6, 2)));
  EXPECT_NO_THROW(check_confounded_pairs(default_phase_specs(50, 25)));
}

TEST(ConfoundedPairs, IndistinguishablePairIsRejected) {
  auto specs = default_phase_specs(2, 1);
  specs[1].peaks = specs[0].peaks;
  specs[1].peaks[0].center += 1.0;
  EXPECT_THROW(check_confounded_pairs(specs), ConfigError);
}

TEST(EdsSampling, FractionEndpoints) {
  std::vector<std::uint8_t> valid(100, 1);
  valid[3] = valid[50] = 0;
  Rng rng(1);
  EXPECT_TRUE(sample_eds_pixels(valid, 0.0, rng).empty());
  const auto all = sample_eds_pixels(valid, 1.0, rng);
  EXPECT_EQ(all.size(), 98u);
  EXPECT_EQ(std::count(all.begin(), all.end(), 3u), 0);
}

TEST(EdsSampling, CountIsRoundedFractionOfValidPixels) {
  std::vector<std::uint8_t> valid(150 * 150, 1);
  Rng rng(2);
  EXPECT_EQ(sample_eds_pixels(valid, 0.01, rng).size(), 225u);
  std::vector<std::uint8_t> partial(10, 1);
  partial[0] = 0;
  EXPECT_EQ(sample_eds_pixels(partial, 0.5, rng).size(), 5u);  // round(4.5) = 5
}

TEST(EdsSampling, SortedDistinctAndValidOnly) {
  std::vector<std::uint8_t> valid(400, 1);
  for (std::size_t i = 0; i < 400; i += 7) valid[i] = 0;
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto chosen = sample_eds_pixels(valid, 0.3, rng);
    EXPECT_TRUE(std::is_sorted(chosen.begin(), chosen.end()));
    EXPECT_EQ(std::adjacent_find(chosen.begin(), chosen.end()), chosen.end());
    for (auto px : chosen) EXPECT_TRUE(valid[px]);
  }
}

TEST(EdsSampling, InclusionIsUniform) {
  const std::vector<std::uint8_t> valid(400, 1);
  std::vector<int> hits(400, 0);
  Rng rng(4);
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    for (auto px : sample_eds_pixels(valid, 0.1, rng)) ++hits[px];
  }
  const double mean = draws * 0.1, sd = std::sqrt(draws * 0.1 * 0.9);
  for (int h : hits) EXPECT_LE(std::abs(h - mean), 5.0 * sd);
}

TEST(EdsSampling, FractionOutsideUnitIntervalIsRejected) {
  const std::vector<std::uint8_t> valid(10, 1);
  Rng rng(1);
  EXPECT_THROW(sample_eds_pixels(valid, -0.1, rng), ContractViolation);
  EXPECT_THROW(sample_eds_pixels(valid, 1.5, rng), ContractViolation);
  EXPECT_THROW(sample_eds_pixels(valid, std::nan(""), rng), ContractViolation);
}

TEST(EdsSampling, PointsCarryPixelPositionAndSpectrum) {
  const Dataset d = generate_dataset(small_config(), 5);
  const Sample& s = d.samples[0];
  Rng rng(6);
  const PointSet pts = sample_eds_points(s, 0.2, rng);
  ASSERT_EQ(pts.size(), 24u);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto px = static_cast<std::size_t>(pts.point(i).y) * s.width +
                    static_cast<std::size_t>(pts.point(i).x);
    const auto want = s.spectrum(px);
    EXPECT_TRUE(std::equal(want.begin(), want.end(), pts.payload(i).begin()));
  }
}

TEST(Dataset, PureFunctionOfConfigAndSeed) {
  const GeneratorConfig c = small_config();
  const Dataset a = generate_dataset(c, 11);
  EXPECT_TRUE(a == generate_dataset(c, 11));
  EXPECT_FALSE(a == generate_dataset(c, 12));
  EXPECT_EQ(a.classes, 4u);
  ASSERT_EQ(a.samples.size(), 3u);
  for (const Sample& s : a.samples) {
    for (auto l : s.labels) EXPECT_LT(l, 4);
    for (std::size_t px = 0; px < s.pixels(); ++px) {
      const auto spec = s.spectrum(px);
      EXPECT_NEAR(std::accumulate(spec.begin(), spec.end(), 0.0), 1.0, 1e-12);
    }
  }
}

TEST(Dataset, EdgeStripPixelsAreInvalidAndEmpty) {
  GeneratorConfig c = small_config();
  c.validity = ValidityMode::kEdgeStrip;
  c.strip_width = 3;
  const Dataset d = generate_dataset(c, 2);
  const Sample& s = d.samples[1];
  for (std::size_t r = 0; r < s.height; ++r) {
    for (std::size_t col = 0; col < s.width; ++col) {
      const std::size_t px = r * s.width + col;
      EXPECT_EQ(s.validity[px], col < s.width - 3 ? 1 : 0);
      const auto spec = s.spectrum(px);
      const double total = std::accumulate(spec.begin(), spec.end(), 0.0);
      EXPECT_NEAR(total, s.validity[px] ? 1.0 : 0.0, 1e-12);
    }
  }
}

TEST(Dataset, ConfigValidation) {
  GeneratorConfig c = small_config();
  c.phases = 0;
  EXPECT_THROW(generate_dataset(c, 1), ConfigError);
  c = small_config();
  c.confounded_pairs = 3;
  EXPECT_THROW(generate_dataset(c, 1), ConfigError);
  c = small_config();
  c.exposure = -1.0;
  EXPECT_THROW(generate_dataset(c, 1), ConfigError);
  c = small_config();
  c.voronoi_seeds = 2;
  EXPECT_THROW(generate_dataset(c, 1), ConfigError);
}

TEST(Seeds, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(7, 0), derive_seed(8, 0));
}

}  // namespace
}  // namespace graphfuse
