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

// Synthetic SEM samples: Voronoi phase maps, noisy grey-level images and
// photon-count spectra, plus the channel binning that reduces a spectrum to
// the 64-value node payload.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "graphfuse/errors.hpp"
#include "graphfuse/graph.hpp"

namespace graphfuse {

using Rng = std::mt19937_64;

inline constexpr std::size_t kSpectrumChannels = 3000;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent child seed for stream `index` of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
}

struct Peak {
  double center = 0.0;  // channel
  double amplitude = 1.0;
  double width = 6.0;  // Gaussian standard deviation in channels
};

struct PhaseSpec {
  std::uint16_t id = 0;
  double bse_mean = 0.5;
  double bse_sigma = 0.03;
  std::vector<Peak> peaks;

  void validate() const {
    const std::string who = "phase " + std::to_string(id);
    if (!(bse_mean >= 0.0 && bse_mean <= 1.0)) throw ConfigError(who + ": BSE mean outside [0, 1]");
    if (!(bse_sigma >= 0.0)) throw ConfigError(who + ": negative BSE sigma");
    if (peaks.empty()) throw ConfigError(who + ": needs at least one spectral peak");
    for (const Peak& p : peaks) {
      if (!(p.center >= 0.0 && p.center < static_cast<double>(kSpectrumChannels))) {
        throw ConfigError(who + ": peak center " + std::to_string(p.center) + " out of range");
      }
      if (!(p.amplitude > 0.0)) throw ConfigError(who + ": peak amplitude must be positive");
      if (!(p.width > 0.0)) throw ConfigError(who + ": peak width must be positive");
    }
  }
};

enum class ValidityMode { kAllValid, kEdgeStrip };

struct GeneratorConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t phases = 6;
  std::size_t confounded_pairs = 2;
  std::size_t voronoi_seeds = 40;
  double exposure = 500.0;
  std::size_t samples = 200;
  double bse_sigma = 0.03;
  double peak_width = 6.0;
  ValidityMode validity = ValidityMode::kAllValid;
  std::size_t strip_width = 4;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;

  void validate() const {
    if (height == 0 || width == 0) throw ConfigError("generator: image must be non-empty");
    if (height * width > std::numeric_limits<std::uint32_t>::max() / 2) {
      throw ConfigError("generator: image too large");
    }
    if (phases == 0 || phases > 65535) throw ConfigError("generator: phases must be in [1, 65535]");
    if (2 * confounded_pairs > phases) {
      throw ConfigError("generator: " + std::to_string(confounded_pairs) +
                        " confounded pairs need at least " + std::to_string(2 * confounded_pairs) +
                        " phases");
    }
    if (voronoi_seeds < phases) throw ConfigError("generator: fewer Voronoi seeds than phases");
    if (voronoi_seeds > height * width) throw ConfigError("generator: more Voronoi seeds than pixels");
    if (!(exposure > 0.0) || !std::isfinite(exposure)) {
      throw ConfigError("generator: exposure must be positive");
    }
    if (!(bse_sigma >= 0.0)) throw ConfigError("generator: negative BSE sigma");
    if (!(peak_width > 0.0)) throw ConfigError("generator: peak width must be positive");
    if (validity == ValidityMode::kEdgeStrip && (strip_width == 0 || strip_width >= width)) {
      throw ConfigError("generator: strip width must be in [1, width)");
    }
  }
};

/// Benchmark phases: confounded pairs (2i, 2i+1) share their grey level and
/// differ only in their spectra; the remaining phases get their own levels.
/// Levels are spread evenly over [0.15, 0.85].
inline std::vector<PhaseSpec> default_phase_specs(std::size_t phases, std::size_t pairs,
                                                  double bse_sigma = 0.03,
                                                  double peak_width = 6.0) {
  detail::require(phases >= 1 && 2 * pairs <= phases, "default_phase_specs: bad phase counts");
  const std::size_t levels = phases - pairs;
  const double step = 2760.0 / static_cast<double>(phases);
  std::vector<PhaseSpec> out;
  for (std::size_t k = 0; k < phases; ++k) {
    const std::size_t level = k < 2 * pairs ? k / 2 : k - pairs;
    PhaseSpec s;
    s.id = static_cast<std::uint16_t>(k);
    s.bse_mean = levels == 1 ? 0.5
                             : 0.15 + 0.7 * static_cast<double>(level) /
                                          static_cast<double>(levels - 1);
    s.bse_sigma = bse_sigma;
    const double main = 120.0 + step * static_cast<double>(k);
    const double minor = 120.0 + step * static_cast<double>((k + phases / 2) % phases) + step / 2;
    s.peaks.push_back({main, 1.0, peak_width});
    if (phases > 1) s.peaks.push_back({minor, 0.4, peak_width});
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

inline const PhaseSpec& spec_for(std::span<const PhaseSpec> specs, std::uint16_t label) {
  for (const PhaseSpec& s : specs) {
    if (s.id == label) return s;
  }
  throw ContractViolation("no phase spec for label " + std::to_string(label));
}

}  // namespace detail

struct VoronoiSeed {
  std::size_t row = 0;
  std::size_t col = 0;
  std::uint16_t phase = 0;
};

/// `seeds` distinct random pixel centres; the first `phases` seeds take
/// phases 0..phases-1, so every phase owns at least its seed pixel, and the
/// rest draw a phase uniformly.
inline std::vector<VoronoiSeed> place_voronoi_seeds(std::size_t height, std::size_t width,
                                                    std::size_t phases, std::size_t seeds,
                                                    Rng& rng) {
  if (phases == 0) throw ContractViolation("generate_phase_map: need at least one phase");
  if (seeds < phases) {
    throw ContractViolation("generate_phase_map: " + std::to_string(seeds) + " seeds for " +
                            std::to_string(phases) + " phases");
  }
  const std::size_t pixels = height * width;
  if (seeds > pixels) throw ContractViolation("generate_phase_map: more seeds than pixels");

  std::vector<std::uint32_t> cells(pixels);
  for (std::size_t i = 0; i < pixels; ++i) cells[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < seeds; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pixels - 1);
    std::swap(cells[i], cells[pick(rng)]);
  }
  std::uniform_int_distribution<std::size_t> any_phase(0, phases - 1);
  std::vector<VoronoiSeed> out(seeds);
  for (std::size_t s = 0; s < seeds; ++s) {
    out[s].row = cells[s] / width;
    out[s].col = cells[s] % width;
    out[s].phase = static_cast<std::uint16_t>(s < phases ? s : any_phase(rng));
  }
  return out;
}

/// Label of the nearest seed per pixel; equal distances go to the seed
/// listed first.
inline std::vector<std::uint16_t> label_voronoi(std::size_t height, std::size_t width,
                                                std::span<const VoronoiSeed> seeds) {
  detail::require(!seeds.empty(), "label_voronoi: no seeds");
  std::vector<std::uint16_t> labels(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      std::size_t owner = 0;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto dr = static_cast<std::int64_t>(seeds[s].row) - static_cast<std::int64_t>(r);
        const auto dc = static_cast<std::int64_t>(seeds[s].col) - static_cast<std::int64_t>(c);
        const std::int64_t d = dr * dr + dc * dc;
        if (d < best) {
          best = d;
          owner = s;
        }
      }
      labels[r * width + c] = seeds[owner].phase;
    }
  }
  return labels;
}

/// Voronoi grain map over `seeds` random seed pixels.
inline std::vector<std::uint16_t> generate_phase_map(std::size_t height, std::size_t width,
                                                     std::size_t phases, std::size_t seeds,
                                                     Rng& rng) {
  const auto placed = place_voronoi_seeds(height, width, phases, seeds, rng);
  return label_voronoi(height, width, placed);
}

/// Grey level per pixel: clamp(mean + N(0, sigma), 0, 1).
inline std::vector<double> render_bse(std::span<const std::uint16_t> labels,
                                      std::span<const PhaseSpec> specs, Rng& rng) {
  std::vector<double> out(labels.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const PhaseSpec& s = detail::spec_for(specs, labels[i]);
    const double z = noise(rng);
    out[i] = std::clamp(s.bse_mean + s.bse_sigma * z, 0.0, 1.0);
  }
  return out;
}

/// Mean photon counts per channel for one phase. Peaks are cut at six
/// widths, and the spectrum is scaled so all channels sum to `exposure`.
struct ExpectedSpectrum {
  std::vector<double> mean;  // kSpectrumChannels entries
  std::size_t first = 0;     // support is [first, last)
  std::size_t last = 0;
};

inline ExpectedSpectrum expected_spectrum(const PhaseSpec& spec, double exposure) {
  spec.validate();
  if (!(exposure > 0.0)) throw ContractViolation("expected_spectrum: exposure must be positive");
  ExpectedSpectrum out;
  out.mean.assign(kSpectrumChannels, 0.0);
  out.first = kSpectrumChannels;
  for (const Peak& p : spec.peaks) {
    const double reach = 6.0 * p.width;
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(p.center - reach)));
    const auto hi = static_cast<std::size_t>(
        std::min(static_cast<double>(kSpectrumChannels - 1), std::floor(p.center + reach)));
    for (std::size_t c = lo; c <= hi; ++c) {
      const double z = (static_cast<double>(c) - p.center) / p.width;
      out.mean[c] += p.amplitude * std::exp(-0.5 * z * z);
    }
    out.first = std::min(out.first, lo);
    out.last = std::max(out.last, hi + 1);
  }
  double total = 0.0;
  for (double v : out.mean) total += v;
  for (double& v : out.mean) v *= exposure / total;
  return out;
}

namespace detail {

inline std::uint32_t poisson(double lambda, Rng& rng) {
  if (lambda <= 0.0) return 0;
  if (lambda < 30.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double p = std::exp(-lambda);
    double cdf = p;
    std::uint32_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= lambda / k;
      cdf += p;
    }
    return k;
  }
  std::poisson_distribution<std::uint32_t> dist(lambda);
  return dist(rng);
}

}  // namespace detail

/// Poisson counts for one pixel. `out` must hold kSpectrumChannels entries;
/// the draw is a function of (seed, pixel) only.
inline void draw_pixel_spectrum(const ExpectedSpectrum& expected, std::uint64_t seed,
                                std::size_t pixel, std::span<double> out) {
  if (out.size() != kSpectrumChannels) {
    throw ShapeError("draw_pixel_spectrum: buffer has " + std::to_string(out.size()) + " channels");
  }
  std::fill(out.begin(), out.end(), 0.0);
  Rng rng(derive_seed(seed, pixel));
  for (std::size_t c = expected.first; c < expected.last; ++c) {
    out[c] = static_cast<double>(detail::poisson(expected.mean[c], rng));
  }
}

/// Raw counts for every pixel, row-major, kSpectrumChannels per pixel.
inline std::vector<double> render_spectra(std::span<const std::uint16_t> labels,
                                          std::span<const PhaseSpec> specs, double exposure,
                                          std::uint64_t seed) {
  if (!(exposure > 0.0)) throw ContractViolation("render_spectra: exposure must be positive");
  std::vector<ExpectedSpectrum> cache;
  std::vector<std::uint16_t> cached_id;
  std::vector<double> out(labels.size() * kSpectrumChannels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t slot = 0;
    while (slot < cached_id.size() && cached_id[slot] != labels[i]) ++slot;
    if (slot == cached_id.size()) {
      cache.push_back(expected_spectrum(detail::spec_for(specs, labels[i]), exposure));
      cached_id.push_back(labels[i]);
    }
    draw_pixel_spectrum(cache[slot], seed, i,
                        std::span<double>(out).subspan(i * kSpectrumChannels, kSpectrumChannels));
  }
  return out;
}

/// Sums the channels of 64 contiguous bins, bin b covering
/// [floor(b*3000/64), floor((b+1)*3000/64)), then L1-normalises.
inline std::vector<double> reduce_spectrum(std::span<const double> spectrum) {
  if (spectrum.size() != kSpectrumChannels) {
    throw ShapeError("reduce_spectrum: expected " + std::to_string(kSpectrumChannels) +
                     " channels, got " + std::to_string(spectrum.size()));
  }
  std::vector<double> out(kSpectrumDim, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < kSpectrumDim; ++b) {
    const std::size_t lo = b * kSpectrumChannels / kSpectrumDim;
    const std::size_t hi = (b + 1) * kSpectrumChannels / kSpectrumDim;
    double acc = 0.0;
    for (std::size_t c = lo; c < hi; ++c) {
      if (spectrum[c] < 0.0) {
        throw ContractViolation("reduce_spectrum: negative count in channel " + std::to_string(c));
      }
      acc += spectrum[c];
    }
    out[b] = acc;
    total += acc;
  }
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
  return out;
}

/// Mean reduced spectrum of a phase (used to verify confounded pairs).
inline std::vector<double> expected_reduced_spectrum(const PhaseSpec& spec) {
  return reduce_spectrum(expected_spectrum(spec, 1.0).mean);
}

/// Every pair of phases with identical grey-level statistics must differ
/// by at least `min_l1` in expected reduced spectrum.
inline void check_confounded_pairs(std::span<const PhaseSpec> specs, double min_l1 = 0.1) {
  for (std::size_t a = 0; a < specs.size(); ++a) {
    for (std::size_t b = a + 1; b < specs.size(); ++b) {
      if (specs[a].bse_mean != specs[b].bse_mean || specs[a].bse_sigma != specs[b].bse_sigma) {
        continue;
      }
      const auto ra = expected_reduced_spectrum(specs[a]);
      const auto rb = expected_reduced_spectrum(specs[b]);
      double l1 = 0.0;
      for (std::size_t k = 0; k < ra.size(); ++k) l1 += std::abs(ra[k] - rb[k]);
      if (l1 < min_l1) {
        throw ConfigError("phases " + std::to_string(specs[a].id) + " and " +
                          std::to_string(specs[b].id) +
                          " share BSE statistics but their spectra differ by only " +
                          std::to_string(l1) + " in L1");
      }
    }
  }
}

/// One synthetic measurement. Spectra are stored reduced, 64 values per
/// pixel; invalid pixels have all-zero spectra.
struct Sample {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> bse;
  std::vector<double> spectra;
  std::vector<std::uint16_t> labels;
  std::vector<std::uint8_t> validity;

  std::size_t pixels() const noexcept { return height * width; }
  std::span<const double> spectrum(std::size_t pixel) const {
    return std::span<const double>(spectra).subspan(pixel * kSpectrumDim, kSpectrumDim);
  }

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  GeneratorConfig config;
  std::uint64_t seed = 0;
  std::size_t classes = 0;
  std::vector<Sample> samples;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline std::vector<std::uint8_t> make_validity(const GeneratorConfig& config) {
  std::vector<std::uint8_t> mask(config.height * config.width, 1);
  if (config.validity == ValidityMode::kEdgeStrip) {
    for (std::size_t r = 0; r < config.height; ++r) {
      for (std::size_t c = config.width - config.strip_width; c < config.width; ++c) {
        mask[r * config.width + c] = 0;
      }
    }
  }
  return mask;
}

inline Sample generate_sample(const GeneratorConfig& config, std::span<const PhaseSpec> specs,
                              std::uint64_t sample_seed) {
  Sample s;
  s.height = config.height;
  s.width = config.width;
  Rng map_rng(derive_seed(sample_seed, 1));
  s.labels = generate_phase_map(config.height, config.width, config.phases,
                                config.voronoi_seeds, map_rng);
  Rng bse_rng(derive_seed(sample_seed, 2));
  s.bse = render_bse(s.labels, specs, bse_rng);
  s.validity = make_validity(config);

  std::vector<ExpectedSpectrum> expected;
  for (std::size_t k = 0; k < config.phases; ++k) {
    expected.push_back(
        expected_spectrum(detail::spec_for(specs, static_cast<std::uint16_t>(k)), config.exposure));
  }
  const std::uint64_t spectra_seed = derive_seed(sample_seed, 3);
  s.spectra.assign(s.pixels() * kSpectrumDim, 0.0);
  std::vector<double> raw(kSpectrumChannels);
  for (std::size_t i = 0; i < s.pixels(); ++i) {
    if (!s.validity[i]) continue;
    draw_pixel_spectrum(expected[s.labels[i]], spectra_seed, i, raw);
    const auto reduced = reduce_spectrum(raw);
    std::copy(reduced.begin(), reduced.end(), s.spectra.begin() + i * kSpectrumDim);
  }
  return s;
}

/// Pure function of (config, seed).
inline Dataset generate_dataset(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  const auto specs =
      default_phase_specs(config.phases, config.confounded_pairs, config.bse_sigma,
                          config.peak_width);
  for (const PhaseSpec& s : specs) s.validate();
  check_confounded_pairs(specs);
  Dataset d;
  d.config = config;
  d.seed = seed;
  d.classes = config.phases;
  d.samples.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    d.samples.push_back(generate_sample(config, specs, derive_seed(seed, i)));
  }
  return d;
}

/// Draws round(fraction * valid_count) distinct valid pixels uniformly
/// without replacement; returned pixel indices are ascending.
inline std::vector<std::uint32_t> sample_eds_pixels(std::span<const std::uint8_t> validity,
                                                    double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractViolation("sample_eds_points: fraction " + std::to_string(fraction) +
                            " outside [0, 1]");
  }
  std::vector<std::uint32_t> pool;
  for (std::size_t i = 0; i < validity.size(); ++i) {
    if (validity[i]) pool.push_back(static_cast<std::uint32_t>(i));
  }
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Spectral point set for a sample: chosen pixel centres (x = column,
/// y = row) carrying their reduced spectra.
inline PointSet sample_eds_points(const Sample& sample, double fraction, Rng& rng) {
  const auto chosen = sample_eds_pixels(sample.validity, fraction, rng);
  std::vector<Point2> points;
  std::vector<double> payloads;
  points.reserve(chosen.size());
  payloads.reserve(chosen.size() * kSpectrumDim);
  for (std::uint32_t px : chosen) {
    points.push_back({static_cast<double>(px % sample.width), static_cast<double>(px / sample.width)});
    const auto spec = sample.spectrum(px);
    payloads.insert(payloads.end(), spec.begin(), spec.end());
  }
  return PointSet(std::move(points), std::move(payloads));
}

}  // namespace graphfuse
