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

// File formats: binary dataset and checkpoint containers, text graph dumps,
// key = value run configuration, CSV/JSON reports.
//
// Binary layout is little-endian throughout. Dataset container:
//
//   "GFUSE1"  u32 version  u64 height  u64 width  u64 classes  u64 samples
//   u64 n + n bytes of generator config echo   u64 seed
//   per sample: f64 bse[H*W]  f64 spectra[H*W*64]  u16 labels[H*W]
//               u8 validity bitmask[ceil(H*W/8)], bit i%8 of byte i/8
//
// Checkpoint:
//
//   "GFCKPT"  u32 version  u64 layers hidden heads in_dim classes
//   u64 tensor count, per tensor: u64 rows  u64 cols  f64 data[rows*cols]
//   u64 n + n bytes of run config echo   f64 best val macro-F1  u64 best epoch

#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphfuse/errors.hpp"
#include "graphfuse/gat.hpp"
#include "graphfuse/graph.hpp"
#include "graphfuse/metrics.hpp"
#include "graphfuse/synth.hpp"
#include "graphfuse/trainer.hpp"

namespace graphfuse {

inline constexpr std::string_view kDatasetMagic = "GFUSE1";
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "GFCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Atomic file output

/// Writes via `<path>.tmp` and renames over `path`, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& produce) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    try {
      produce(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u16(std::uint16_t v) { little(v, 2); }
  void u32(std::uint32_t v) { little(v, 4); }
  void u64(std::uint64_t v) { little(v, 8); }
  void f64(double v) { little(std::bit_cast<std::uint64_t>(v), 8); }
  void string(std::string_view s) {
    u64(s.size());
    bytes(s);
  }
  void f64s(std::span<const double> vs) {
    buffer_.resize(vs.size() * 8);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(vs[i]);
      for (int b = 0; b < 8; ++b) buffer_[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  }

 private:
  void little(std::uint64_t v, int n) {
    char b[8];
    for (int i = 0; i < n; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(b, n);
  }

  std::ostream& out_;
  std::vector<char> buffer_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Sample whose data is being read; -1 while in a header.
  void set_sample(std::ptrdiff_t s) { sample_ = s; }
  std::uint64_t offset() const noexcept { return offset_; }

  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(little(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(little(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(little(4)); }
  std::uint64_t u64() { return little(8); }
  double f64() { return std::bit_cast<double>(little(8)); }
  std::string string(std::uint64_t limit = 1 << 24) {
    const std::uint64_t n = u64();
    if (n > limit) fail("string length " + std::to_string(n) + " is implausible");
    return bytes(static_cast<std::size_t>(n));
  }
  void f64s(std::span<double> out) {
    buffer_.resize(out.size() * 8);
    read(buffer_.data(), buffer_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buffer_[i * 8 + b])) << (8 * b);
      }
      out[i] = std::bit_cast<double>(bits);
    }
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": " + what + " at byte " + std::to_string(offset_));
  }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    offset_ += got;
    if (got != n) {
      const std::string where =
          sample_ < 0 ? std::string("header") : "sample " + std::to_string(sample_);
      throw TruncationError(source_ + ": file truncated in " + where + " at byte " +
                                std::to_string(offset_),
                            sample_);
    }
  }
  std::uint64_t little(int n) {
    char b[8];
    read(b, static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }

  std::istream& in_;
  std::string source_;
  std::ptrdiff_t sample_ = -1;
  std::uint64_t offset_ = 0;
  std::vector<char> buffer_;
};

inline void check_magic(BinaryReader& r, std::string_view magic, std::uint32_t version) {
  const std::string got = r.bytes(magic.size());
  if (got != magic) r.fail("bad magic, expected \"" + std::string(magic) + "\"");
  const std::uint32_t v = r.u32();
  if (v != version) {
    throw VersionError("unsupported format version " + std::to_string(v) + " (expected " +
                       std::to_string(version) + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Run configuration (key = value, optional [generator] / [train] sections)

struct RunConfig {
  std::uint64_t seed = 0;
  GeneratorConfig generator;
  TrainConfig train;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("config: invalid value '" + text + "' for " + key);
  }
  return v;
}

inline std::string parse_word(const std::string& text) {
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    return text.substr(1, text.size() - 2);
  }
  return text;
}

inline void apply_config_key(RunConfig& cfg, const std::string& section, const std::string& key,
                             const std::string& raw) {
  const std::string full = section.empty() ? key : section + "." + key;
  auto size = [&] { return parse_number<std::size_t>(full, raw); };
  auto real = [&] { return parse_number<double>(full, raw); };
  GeneratorConfig& g = cfg.generator;
  TrainConfig& t = cfg.train;
  if (section.empty() && key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(full, raw);
  } else if (section == "generator") {
    if (key == "height") g.height = size();
    else if (key == "width") g.width = size();
    else if (key == "phases") g.phases = size();
    else if (key == "confounded_pairs") g.confounded_pairs = size();
    else if (key == "voronoi_seeds") g.voronoi_seeds = size();
    else if (key == "exposure") g.exposure = real();
    else if (key == "samples") g.samples = size();
    else if (key == "bse_sigma") g.bse_sigma = real();
    else if (key == "peak_width") g.peak_width = real();
    else if (key == "strip_width") g.strip_width = size();
    else if (key == "validity") {
      const std::string w = parse_word(raw);
      if (w == "all") g.validity = ValidityMode::kAllValid;
      else if (w == "edge_strip") g.validity = ValidityMode::kEdgeStrip;
      else throw ConfigError("config: validity must be \"all\" or \"edge_strip\", got " + raw);
    } else {
      throw ConfigError("config: unknown key " + full);
    }
  } else if (section == "train") {
    if (key == "batch_size") t.batch_size = size();
    else if (key == "learning_rate") t.learning_rate = real();
    else if (key == "epochs") t.epochs = size();
    else if (key == "fraction_min") t.fraction_min = real();
    else if (key == "fraction_max") t.fraction_max = real();
    else if (key == "val_fraction") t.val_fraction = real();
    else if (key == "layers") t.layers = size();
    else if (key == "hidden") t.hidden = size();
    else if (key == "heads") t.heads = size();
    else if (key == "threads") t.threads = size();
    else if (key == "k") t.construction.k = size();
    else if (key == "construction") {
      const std::string w = parse_word(raw);
      if (w == "delaunay") t.construction.kind = GraphConstruction::Kind::kDelaunay;
      else if (w == "knn") t.construction.kind = GraphConstruction::Kind::kKnn;
      else throw ConfigError("config: construction must be \"delaunay\" or \"knn\", got " + raw);
    } else {
      throw ConfigError("config: unknown key " + full);
    }
  } else {
    throw ConfigError("config: unknown key " + full);
  }
}

}  // namespace detail

/// Parses and validates a run configuration. Missing keys keep defaults.
inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section");
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      if (section != "generator" && section != "train") {
        throw ConfigError("config line " + std::to_string(line_no) + ": unknown section [" +
                          section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(std::string_view(s).substr(0, eq));
    const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    detail::apply_config_key(cfg, section, key, value);
  }
  cfg.generator.validate();
  cfg.train.validate();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

inline std::string format_generator_config(const GeneratorConfig& g) {
  std::ostringstream o;
  o << "[generator]\n"
    << "height = " << g.height << "\n"
    << "width = " << g.width << "\n"
    << "phases = " << g.phases << "\n"
    << "confounded_pairs = " << g.confounded_pairs << "\n"
    << "voronoi_seeds = " << g.voronoi_seeds << "\n"
    << "exposure = " << format_double(g.exposure) << "\n"
    << "samples = " << g.samples << "\n"
    << "bse_sigma = " << format_double(g.bse_sigma) << "\n"
    << "peak_width = " << format_double(g.peak_width) << "\n"
    << "validity = \"" << (g.validity == ValidityMode::kAllValid ? "all" : "edge_strip") << "\"\n"
    << "strip_width = " << g.strip_width << "\n";
  return o.str();
}

inline std::string format_train_config(const TrainConfig& t) {
  std::ostringstream o;
  o << "[train]\n"
    << "batch_size = " << t.batch_size << "\n"
    << "learning_rate = " << format_double(t.learning_rate) << "\n"
    << "epochs = " << t.epochs << "\n"
    << "fraction_min = " << format_double(t.fraction_min) << "\n"
    << "fraction_max = " << format_double(t.fraction_max) << "\n"
    << "val_fraction = " << format_double(t.val_fraction) << "\n"
    << "construction = \""
    << (t.construction.kind == GraphConstruction::Kind::kDelaunay ? "delaunay" : "knn") << "\"\n"
    << "k = " << t.construction.k << "\n"
    << "layers = " << t.layers << "\n"
    << "hidden = " << t.hidden << "\n"
    << "heads = " << t.heads << "\n"
    << "threads = " << t.threads << "\n";
  return o.str();
}

/// Text that parse_config() maps back to `cfg`.
inline std::string format_config(const RunConfig& cfg) {
  return "seed = " + std::to_string(cfg.seed) + "\n\n" + format_generator_config(cfg.generator) +
         "\n" + format_train_config(cfg.train);
}

// ---------------------------------------------------------------------------
// Dataset container

inline void write_dataset(std::ostream& out, const Dataset& d) {
  detail::BinaryWriter w(out);
  const std::size_t h = d.config.height, wd = d.config.width, px = h * wd;
  w.bytes(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u64(h);
  w.u64(wd);
  w.u64(d.classes);
  w.u64(d.samples.size());
  w.string(format_generator_config(d.config));
  w.u64(d.seed);
  std::vector<char> bits;
  for (const Sample& s : d.samples) {
    if (s.height != h || s.width != wd || s.bse.size() != px || s.labels.size() != px ||
        s.validity.size() != px || s.spectra.size() != px * kSpectrumDim) {
      throw ShapeError("save_dataset: sample shape does not match the dataset header");
    }
    w.f64s(s.bse);
    w.f64s(s.spectra);
    for (std::uint16_t l : s.labels) w.u16(l);
    bits.assign((px + 7) / 8, 0);
    for (std::size_t i = 0; i < px; ++i) {
      if (s.validity[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
    }
    w.bytes(std::string_view(bits.data(), bits.size()));
  }
}

inline Dataset read_dataset(std::istream& in, const std::string& source = "dataset") {
  detail::BinaryReader r(in, source);
  detail::check_magic(r, kDatasetMagic, kDatasetVersion);
  Dataset d;
  const std::uint64_t h = r.u64(), w = r.u64();
  d.classes = r.u64();
  const std::uint64_t count = r.u64();
  if (h == 0 || w == 0 || h * w > (1ull << 31)) r.fail("implausible image size");
  if (count > (1ull << 32) || d.classes == 0 || d.classes > 65536) r.fail("implausible header");
  const std::string echo = r.string();
  try {
    d.config = parse_config(echo).generator;
  } catch (const ConfigError& e) {
    r.fail(std::string("unreadable config echo: ") + e.what());
  }
  if (d.config.height != h || d.config.width != w) r.fail("config echo disagrees with header");
  d.config.samples = count;
  d.seed = r.u64();
  const std::size_t px = h * w;
  for (std::uint64_t k = 0; k < count; ++k) {
    r.set_sample(static_cast<std::ptrdiff_t>(k));
    Sample s;
    s.height = h;
    s.width = w;
    s.bse.resize(px);
    r.f64s(s.bse);
    s.spectra.resize(px * kSpectrumDim);
    r.f64s(s.spectra);
    s.labels.resize(px);
    for (auto& l : s.labels) {
      l = r.u16();
      if (l >= d.classes) r.fail("label " + std::to_string(l) + " outside class range");
    }
    const std::string bits = r.bytes((px + 7) / 8);
    s.validity.resize(px);
    for (std::size_t i = 0; i < px; ++i) s.validity[i] = (bits[i / 8] >> (i % 8)) & 1;
    d.samples.push_back(std::move(s));
  }
  r.set_sample(-1);
  if (!r.at_end()) r.fail("trailing bytes after last sample");
  return d;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) { write_dataset(out, d); });
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in, path.string());
}

// ---------------------------------------------------------------------------
// Checkpoint

struct Checkpoint {
  GatNetwork network;
  RunConfig config;
  double best_val_f1 = 0.0;
  std::uint64_t best_epoch = 0;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.network == b.network && a.config == b.config &&
           std::bit_cast<std::uint64_t>(a.best_val_f1) == std::bit_cast<std::uint64_t>(b.best_val_f1) &&
           a.best_epoch == b.best_epoch;
  }
};

inline void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  detail::BinaryWriter w(out);
  const GatConfig& g = c.network.config();
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(g.layers);
  w.u64(g.hidden);
  w.u64(g.heads);
  w.u64(g.in_dim);
  w.u64(g.classes);
  const auto params = c.network.parameters();
  w.u64(params.size());
  for (const Tensor* t : params) {
    w.u64(t->rows());
    w.u64(t->cols());
    w.f64s(t->data());
  }
  w.string(format_config(c.config));
  w.f64(c.best_val_f1);
  w.u64(c.best_epoch);
}

inline Checkpoint read_checkpoint(std::istream& in, const std::string& source = "checkpoint") {
  detail::BinaryReader r(in, source);
  detail::check_magic(r, kCheckpointMagic, kCheckpointVersion);
  GatConfig g;
  g.layers = r.u64();
  g.hidden = r.u64();
  g.heads = r.u64();
  g.in_dim = r.u64();
  g.classes = r.u64();
  if (g.layers == 0 || g.layers > 64 || g.heads == 0 || g.heads > 1024 || g.hidden > (1u << 20) ||
      g.in_dim == 0 || g.in_dim > (1u << 20) || g.classes == 0 || g.classes > 65536) {
    r.fail("implausible network configuration");
  }
  Checkpoint c;
  try {
    c.network = GatNetwork::zeros(g);
  } catch (const ContractViolation& e) {
    r.fail(std::string("invalid network configuration: ") + e.what());
  }
  const auto params = c.network.parameters();
  if (r.u64() != params.size()) r.fail("tensor count does not match the network configuration");
  for (Tensor* t : params) {
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (rows != t->rows() || cols != t->cols()) r.fail("tensor shape does not match configuration");
    r.f64s(t->data());
  }
  try {
    c.config = parse_config(r.string());
  } catch (const ConfigError& e) {
    r.fail(std::string("unreadable config echo: ") + e.what());
  }
  c.best_val_f1 = r.f64();
  c.best_epoch = r.u64();
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) { write_checkpoint(out, c); });
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in, path.string());
}

// ---------------------------------------------------------------------------
// Graph dump

namespace detail {

/// Non-zero feature columns as ranges, e.g. "0" or "1-64"; "-" if none.
inline std::string nonzero_pattern(std::span<const double> row) {
  std::string out;
  std::size_t i = 0;
  while (i < row.size()) {
    if (row[i] == 0.0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < row.size() && row[j + 1] != 0.0) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(i);
    if (j > i) out += "-" + std::to_string(j);
    i = j + 1;
  }
  return out.empty() ? "-" : out;
}

inline std::string format_attr(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Line-oriented dump: a header line, one `node` line per node in id order,
/// one `edge` line per edge in canonical order.
inline std::string format_graph(const MultimodalGraph& g) {
  std::ostringstream o;
  o << "graph height " << g.height << " width " << g.width << " nodes " << g.num_nodes()
    << " edges " << g.edges.size() << "\n";
  o << "# node id x y layer valid nonzero_features\n";
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const NodePosition& p = g.positions[i];
    const int valid = g.is_image_node(i) ? g.validity[i] : 1;
    o << "node " << i << ' ' << format_double(p.x) << ' ' << format_double(p.y) << ' '
      << int(p.layer) << ' ' << valid << ' ' << detail::nonzero_pattern(g.features.row(i)) << "\n";
  }
  o << "# edge source target distance\n";
  for (const Edge& e : g.edges) {
    o << "edge " << e.source << ' ' << e.target << ' ' << detail::format_attr(e.attr) << "\n";
  }
  return o.str();
}

inline void export_graph(const MultimodalGraph& g, const std::filesystem::path& path) {
  write_text_atomic(path, format_graph(g));
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["fraction"] = m.fraction;
  j["samples"] = m.samples;
  j["pixels"] = m.pixels;
  j["accuracy"] = m.accuracy;
  j["macro"] = {{"precision", m.sample_mean.precision},
                {"recall", m.sample_mean.recall},
                {"f1", m.sample_mean.f1}};
  j["pooled_macro"] = {
      {"precision", m.pooled.precision}, {"recall", m.pooled.recall}, {"f1", m.pooled.f1}};
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t k = 0; k < m.per_class.size(); ++k) {
    const ClassScores& s = m.per_class[k];
    classes.push_back({{"class", k},
                       {"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support},
                       {"predicted", s.predicted}});
  }
  j["per_class"] = classes;
  nlohmann::json cm = nlohmann::json::array();
  for (std::size_t t = 0; t < m.confusion.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < m.confusion.classes(); ++p) row.push_back(m.confusion.at(t, p));
    cm.push_back(row);
  }
  j["confusion"] = cm;
  return j;
}

/// Rows are ground truth, columns predictions, with a header row.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream o;
  o << "truth\\predicted";
  for (std::size_t p = 0; p < cm.classes(); ++p) o << ',' << p;
  o << "\n";
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    o << t;
    for (std::size_t p = 0; p < cm.classes(); ++p) o << ',' << cm.at(t, p);
    o << "\n";
  }
  return o.str();
}

/// One row per fraction: sample-mean macro scores, then pooled ones.
inline std::string sweep_csv(std::span<const Metrics> rows) {
  std::ostringstream o;
  o << "fraction,precision,recall,f1,pooled_precision,pooled_recall,pooled_f1,accuracy,pixels\n";
  for (const Metrics& m : rows) {
    o << format_double(m.fraction) << ',' << format_double(m.sample_mean.precision) << ','
      << format_double(m.sample_mean.recall) << ',' << format_double(m.sample_mean.f1) << ','
      << format_double(m.pooled.precision) << ',' << format_double(m.pooled.recall) << ','
      << format_double(m.pooled.f1) << ',' << format_double(m.accuracy) << ',' << m.pixels << "\n";
  }
  return o.str();
}

inline std::string history_csv(std::span<const EpochRecord> history) {
  std::ostringstream o;
  o << "epoch,train_loss,val_f1\n";
  for (const EpochRecord& e : history) {
    o << e.epoch << ',' << format_double(e.train_loss) << ','
      << (std::isnan(e.val_f1) ? std::string("nan") : format_double(e.val_f1)) << "\n";
  }
  return o.str();
}

}  // namespace graphfuse
