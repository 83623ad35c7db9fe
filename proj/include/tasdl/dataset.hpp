#pragma once

// Labeled data sets: magnitude features, per-sample normalization, oracle
// labels, one-hot targets, and the text file format.
//
// File format (UTF-8 text):
//
//   # tasdl-dataset v1
//   # n_s=6
//   # n_t=1
//   # p_s=31.622776601683793
//   # p_d=31.622776601683793
//   # p_r=31.622776601683793
//   # seed=1
//   # count=3
//   0.53201...,1.2209...,...,0.8812...,4
//   ...
//
// Each record line holds the n_s + 1 raw magnitudes |h_1|..|h_{n_s}|, |g|
// printed with 17 significant digits (exact round-trip) followed by the
// 1-based combination label. Normalization is applied after loading.

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tasdl/channel.hpp"
#include "tasdl/error.hpp"
#include "tasdl/matrix.hpp"
#include "tasdl/parallel.hpp"
#include "tasdl/secrecy.hpp"

namespace tasdl {

/// [|h_1|, ..., |h_{n_s}|, |g|]
using RawFeatures = std::vector<double>;

struct LabeledRecord {
  std::vector<double> t;  ///< normalized features
  int label = 1;
  std::optional<std::vector<double>> rate_per_combo;
};

struct OneHot {
  std::vector<std::uint8_t> bits;

  std::string str() const {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
  }
};

inline RawFeatures extract_features(const ChannelSample& sample) {
  RawFeatures d;
  d.reserve(sample.h.size() + 1);
  for (const auto& x : sample.h) d.push_back(magnitude(x));
  d.push_back(magnitude(sample.g));
  return d;
}

/// t_i = (d_i - mean(d)) / (max(d) - min(d)); a constant vector maps to zeros.
inline void normalize_into(std::span<const double> d, std::span<double> t) {
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    std::fill(t.begin(), t.end(), 0.0);
    return;
  }
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) t[i] = (d[i] - mean) / range;
}

inline std::vector<double> normalize(std::span<const double> d) {
  if (d.size() < 2) throw ConfigError("normalize: need at least 2 features");
  std::vector<double> t(d.size());
  normalize_into(d, t);
  return t;
}

/// Squared magnitudes split into the h part and |g|^2.
struct GainPowers {
  std::vector<double> h_mag_sq;
  double g_mag_sq = 0.0;
};

inline GainPowers gain_powers(std::span<const double> d) {
  GainPowers p;
  p.h_mag_sq.resize(d.size() - 1);
  for (std::size_t i = 0; i + 1 < d.size(); ++i) p.h_mag_sq[i] = d[i] * d[i];
  p.g_mag_sq = d.back() * d.back();
  return p;
}

inline OracleChoice oracle_select(const SystemConfig& cfg, std::span<const double> d,
                                  const ComboTable& table) {
  const auto p = gain_powers(d);
  return oracle_select(cfg, p.h_mag_sq, p.g_mag_sq, table);
}

inline LabeledRecord label_sample(const SystemConfig& cfg, const ChannelSample& sample,
                                  const ComboTable& table) {
  const auto d = extract_features(sample);
  const auto p = gain_powers(d);
  LabeledRecord rec;
  rec.t = normalize(d);
  rec.rate_per_combo = rates_per_combo(cfg, p.h_mag_sq, p.g_mag_sq, table);
  const auto& rates = *rec.rate_per_combo;
  rec.label = static_cast<int>(std::max_element(rates.begin(), rates.end()) - rates.begin()) + 1;
  return rec;
}

inline OneHot one_hot(int label, std::size_t size) {
  if (label < 1 || static_cast<std::size_t>(label) > size)
    throw ConfigError("one_hot: label " + std::to_string(label) + " outside [1, " +
                      std::to_string(size) + "]");
  OneHot h;
  h.bits.assign(size, 0);
  h.bits[static_cast<std::size_t>(label - 1)] = 1;
  return h;
}

struct Record {
  RawFeatures d;
  int label = 1;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Records generated at one operating point.
struct Dataset {
  SystemConfig cfg;
  std::uint64_t seed = 0;
  std::vector<Record> records;

  std::size_t size() const noexcept { return records.size(); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(cfg.n_s) + 1; }

  /// One normalized feature row per record.
  Matrix features() const {
    Matrix m(records.size(), width());
    for (std::size_t i = 0; i < records.size(); ++i) normalize_into(records[i].d, m.row(i));
    return m;
  }

  std::vector<int> labels() const {
    std::vector<int> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = records[i].label;
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline Dataset build_dataset(const SystemConfig& cfg, std::size_t count, std::uint64_t seed,
                             const ComboTable& table, unsigned parallelism = 1) {
  detail::require_table(cfg, table, static_cast<std::size_t>(cfg.n_s));
  const auto samples = sample_batch(cfg, count, seed, parallelism);
  Dataset ds{cfg, seed, std::vector<Record>(count)};
  parallel_for(count, parallelism, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& r = ds.records[i];
      r.d = extract_features(samples[i]);
      r.label = oracle_select(cfg, r.d, table).label;
    }
  });
  return ds;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string io_message(const std::string& path, const std::string& what) {
  return path + ": " + what;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace detail

inline void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(detail::io_message(path, std::string("cannot open for writing: ") +
                                                       std::strerror(errno)));
  out << "# tasdl-dataset v1\n";
  out << "# n_s=" << ds.cfg.n_s << "\n";
  out << "# n_t=" << ds.cfg.n_t << "\n";
  out << "# p_s=" << detail::format_double(ds.cfg.p_s) << "\n";
  out << "# p_d=" << detail::format_double(ds.cfg.p_d) << "\n";
  out << "# p_r=" << detail::format_double(ds.cfg.p_r) << "\n";
  out << "# seed=" << ds.seed << "\n";
  out << "# count=" << ds.records.size() << "\n";
  std::string line;
  for (const auto& r : ds.records) {
    line.clear();
    for (double v : r.d) {
      line += detail::format_double(v);
      line += ',';
    }
    line += std::to_string(r.label);
    line += '\n';
    out << line;
  }
  out.flush();
  if (!out) throw IoError(detail::io_message(path, "write failed"));
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(detail::io_message(path, std::string("cannot open for reading: ") +
                                                      std::strerror(errno)));
  auto fail = [&](std::size_t line_no, const std::string& what) -> IoError {
    return IoError(path + ":" + std::to_string(line_no) + ": " + what);
  };

  std::map<std::string, std::string, std::less<>> header;
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool header_done = false;
  std::size_t width = 0;
  std::optional<ComboTable> table;
  std::size_t expected = 0;

  auto finish_header = [&](std::size_t at) {
    static constexpr const char* keys[] = {"n_s", "n_t", "p_s", "p_d", "p_r", "seed", "count"};
    for (const char* k : keys)
      if (!header.contains(k)) throw fail(at, std::string("missing header key '") + k + "'");
    bool ok = detail::parse_number(header["n_s"], ds.cfg.n_s) &&
              detail::parse_number(header["n_t"], ds.cfg.n_t) &&
              detail::parse_number(header["p_s"], ds.cfg.p_s) &&
              detail::parse_number(header["p_d"], ds.cfg.p_d) &&
              detail::parse_number(header["p_r"], ds.cfg.p_r) &&
              detail::parse_number(header["seed"], ds.seed) &&
              detail::parse_number(header["count"], expected);
    if (!ok) throw fail(at, "malformed header value");
    try {
      ds.cfg.validate();
      table.emplace(ds.cfg.n_s, ds.cfg.n_t);
    } catch (const ConfigError& e) {
      throw fail(at, e.what());
    }
    width = ds.width();
    ds.records.reserve(expected);
    header_done = true;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (header_done) throw fail(line_no, "header line after records");
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;  // banner / free comment
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      header[key] = line.substr(eq + 1);
      continue;
    }
    if (!header_done) finish_header(line_no);

    Record r;
    r.d.reserve(width);
    std::string_view rest(line);
    for (std::size_t f = 0; f < width; ++f) {
      const auto comma = rest.find(',');
      if (comma == std::string_view::npos)
        throw fail(line_no, "expected " + std::to_string(width + 1) + " fields");
      double v = 0.0;
      if (!detail::parse_number(rest.substr(0, comma), v) || !std::isfinite(v) || v < 0.0)
        throw fail(line_no, "field " + std::to_string(f + 1) + " is not a finite magnitude");
      r.d.push_back(v);
      rest.remove_prefix(comma + 1);
    }
    if (rest.find(',') != std::string_view::npos)
      throw fail(line_no, "expected " + std::to_string(width + 1) + " fields");
    if (!detail::parse_number(rest, r.label) || r.label < 1 ||
        static_cast<std::size_t>(r.label) > table->size())
      throw fail(line_no, "label must be an integer in [1, " + std::to_string(table->size()) + "]");
    ds.records.push_back(std::move(r));
  }
  if (in.bad()) throw IoError(detail::io_message(path, "read failed"));
  if (!header_done) finish_header(line_no + 1);
  if (ds.records.size() != expected)
    throw fail(line_no, "header count=" + std::to_string(expected) + " but file holds " +
                            std::to_string(ds.records.size()) + " records");
  return ds;
}

}  // namespace tasdl
