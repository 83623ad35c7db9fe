#pragma once

// Scoring of antenna-selection schemes on held-out data: average secrecy
// rate, secrecy outage probability, accuracy against oracle labels, confusion
// matrices and the per-pair misclassification rates behind a radar plot.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tasdl/dataset.hpp"
#include "tasdl/error.hpp"
#include "tasdl/knn.hpp"
#include "tasdl/matrix.hpp"
#include "tasdl/mlp.hpp"
#include "tasdl/parallel.hpp"
#include "tasdl/secrecy.hpp"

namespace tasdl {

inline constexpr double kDefaultTargetRate = 2.0;  // bits/s/Hz

struct EvalReport {
  std::string scheme;
  double snr_db = 0.0;
  std::size_t count = 0;
  double avg_secrecy_rate = 0.0;
  double rate_stderr = 0.0;
  double sop = 0.0;
  double accuracy = 0.0;
  Matrix confusion;  ///< row = oracle label - 1, column = predicted label - 1
};

/// A scheme maps one test record to a 1-based label. It sees both the raw
/// magnitudes d and the normalized features t; learned schemes only read t.
using Predictor = std::function<int(std::span<const double> d, std::span<const double> t)>;

/// Secrecy rate obtained when the combination `label` is used on the record
/// with raw magnitudes `d`.
inline double scheme_rate(const SystemConfig& cfg, std::span<const double> d, int label,
                          const ComboTable& table) {
  detail::require_table(cfg, table, d.size() - 1);
  const auto p = gain_powers(d);
  return secrecy_rate(cfg, table.norm_sq(p.h_mag_sq, label), p.g_mag_sq).r_s;
}

inline double scheme_rate(const SystemConfig& cfg, const ChannelSample& sample, int label,
                          const ComboTable& table) {
  const auto d = extract_features(sample);
  return scheme_rate(cfg, d, label, table);
}

/// Fraction of rates strictly below r_t.
inline double sop_estimate(std::span<const double> rates, double r_t) {
  if (rates.empty()) throw ConfigError("sop_estimate: empty rate sequence");
  const auto below = std::count_if(rates.begin(), rates.end(), [r_t](double r) { return r < r_t; });
  return static_cast<double>(below) / static_cast<double>(rates.size());
}

inline Predictor oracle_predictor(const SystemConfig& cfg, const ComboTable& table) {
  return [cfg, &table](std::span<const double> d, std::span<const double>) {
    return oracle_select(cfg, d, table).label;
  };
}

/// Non-learned reference: the combination with the largest ||h~||^2, i.e. the
/// n_t strongest antennas. Ignores g entirely.
inline Predictor max_gain_predictor(const ComboTable& table) {
  return [&table](std::span<const double> d, std::span<const double>) {
    const auto p = gain_powers(d);
    int best = 1;
    double best_norm = table.norm_sq(p.h_mag_sq, 1);
    for (int l = 2; l <= static_cast<int>(table.size()); ++l) {
      const double n = table.norm_sq(p.h_mag_sq, l);
      if (n > best_norm) {
        best = l;
        best_norm = n;
      }
    }
    return best;
  };
}

inline Predictor mlp_predictor(const MlpModel& model) {
  return [&model](std::span<const double>, std::span<const double> t) {
    return predict(model, t);
  };
}

inline Predictor knn_predictor(const KnnModel& model) {
  return [&model](std::span<const double>, std::span<const double> t) {
    return model.predict(t);
  };
}

/// Per-record secrecy rates for a vector of chosen labels.
inline std::vector<double> scheme_rates(const SystemConfig& cfg, const Dataset& test,
                                        std::span<const int> labels, const ComboTable& table) {
  std::vector<double> rates(test.size());
  for (std::size_t i = 0; i < rates.size(); ++i)
    rates[i] = scheme_rate(cfg, test.records[i].d, labels[i], table);
  return rates;
}

/// Runs `predictor` on every record (in parallel, results stored by index)
/// and aggregates in record order. A predictor failure is rethrown with the
/// record index.
inline std::vector<int> run_predictor(const Dataset& test, const Predictor& predictor,
                                      const ComboTable& table, const std::string& scheme,
                                      unsigned parallelism = 1) {
  std::vector<int> labels(test.size());
  parallel_for(test.size(), parallelism, [&](std::size_t begin, std::size_t end) {
    std::vector<double> t(test.width());
    for (std::size_t i = begin; i < end; ++i) {
      const auto& d = test.records[i].d;
      normalize_into(d, t);
      int label = 0;
      try {
        label = predictor(d, t);
        table.check_label(label);
      } catch (const std::exception& e) {
        throw std::runtime_error("scheme '" + scheme + "' failed at record " + std::to_string(i) +
                                 ": " + e.what());
      }
      labels[i] = label;
    }
  });
  return labels;
}

inline EvalReport evaluate_labels(const SystemConfig& cfg, const Dataset& test,
                                  std::span<const int> predicted, const ComboTable& table,
                                  double r_t, const std::string& scheme, double snr_db) {
  if (predicted.size() != test.size())
    throw ConfigError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                      std::to_string(test.size()) + " records");
  if (test.size() == 0) throw ConfigError("evaluate: empty test set");
  const std::size_t n_labels = table.size();
  EvalReport rep;
  rep.scheme = scheme;
  rep.snr_db = snr_db;
  rep.count = test.size();
  rep.confusion = Matrix(n_labels, n_labels);

  const auto rates = scheme_rates(cfg, test, predicted, table);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    sum += rates[i];
    sum_sq += rates[i] * rates[i];
    const int truth = oracle_select(cfg, test.records[i].d, table).label;
    if (truth == predicted[i]) ++correct;
    rep.confusion(static_cast<std::size_t>(truth - 1), static_cast<std::size_t>(predicted[i] - 1)) += 1.0;
  }
  const double n = static_cast<double>(test.size());
  rep.avg_secrecy_rate = sum / n;
  if (test.size() > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    rep.rate_stderr = std::sqrt(var / n);
  }
  rep.sop = sop_estimate(rates, r_t);
  rep.accuracy = static_cast<double>(correct) / n;
  for (std::size_t r = 0; r < n_labels; ++r) {
    auto row = rep.confusion.row(r);
    double total = 0.0;
    for (double v : row) total += v;
    if (total > 0.0)
      for (double& v : row) v /= total;
  }
  return rep;
}

inline EvalReport evaluate_scheme(const SystemConfig& cfg, const Dataset& test,
                                  const Predictor& predictor, const ComboTable& table,
                                  double r_t, const std::string& scheme, double snr_db,
                                  unsigned parallelism = 1) {
  const auto labels = run_predictor(test, predictor, table, scheme, parallelism);
  return evaluate_labels(cfg, test, labels, table, r_t, scheme, snr_db);
}

/// Everything needed to score one SNR grid point.
struct SweepPoint {
  SystemConfig cfg;
  Dataset test;
  std::map<std::string, Predictor> predictors;
};

/// Scores `schemes` at every grid point, ascending in SNR, schemes in the
/// given order within a point. `resolve` supplies the data for one point and
/// should throw ConfigError when something is missing; a point lacking a
/// requested scheme is reported the same way.
inline std::vector<EvalReport> snr_sweep(const std::vector<std::string>& schemes,
                                         std::vector<double> grid_db,
                                         const std::function<SweepPoint(double)>& resolve,
                                         const ComboTable& table, double r_t,
                                         unsigned parallelism = 1) {
  std::sort(grid_db.begin(), grid_db.end());
  std::vector<EvalReport> out;
  for (double snr : grid_db) {
    const SweepPoint point = resolve(snr);
    for (const auto& name : schemes) {
      const auto it = point.predictors.find(name);
      if (it == point.predictors.end())
        throw ConfigError("no '" + name + "' scheme available at grid point " +
                          detail::format_double(snr) + " dB");
      out.push_back(evaluate_scheme(point.cfg, point.test, it->second, table, r_t, name, snr,
                                    parallelism));
    }
  }
  return out;
}

struct WebPair {
  int true_label = 0;
  int predicted_label = 0;
  double rate = 0.0;
};

/// Off-diagonal confusion entries, row-major: |L| (|L| - 1) pairs.
inline std::vector<WebPair> misclassification_web(const Matrix& confusion) {
  std::vector<WebPair> out;
  for (std::size_t r = 0; r < confusion.rows; ++r)
    for (std::size_t c = 0; c < confusion.cols; ++c)
      if (r != c)
        out.push_back({static_cast<int>(r + 1), static_cast<int>(c + 1), confusion(r, c)});
  return out;
}

inline std::vector<WebPair> misclassification_web(const EvalReport& report) {
  return misclassification_web(report.confusion);
}

// ---------------------------------------------------------------------------
// CSV output. Every file starts with one '#' provenance line and a header row.
//
//   results.csv    scheme,snr_db,avg_rate,sop,accuracy
//   confusion.csv  scheme,snr_db,true_label,pred_label,rate   (|L|^2 rows per report)
//   web.csv        scheme,snr_db,true_label,pred_label,rate   (|L|(|L|-1) rows per report)
// ---------------------------------------------------------------------------

namespace detail {
inline std::ofstream open_csv(const std::string& path, const std::string& provenance,
                              const char* header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing: " + std::strerror(errno));
  out << "# " << provenance << "\n" << header << "\n";
  return out;
}
inline void close_csv(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError(path + ": write failed");
}
}  // namespace detail

inline void write_results_csv(const std::string& path, std::span<const EvalReport> reports,
                              const std::string& provenance) {
  auto out = detail::open_csv(path, provenance, "scheme,snr_db,avg_rate,sop,accuracy");
  for (const auto& r : reports)
    out << r.scheme << ',' << detail::format_double(r.snr_db) << ','
        << detail::format_double(r.avg_secrecy_rate) << ',' << detail::format_double(r.sop) << ','
        << detail::format_double(r.accuracy) << '\n';
  detail::close_csv(out, path);
}

inline void write_confusion_csv(const std::string& path, std::span<const EvalReport> reports,
                                const std::string& provenance) {
  auto out = detail::open_csv(path, provenance, "scheme,snr_db,true_label,pred_label,rate");
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.confusion.rows; ++i)
      for (std::size_t j = 0; j < r.confusion.cols; ++j)
        out << r.scheme << ',' << detail::format_double(r.snr_db) << ',' << i + 1 << ',' << j + 1
            << ',' << detail::format_double(r.confusion(i, j)) << '\n';
  detail::close_csv(out, path);
}

struct LabeledConfusion {
  std::string scheme;
  double snr_db = 0.0;
  Matrix confusion;
};

inline void write_web_csv(const std::string& path, std::span<const LabeledConfusion> items,
                          const std::string& provenance) {
  auto out = detail::open_csv(path, provenance, "scheme,snr_db,true_label,pred_label,rate");
  for (const auto& item : items)
    for (const auto& p : misclassification_web(item.confusion))
      out << item.scheme << ',' << detail::format_double(item.snr_db) << ',' << p.true_label
          << ',' << p.predicted_label << ',' << detail::format_double(p.rate) << '\n';
  detail::close_csv(out, path);
}

/// Reads a confusion.csv back into one matrix per (scheme, snr_db), in file order.
inline std::vector<LabeledConfusion> read_confusion_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading: " + std::strerror(errno));
  struct Entry {
    int row, col;
    double rate;
  };
  std::vector<LabeledConfusion> out;
  std::vector<std::vector<Entry>> entries;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != "scheme,snr_db,true_label,pred_label,rate")
        throw IoError(path + ":" + std::to_string(line_no) + ": unexpected header row");
      seen_header = true;
      continue;
    }
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      f.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    f.push_back(rest);
    double snr = 0.0;
    Entry e{};
    if (f.size() != 5 || f[0].empty() || !detail::parse_number(f[1], snr) ||
        !detail::parse_number(f[2], e.row) || !detail::parse_number(f[3], e.col) ||
        !detail::parse_number(f[4], e.rate) || e.row < 1 || e.col < 1 || e.rate < 0.0)
      throw IoError(path + ":" + std::to_string(line_no) + ": malformed confusion row");
    std::size_t idx = out.size();
    for (std::size_t k = 0; k < out.size(); ++k)
      if (out[k].scheme == f[0] && out[k].snr_db == snr) idx = k;
    if (idx == out.size()) {
      out.push_back({std::string(f[0]), snr, {}});
      entries.emplace_back();
    }
    entries[idx].push_back(e);
  }
  if (in.bad()) throw IoError(path + ": read failed");
  if (!seen_header) throw IoError(path + ": no header row");
  for (std::size_t k = 0; k < out.size(); ++k) {
    int size = 0;
    for (const auto& e : entries[k]) size = std::max({size, e.row, e.col});
    if (entries[k].size() != static_cast<std::size_t>(size) * static_cast<std::size_t>(size))
      throw IoError(path + ": confusion for '" + out[k].scheme + "' at " +
                    detail::format_double(out[k].snr_db) + " dB is not a full square matrix");
    out[k].confusion = Matrix(static_cast<std::size_t>(size), static_cast<std::size_t>(size));
    for (const auto& e : entries[k])
      out[k].confusion(static_cast<std::size_t>(e.row - 1), static_cast<std::size_t>(e.col - 1)) =
          e.rate;
  }
  return out;
}

}  // namespace tasdl
