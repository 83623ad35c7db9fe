#pragma once

// Secrecy-rate math for the two-hop destination-aided-jamming link and the
// exhaustive transmit-antenna-selection oracle.
//
// Notation used in comments below:
//   c = P_S / N_T        per-antenna source power
//   x = ||h~||^2         squared norm of the selected S->R gains
//   D = P_D |g|^2        jamming power seen at the relay
//   a = P_R |g|^2        relay power seen at the destination
//
//   gamma_R = c x / (D + 1)
//   beta^2  = P_R / (c x + D + 1)
//   gamma_D = c beta^2 x |g|^2 / (beta^2 |g|^2 + 1) = c x a / (a + c x + D + 1)
//   R_s     = [log2(1 + gamma_D) - log2(1 + gamma_R)]^+

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tasdl/channel.hpp"
#include "tasdl/error.hpp"

namespace tasdl {

namespace detail {
inline void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw ConfigError(std::string(what) + " must be finite and >= 0");
}
inline void require_gains(double h_norm_sq, double g_mag_sq) {
  require_nonnegative(h_norm_sq, "h_norm_sq");
  require_nonnegative(g_mag_sq, "g_mag_sq");
}
}  // namespace detail

struct SecrecyBreakdown {
  double gamma_r = 0.0;
  double gamma_d = 0.0;
  double beta_sq = 0.0;
  double r_s = 0.0;  ///< bits/s/Hz, clamped at zero
};

/// Relay (eavesdropper) SINR.
inline double gamma_r(const SystemConfig& cfg, double h_norm_sq, double g_mag_sq) {
  detail::require_gains(h_norm_sq, g_mag_sq);
  return cfg.per_antenna_power() * h_norm_sq / (cfg.p_d * g_mag_sq + 1.0);
}

/// Squared AF amplification factor under the relay power constraint.
inline double beta_sq(const SystemConfig& cfg, double h_norm_sq, double g_mag_sq) {
  detail::require_gains(h_norm_sq, g_mag_sq);
  return cfg.p_r / (cfg.per_antenna_power() * h_norm_sq + cfg.p_d * g_mag_sq + 1.0);
}

/// Destination SINR after jamming self-interference cancellation.
inline double gamma_d(const SystemConfig& cfg, double h_norm_sq, double g_mag_sq) {
  const double b2 = beta_sq(cfg, h_norm_sq, g_mag_sq);
  return cfg.per_antenna_power() * b2 * h_norm_sq * g_mag_sq / (b2 * g_mag_sq + 1.0);
}

inline SecrecyBreakdown secrecy_rate(const SystemConfig& cfg, double h_norm_sq, double g_mag_sq) {
  SecrecyBreakdown out;
  out.gamma_r = gamma_r(cfg, h_norm_sq, g_mag_sq);
  out.beta_sq = beta_sq(cfg, h_norm_sq, g_mag_sq);
  out.gamma_d = cfg.per_antenna_power() * out.beta_sq * h_norm_sq * g_mag_sq /
                (out.beta_sq * g_mag_sq + 1.0);
  out.r_s = std::max(0.0, std::log2(1.0 + out.gamma_d) - std::log2(1.0 + out.gamma_r));
  return out;
}

/// Unclamped log2(1+gamma_D) - log2(1+gamma_R) next to its factored expansion
///   log2[ (D+1)/(c x + D + 1) * (c x a + a + c x + D + 1)/(a + c x + D + 1) ].
/// The two agree for every valid input; the pair is returned for diagnostics.
struct ClosedFormCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline ClosedFormCheck closed_form_check(const SystemConfig& cfg, double h_norm_sq,
                                         double g_mag_sq) {
  const auto b = secrecy_rate(cfg, h_norm_sq, g_mag_sq);
  const double cx = cfg.per_antenna_power() * h_norm_sq;
  const double jam = cfg.p_d * g_mag_sq;
  const double a = cfg.p_r * g_mag_sq;
  const double relay_factor = (jam + 1.0) / (cx + jam + 1.0);
  const double dest_factor = (cx * a + a + cx + jam + 1.0) / (a + cx + jam + 1.0);
  return {std::log2(1.0 + b.gamma_d) - std::log2(1.0 + b.gamma_r),
          std::log2(relay_factor * dest_factor)};
}

/// All C(n_s, n_t) antenna subsets in lexicographic order. Antenna indices
/// and labels are 1-based: label l refers to combos[l - 1].
class ComboTable {
 public:
  ComboTable(int n_s, int n_t) : n_s_(n_s), n_t_(n_t) {
    if (n_s < 1 || n_t < 1 || n_t > n_s)
      throw ConfigError("enumerate_combos: need 1 <= n_t <= n_s, got n_s=" +
                        std::to_string(n_s) + " n_t=" + std::to_string(n_t));
    std::vector<int> cur(static_cast<std::size_t>(n_t));
    for (int i = 0; i < n_t; ++i) cur[static_cast<std::size_t>(i)] = i + 1;
    while (true) {
      combos_.push_back(cur);
      int i = n_t - 1;
      while (i >= 0 && cur[static_cast<std::size_t>(i)] == n_s - n_t + i + 1) --i;
      if (i < 0) break;
      ++cur[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n_t; ++j)
        cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
    }
  }

  int n_s() const noexcept { return n_s_; }
  int n_t() const noexcept { return n_t_; }
  std::size_t size() const noexcept { return combos_.size(); }
  const std::vector<std::vector<int>>& combos() const noexcept { return combos_; }

  const std::vector<int>& combo(int label) const {
    check_label(label);
    return combos_[static_cast<std::size_t>(label - 1)];
  }

  void check_label(int label) const {
    if (label < 1 || static_cast<std::size_t>(label) > combos_.size())
      throw ConfigError("label " + std::to_string(label) + " outside [1, " +
                        std::to_string(combos_.size()) + "]");
  }

  bool matches(const SystemConfig& cfg) const noexcept {
    return cfg.n_s == n_s_ && cfg.n_t == n_t_;
  }

  /// Sum of h_mag_sq over the antennas of `label`, accumulated in index order.
  double norm_sq(std::span<const double> h_mag_sq, int label) const {
    double s = 0.0;
    for (int a : combo(label)) s += h_mag_sq[static_cast<std::size_t>(a - 1)];
    return s;
  }

 private:
  int n_s_;
  int n_t_;
  std::vector<std::vector<int>> combos_;
};

inline ComboTable enumerate_combos(int n_s, int n_t) { return ComboTable(n_s, n_t); }

struct OracleChoice {
  int label = 1;
  double best_rate = 0.0;
};

/// Squared gain magnitudes |h_1|^2..|h_{n_s}|^2, formed by squaring
/// magnitude() so they match what is recovered from stored magnitudes.
inline std::vector<double> squared_magnitudes(const ChannelSample& sample) {
  std::vector<double> out(sample.h.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = magnitude(sample.h[i]);
    out[i] = m * m;
  }
  return out;
}

namespace detail {
inline void require_table(const SystemConfig& cfg, const ComboTable& table, std::size_t width) {
  if (!table.matches(cfg))
    throw ConfigError("combo table (" + std::to_string(table.n_s()) + "," +
                      std::to_string(table.n_t()) + ") does not match config (" +
                      std::to_string(cfg.n_s) + "," + std::to_string(cfg.n_t) + ")");
  if (width != static_cast<std::size_t>(cfg.n_s))
    throw ConfigError("channel has " + std::to_string(width) + " source gains, expected " +
                      std::to_string(cfg.n_s));
}
}  // namespace detail

/// Secrecy rate of every combination, indexed by label - 1.
inline std::vector<double> rates_per_combo(const SystemConfig& cfg,
                                           std::span<const double> h_mag_sq, double g_mag_sq,
                                           const ComboTable& table) {
  detail::require_table(cfg, table, h_mag_sq.size());
  std::vector<double> rates(table.size());
  for (std::size_t l = 0; l < rates.size(); ++l)
    rates[l] = secrecy_rate(cfg, table.norm_sq(h_mag_sq, static_cast<int>(l + 1)), g_mag_sq).r_s;
  return rates;
}

/// Exhaustive search for the rate-maximizing combination; ties go to the
/// smallest label.
inline OracleChoice oracle_select(const SystemConfig& cfg, std::span<const double> h_mag_sq,
                                  double g_mag_sq, const ComboTable& table) {
  const auto rates = rates_per_combo(cfg, h_mag_sq, g_mag_sq, table);
  OracleChoice best{1, rates.front()};
  for (std::size_t l = 1; l < rates.size(); ++l) {
    if (rates[l] > best.best_rate) best = {static_cast<int>(l + 1), rates[l]};
  }
  return best;
}

inline OracleChoice oracle_select(const SystemConfig& cfg, const ChannelSample& sample,
                                  const ComboTable& table) {
  const auto mags = squared_magnitudes(sample);
  const double g = magnitude(sample.g);
  return oracle_select(cfg, mags, g * g, table);
}

}  // namespace tasdl
