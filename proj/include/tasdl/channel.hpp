#pragma once

// System configuration and i.i.d. Rayleigh block-fading channel generation
// for the source -> untrusted relay -> destination link.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "tasdl/error.hpp"
#include "tasdl/parallel.hpp"
#include "tasdl/rng.hpp"

namespace tasdl {

using Complex = std::complex<double>;

/// Antenna counts and linear transmit powers. Noise PSD is fixed at 1, so each
/// power is also the per-node SNR in linear scale.
struct SystemConfig {
  int n_s = 6;
  int n_t = 1;
  double p_s = 1.0;
  double p_d = 1.0;
  double p_r = 1.0;

  /// P_S = P_D = P_R = 10^(snr_db / 10).
  static SystemConfig equal_power(int n_s, int n_t, double snr_db) {
    const double p = std::pow(10.0, snr_db / 10.0);
    SystemConfig cfg{n_s, n_t, p, p, p};
    cfg.validate();
    return cfg;
  }

  void validate() const {
    if (n_s < 1) throw ConfigError("n_s must be >= 1, got " + std::to_string(n_s));
    if (n_t < 1 || n_t > n_s)
      throw ConfigError("n_t must satisfy 1 <= n_t <= n_s, got n_t=" + std::to_string(n_t) +
                        " n_s=" + std::to_string(n_s));
    auto check = [](double p, const char* name) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ConfigError(std::string(name) + " must be finite and >= 0");
    };
    check(p_s, "p_s");
    check(p_d, "p_d");
    check(p_r, "p_r");
  }

  /// Per-antenna source power P_S / N_T.
  double per_antenna_power() const noexcept { return p_s / n_t; }

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

/// One fading realization: S->R gains h (length n_s) and the reciprocal R<->D gain g.
struct ChannelSample {
  std::vector<Complex> h;
  Complex g{};

  friend bool operator==(const ChannelSample&, const ChannelSample&) = default;
};

/// sqrt(re^2 + im^2).
inline double magnitude(Complex z) noexcept {
  return std::sqrt(z.real() * z.real() + z.imag() * z.imag());
}

/// Circularly-symmetric CN(0, 1) draw.
inline Complex draw_cn01(rng::Stream& stream) noexcept {
  double re = 0.0;
  double im = 0.0;
  stream.normal_pair(re, im);
  return {re * M_SQRT1_2, im * M_SQRT1_2};
}

/// Draws h_1..h_{n_s} then g from `stream`, advancing it.
inline ChannelSample sample_channel(const SystemConfig& cfg, rng::Stream& stream) {
  ChannelSample s;
  s.h.resize(static_cast<std::size_t>(cfg.n_s));
  for (auto& x : s.h) x = draw_cn01(stream);
  s.g = draw_cn01(stream);
  return s;
}

/// `count` samples; sample i is drawn from rng::substream(seed, i), so the
/// output does not depend on `parallelism`.
inline std::vector<ChannelSample> sample_batch(const SystemConfig& cfg, std::size_t count,
                                               std::uint64_t seed, unsigned parallelism = 1) {
  cfg.validate();
  if (count == 0) throw ConfigError("sample_batch: count must be >= 1");
  std::vector<ChannelSample> out(count);
  parallel_for(count, parallelism, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto stream = rng::substream(seed, i);
      out[i] = sample_channel(cfg, stream);
    }
  });
  return out;
}

}  // namespace tasdl
