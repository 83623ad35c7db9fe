#include <gtest/gtest.h>

#include <cmath>

#include "brute_force_oracle.hpp"
#include "tasdl/channel.hpp"
#include "tasdl/secrecy.hpp"

using namespace tasdl;

TEST(GammaR, Examples) {
  EXPECT_EQ(gamma_r({6, 1, 0, 1, 1}, 2.0, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(gamma_r({6, 1, 1, 1, 1}, 1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(gamma_r({6, 2, 4, 2, 1}, 3.0, 0.5), 3.0);
  EXPECT_THROW(gamma_r({6, 1, 1, 1, 1}, -1.0, 0.5), ConfigError);
  EXPECT_THROW(gamma_r({6, 1, 1, 1, 1}, 1.0, -0.5), ConfigError);
}

TEST(BetaSq, Examples) {
  EXPECT_EQ(beta_sq({6, 1, 1, 1, 0}, 2.0, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(beta_sq({6, 1, 0, 0, 2}, 5.0, 7.0), 2.0);
  EXPECT_DOUBLE_EQ(beta_sq({6, 1, 1, 1, 1}, 2.0, 1.0), 0.25);
  EXPECT_THROW(beta_sq({6, 1, 1, 1, 1}, NAN, 1.0), ConfigError);
}

TEST(GammaD, Examples) {
  EXPECT_EQ(gamma_d({6, 1, 1, 1, 1}, 2.0, 0.0), 0.0);
  EXPECT_EQ(gamma_d({6, 1, 0, 1, 1}, 2.0, 0.7), 0.0);
  EXPECT_DOUBLE_EQ(gamma_d({6, 1, 1, 1, 1}, 1.0, 1.0), 0.25);
  // Simplified form c x a / (a + c x + D + 1).
  const SystemConfig cfg{6, 2, 3.0, 0.7, 2.2};
  const double x = 1.3, g2 = 0.4, c = cfg.p_s / cfg.n_t, a = cfg.p_r * g2;
  EXPECT_NEAR(gamma_d(cfg, x, g2), c * x * a / (a + c * x + cfg.p_d * g2 + 1), 1e-15);
  EXPECT_THROW(gamma_d(cfg, -x, g2), ConfigError);
}

TEST(SecrecyRate, NoSignalAndClamp) {
  const auto zero = secrecy_rate({6, 1, 0, 5, 5}, 2.0, 1.0);
  EXPECT_EQ(zero.gamma_r, 0.0);
  EXPECT_EQ(zero.gamma_d, 0.0);
  EXPECT_EQ(zero.r_s, 0.0);

  const auto clamp = secrecy_rate({6, 1, 5, 5, 5}, 2.0, 0.0);
  EXPECT_EQ(clamp.gamma_d, 0.0);
  EXPECT_GT(clamp.gamma_r, 0.0);
  EXPECT_EQ(clamp.r_s, 0.0);
}

TEST(SecrecyRate, MatchesHighPrecisionOracle) {
  // Frozen from tests/oracles/derive_values.py (40-digit evaluation).
  const auto b = secrecy_rate({6, 1, 10, 10, 10}, 1.7, 0.9);
  EXPECT_NEAR(b.gamma_r, 1.7, 1e-15);
  EXPECT_NEAR(b.beta_sq, 0.37037037037037037037, 1e-15);
  EXPECT_NEAR(b.gamma_d, 4.25, 1e-14);
  EXPECT_NEAR(b.r_s, 0.9593580155026540924, 0.9593580155026540924 * 1e-12);
}

TEST(SecrecyRate, ClampInvariantOnGrid) {
  const SystemConfig cfg{6, 1, 100, 100, 100};
  for (double x = 0.0; x <= 10.0; x += 0.25) {
    for (double g2 = 0.0; g2 <= 5.0; g2 += 0.25) {
      const auto b = secrecy_rate(cfg, x, g2);
      ASSERT_GE(b.r_s, 0.0);
      if (b.gamma_d <= b.gamma_r) { ASSERT_EQ(b.r_s, 0.0); }
      ASSERT_TRUE(std::isfinite(b.r_s) && std::isfinite(b.beta_sq));
    }
  }
}

TEST(SecrecyRate, SinrsIncreaseInChannelGainButRateDoesNot) {
  const SystemConfig cfg{6, 1, 1000, 1000, 1000};
  const double g2 = 0.8;
  double prev_r = -1, prev_d = -1;
  bool rate_decreases = false;
  double prev_rate = -1;
  for (double x = 0.01; x <= 20.0; x += 0.01) {
    const auto b = secrecy_rate(cfg, x, g2);
    ASSERT_GT(b.gamma_r, prev_r);
    ASSERT_GT(b.gamma_d, prev_d);
    if (prev_rate >= 0 && b.r_s < prev_rate) rate_decreases = true;
    prev_r = b.gamma_r;
    prev_d = b.gamma_d;
    prev_rate = b.r_s;
  }
  EXPECT_TRUE(rate_decreases);
}

TEST(ClosedForm, AgreesWithDefinition) {
  EXPECT_EQ(closed_form_check({6, 1, 0, 3, 3}, 1.0, 1.0).lhs, 0.0);
  EXPECT_EQ(closed_form_check({6, 1, 0, 3, 3}, 1.0, 1.0).rhs, 0.0);
  auto stream = rng::Stream(5);
  for (double snr_db : {0.0, 15.0, 30.0}) {
    for (int n_t : {1, 2}) {
      const auto cfg = SystemConfig::equal_power(6, n_t, snr_db);
      for (int i = 0; i < 20000; ++i) {
        const double x = -std::log(stream.uniform_open0()) * n_t;
        const double g2 = -std::log(stream.uniform_open0());
        const auto c = closed_form_check(cfg, x, g2);
        ASSERT_LE(std::abs(c.lhs - c.rhs), 1e-9 * std::max(1.0, std::abs(c.lhs)));
      }
    }
  }
}

TEST(Combos, SingleAntenna) {
  const auto t = enumerate_combos(6, 1);
  ASSERT_EQ(t.size(), 6u);
  for (int l = 1; l <= 6; ++l) EXPECT_EQ(t.combo(l), std::vector<int>{l});
}

TEST(Combos, Pairs) {
  const auto t = enumerate_combos(6, 2);
  ASSERT_EQ(t.size(), 15u);
  EXPECT_EQ(t.combo(1), (std::vector<int>{1, 2}));
  EXPECT_EQ(t.combo(15), (std::vector<int>{5, 6}));
  EXPECT_EQ(t.combos(), brute::subsets(6, 2));
}

TEST(Combos, FullSelectionAndErrors) {
  const auto t = enumerate_combos(4, 4);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.combo(1), (std::vector<int>{1, 2, 3, 4}));
  EXPECT_THROW(enumerate_combos(3, 4), ConfigError);
  EXPECT_THROW(enumerate_combos(0, 0), ConfigError);
  EXPECT_THROW(enumerate_combos(6, 0), ConfigError);
  EXPECT_THROW(t.combo(2), ConfigError);
}

TEST(Combos, CardinalityAndUniqueness) {
  for (int n = 1; n <= 8; ++n) {
    for (int k = 1; k <= n; ++k) {
      const auto t = enumerate_combos(n, k);
      const auto& c = t.combos();
      // C(n, k) via the multiplicative formula.
      std::size_t expect = 1;
      for (int i = 1; i <= k; ++i) expect = expect * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
      ASSERT_EQ(c.size(), expect);
      ASSERT_TRUE(std::is_sorted(c.begin(), c.end()));
      ASSERT_EQ(std::adjacent_find(c.begin(), c.end()), c.end());
    }
  }
}

TEST(Oracle, SingleCandidateAndTieBreak) {
  const auto cfg = SystemConfig::equal_power(4, 4, 10);
  const auto table = enumerate_combos(4, 4);
  const auto batch = sample_batch(cfg, 50, 3);
  for (const auto& s : batch) EXPECT_EQ(oracle_select(cfg, s, table).label, 1);

  const auto cfg1 = SystemConfig::equal_power(6, 1, 15);
  ChannelSample same;
  same.h.assign(6, Complex(0.6, -0.8));
  same.g = Complex(0.9, 0.1);
  EXPECT_EQ(oracle_select(cfg1, same, enumerate_combos(6, 1)).label, 1);
}

TEST(Oracle, RejectsMismatchedTable) {
  const auto cfg = SystemConfig::equal_power(6, 1, 10);
  const auto s = sample_batch(cfg, 1, 1).front();
  EXPECT_THROW(oracle_select(cfg, s, enumerate_combos(6, 2)), ConfigError);
}

TEST(Oracle, OptimalOverAllCombos) {
  for (int n_t : {1, 2, 3}) {
    const auto cfg = SystemConfig::equal_power(6, n_t, 20);
    const auto table = enumerate_combos(6, n_t);
    for (const auto& s : sample_batch(cfg, 2000, 10 + static_cast<std::uint64_t>(n_t))) {
      const auto best = oracle_select(cfg, s, table);
      const auto mags = squared_magnitudes(s);
      const double g2 = magnitude(s.g) * magnitude(s.g);
      for (int l = 1; l <= static_cast<int>(table.size()); ++l)
        ASSERT_LE(secrecy_rate(cfg, table.norm_sq(mags, l), g2).r_s, best.best_rate);
    }
  }
}

TEST(Oracle, MatchesIndependentBruteForce) {
  for (int n_t : {1, 2}) {
    const auto cfg = SystemConfig::equal_power(6, n_t, 15);
    const auto table = enumerate_combos(6, n_t);
    for (const auto& s : sample_batch(cfg, 10000, 100 + static_cast<std::uint64_t>(n_t))) {
      std::vector<double> h;
      for (const auto& z : s.h) h.push_back(std::abs(z));
      const auto want = brute::label(cfg.p_s, cfg.p_d, cfg.p_r, 6, n_t, h, std::abs(s.g));
      const auto got = oracle_select(cfg, s, table);
      ASSERT_EQ(got.label, want.label);
      ASSERT_NEAR(got.best_rate, want.rate, 1e-9 * std::max(1.0, want.rate));
    }
  }
}

TEST(Oracle, CouplingWitnessAtHighPower) {
  const auto cfg = SystemConfig::equal_power(6, 1, 30);
  const auto table = enumerate_combos(6, 1);
  int witnesses = 0;
  for (const auto& s : sample_batch(cfg, 10000, 9)) {
    const auto mags = squared_magnitudes(s);
    const int strongest = static_cast<int>(std::max_element(mags.begin(), mags.end()) - mags.begin()) + 1;
    if (oracle_select(cfg, s, table).label != strongest) ++witnesses;
  }
  EXPECT_GE(witnesses, 1);
}
