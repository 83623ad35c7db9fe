// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runtime budgets are part of each criterion.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "brute_force_oracle.hpp"
#include "tasdl/tasdl.hpp"

using namespace tasdl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1: the expanded closed form against log2(1+gD) - log2(1+gR).
Outcome identity() {
  rng::Stream s(rng::substream_seed(2024, 1));
  double worst = 0.0;
  std::size_t draws = 0;
  for (double snr : {0.0, 15.0, 30.0}) {
    for (int i = 0; i < 100000; ++i) {
      const int n_t = 1 + static_cast<int>(s.below(3));
      const auto cfg = SystemConfig::equal_power(6, n_t, snr);
      const ComboTable table(6, n_t);
      const auto sample = sample_channel(cfg, s);
      const int label = 1 + static_cast<int>(s.below(table.size()));
      const auto mags = squared_magnitudes(sample);
      const double g2 = magnitude(sample.g) * magnitude(sample.g);
      const auto c = closed_form_check(cfg, table.norm_sq(mags, label), g2);
      const double scale = std::max(std::abs(c.lhs), std::abs(c.rhs));
      if (scale > 0.0) worst = std::max(worst, std::abs(c.lhs - c.rhs) / scale);
      ++draws;
    }
  }
  return {worst <= 1e-9, std::to_string(draws) + " draws, worst relative error " + fmt("%.3g", worst)};
}

// 2: oracle against the independent brute-force labeler.
Outcome oracle_equivalence() {
  std::size_t agree = 0, total = 0;
  for (int n_t : {1, 2}) {
    const auto cfg = SystemConfig::equal_power(6, n_t, 15);
    const ComboTable table(6, n_t);
    for (const auto& s : sample_batch(cfg, 10000, 500 + static_cast<std::uint64_t>(n_t))) {
      const auto d = extract_features(s);
      const std::vector<double> h(d.begin(), d.end() - 1);
      agree += oracle_select(cfg, s, table).label ==
               brute::label(cfg.p_s, cfg.p_d, cfg.p_r, 6, n_t, h, d.back()).label;
      ++total;
    }
  }
  return {agree == total, std::to_string(agree) + "/" + std::to_string(total) + " labels agree"};
}

// 3: at 30 dB the oracle sometimes skips the strongest antenna.
Outcome coupling() {
  const auto cfg = SystemConfig::equal_power(6, 1, 30);
  const ComboTable table(6, 1);
  std::size_t witnesses = 0;
  for (const auto& s : sample_batch(cfg, 10000, 3030)) {
    const auto mags = squared_magnitudes(s);
    const int strongest = static_cast<int>(std::max_element(mags.begin(), mags.end()) - mags.begin()) + 1;
    witnesses += oracle_select(cfg, s, table).label != strongest;
  }
  return {witnesses >= 1, std::to_string(witnesses) + " of 10000 samples differ from argmax|h|"};
}

// 4: backprop against central differences.
Outcome gradient_check() {
  rng::Stream s(rng::substream_seed(4, 4));
  double worst = 0.0;
  std::size_t params = 0;
  for (std::uint64_t net = 0; net < 20; ++net) {
    const std::size_t in = 1 + s.below(5), hidden = 1 + s.below(8), out = 1 + s.below(4);
    auto m = init_model({in, hidden, out}, 100 + net);
    for (auto& b : m.params.b)
      for (auto& v : b) v = 0.2 * (s.uniform() - 0.5);
    std::vector<double> x(in);
    for (auto& v : x) v = 2.0 * s.uniform() - 1.0;
    const auto target = one_hot(1 + static_cast<int>(s.below(out)), out);
    const auto g = backward(m, forward(m, x), target);
    const double h = 1e-5;
    auto check = [&](std::vector<double>& p, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        const double up = loss(forward(m, x).probs(), target);
        p[i] = keep - h;
        const double down = loss(forward(m, x).probs(), target);
        p[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, std::abs(numeric - grad[i]) / denom);
        ++params;
      }
    };
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      check(m.params.w[l], g.w[l]);
      check(m.params.b[l], g.b[l]);
    }
  }
  return {worst <= 1e-4, std::to_string(params) + " parameters, worst relative error " + fmt("%.3g", worst)};
}

// 5: desk preset at 15 dB, n_t = 1, same seeds as `tasdl --preset desk`.
Outcome desk_performance() {
  const std::uint64_t seed = 1;
  const auto cfg = SystemConfig::equal_power(6, 1, 15);
  const ComboTable table(6, 1);
  const auto train_set = build_dataset(cfg, 50000, rng::substream_seed(seed, 0), table, 0);
  const auto test_set = build_dataset(cfg, 20000, rng::substream_seed(seed, 1), table, 0);
  TrainConfig tc;
  tc.epochs = 30;
  tc.seed = seed;
  const auto model = train(train_set, {7, 256, 6}, tc).model;
  const auto knn = knn_fit(train_set.features(), train_set.labels(), 5);

  const double r_t = kDefaultTargetRate;
  const auto oracle = evaluate_scheme(cfg, test_set, oracle_predictor(cfg, table), table, r_t, "oracle", 15, 0);
  const auto dnn = evaluate_scheme(cfg, test_set, mlp_predictor(model), table, r_t, "dnn", 15, 0);
  const auto kn = evaluate_scheme(cfg, test_set, knn_predictor(knn), table, r_t, "knn", 15, 0);

  const bool a = dnn.accuracy >= 0.90;
  const bool b = dnn.avg_secrecy_rate >= 0.98 * oracle.avg_secrecy_rate;
  const bool c = dnn.avg_secrecy_rate >= kn.avg_secrecy_rate;
  const bool d = std::abs(dnn.sop - oracle.sop) <= 0.02;
  auto mark = [](bool ok) { return ok ? "ok" : "FAIL"; };
  std::ostringstream o;
  o << "(a) accuracy " << fmt("%.4f", dnn.accuracy) << " >= 0.90 " << mark(a)
    << "; (b) rate ratio " << fmt("%.4f", dnn.avg_secrecy_rate / oracle.avg_secrecy_rate)
    << " >= 0.98 " << mark(b) << "; (c) dnn rate " << fmt("%.4f", dnn.avg_secrecy_rate)
    << " vs knn " << fmt("%.4f", kn.avg_secrecy_rate) << " " << mark(c) << "; (d) |SOP gap| "
    << fmt("%.4f", std::abs(dnn.sop - oracle.sop)) << " <= 0.02 " << mark(d)
    << "; oracle rate " << fmt("%.4f", oracle.avg_secrecy_rate) << ", knn accuracy "
    << fmt("%.4f", kn.accuracy);
  return {a && b && c && d, o.str()};
}

// 6: normalization on generated records and three reference one-hot codings.
Outcome normalization_and_codes() {
  std::size_t checked = 0, bad = 0;
  for (int n_t : {1, 2}) {
    for (double snr : {0.0, 15.0, 30.0}) {
      const auto cfg = SystemConfig::equal_power(6, n_t, snr);
      const auto ds = build_dataset(cfg, 20000, 606, ComboTable(6, n_t), 0);
      const auto f = ds.features();
      for (std::size_t i = 0; i < f.rows; ++i) {
        const auto& d = ds.records[i].d;
        if (std::equal(d.begin() + 1, d.end(), d.begin())) continue;
        const auto row = f.row(i);
        const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        bad += !(std::abs(mean) <= 1e-12 && std::abs(*hi - *lo - 1.0) <= 1e-12);
        ++checked;
      }
    }
  }
  const bool codes = one_hot(6, 6).str() == "000001" && one_hot(4, 6).str() == "000100" &&
                     one_hot(10, 15).str() == "000000000100000";
  return {bad == 0 && codes, std::to_string(checked) + " records, " + std::to_string(bad) +
                                 " violations; one-hot codings " + (codes ? "match" : "differ")};
}

// 7: gen -> train -> eval twice with identical flags, compare every file.
Outcome determinism() {
  const auto root = fs::temp_directory_path() / "tasdl_acceptance";
  fs::remove_all(root);
  const std::string flags =
      " --quiet --snr-db 0,15 --count 3000 --test-count 2000 --hidden 64 --epochs 5 --seed 7";
  // Same --dir both times: provenance lines carry paths, so the flags must
  // match exactly. The first run's files are moved aside before the second.
  const auto dir = (root / "run").string();
  for (const char* run : {"first", "second"}) {
    for (const char* cmd : {"gen", "train", "eval"}) {
      const std::string line = std::string(TASDL_CLI_PATH) + " --dir " + dir + flags + " " + cmd;
      const int status = std::system(line.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        return {false, std::string("'") + cmd + "' failed in " + run + " run"};
    }
    if (std::string(run) == "first") fs::rename(dir, root / "first");
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(root / "first")) {
    const auto other = root / "run" / e.path().filename();
    differ += !fs::exists(other) || slurp(e.path()) != slurp(other);
    ++files;
  }
  const bool complete = files == 2 * 2 + 2 * 2 + 2;  // datasets, models + loss logs, reports
  return {complete && differ == 0,
          std::to_string(files) + " files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "closed-form identity", 10, identity},
      {2, "oracle equivalence", 30, oracle_equivalence},
      {3, "coupling witness", 10, coupling},
      {4, "gradient check", 30, gradient_check},
      {5, "desk-scale performance", 900, desk_performance},
      {6, "normalization and one-hot codings", 60, normalization_and_codes},
      {7, "pipeline determinism", 300, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %d %s: %s [%.1fs / %.0fs budget%s] %s\n", c.id, c.name, pass ? "PASS" : "FAIL",
                secs, c.budget_s, in_time ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of 7 criteria passed\n", 7 - failed);
  return failed == 0 ? 0 : 1;
}
