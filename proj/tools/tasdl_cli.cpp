// tasdl: data generation, training, evaluation and misclassification-web
// export for transmit antenna selection in untrusted-relay networks.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 I/O or file-format error, 4 training divergence.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tasdl/tasdl.hpp"

namespace {

using namespace tasdl;

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kConfig = 2,
  kIo = 3,
  kDivergence = 4,
};

struct RunConfig {
  std::string command;
  std::string dir = ".";
  std::string preset = "full";
  int n_s = 6;
  int n_t = 1;
  std::vector<double> snr_db;
  std::size_t count = 200000;
  std::size_t test_count = 200000;
  std::uint64_t seed = 1;
  std::uint64_t train_seed = 1;
  std::vector<std::size_t> hidden{1500};
  std::size_t epochs = 30;
  std::size_t batch = 128;
  double lr = 0.01;
  double rho = 0.9;
  double eps = 1e-8;
  std::size_t k = 5;
  double r_t = kDefaultTargetRate;
  std::vector<std::string> schemes{"oracle", "dnn", "knn", "maxh"};
  double web_snr = 15.0;
  bool mixed = false;
  unsigned threads = 0;
  bool quiet = false;
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto pos = rest.find(',');
    const auto item = rest.substr(0, pos);
    double v = 0.0;
    if (!detail::parse_number(item, v) || !std::isfinite(v))
      throw ConfigError("--snr-db: bad grid value '" + std::string(item) + "'");
    grid.push_back(v);
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return grid;
}

std::string snr_tag(double snr) { return detail::format_double(snr); }

std::string path_in(const RunConfig& rc, const std::string& name) {
  return (std::filesystem::path(rc.dir) / name).string();
}
std::string train_path(const RunConfig& rc, double snr) {
  return path_in(rc, "train_snr" + snr_tag(snr) + ".csv");
}
std::string test_path(const RunConfig& rc, double snr) {
  return path_in(rc, "test_snr" + snr_tag(snr) + ".csv");
}
std::string model_path(const RunConfig& rc, double snr) {
  return rc.mixed ? path_in(rc, "model_mixed.bin") : path_in(rc, "model_snr" + snr_tag(snr) + ".bin");
}
std::string loss_path(const RunConfig& rc, double snr) {
  return rc.mixed ? path_in(rc, "loss_mixed.csv") : path_in(rc, "loss_snr" + snr_tag(snr) + ".csv");
}

// Train and test sets share one seed pair across the grid, so every SNR point
// sees the same channel realizations.
std::uint64_t train_data_seed(const RunConfig& rc) { return rng::substream_seed(rc.seed, 0); }
std::uint64_t test_data_seed(const RunConfig& rc) { return rng::substream_seed(rc.seed, 1); }

void validate(const RunConfig& rc) {
  SystemConfig{rc.n_s, rc.n_t, 1, 1, 1}.validate();
  if (rc.dir.empty()) throw ConfigError("--dir must not be empty");
  if (!(rc.r_t > 0.0)) throw ConfigError("--rt must be > 0");
  if (rc.count == 0 || rc.test_count == 0) throw ConfigError("dataset sizes must be >= 1");
  for (auto h : rc.hidden)
    if (h == 0) throw ConfigError("--hidden widths must be positive");
  for (const auto& s : rc.schemes)
    if (s != "oracle" && s != "dnn" && s != "knn" && s != "maxh")
      throw ConfigError("unknown scheme '" + s + "' (expected oracle, dnn, knn, maxh)");
  if (rc.k == 0) throw ConfigError("--k must be >= 1");
}

void say(const RunConfig& rc, const std::string& msg) {
  if (!rc.quiet) std::cout << msg << "\n";
}

void ensure_dir(const RunConfig& rc) {
  std::error_code ec;
  std::filesystem::create_directories(rc.dir, ec);
  if (ec) throw IoError(rc.dir + ": cannot create directory: " + ec.message());
}

void require_grid(const RunConfig& rc) {
  if (rc.snr_db.empty()) throw ConfigError("--snr-db grid is empty");
}

void check_dataset(const RunConfig& rc, const Dataset& ds, const std::string& path) {
  if (ds.cfg.n_s != rc.n_s || ds.cfg.n_t != rc.n_t)
    throw ConfigError(path + ": dataset has n_s=" + std::to_string(ds.cfg.n_s) + " n_t=" +
                      std::to_string(ds.cfg.n_t) + " but the run requests n_s=" +
                      std::to_string(rc.n_s) + " n_t=" + std::to_string(rc.n_t));
}

std::vector<std::size_t> layer_dims(const RunConfig& rc, const ComboTable& table) {
  std::vector<std::size_t> dims{static_cast<std::size_t>(rc.n_s) + 1};
  dims.insert(dims.end(), rc.hidden.begin(), rc.hidden.end());
  dims.push_back(table.size());
  return dims;
}

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig tc;
  tc.learning_rate = rc.lr;
  tc.batch_size = rc.batch;
  tc.epochs = rc.epochs;
  tc.rmsprop_decay = rc.rho;
  tc.rmsprop_epsilon = rc.eps;
  tc.seed = rc.train_seed;
  return tc;
}

int cmd_gen(const RunConfig& rc) {
  require_grid(rc);
  ensure_dir(rc);
  const ComboTable table(rc.n_s, rc.n_t);
  for (double snr : rc.snr_db) {
    const auto cfg = SystemConfig::equal_power(rc.n_s, rc.n_t, snr);
    const auto train = build_dataset(cfg, rc.count, train_data_seed(rc), table, rc.threads);
    write_dataset(train_path(rc, snr), train);
    const auto test = build_dataset(cfg, rc.test_count, test_data_seed(rc), table, rc.threads);
    write_dataset(test_path(rc, snr), test);
    say(rc, "gen " + snr_tag(snr) + " dB: " + train_path(rc, snr) + " (" +
                std::to_string(train.size()) + "), " + test_path(rc, snr) + " (" +
                std::to_string(test.size()) + ")");
  }
  return kOk;
}

void write_loss_log(const std::string& path, const std::vector<EpochLog>& history,
                    const std::string& provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "# " << provenance << "\nepoch,loss,train_accuracy\n";
  for (const auto& h : history)
    out << h.epoch << ',' << detail::format_double(h.mean_loss) << ','
        << detail::format_double(h.train_accuracy) << '\n';
  if (!out.flush()) throw IoError(path + ": write failed");
}

int cmd_train(const RunConfig& rc) {
  require_grid(rc);
  ensure_dir(rc);
  const ComboTable table(rc.n_s, rc.n_t);
  const auto dims = layer_dims(rc, table);
  const auto tc = train_config(rc);
  tc.validate();

  auto run = [&](const Matrix& x, const std::vector<int>& y, double snr,
                 const std::string& sources) {
    const auto result = train(x, y, dims, tc, [&](const EpochLog& e) {
      say(rc, "  epoch " + std::to_string(e.epoch) + " loss " + detail::format_double(e.mean_loss));
    });
    save_model(model_path(rc, snr), result.model);
    write_loss_log(loss_path(rc, snr), result.history,
                   "tasdl train seed=" + std::to_string(tc.seed) + " dataset=" + sources +
                       " model=" + model_path(rc, snr));
    say(rc, "train: " + model_path(rc, snr));
  };

  if (rc.mixed) {
    Matrix x(0, static_cast<std::size_t>(rc.n_s) + 1);
    std::vector<int> y;
    std::string sources;
    for (double snr : rc.snr_db) {
      const auto path = train_path(rc, snr);
      const auto ds = read_dataset(path);
      check_dataset(rc, ds, path);
      const auto f = ds.features();
      x.data.insert(x.data.end(), f.data.begin(), f.data.end());
      x.rows += f.rows;
      const auto l = ds.labels();
      y.insert(y.end(), l.begin(), l.end());
      sources += (sources.empty() ? "" : ";") + path;
    }
    run(x, y, rc.snr_db.front(), sources);
    return kOk;
  }
  for (double snr : rc.snr_db) {
    const auto path = train_path(rc, snr);
    const auto ds = read_dataset(path);
    check_dataset(rc, ds, path);
    say(rc, "train " + snr_tag(snr) + " dB on " + path);
    run(ds.features(), ds.labels(), snr, path);
  }
  return kOk;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : sep) + x;
  return s;
}

int cmd_eval(const RunConfig& rc) {
  validate(rc);
  if (rc.snr_db.empty()) {
    // Nothing to score; still emit well-formed (empty) result files.
    ensure_dir(rc);
    const std::string prov = "tasdl eval seed=" + std::to_string(rc.seed) + " grid=empty";
    write_results_csv(path_in(rc, "results.csv"), {}, prov);
    write_confusion_csv(path_in(rc, "confusion.csv"), {}, prov);
    return kOk;
  }
  ensure_dir(rc);
  const ComboTable table(rc.n_s, rc.n_t);
  const auto dims = layer_dims(rc, table);
  const auto wants = [&](const char* s) {
    return std::find(rc.schemes.begin(), rc.schemes.end(), s) != rc.schemes.end();
  };

  // Models must outlive the predictors in each SweepPoint.
  std::map<double, MlpModel> mlps;
  std::map<double, KnnModel> knns;
  std::vector<std::string> datasets;
  std::vector<std::string> models;

  auto resolve = [&](double snr) {
    SweepPoint point;
    const auto tpath = test_path(rc, snr);
    if (!std::filesystem::exists(tpath))
      throw ConfigError("grid point " + snr_tag(snr) + " dB: missing test dataset " + tpath);
    point.test = read_dataset(tpath);
    check_dataset(rc, point.test, tpath);
    point.cfg = point.test.cfg;
    datasets.push_back(tpath);
    point.predictors["oracle"] = oracle_predictor(point.cfg, table);
    point.predictors["maxh"] = max_gain_predictor(table);
    if (wants("dnn")) {
      const auto mpath = model_path(rc, snr);
      if (!std::filesystem::exists(mpath))
        throw ConfigError("grid point " + snr_tag(snr) + " dB: missing model " + mpath);
      auto [it, _] = mlps.insert_or_assign(snr, load_model(mpath, dims.front(), dims.back()));
      point.predictors["dnn"] = mlp_predictor(it->second);
      models.push_back(mpath);
    }
    if (wants("knn")) {
      const auto path = train_path(rc, snr);
      if (!std::filesystem::exists(path))
        throw ConfigError("grid point " + snr_tag(snr) + " dB: missing training dataset " + path);
      const auto train = read_dataset(path);
      check_dataset(rc, train, path);
      auto [it, _] = knns.insert_or_assign(snr, knn_fit(train.features(), train.labels(), rc.k));
      point.predictors["knn"] = knn_predictor(it->second);
      datasets.push_back(path);
    }
    say(rc, "eval " + snr_tag(snr) + " dB on " + tpath);
    return point;
  };

  const auto reports = snr_sweep(rc.schemes, rc.snr_db, resolve, table, rc.r_t, rc.threads);
  const std::string prov = "tasdl eval seed=" + std::to_string(rc.seed) +
                           " r_t=" + detail::format_double(rc.r_t) + " k=" +
                           std::to_string(rc.k) + " dataset=" + join(datasets, ";") +
                           " model=" + (models.empty() ? "none" : join(models, ";"));
  write_results_csv(path_in(rc, "results.csv"), reports, prov);
  write_confusion_csv(path_in(rc, "confusion.csv"), reports, prov);
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-6s %6g dB  rate %.4f  sop %.4f  acc %.4f", r.scheme.c_str(),
                  r.snr_db, r.avg_secrecy_rate, r.sop, r.accuracy);
    say(rc, line);
  }
  say(rc, "eval: " + path_in(rc, "results.csv") + ", " + path_in(rc, "confusion.csv"));
  return kOk;
}

int cmd_web(const RunConfig& rc) {
  const auto cpath = path_in(rc, "confusion.csv");
  if (!std::filesystem::exists(cpath))
    throw IoError(cpath + ": missing confusion input (run 'tasdl eval' first)");
  std::vector<LabeledConfusion> selected;
  for (auto& c : read_confusion_csv(cpath)) {
    if (c.snr_db != rc.web_snr) continue;
    if (std::find(rc.schemes.begin(), rc.schemes.end(), c.scheme) == rc.schemes.end()) continue;
    selected.push_back(std::move(c));
  }
  if (selected.empty())
    throw ConfigError(cpath + ": no confusion matrices at " + snr_tag(rc.web_snr) +
                      " dB for schemes " + join(rc.schemes, ","));
  const auto out = path_in(rc, "web.csv");
  write_web_csv(out, selected,
                "tasdl web snr_db=" + snr_tag(rc.web_snr) + " source=" + cpath);
  say(rc, "web: " + out);
  return kOk;
}

int dispatch(const RunConfig& rc) {
  validate(rc);
  if (rc.command == "gen") return cmd_gen(rc);
  if (rc.command == "train") return cmd_train(rc);
  if (rc.command == "eval") return cmd_eval(rc);
  if (rc.command == "web") return cmd_web(rc);
  throw ConfigError("no subcommand given (gen, train, eval, web)");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig rc;
  if (const char* env = std::getenv("TASDL_OUT_DIR"); env && *env) rc.dir = env;

  CLI::App app{"Deep-learning transmit antenna selection for untrusted-relay networks"};
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value file; keys are long flag names, flags override it");

  app.add_option("--dir", rc.dir, "Working directory for datasets, models and results (env TASDL_OUT_DIR)");
  app.add_option("--preset", rc.preset, "full: full-size defaults; desk: 50k/20k records, hidden 256")
                     ->check(CLI::IsMember({"full", "desk"}));
  app.add_option("--n-s", rc.n_s, "Source antennas N_S");
  app.add_option("--n-t", rc.n_t, "Selected antennas N_T");
  std::string snr_text = "0,5,10,15,20,25,30";
  app.add_option("--snr-db", snr_text, "Comma-separated SNR grid in dB (P_S = P_D = P_R); empty for none");
  auto* count = app.add_option("--count", rc.count, "Training records per grid point");
  auto* test_count = app.add_option("--test-count", rc.test_count, "Test records per grid point");
  app.add_option("--seed", rc.seed, "Data seed");
  auto* train_seed = app.add_option("--train-seed", rc.train_seed, "Initialization/shuffle seed (defaults to --seed)");
  auto* hidden = app.add_option("--hidden", rc.hidden, "Hidden layer widths")->delimiter(',');
  auto* epochs = app.add_option("--epochs", rc.epochs, "Training epochs");
  app.add_option("--batch", rc.batch, "Mini-batch size");
  app.add_option("--lr", rc.lr, "RMSProp learning rate");
  app.add_option("--rho", rc.rho, "RMSProp decay");
  app.add_option("--eps", rc.eps, "RMSProp epsilon");
  app.add_flag("--mixed", rc.mixed, "Train/evaluate one model on all grid points together");
  app.add_option("--k", rc.k, "Neighbors for k-NN");
  app.add_option("--rt", rc.r_t, "Target secrecy rate R_t for SOP (bits/s/Hz)");
  app.add_option("--schemes", rc.schemes, "Schemes: oracle, dnn, knn, maxh (maxh is a non-learned reference)")
      ->delimiter(',');
  app.add_option("--web-snr", rc.web_snr, "Grid point exported by 'web'");
  app.add_option("--threads", rc.threads, "Worker threads, 0 = all cores (results do not depend on it)");
  app.add_flag("--quiet", rc.quiet, "Suppress progress output");

  app.add_subcommand("gen", "Generate train/test datasets for every grid point");
  app.add_subcommand("train", "Train one MLP per grid point");
  app.add_subcommand("eval", "Score schemes and write results.csv and confusion.csv");
  app.add_subcommand("web", "Export misclassification pairs (web.csv) from confusion.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  rc.command = app.get_subcommands().front()->get_name();
  try {
    rc.snr_db = parse_grid(snr_text);
  } catch (const ConfigError& e) {
    std::cerr << "tasdl: configuration error: " << e.what() << "\n";
    return kConfig;
  }
  if (rc.preset == "desk") {
    if (count->count() == 0) rc.count = 50000;
    if (test_count->count() == 0) rc.test_count = 20000;
    if (hidden->count() == 0) rc.hidden = {256};
    if (epochs->count() == 0) rc.epochs = 30;
  }
  if (train_seed->count() == 0) rc.train_seed = rc.seed;

  try {
    return dispatch(rc);
  } catch (const ConfigError& e) {
    std::cerr << "tasdl: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "tasdl: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "tasdl: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "tasdl: " << e.what() << "\n";
    return kUnexpected;
  }
}
