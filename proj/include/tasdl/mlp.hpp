#pragma once

// Fully connected network trained from scratch: affine layers y = W^T x + b,
// ReLU hidden units, logistic outputs, mean binary cross-entropy against
// one-hot targets, and RMSProp updates.
//
// Weights of layer l are stored row-major with shape (in, out), so
// w[i * out + j] connects input neuron i to output neuron j.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "tasdl/dataset.hpp"
#include "tasdl/error.hpp"
#include "tasdl/matrix.hpp"
#include "tasdl/parallel.hpp"
#include "tasdl/rng.hpp"

namespace tasdl {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be > 0");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0))
      throw ConfigError("rmsprop_decay must lie in (0, 1)");
    if (!(rmsprop_epsilon > 0.0)) throw ConfigError("rmsprop_epsilon must be > 0");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Weights and biases for every layer; also used for gradients and RMSProp
/// accumulators, which share the parameter shapes.
struct ParamSet {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  static ParamSet zeros_like(std::span<const std::size_t> dims) {
    ParamSet p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      p.w.emplace_back(dims[l] * dims[l + 1], 0.0);
      p.b.emplace_back(dims[l + 1], 0.0);
    }
    return p;
  }

  void fill(double v) {
    for (auto& x : w) std::fill(x.begin(), x.end(), v);
    for (auto& x : b) std::fill(x.begin(), x.end(), v);
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

using Gradients = ParamSet;

struct RmspropState {
  ParamSet s;
};

struct MlpModel {
  std::vector<std::size_t> layer_dims;
  ParamSet params;
  TrainConfig train_config;  ///< provenance only

  std::size_t num_layers() const noexcept { return params.w.size(); }
  std::size_t input_dim() const noexcept { return layer_dims.front(); }
  std::size_t output_dim() const noexcept { return layer_dims.back(); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += params.w[l].size() + params.b[l].size();
    return n;
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

namespace detail {
inline void check_dims(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw ConfigError("layer_dims needs at least an input and an output size");
  for (auto d : dims)
    if (d == 0) throw ConfigError("layer_dims entries must be positive");
}

constexpr std::uint64_t kInitTag = 0x1f83d9abfb41bd6bULL;
constexpr std::uint64_t kShuffleTag = 0x5be0cd19137e2179ULL;
}  // namespace detail

/// Glorot-uniform weights on [-sqrt(6/(fan_in+fan_out)), +sqrt(...)), zero biases.
inline MlpModel init_model(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  detail::check_dims(layer_dims);
  MlpModel m;
  m.layer_dims = std::move(layer_dims);
  m.params = ParamSet::zeros_like(m.layer_dims);
  m.train_config.seed = seed;
  rng::Stream stream(rng::mix64(seed ^ detail::kInitTag));
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(m.layer_dims[l] + m.layer_dims[l + 1]));
    for (auto& w : m.params.w[l]) w = (2.0 * stream.uniform() - 1.0) * bound;
  }
  return m;
}

inline double sigmoid(double c) noexcept {
  if (c >= 0.0) return 1.0 / (1.0 + std::exp(-c));
  const double e = std::exp(c);
  return e / (1.0 + e);
}

/// Activations of every layer for one input: [0] is the input, back() the
/// sigmoid outputs. Hidden entries are post-ReLU.
struct ForwardPass {
  std::vector<std::vector<double>> activations;

  std::span<const double> probs() const noexcept { return activations.back(); }
};

inline void forward_into(const MlpModel& model, std::span<const double> x, ForwardPass& pass) {
  if (x.size() != model.input_dim())
    throw ConfigError("forward: input width " + std::to_string(x.size()) + " != model input " +
                      std::to_string(model.input_dim()));
  const std::size_t layers = model.num_layers();
  pass.activations.resize(layers + 1);
  pass.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = model.layer_dims[l];
    const std::size_t out = model.layer_dims[l + 1];
    const auto& a = pass.activations[l];
    auto& z = pass.activations[l + 1];
    const auto& w = model.params.w[l];
    z.assign(model.params.b[l].begin(), model.params.b[l].end());
    for (std::size_t i = 0; i < in; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      const double* wr = w.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) z[j] += ai * wr[j];
    }
    if (l + 1 < layers) {
      for (auto& v : z) v = v < 0.0 ? 0.0 : v;  // NaN passes through
    } else {
      for (auto& v : z) v = sigmoid(v);
    }
  }
}

inline ForwardPass forward(const MlpModel& model, std::span<const double> x) {
  ForwardPass pass;
  forward_into(model, x, pass);
  return pass;
}

inline constexpr double kProbClip = 1e-12;

/// Mean binary cross-entropy over the outputs, probabilities clipped to
/// [1e-12, 1 - 1e-12].
inline double loss(std::span<const double> probs, const OneHot& target) {
  if (probs.size() != target.bits.size())
    throw ConfigError("loss: " + std::to_string(probs.size()) + " outputs vs " +
                      std::to_string(target.bits.size()) + " target bits");
  double sum = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = std::clamp(probs[k], kProbClip, 1.0 - kProbClip);
    sum += target.bits[k] ? std::log(p) : std::log1p(-p);
  }
  return -sum / static_cast<double>(probs.size());
}

namespace detail {

/// Adds scale * dLoss/dParams for one sample to `grads`. `label` is 1-based.
/// `delta` and `back` are scratch buffers.
inline void accumulate_gradients(const MlpModel& model, const ForwardPass& pass, int label,
                                 double scale, Gradients& grads, std::vector<double>& delta,
                                 std::vector<double>& back) {
  const std::size_t layers = model.num_layers();
  const auto& probs = pass.activations.back();
  const std::size_t k_out = probs.size();
  delta.resize(k_out);
  const double inv_k = 1.0 / static_cast<double>(k_out);
  for (std::size_t k = 0; k < k_out; ++k) {
    const double p = probs[k];
    const double y = static_cast<std::size_t>(label - 1) == k ? 1.0 : 0.0;
    // d/dc of the clipped BCE term is zero where the clip is active.
    delta[k] = (p < kProbClip || p > 1.0 - kProbClip) ? 0.0 : (p - y) * inv_k * scale;
  }
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = model.layer_dims[l];
    const std::size_t out = model.layer_dims[l + 1];
    const auto& a = pass.activations[l];
    const auto& w = model.params.w[l];
    auto& gw = grads.w[l];
    auto& gb = grads.b[l];
    for (std::size_t j = 0; j < out; ++j) gb[j] += delta[j];
    if (l > 0) back.assign(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      const double ai = a[i];
      double* gr = gw.data() + i * out;
      const double* wr = w.data() + i * out;
      if (ai != 0.0)
        for (std::size_t j = 0; j < out; ++j) gr[j] += ai * delta[j];
      if (l > 0 && ai > 0.0) {
        double s = 0.0;
        for (std::size_t j = 0; j < out; ++j) s += wr[j] * delta[j];
        back[i] = s;
      }
    }
    if (l > 0) delta.swap(back);
  }
}

}  // namespace detail

/// Exact gradient of loss(forward(model, x), one_hot(label)) for the sample
/// cached in `pass`.
inline Gradients backward(const MlpModel& model, const ForwardPass& pass, const OneHot& target) {
  if (target.bits.size() != model.output_dim())
    throw ConfigError("backward: target width does not match model output");
  const auto it = std::find(target.bits.begin(), target.bits.end(), std::uint8_t{1});
  const int label = static_cast<int>(it - target.bits.begin()) + 1;
  Gradients g = ParamSet::zeros_like(model.layer_dims);
  std::vector<double> delta;
  std::vector<double> back;
  detail::accumulate_gradients(model, pass, label, 1.0, g, delta, back);
  return g;
}

inline RmspropState make_rmsprop_state(const MlpModel& model) {
  return {ParamSet::zeros_like(model.layer_dims)};
}

/// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / sqrt(s + eps)
inline void rmsprop_step(MlpModel& model, RmspropState& state, const Gradients& grads,
                         const TrainConfig& cfg) {
  const double rho = cfg.rmsprop_decay;
  const double lr = cfg.learning_rate;
  const double eps = cfg.rmsprop_epsilon;
  auto update = [&](std::vector<double>& theta, std::vector<double>& s,
                    const std::vector<double>& g) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      s[i] = rho * s[i] + (1.0 - rho) * g[i] * g[i];
      theta[i] -= lr * g[i] / std::sqrt(s[i] + eps);
    }
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    update(model.params.w[l], state.s.w[l], grads.w[l]);
    update(model.params.b[l], state.s.b[l], grads.b[l]);
  }
}

/// 1-based argmax; ties go to the smallest label.
inline int argmax_label(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()) + 1;
}

inline int predict(const MlpModel& model, std::span<const double> t) {
  return argmax_label(forward(model, t).probs());
}

inline std::vector<int> predict_batch(const MlpModel& model, const Matrix& features,
                                      unsigned parallelism = 1) {
  std::vector<int> out(features.rows);
  parallel_for(features.rows, parallelism, [&](std::size_t begin, std::size_t end) {
    ForwardPass pass;
    for (std::size_t i = begin; i < end; ++i) {
      forward_into(model, features.row(i), pass);
      out[i] = argmax_label(pass.probs());
    }
  });
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;  ///< 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> history;
};

/// Mini-batch RMSProp on mean-over-batch BCE. The sample order of every epoch
/// is a Fisher-Yates shuffle drawn from the config seed, so the result is a
/// pure function of (features, labels, layer_dims, cfg). Loss and accuracy in
/// the log are measured on each sample's forward pass before its batch update.
inline TrainResult train(const Matrix& features, std::span<const int> labels,
                         std::vector<std::size_t> layer_dims, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  detail::check_dims(layer_dims);
  if (features.rows != labels.size())
    throw ConfigError("train: " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(features.rows) + " rows");
  if (features.cols != layer_dims.front())
    throw ConfigError("train: feature width " + std::to_string(features.cols) +
                      " != input layer " + std::to_string(layer_dims.front()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > layer_dims.back())
      throw ConfigError("train: label " + std::to_string(labels[i]) + " at record " +
                        std::to_string(i) + " outside output width " +
                        std::to_string(layer_dims.back()));

  TrainResult result{init_model(std::move(layer_dims), cfg.seed), {}};
  MlpModel& model = result.model;
  model.train_config = cfg;
  auto state = make_rmsprop_state(model);
  Gradients grads = ParamSet::zeros_like(model.layer_dims);
  ForwardPass pass;
  std::vector<double> delta;
  std::vector<double> back;

  const std::size_t n = features.rows;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto stream = rng::substream(cfg.seed ^ detail::kShuffleTag, epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[stream.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      grads.fill(0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        forward_into(model, features.row(idx), pass);
        const int label = labels[idx];
        const auto probs = pass.probs();
        double sample_loss = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
          const double p = std::clamp(probs[k], kProbClip, 1.0 - kProbClip);
          sample_loss += static_cast<std::size_t>(label - 1) == k ? std::log(p) : std::log1p(-p);
        }
        loss_sum -= sample_loss / static_cast<double>(probs.size());
        if (argmax_label(probs) == label) ++correct;
        detail::accumulate_gradients(model, pass, label, scale, grads, delta, back);
      }
      rmsprop_step(model, state, grads, cfg);
    }
    EpochLog log{epoch + 1, n ? loss_sum / static_cast<double>(n) : 0.0,
                 n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0};
    if (!std::isfinite(log.mean_loss))
      throw DivergenceError("training diverged: non-finite loss at epoch " +
                            std::to_string(log.epoch));
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

inline TrainResult train(const Dataset& ds, std::vector<std::size_t> layer_dims,
                         const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  const auto labels = ds.labels();
  return train(ds.features(), labels, std::move(layer_dims), cfg, on_epoch);
}

// ---------------------------------------------------------------------------
// Model file (all integers and floats little-endian):
//
//   bytes  0..7   magic "TASDLMLP"
//   u32           format version (1)
//   u32           number of layer dims, L + 1
//   u64[L + 1]    layer dims, input first
//   f64           learning_rate
//   u64           batch_size
//   u64           epochs
//   f64           rmsprop_decay
//   f64           rmsprop_epsilon
//   u64           seed
//   then for each layer l = 0..L-1:
//     f64[in*out] W, row-major (in, out)
//     f64[out]    b
//
// Nothing follows the last bias vector.
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[8] = {'T', 'A', 'S', 'D', 'L', 'M', 'L', 'P'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  std::uint64_t u64() { return take(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::uint64_t take(int n) {
    if (remaining() < static_cast<std::size_t>(n))
      throw IoError(path_ + ": model file truncated at byte " + std::to_string(pos_));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::string& bytes_;
  const std::string& path_;
  std::size_t pos_ = 8;
};

}  // namespace detail

inline void save_model(const std::string& path, const MlpModel& model) {
  std::string out(kModelMagic, sizeof kModelMagic);
  detail::put_u32(out, kModelVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(model.layer_dims.size()));
  for (auto d : model.layer_dims) detail::put_u64(out, d);
  const auto& tc = model.train_config;
  detail::put_f64(out, tc.learning_rate);
  detail::put_u64(out, tc.batch_size);
  detail::put_u64(out, tc.epochs);
  detail::put_f64(out, tc.rmsprop_decay);
  detail::put_f64(out, tc.rmsprop_epsilon);
  detail::put_u64(out, tc.seed);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (double w : model.params.w[l]) detail::put_f64(out, w);
    for (double b : model.params.b[l]) detail::put_f64(out, b);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path + ": cannot open for writing: " + std::strerror(errno));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw IoError(path + ": write failed");
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for reading: " + std::strerror(errno));
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof kModelMagic ||
      std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0)
    throw IoError(path + ": not a model file (bad magic)");
  detail::ByteReader in(bytes, path);
  const auto version = in.u32();
  if (version != kModelVersion)
    throw IoError(path + ": unsupported model version " + std::to_string(version));
  const auto n_dims = in.u32();
  if (n_dims < 2 || n_dims > 64) throw IoError(path + ": implausible layer count");
  MlpModel m;
  std::size_t expected = 0;
  for (std::uint32_t i = 0; i < n_dims; ++i) {
    const auto d = in.u64();
    if (d == 0 || d > (1u << 24)) throw IoError(path + ": invalid layer dimension");
    m.layer_dims.push_back(static_cast<std::size_t>(d));
  }
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l)
    expected += (m.layer_dims[l] + 1) * m.layer_dims[l + 1] * 8;
  auto& tc = m.train_config;
  tc.learning_rate = in.f64();
  tc.batch_size = in.u64();
  tc.epochs = in.u64();
  tc.rmsprop_decay = in.f64();
  tc.rmsprop_epsilon = in.f64();
  tc.seed = in.u64();
  if (in.remaining() != expected)
    throw IoError(path + ": expected " + std::to_string(expected) + " parameter bytes, found " +
                  std::to_string(in.remaining()) +
                  (in.remaining() < expected ? " (truncated)" : " (trailing data)"));
  m.params = ParamSet::zeros_like(m.layer_dims);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    for (auto& w : m.params.w[l]) w = in.f64();
    for (auto& b : m.params.b[l]) b = in.f64();
  }
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(m.params.w[l].begin(), m.params.w[l].end(), finite) ||
        !std::all_of(m.params.b[l].begin(), m.params.b[l].end(), finite))
      throw IoError(path + ": non-finite parameter in layer " + std::to_string(l));
  }
  return m;
}

/// Rejects a model whose input/output widths do not fit the task.
inline void require_shape(const MlpModel& model, std::size_t input_dim, std::size_t output_dim,
                          const std::string& what = "model") {
  if (model.input_dim() != input_dim || model.output_dim() != output_dim)
    throw ConfigError(what + ": shape mismatch, model maps " + std::to_string(model.input_dim()) +
                      " -> " + std::to_string(model.output_dim()) + " but the task needs " +
                      std::to_string(input_dim) + " -> " + std::to_string(output_dim));
}

inline MlpModel load_model(const std::string& path, std::size_t input_dim,
                           std::size_t output_dim) {
  auto m = load_model(path);
  require_shape(m, input_dim, output_dim, path);
  return m;
}

}  // namespace tasdl
