#include "audioshield/classifier.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "audioshield/dsp.hpp"
#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"
#include "audioshield/rng.hpp"

namespace audioshield::kw {

std::size_t ProbVector::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct MelFilter {
  std::size_t start = 0;
  std::vector<double> weights;
};

std::vector<MelFilter> build_mel_bank(const FeatureSpec& spec, std::size_t fft_size) {
  const double high = std::min<double>(spec.mel_high_hz, spec.sample_rate / 2.0);
  const double mel_lo = hz_to_mel(spec.mel_low_hz);
  const double mel_hi = hz_to_mel(high);
  const int m = spec.mel_bins;
  std::vector<double> edges(static_cast<std::size_t>(m) + 2);
  for (int i = 0; i < m + 2; ++i)
    edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (m + 1));
  const std::size_t bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(spec.sample_rate) / static_cast<double>(fft_size);
  std::vector<MelFilter> bank(static_cast<std::size_t>(m));
  for (int f = 0; f < m; ++f) {
    const double lo = edges[static_cast<std::size_t>(f)];
    const double mid = edges[static_cast<std::size_t>(f) + 1];
    const double hi2 = edges[static_cast<std::size_t>(f) + 2];
    auto& filt = bank[static_cast<std::size_t>(f)];
    filt.start = bins;
    for (std::size_t k = 0; k < bins; ++k) {
      const double fk = bin_hz * static_cast<double>(k);
      double wgt = 0.0;
      if (fk > lo && fk < hi2) wgt = (fk <= mid) ? (fk - lo) / (mid - lo) : (hi2 - fk) / (hi2 - mid);
      if (wgt > 0.0) {
        if (filt.start == bins) filt.start = k;
        filt.weights.push_back(wgt);
      } else if (filt.start != bins) {
        break;
      }
    }
    if (filt.start == bins) filt.start = 0;  // degenerate (empty) filter
  }
  return bank;
}

}  // namespace

FeatureMatrix extract_features(const audio::AudioClip& clip, const FeatureSpec& spec) {
  const audio::AudioClip mono = audio::to_mono(clip);
  const auto frame = static_cast<std::size_t>(spec.frame);
  const auto hop = static_cast<std::size_t>(spec.hop);
  const std::size_t n = mono.samples.size();
  const std::size_t available = n >= frame ? (n - frame) / hop + 1 : 0;
  const auto rows = static_cast<std::size_t>(spec.target_frames);
  const std::size_t used = std::min(available, rows);

  const std::size_t fft_size = dsp::next_pow2(frame);
  const auto window = dsp::hann_window(frame);
  const auto bank = build_mel_bank(spec, fft_size);
  const std::size_t bins = fft_size / 2 + 1;

  FeatureMatrix out;
  out.frames = spec.target_frames;
  out.bins = spec.mel_bins;
  out.values.assign(rows * static_cast<std::size_t>(spec.mel_bins), kLogFloor);

  std::vector<std::complex<double>> buf(fft_size);
  std::vector<double> power(bins);
  for (std::size_t t = 0; t < used; ++t) {
    const double* x = mono.samples.data() + t * hop;
    for (std::size_t i = 0; i < frame; ++i) buf[i] = {x[i] * window[i], 0.0};
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(frame), buf.end(), std::complex<double>{0.0, 0.0});
    dsp::fft_inplace(buf);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
    double* row = out.values.data() + t * static_cast<std::size_t>(spec.mel_bins);
    for (std::size_t f = 0; f < bank.size(); ++f) {
      const auto& filt = bank[f];
      const double e = filt.weights.empty()
                           ? 0.0
                           : kernels::dot(power.data() + filt.start, filt.weights.data(), filt.weights.size());
      row[f] = std::log(e + 1e-6);
    }
  }
  return out;
}

std::vector<double> feature_input(const FeatureMatrix& features) {
  std::vector<double> x(features.values.size());
  constexpr double inv = 1.0 / -kLogFloor;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (features.values[i] - kLogFloor) * inv;
  return x;
}

KwModel zero_model(const FeatureSpec& spec, const std::vector<int>& hidden,
                   const std::vector<std::string>& class_names) {
  KwModel model;
  model.features = spec;
  model.class_names = class_names;
  std::vector<int> dims;
  dims.push_back(static_cast<int>(model.input_dim()));
  for (int h : hidden) dims.push_back(h);
  dims.push_back(static_cast<int>(class_names.size()));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.cols = dims[l];
    layer.rows = dims[l + 1];
    layer.weights.assign(static_cast<std::size_t>(layer.rows) * layer.cols, 0.0f);
    layer.bias.assign(static_cast<std::size_t>(layer.rows), 0.0f);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

namespace {

// `activations` (when non-null) receives the post-rectifier hidden vectors.
void forward_layers(const KwModel& model, const std::vector<double>& input,
                    std::vector<std::vector<double>>* activations, std::vector<double>* logits) {
  if (activations) activations->reserve(model.layers.size());
  const std::vector<double>* x = &input;
  std::vector<double> carry;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    std::vector<double> y(static_cast<std::size_t>(layer.rows));
    for (int r = 0; r < layer.rows; ++r)
      y[static_cast<std::size_t>(r)] =
          kernels::dot_wf(layer.weights.data() + static_cast<std::size_t>(r) * layer.cols, x->data(),
                          static_cast<std::size_t>(layer.cols)) +
          layer.bias[static_cast<std::size_t>(r)];
    if (l + 1 == model.layers.size()) {
      *logits = std::move(y);
      return;
    }
    kernels::relu(y.data(), y.size());
    if (activations) {
      activations->push_back(std::move(y));
      x = &activations->back();
    } else {
      carry = std::move(y);
      x = &carry;
    }
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

Prediction predict_full(const KwModel& model, const audio::AudioClip& clip) {
  const auto features = extract_features(clip, model.features);
  const auto input = feature_input(features);
  Prediction pred;
  forward_layers(model, input, nullptr, &pred.logits);
  pred.probs.probs = softmax(pred.logits);
  pred.probs.class_names = model.class_names;
  return pred;
}

ProbVector predict(const KwModel& model, const audio::AudioClip& clip) {
  return predict_full(model, clip).probs;
}

double loss_and_gradients(const KwModel& model, const std::vector<const std::vector<double>*>& inputs,
                          const std::vector<int>& labels, Gradients* grads) {
  const std::size_t batch = inputs.size();
  if (batch == 0 || labels.size() != batch) throw Error("empty or mismatched batch");
  if (grads) {
    grads->weights.clear();
    grads->bias.clear();
    for (const auto& layer : model.layers) {
      grads->weights.emplace_back(static_cast<std::size_t>(layer.rows) * layer.cols, 0.0);
      grads->bias.emplace_back(static_cast<std::size_t>(layer.rows), 0.0);
    }
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  double loss = 0.0;
  for (std::size_t s = 0; s < batch; ++s) {
    std::vector<std::vector<double>> acts;  // post-activation per layer
    std::vector<double> logits;
    forward_layers(model, *inputs[s], &acts, &logits);
    const auto p = softmax(logits);
    const auto label = static_cast<std::size_t>(labels[s]);
    loss -= std::log(std::max(p[label], 1e-300)) * inv_batch;
    if (!grads) continue;

    std::vector<double> delta(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
      delta[i] = (p[i] - (i == label ? 1.0 : 0.0)) * inv_batch;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
      const auto& layer = model.layers[l];
      const std::vector<double>& in = (l == 0) ? *inputs[s] : acts[l - 1];
      auto& gw = grads->weights[l];
      auto& gb = grads->bias[l];
      std::vector<double> din(static_cast<std::size_t>(layer.cols), 0.0);
      for (int r = 0; r < layer.rows; ++r) {
        const double d = delta[static_cast<std::size_t>(r)];
        gb[static_cast<std::size_t>(r)] += d;
        kernels::axpy(d, in.data(), gw.data() + static_cast<std::size_t>(r) * layer.cols,
                      static_cast<std::size_t>(layer.cols));
        if (l > 0)
          kernels::axpy_wf(d, layer.weights.data() + static_cast<std::size_t>(r) * layer.cols,
                           din.data(), static_cast<std::size_t>(layer.cols));
      }
      if (l > 0) {
        // back through the rectifier of the previous layer
        const auto& act = acts[l - 1];
        for (std::size_t i = 0; i < din.size(); ++i)
          if (act[i] <= 0.0) din[i] = 0.0;
        delta = std::move(din);
      }
    }
  }
  return loss;
}

namespace {

void init_weights(KwModel& model, std::uint64_t seed) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    auto rng = SplitMix64::keyed(seed, {0x11, l});
    const double bound = std::sqrt(6.0 / (layer.rows + layer.cols));
    for (auto& w : layer.weights) w = static_cast<float>(rng.next_uniform(-bound, bound));
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0f);
  }
}

struct AdamState {
  std::vector<std::vector<double>> mw, vw, mb, vb;
  long t = 0;
};

void adam_step(KwModel& model, const Gradients& grads, AdamState& state, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    auto update = [&](std::vector<float>& params, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double step = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        params[i] = static_cast<float>(static_cast<double>(params[i]) - step);
      }
    };
    update(layer.weights, grads.weights[l], state.mw[l], state.vw[l]);
    update(layer.bias, grads.bias[l], state.mb[l], state.vb[l]);
  }
}

double accuracy(const KwModel& model, const std::vector<std::vector<double>>& inputs,
                const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i : idx) {
    std::vector<double> logits;
    forward_layers(model, inputs[i], nullptr, &logits);
    const auto best = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == static_cast<std::size_t>(labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config, std::uint64_t seed) {
  const std::size_t n = dataset.clips.size();
  const std::size_t classes = dataset.class_names.size();
  if (classes < 2) throw InsufficientData("need at least 2 classes");
  if (dataset.labels.size() != n) throw Error("labels/clips size mismatch");
  std::vector<std::size_t> per_class(classes, 0);
  for (int label : dataset.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) throw Error("label out of range");
    ++per_class[static_cast<std::size_t>(label)];
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (per_class[c] < static_cast<std::size_t>(config.min_clips_per_class))
      throw InsufficientData("class '" + dataset.class_names[c] + "' has " +
                             std::to_string(per_class[c]) + " clips, need " +
                             std::to_string(config.min_clips_per_class));

  FeatureSpec spec;
  spec.sample_rate = dataset.clips.front().sample_rate;
  TrainResult result;
  result.model = zero_model(spec, config.hidden, dataset.class_names);
  init_weights(result.model, seed);

  // features are extracted once
  std::vector<std::vector<double>> inputs(n);
  for (std::size_t i = 0; i < n; ++i)
    inputs[i] = feature_input(extract_features(dataset.clips[i], spec));

  // stratified validation split
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<std::size_t>(dataset.labels[i]) == c) members.push_back(i);
    auto rng = SplitMix64::keyed(seed, {0x22, c});
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng.next_below(i)]);
    const auto n_val = static_cast<std::size_t>(
        std::floor(config.val_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < n_val ? val_idx : train_idx).push_back(members[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  AdamState adam;
  for (const auto& layer : result.model.layers) {
    const std::size_t wn = layer.weights.size();
    adam.mw.emplace_back(wn, 0.0);
    adam.vw.emplace_back(wn, 0.0);
    adam.mb.emplace_back(layer.bias.size(), 0.0);
    adam.vb.emplace_back(layer.bias.size(), 0.0);
  }

  const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
  std::vector<std::size_t> order = train_idx;
  Gradients grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto rng = SplitMix64::keyed(seed, {0x33, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
      const std::size_t end = std::min(order.size(), at + batch_size);
      std::vector<const std::vector<double>*> batch;
      std::vector<int> labels;
      for (std::size_t i = at; i < end; ++i) {
        batch.push_back(&inputs[order[i]]);
        labels.push_back(dataset.labels[order[i]]);
      }
      epoch_loss += loss_and_gradients(result.model, batch, labels, &grads);
      adam_step(result.model, grads, adam, config.learning_rate);
      ++batches;
    }
    result.epoch_loss.push_back(batches > 0 ? epoch_loss / static_cast<double>(batches) : 0.0);
  }

  result.train_accuracy = accuracy(result.model, inputs, dataset.labels, train_idx);
  result.val_accuracy = accuracy(result.model, inputs, dataset.labels, val_idx);
  return result;
}

// ---------------------------------------------------------------------------
// model file I/O: magic "KWSM", u32 version, u32 dims, f32 payload,
// length-prefixed class names
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, sizeof v);
  put_u32(out, v);
}

struct Reader {
  const unsigned char* p;
  std::size_t size;
  std::size_t off = 0;

  std::uint32_t u32() {
    if (off + 4 > size) throw CorruptPayload("model file truncated");
    const std::uint32_t v = static_cast<std::uint32_t>(p[off]) | (static_cast<std::uint32_t>(p[off + 1]) << 8) |
                            (static_cast<std::uint32_t>(p[off + 2]) << 16) |
                            (static_cast<std::uint32_t>(p[off + 3]) << 24);
    off += 4;
    return v;
  }
  float f32() {
    const std::uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, sizeof f);
    return f;
  }
  std::string str(std::size_t len) {
    if (off + len > size) throw CorruptPayload("model file truncated");
    std::string s(reinterpret_cast<const char*>(p + off), len);
    off += len;
    return s;
  }
};

constexpr std::uint32_t kModelVersion = 1;

}  // namespace

void save_model(const KwModel& model, const std::filesystem::path& path) {
  std::string out;
  out += "KWSM";
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(model.features.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(model.features.frame));
  put_u32(out, static_cast<std::uint32_t>(model.features.hop));
  put_u32(out, static_cast<std::uint32_t>(model.features.mel_bins));
  put_u32(out, static_cast<std::uint32_t>(model.features.target_frames));
  put_u32(out, static_cast<std::uint32_t>(model.features.mel_low_hz));
  put_u32(out, static_cast<std::uint32_t>(model.features.mel_high_hz));
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.rows));
    put_u32(out, static_cast<std::uint32_t>(layer.cols));
  }
  for (const auto& layer : model.layers) {
    for (float w : layer.weights) put_f32(out, w);
    for (float b : layer.bias) put_f32(out, b);
  }
  put_u32(out, static_cast<std::uint32_t>(model.class_names.size()));
  for (const auto& name : model.class_names) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoFailure("short write to " + path.string());
}

KwModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || bytes.compare(0, 4, "KWSM") != 0)
    throw BadMagic(path.string() + ": not a KWSM model file");
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 4};
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw VersionMismatch(path.string() + ": model version " + std::to_string(version));
  KwModel model;
  model.features.sample_rate = static_cast<int>(r.u32());
  model.features.frame = static_cast<int>(r.u32());
  model.features.hop = static_cast<int>(r.u32());
  model.features.mel_bins = static_cast<int>(r.u32());
  model.features.target_frames = static_cast<int>(r.u32());
  model.features.mel_low_hz = static_cast<int>(r.u32());
  model.features.mel_high_hz = static_cast<int>(r.u32());
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 64) throw CorruptPayload("implausible layer count");
  model.layers.resize(n_layers);
  for (auto& layer : model.layers) {
    layer.rows = static_cast<int>(r.u32());
    layer.cols = static_cast<int>(r.u32());
    if (layer.rows <= 0 || layer.cols <= 0) throw CorruptPayload("bad layer shape");
  }
  for (std::size_t l = 1; l < model.layers.size(); ++l)
    if (model.layers[l].cols != model.layers[l - 1].rows)
      throw CorruptPayload("layer shapes do not chain");
  if (static_cast<std::size_t>(model.layers.front().cols) != model.input_dim())
    throw CorruptPayload("input layer does not match feature shape");
  for (auto& layer : model.layers) {
    layer.weights.resize(static_cast<std::size_t>(layer.rows) * layer.cols);
    for (auto& w : layer.weights) w = r.f32();
    layer.bias.resize(static_cast<std::size_t>(layer.rows));
    for (auto& b : layer.bias) b = r.f32();
  }
  const std::uint32_t n_classes = r.u32();
  if (n_classes != static_cast<std::uint32_t>(model.layers.back().rows))
    throw CorruptPayload("class count does not match output layer");
  for (std::uint32_t i = 0; i < n_classes; ++i) {
    const std::uint32_t len = r.u32();
    model.class_names.push_back(r.str(len));
  }
  if (r.off != bytes.size()) throw CorruptPayload("trailing bytes in model file");
  return model;
}

Prediction MlpClassifier::predict_full(const audio::AudioClip& clip) const {
  return kw::predict_full(model_, clip);
}

// ---------------------------------------------------------------------------
// external classifier subprocess
// ---------------------------------------------------------------------------

namespace {

std::string base64_encode(const unsigned char* data, std::size_t len) {
  static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    const unsigned b0 = data[i];
    const unsigned b1 = i + 1 < len ? data[i + 1] : 0;
    const unsigned b2 = i + 2 < len ? data[i + 2] : 0;
    out.push_back(alphabet[b0 >> 2]);
    out.push_back(alphabet[((b0 & 0x3) << 4) | (b1 >> 4)]);
    out.push_back(i + 1 < len ? alphabet[((b1 & 0xf) << 2) | (b2 >> 6)] : '=');
    out.push_back(i + 2 < len ? alphabet[b2 & 0x3f] : '=');
  }
  return out;
}

std::string pcm16_bytes(const audio::AudioClip& clip) {
  std::string bytes;
  bytes.reserve(clip.samples.size() * 2);
  for (double s : clip.samples) {
    const long v = std::lrint(s * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L));
    bytes.push_back(static_cast<char>(q & 0xff));
    bytes.push_back(static_cast<char>((q >> 8) & 0xff));
  }
  return bytes;
}

}  // namespace

ExternalClassifier::ExternalClassifier(const std::string& command) {
  std::signal(SIGPIPE, SIG_IGN);  // broken child pipes surface as write errors
  int to_child[2], from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0)
    throw IoFailure("cannot create pipes for external classifier");
  const pid_t pid = fork();
  if (pid < 0) throw IoFailure("fork failed for external classifier");
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  child_pid_ = pid;
  to_child_ = fdopen(to_child[1], "w");
  from_child_ = fdopen(from_child[0], "r");
  if (!to_child_ || !from_child_) throw IoFailure("fdopen failed for external classifier");
}

ExternalClassifier::~ExternalClassifier() {
  if (to_child_) fclose(to_child_);
  if (from_child_) fclose(from_child_);
  if (child_pid_ > 0) {
    int status = 0;
    waitpid(child_pid_, &status, 0);
  }
}

const std::vector<std::string>& ExternalClassifier::class_names() const {
  std::lock_guard lock(mutex_);
  if (class_names_.empty()) {
    // handshake: one silent sample establishes the class list
    audio::AudioClip probe;
    probe.samples.assign(1, 0.0);
    request(probe);
  }
  return class_names_;
}

Prediction ExternalClassifier::predict_full(const audio::AudioClip& clip) const {
  std::lock_guard lock(mutex_);
  return request(clip);
}

Prediction ExternalClassifier::request(const audio::AudioClip& clip) const {
  const std::uint64_t id = next_id_++;
  const std::string pcm = pcm16_bytes(clip);
  nlohmann::json req = {
      {"id", id},
      {"rate", clip.sample_rate},
      {"pcm16_b64", base64_encode(reinterpret_cast<const unsigned char*>(pcm.data()), pcm.size())}};
  const std::string line = req.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), to_child_) != line.size() || std::fflush(to_child_) != 0)
    throw ChildExited("external classifier stdin closed");

  std::string response;
  int c;
  while ((c = std::fgetc(from_child_)) != EOF && c != '\n') response.push_back(static_cast<char>(c));
  if (response.empty() && c == EOF) throw ChildExited("external classifier produced no response");

  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(response);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("bad response JSON: ") + e.what());
  }
  if (!resp.contains("id") || !resp.contains("probs") || !resp.contains("classes"))
    throw ProtocolError("response missing id/probs/classes");
  if (resp.at("id").get<std::uint64_t>() != id) throw ProtocolError("response id mismatch");

  Prediction pred;
  pred.probs.probs = resp.at("probs").get<std::vector<double>>();
  pred.probs.class_names = resp.at("classes").get<std::vector<std::string>>();
  if (pred.probs.probs.size() != pred.probs.class_names.size() || pred.probs.probs.size() < 2)
    throw ProtocolError("probs/classes size mismatch");
  double total = 0.0;
  for (double p : pred.probs.probs) {
    if (p < 0.0 || !std::isfinite(p)) throw InvalidProbs("negative or non-finite probability");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-3) throw InvalidProbs("probabilities sum to " + std::to_string(total));
  for (double& p : pred.probs.probs) p /= total;
  pred.logits.resize(pred.probs.probs.size());
  for (std::size_t i = 0; i < pred.logits.size(); ++i)
    pred.logits[i] = std::log(std::max(pred.probs.probs[i], 1e-300));
  if (class_names_.empty()) class_names_ = pred.probs.class_names;
  return pred;
}

}  // namespace audioshield::kw
