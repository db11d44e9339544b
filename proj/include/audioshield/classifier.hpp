#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "audioshield/audio.hpp"

namespace audioshield::kw {

/// Per-class probability distribution (sums to 1 within 1e-6).
struct ProbVector {
  std::vector<double> probs;
  std::vector<std::string> class_names;

  std::size_t size() const { return probs.size(); }
  /// Ties break toward the lowest class index.
  std::size_t argmax() const;
};

struct Prediction {
  ProbVector probs;
  std::vector<double> logits;
};

struct FeatureSpec {
  int frame = 400;          // 25 ms at 16 kHz
  int hop = 160;            // 10 ms
  int mel_bins = 40;
  int target_frames = 98;
  int mel_low_hz = 20;
  int mel_high_hz = 7600;
  int sample_rate = 16000;

  bool operator==(const FeatureSpec&) const = default;
};

/// target_frames x mel_bins grid of log-energies, row-major.
struct FeatureMatrix {
  int frames = 0;
  int bins = 0;
  std::vector<double> values;
};

constexpr double kLogFloor = -13.815510557964274;  // log(1e-6)

FeatureMatrix extract_features(const audio::AudioClip& clip, const FeatureSpec& spec);

struct DenseLayer {
  int rows = 0;  // outputs
  int cols = 0;  // inputs
  std::vector<float> weights;  // row-major rows x cols
  std::vector<float> bias;     // rows
};

/// Flattened log-mel -> 256 -> 128 -> C rectifier network with softmax head.
struct KwModel {
  FeatureSpec features;
  std::vector<DenseLayer> layers;
  std::vector<std::string> class_names;

  std::size_t input_dim() const {
    return static_cast<std::size_t>(features.target_frames) * features.mel_bins;
  }
};

/// All-zero weights (uniform output); layer sizes input -> hidden... -> C.
KwModel zero_model(const FeatureSpec& spec, const std::vector<int>& hidden,
                   const std::vector<std::string>& class_names);

Prediction predict_full(const KwModel& model, const audio::AudioClip& clip);
ProbVector predict(const KwModel& model, const audio::AudioClip& clip);

/// Flattens and normalizes a feature matrix into the network input domain.
std::vector<double> feature_input(const FeatureMatrix& features);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double val_fraction = 0.1;
  int min_clips_per_class = 20;
  std::vector<int> hidden = {256, 128};
};

struct Dataset {
  std::vector<audio::AudioClip> clips;
  std::vector<int> labels;
  std::vector<std::string> class_names;
};

struct TrainResult {
  KwModel model;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::vector<double> epoch_loss;
};

/// Mini-batch cross-entropy training with adaptive-moment steps,
/// deterministic under the seed.
TrainResult train(const Dataset& dataset, const TrainConfig& config, std::uint64_t seed);

/// Mean cross-entropy over the batch; gradients (same tensor layout as the
/// model) are accumulated into `grads` when non-null. Exposed so tests can
/// compare against central finite differences.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};
double loss_and_gradients(const KwModel& model, const std::vector<const std::vector<double>*>& inputs,
                          const std::vector<int>& labels, Gradients* grads);

void save_model(const KwModel& model, const std::filesystem::path& path);
KwModel load_model(const std::filesystem::path& path);

/// Anything that maps a clip to a probability vector: the in-repo MLP, an
/// external subprocess model, or a hand-built analytic classifier in tests.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual const std::vector<std::string>& class_names() const = 0;
  virtual Prediction predict_full(const audio::AudioClip& clip) const = 0;
  ProbVector predict(const audio::AudioClip& clip) const { return predict_full(clip).probs; }
};

class MlpClassifier : public Classifier {
 public:
  explicit MlpClassifier(KwModel model) : model_(std::move(model)) {}
  const std::vector<std::string>& class_names() const override { return model_.class_names; }
  Prediction predict_full(const audio::AudioClip& clip) const override;
  const KwModel& model() const { return model_; }

 private:
  KwModel model_;
};

/// Line-protocol subprocess classifier: one JSON object per line on
/// stdin/stdout. Request {"id": n, "rate": hz, "pcm16_b64": "..."} ->
/// response {"id": n, "probs": [...], "classes": [...]}.
class ExternalClassifier : public Classifier {
 public:
  explicit ExternalClassifier(const std::string& command);
  ~ExternalClassifier() override;
  ExternalClassifier(const ExternalClassifier&) = delete;
  ExternalClassifier& operator=(const ExternalClassifier&) = delete;

  const std::vector<std::string>& class_names() const override;
  Prediction predict_full(const audio::AudioClip& clip) const override;

 private:
  Prediction request(const audio::AudioClip& clip) const;

  mutable std::mutex mutex_;
  mutable std::vector<std::string> class_names_;
  mutable std::uint64_t next_id_ = 1;
  int child_pid_ = -1;
  mutable FILE* to_child_ = nullptr;
  mutable FILE* from_child_ = nullptr;
};

}  // namespace audioshield::kw
