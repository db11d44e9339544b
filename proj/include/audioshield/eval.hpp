#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "audioshield/audio.hpp"

namespace audioshield::eval {

struct DetectionReport {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool precision_defined = false, recall_defined = false, f1_defined = false;
  std::string scheme;
  std::string split;
};

double f1_from_pr(double precision, double recall);

/// predictions: (predicted_adversarial, actually_adversarial). Undefined
/// ratios are reported as 0 with the corresponding *_defined flag false.
DetectionReport score(const std::vector<std::pair<bool, bool>>& predictions);

struct SplitIndices {
  std::vector<std::size_t> adv_train, adv_test, ben_train, ben_test;
};

/// Stratified deterministic split; ratio is the train fraction per set.
SplitIndices split_dataset(std::size_t n_adversarial, std::size_t n_benign, double ratio,
                           std::uint64_t seed);

struct HeatEntry {
  std::string source_label;
  std::string target_label;
  bool detected = false;
};

struct HeatMap {
  std::vector<std::string> labels;                // sorted class names
  std::vector<std::optional<double>> cells;       // row-major percent; nullopt = no data
  std::optional<double> at(std::size_t row, std::size_t col) const {
    return cells[row * labels.size() + col];
  }
};

/// Cell (s,t) = 100 * detected/total for the ordered pair; the diagonal is
/// fixed at 0; pairs without examples stay empty.
HeatMap heat_map(const std::vector<HeatEntry>& entries);
HeatMap heat_map(const std::vector<HeatEntry>& entries, const std::vector<std::string>& labels);

/// CSV with a label header row/column, one decimal, empty cells for missing
/// pairs.
void write_heat_map_csv(const HeatMap& map, const std::filesystem::path& path);

/// Mean spectral centroid over 25 ms / 10 ms Hann STFT frames, skipping
/// frames with energy below 1e-8. Throws SilentClip when every frame is
/// skipped.
double avg_frequency(const audio::AudioClip& clip);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_one_tailed = 0.0;  // P(T <= t)
  bool significant_99 = false;
  double mean1 = 0.0, mean2 = 0.0, sd1 = 0.0, sd2 = 0.0;
};

/// Two-sample Student's t with pooled variance (Welch's variant behind the
/// flag); t = (mean(a) - mean(b)) / se.
TTestResult students_t(const std::vector<double>& a, const std::vector<double>& b,
                       bool welch = false);

/// Regularized incomplete beta and the one-tailed t CDF (exposed for oracle
/// tests).
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);

struct FreqDiffAnalysis {
  std::size_t n_detected = 0, n_undetected = 0;
  double mean_detected_hz = 0.0, sd_detected_hz = 0.0;
  double mean_undetected_hz = 0.0, sd_undetected_hz = 0.0;
  /// t = (mean undetected - mean detected) / se; the paper's claim is
  /// "undetected < detected", i.e. significant when p_one_tailed < 0.01.
  TTestResult test;
};

using ClipPair = std::pair<audio::AudioClip, audio::AudioClip>;  // (adversarial, clean source)

FreqDiffAnalysis freq_diff_ttest(const std::vector<ClipPair>& detected_pairs,
                                 const std::vector<ClipPair>& undetected_pairs, bool welch = false);

struct ConditionalAccuracy {
  std::optional<double> flagged;    // accuracy on clips the detector flagged
  std::optional<double> unflagged;  // accuracy on the rest
  double overall = 0.0;
};

ConditionalAccuracy conditional_accuracy(const std::vector<int>& true_labels,
                                         const std::vector<int>& predicted_labels,
                                         const std::vector<bool>& flagged);

}  // namespace audioshield::eval
