#include "audioshield/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "audioshield/dsp.hpp"
#include "audioshield/errors.hpp"
#include "audioshield/rng.hpp"

namespace audioshield::eval {

double f1_from_pr(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

DetectionReport score(const std::vector<std::pair<bool, bool>>& predictions) {
  DetectionReport report;
  for (const auto& [predicted, actual] : predictions) {
    if (predicted && actual) ++report.tp;
    else if (predicted && !actual) ++report.fp;
    else if (!predicted && actual) ++report.fn;
    else ++report.tn;
  }
  if (report.tp + report.fp > 0) {
    report.precision = static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fp);
    report.precision_defined = true;
  }
  if (report.tp + report.fn > 0) {
    report.recall = static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fn);
    report.recall_defined = true;
  }
  if (report.precision_defined && report.recall_defined && report.precision + report.recall > 0.0) {
    report.f1 = f1_from_pr(report.precision, report.recall);
    report.f1_defined = true;
  }
  return report;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, SplitMix64 rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
  return idx;
}

}  // namespace

SplitIndices split_dataset(std::size_t n_adversarial, std::size_t n_benign, double ratio,
                           std::uint64_t seed) {
  if (n_adversarial == 0 || n_benign == 0) throw EmptySet("both sets must be nonempty");
  if (ratio < 0.0 || ratio > 1.0) throw ConfigError("split ratio must be in [0,1]");
  SplitIndices split;
  const auto cut = [&](std::size_t n, std::uint64_t stream, std::vector<std::size_t>& train,
                       std::vector<std::size_t>& test) {
    const auto idx = shuffled_indices(n, SplitMix64::keyed(seed, {0x5217, stream}));
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
  };
  cut(n_adversarial, 1, split.adv_train, split.adv_test);
  cut(n_benign, 2, split.ben_train, split.ben_test);
  return split;
}

HeatMap heat_map(const std::vector<HeatEntry>& entries) {
  std::set<std::string> labels;
  for (const auto& e : entries) {
    labels.insert(e.source_label);
    labels.insert(e.target_label);
  }
  return heat_map(entries, std::vector<std::string>(labels.begin(), labels.end()));
}

HeatMap heat_map(const std::vector<HeatEntry>& entries, const std::vector<std::string>& labels) {
  HeatMap map;
  map.labels = labels;
  std::sort(map.labels.begin(), map.labels.end());
  const std::size_t n = map.labels.size();
  map.cells.assign(n * n, std::nullopt);
  std::vector<std::size_t> total(n * n, 0), detected(n * n, 0);
  auto index_of = [&](const std::string& name) {
    const auto it = std::lower_bound(map.labels.begin(), map.labels.end(), name);
    if (it == map.labels.end() || *it != name) throw Error("heat_map: unknown label " + name);
    return static_cast<std::size_t>(it - map.labels.begin());
  };
  for (const auto& e : entries) {
    const std::size_t cell = index_of(e.source_label) * n + index_of(e.target_label);
    ++total[cell];
    if (e.detected) ++detected[cell];
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t cell = s * n + t;
      if (s == t) {
        map.cells[cell] = 0.0;  // trivial pairs: no adversarial examples exist
      } else if (total[cell] > 0) {
        map.cells[cell] = 100.0 * static_cast<double>(detected[cell]) / static_cast<double>(total[cell]);
      }
    }
  }
  return map;
}

void write_heat_map_csv(const HeatMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << "source\\target";
  for (const auto& label : map.labels) out << ',' << label;
  out << '\n';
  char buf[32];
  for (std::size_t s = 0; s < map.labels.size(); ++s) {
    out << map.labels[s];
    for (std::size_t t = 0; t < map.labels.size(); ++t) {
      out << ',';
      const auto cell = map.at(s, t);
      if (cell.has_value()) {
        std::snprintf(buf, sizeof buf, "%.1f", *cell);
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw IoFailure("short write to " + path.string());
}

double avg_frequency(const audio::AudioClip& clip) {
  if (clip.channels != 1) throw Error("avg_frequency: mono clip required");
  const auto frame = static_cast<std::size_t>(clip.sample_rate * 25 / 1000);
  const auto hop = static_cast<std::size_t>(clip.sample_rate * 10 / 1000);
  const std::size_t n = clip.samples.size();
  const std::size_t frames = n >= frame ? (n - frame) / hop + 1 : 0;
  const std::size_t fft_size = dsp::next_pow2(frame);
  const auto window = dsp::hann_window(frame);
  const double bin_hz = static_cast<double>(clip.sample_rate) / static_cast<double>(fft_size);

  double total = 0.0;
  std::size_t used = 0;
  std::vector<double> buf(frame);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* x = clip.samples.data() + t * hop;
    for (std::size_t i = 0; i < frame; ++i) buf[i] = x[i] * window[i];
    const auto mag = dsp::magnitude_spectrum(buf.data(), frame, fft_size);
    double energy = 0.0, weighted = 0.0, mass = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      energy += mag[k] * mag[k];
      mass += mag[k];
      weighted += bin_hz * static_cast<double>(k) * mag[k];
    }
    if (energy < 1e-8 || mass <= 0.0) continue;
    total += weighted / mass;
    ++used;
  }
  if (used == 0) throw SilentClip("no frames above the energy floor");
  return total / static_cast<double>(used);
}

namespace {

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  const auto n = static_cast<double>(xs.size());
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // continued fraction (Lentz), split at the symmetry point for convergence
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  if (x > (a + 1.0) / (a + b + 2.0))
    return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
  constexpr double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double result = d;
  for (int m = 1; m <= 300; ++m) {
    const double dm = static_cast<double>(m);
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    result *= d * c;
    num = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    result *= delta;
    if (std::fabs(delta - 1.0) < 1e-12) break;
  }
  return std::exp(ln_front) * result / a;
}

double student_t_cdf(double t, double df) {
  if (df <= 0.0) throw Error("student_t_cdf: df must be positive");
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

TTestResult students_t(const std::vector<double>& a, const std::vector<double>& b, bool welch) {
  if (a.size() < 2 || b.size() < 2) throw TooFewSamples("need at least 2 samples per group");
  TTestResult result;
  mean_sd(a, result.mean1, result.sd1);
  mean_sd(b, result.mean2, result.sd2);
  const auto n1 = static_cast<double>(a.size());
  const auto n2 = static_cast<double>(b.size());
  const double v1 = result.sd1 * result.sd1;
  const double v2 = result.sd2 * result.sd2;
  double se;
  if (welch) {
    se = std::sqrt(v1 / n1 + v2 / n2);
    const double num = (v1 / n1 + v2 / n2) * (v1 / n1 + v2 / n2);
    const double den = v1 * v1 / (n1 * n1 * (n1 - 1.0)) + v2 * v2 / (n2 * n2 * (n2 - 1.0));
    result.df = den > 0.0 ? num / den : n1 + n2 - 2.0;
  } else {
    const double pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
    se = std::sqrt(pooled * (1.0 / n1 + 1.0 / n2));
    result.df = n1 + n2 - 2.0;
  }
  result.t = se > 0.0 ? (result.mean1 - result.mean2) / se : 0.0;
  result.p_one_tailed = student_t_cdf(result.t, result.df);
  result.significant_99 = result.p_one_tailed < 0.01;
  return result;
}

FreqDiffAnalysis freq_diff_ttest(const std::vector<ClipPair>& detected_pairs,
                                 const std::vector<ClipPair>& undetected_pairs, bool welch) {
  if (detected_pairs.size() < 2 || undetected_pairs.size() < 2)
    throw TooFewSamples("need at least 2 pairs per group");
  auto diffs = [](const std::vector<ClipPair>& pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [adv, src] : pairs)
      out.push_back(std::fabs(avg_frequency(adv) - avg_frequency(src)));
    return out;
  };
  const auto detected = diffs(detected_pairs);
  const auto undetected = diffs(undetected_pairs);

  FreqDiffAnalysis analysis;
  analysis.n_detected = detected.size();
  analysis.n_undetected = undetected.size();
  // t oriented as (undetected - detected): the paper's claim is that the
  // undetected group's differences are smaller, i.e. t < 0 with p < 0.01.
  analysis.test = students_t(undetected, detected, welch);
  analysis.mean_undetected_hz = analysis.test.mean1;
  analysis.sd_undetected_hz = analysis.test.sd1;
  analysis.mean_detected_hz = analysis.test.mean2;
  analysis.sd_detected_hz = analysis.test.sd2;
  return analysis;
}

ConditionalAccuracy conditional_accuracy(const std::vector<int>& true_labels,
                                         const std::vector<int>& predicted_labels,
                                         const std::vector<bool>& flagged) {
  if (true_labels.size() != predicted_labels.size() || true_labels.size() != flagged.size())
    throw Error("conditional_accuracy: input sizes must match");
  std::size_t correct_flagged = 0, n_flagged = 0, correct_rest = 0, n_rest = 0;
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const bool correct = true_labels[i] == predicted_labels[i];
    if (flagged[i]) {
      ++n_flagged;
      correct_flagged += correct ? 1 : 0;
    } else {
      ++n_rest;
      correct_rest += correct ? 1 : 0;
    }
  }
  ConditionalAccuracy result;
  if (n_flagged > 0)
    result.flagged = static_cast<double>(correct_flagged) / static_cast<double>(n_flagged);
  if (n_rest > 0) result.unflagged = static_cast<double>(correct_rest) / static_cast<double>(n_rest);
  const std::size_t total = n_flagged + n_rest;
  result.overall =
      total > 0 ? static_cast<double>(correct_flagged + correct_rest) / static_cast<double>(total) : 0.0;
  return result;
}

}  // namespace audioshield::eval
