#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "audioshield/audio.hpp"
#include "audioshield/rng.hpp"

namespace testutil {

inline audioshield::audio::AudioClip sine_clip(double hz, int rate, double seconds,
                                               double amplitude, double phase = 0.0) {
  audioshield::audio::AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  const auto n = static_cast<std::size_t>(seconds * rate);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    clip.samples[i] = amplitude * std::sin(2.0 * 3.141592653589793 * hz * i / rate + phase);
  return clip;
}

inline audioshield::audio::AudioClip noise_clip(int rate, double seconds, double amplitude,
                                                std::uint64_t seed) {
  audioshield::audio::AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  const auto n = static_cast<std::size_t>(seconds * rate);
  clip.samples.resize(n);
  audioshield::SplitMix64 rng(seed);
  for (auto& s : clip.samples) s = amplitude * rng.next_uniform(-1.0, 1.0);
  return clip;
}

/// AR(1) process x[n] = coef*x[n-1] + e[n], unit-variance white e, scaled to
/// the requested peak amplitude.
inline audioshield::audio::AudioClip ar1_clip(double coef, int rate, std::size_t n,
                                              std::uint64_t seed, double peak = 0.5) {
  audioshield::audio::AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  clip.samples.resize(n);
  audioshield::SplitMix64 rng(seed);
  double prev = 0.0;
  for (auto& s : clip.samples) {
    prev = coef * prev + rng.next_normal();
    s = prev;
  }
  double max_abs = 0.0;
  for (double s : clip.samples) max_abs = std::max(max_abs, std::fabs(s));
  if (max_abs > 0.0)
    for (auto& s : clip.samples) s *= peak / max_abs;
  return clip;
}

inline double rms(const std::vector<double>& x, std::size_t from = 0) {
  double acc = 0.0;
  for (std::size_t i = from; i < x.size(); ++i) acc += x[i] * x[i];
  const std::size_t n = x.size() - from;
  return n > 0 ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

inline double snr_db(const std::vector<double>& reference, const std::vector<double>& test) {
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    signal += reference[i] * reference[i];
    const double d = test[i] - reference[i];
    noise += d * d;
  }
  if (noise == 0.0) return 300.0;
  return 10.0 * std::log10(signal / noise);
}

inline std::vector<double> random_vector(std::size_t n, audioshield::SplitMix64& rng,
                                         double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.next_uniform(lo, hi);
  return v;
}

}  // namespace testutil
