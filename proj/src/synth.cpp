#include "audioshield/synth.hpp"

#include <cmath>
#include <cstdio>

#include "audioshield/errors.hpp"
#include "audioshield/rng.hpp"

namespace audioshield::synth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct WordTemplate {
  double f1, f2, am_hz;
};

constexpr WordTemplate kWords[10] = {
    {320.0, 1300.0, 3.0}, {450.0, 1900.0, 5.0}, {600.0, 950.0, 2.2},  {760.0, 2500.0, 4.0},
    {350.0, 2900.0, 6.0}, {520.0, 1550.0, 2.8}, {880.0, 2100.0, 3.6}, {280.0, 2200.0, 4.4},
    {640.0, 3100.0, 5.2}, {980.0, 1250.0, 2.4}};

}  // namespace

std::vector<std::string> class_names(int classes) {
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "word%02d", c);
    names.emplace_back(buf);
  }
  return names;
}

audio::AudioClip make_clip(const SynthConfig& config, int class_index, std::uint64_t seed,
                           int clip_index) {
  if (class_index < 0 || class_index >= 10) throw Error("synthetic classes support indices 0..9");
  const WordTemplate& word = kWords[class_index];
  auto rng = SplitMix64::keyed(seed, {0x9000, static_cast<std::uint64_t>(class_index),
                                      static_cast<std::uint64_t>(clip_index)});

  const auto n = static_cast<std::size_t>(config.duration_s * config.sample_rate);
  audio::AudioClip clip;
  clip.sample_rate = config.sample_rate;
  clip.channels = 1;
  clip.samples.resize(n);

  const double jitter1 = 1.0 + rng.next_uniform(-0.05, 0.05);
  const double jitter2 = 1.0 + rng.next_uniform(-0.05, 0.05);
  const double sweep = rng.next_uniform(-0.02, 0.02);
  const double phase1 = rng.next_uniform(0.0, kTwoPi);
  const double phase2 = rng.next_uniform(0.0, kTwoPi);
  const double phase_am = rng.next_uniform(0.0, kTwoPi);
  const double onset = rng.next_uniform(0.02, 0.12);       // seconds
  const double voiced = rng.next_uniform(0.55, 0.85);      // voiced span
  const double amp = config.amplitude * (1.0 + rng.next_uniform(-0.15, 0.15));
  const double noise = config.noise_level * (1.0 + rng.next_uniform(-0.5, 0.5));

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / config.sample_rate;
    double env = 0.0;
    if (t >= onset && t <= onset + voiced) {
      const double u = (t - onset) / voiced;
      env = std::sin(3.141592653589793 * u);  // smooth rise and fall
    }
    const double sweep_factor = 1.0 + sweep * t;
    const double carrier = 0.7 * std::sin(kTwoPi * word.f1 * jitter1 * sweep_factor * t + phase1) +
                           0.5 * std::sin(kTwoPi * word.f2 * jitter2 * sweep_factor * t + phase2);
    const double am = 0.75 + 0.25 * std::sin(kTwoPi * word.am_hz * t + phase_am);
    clip.samples[i] = amp * env * carrier * am + noise * rng.next_normal();
  }
  audio::clamp_unit(clip);
  return clip;
}

kw::Dataset make_dataset(const SynthConfig& config, std::uint64_t seed) {
  if (config.classes < 2 || config.classes > 10)
    throw ConfigError("synthetic dataset supports 2..10 classes");
  kw::Dataset dataset;
  dataset.class_names = class_names(config.classes);
  for (int c = 0; c < config.classes; ++c) {
    for (int i = 0; i < config.clips_per_class; ++i) {
      dataset.clips.push_back(make_clip(config, c, seed, i));
      dataset.labels.push_back(c);
    }
  }
  return dataset;
}

void write_dataset(const SynthConfig& config, std::uint64_t seed,
                   const std::filesystem::path& root) {
  if (config.classes < 2 || config.classes > 10)
    throw ConfigError("synthetic dataset supports 2..10 classes");
  const auto names = class_names(config.classes);
  for (int c = 0; c < config.classes; ++c) {
    const auto dir = root / names[static_cast<std::size_t>(c)];
    std::filesystem::create_directories(dir);
    for (int i = 0; i < config.clips_per_class; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "clip_%04d.wav", i);
      audio::write_wav(make_clip(config, c, seed, i), dir / buf);
    }
  }
}

}  // namespace audioshield::synth
