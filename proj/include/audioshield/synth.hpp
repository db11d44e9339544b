#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "audioshield/classifier.hpp"

namespace audioshield::synth {

/// Synthetic keyword-style dataset: each class is a fixed pair of formant
/// tones with amplitude modulation, per-clip pitch/timing jitter and a noise
/// floor. Useful for desk-scale runs when no recorded dataset is mounted.
struct SynthConfig {
  int classes = 6;          // up to 10
  int clips_per_class = 120;
  int sample_rate = 16000;
  double duration_s = 1.0;
  double amplitude = 0.35;
  double noise_level = 0.02;
};

std::vector<std::string> class_names(int classes);

audio::AudioClip make_clip(const SynthConfig& config, int class_index, std::uint64_t seed,
                           int clip_index);

kw::Dataset make_dataset(const SynthConfig& config, std::uint64_t seed);

/// Writes <root>/<label>/clip_####.wav for every class.
void write_dataset(const SynthConfig& config, std::uint64_t seed,
                   const std::filesystem::path& root);

}  // namespace audioshield::synth
