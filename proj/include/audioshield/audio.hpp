#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace audioshield::audio {

/// Canonical waveform: real amplitudes in [-1, 1], interleaved when stereo.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;
  int channels = 1;

  std::size_t frame_count() const {
    return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
  }
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(frame_count()) / sample_rate : 0.0;
  }
};

/// Reads RIFF/WAVE, PCM 16-bit or IEEE float 32-bit, 1-2 channels. Integer
/// samples are scaled by 1/32768.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM little-endian; samples are rounded and saturated.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Channel mean per frame; mono input is returned unchanged.
AudioClip to_mono(const AudioClip& clip);

/// Windowed-sinc resampling of a mono clip to target_rate.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Clamps all samples into [-1, 1] (physical PCM range).
void clamp_unit(AudioClip& clip);

/// Dataset laid out as <root>/<label>/<clip>.wav. Paths are sorted so scans
/// are deterministic.
struct LabeledClips {
  std::vector<std::filesystem::path> paths;
  std::vector<int> labels;
  std::vector<std::string> class_names;
};

LabeledClips scan_dataset(const std::filesystem::path& root, const std::vector<std::string>& classes);

}  // namespace audioshield::audio
