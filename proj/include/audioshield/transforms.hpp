#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "audioshield/audio.hpp"

namespace audioshield::transforms {

/// Causal Butterworth band-pass (cascaded biquads), same length and rate.
audio::AudioClip band_pass(const audio::AudioClip& clip, double low_hz, double high_hz, int order);

struct PanGains {
  double left, right;  // constant-power: left^2 + right^2 == 1
};
PanGains pan_gains(double pan);

/// Time-stretch to round(stretch*N) samples, constant-power pan to stereo,
/// mean downmix back to mono. The sqrt(2) normalization makes pan=0,
/// stretch=1 an exact identity; off-center pans keep their gain distortion.
audio::AudioClip pan_lengthen(const audio::AudioClip& clip, double pan = 0.5, double stretch = 1.01);

/// Amplitude quantization onto the lattice {k*q/32768}.
audio::AudioClip quantize(const audio::AudioClip& clip, int q);

struct TransformSpec {
  enum class Kind { band_pass, pan_lengthen, quantize, celp_like, mdct_like, external_codec };
  Kind kind = Kind::quantize;
  std::string id;

  // kind-specific parameters (unused fields ignored per kind)
  double low_hz = 300.0, high_hz = 4000.0;  // band_pass
  int order = 4;
  double pan = 0.5, stretch = 1.01;  // pan_lengthen
  int q = 256;                       // quantize
  double frame_ms = 20.0;            // celp_like
  int lpc_order = 10;
  int residual_bits = 6;
  std::size_t mdct_window = 512;  // mdct_like
  double mdct_step = 0.05;
  std::string encode_cmd, decode_cmd;  // external_codec
};

const char* kind_name(TransformSpec::Kind kind);
TransformSpec::Kind kind_from_name(const std::string& name);

/// Throws ConfigError / InvalidBand when parameters are inconsistent.
void validate_spec(const TransformSpec& spec);

/// {"id": ..., "kind": ..., "params": {...}}
nlohmann::json spec_to_json(const TransformSpec& spec);
TransformSpec spec_from_json(const nlohmann::json& j);

/// Runs the transform named by the spec (dispatches into codec for the
/// round-trip kinds). Deterministic; mono in, mono out.
audio::AudioClip apply_transform(const TransformSpec& spec, const audio::AudioClip& clip);

/// The paper-shaped six-member default ensemble (two MDCT personalities, two
/// CELP personalities, band-pass, pan & lengthen).
std::vector<TransformSpec> default_ensemble();

}  // namespace audioshield::transforms
