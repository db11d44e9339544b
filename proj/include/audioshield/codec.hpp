#pragma once

#include <span>
#include <string>
#include <vector>

#include "audioshield/audio.hpp"

namespace audioshield::codec {

/// Linear-prediction model: A(z) = 1 - sum a_k z^-k, plus the weighting
/// factors gamma1/gamma2 for W(z) = A(z/gamma1) / A(z/gamma2).
struct LpcModel {
  int order = 0;
  std::vector<double> coeffs;  // a_1..a_order
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

struct CodecConfig {
  double frame_ms = 20.0;
  int lpc_order = 10;
  int residual_bits = 6;         // CELP residual quantizer resolution, 2..16
  std::size_t mdct_window = 512; // MDCT half-window (power of two)
  double mdct_step_size = 0.0;   // 0 disables coefficient quantization
};

/// Levinson-Durbin solution of the autocorrelation normal equations.
/// Throws SilentFrame when the frame has zero energy.
LpcModel lpc_analyze(std::span<const double> frame, int order);

struct WeightingCoefficients {
  std::vector<double> numerator;    // {1, -a_k * gamma1^k}
  std::vector<double> denominator;  // {1, -a_k * gamma2^k}
};
WeightingCoefficients weighting_coefficients(const LpcModel& model);

/// Applies W(z) = A(z/gamma1)/A(z/gamma2) in direct form II, zero state.
std::vector<double> weighting_filter(std::span<const double> signal, const LpcModel& model);

/// CELP-style round-trip: per-frame LPC (50%-overlapped triangular analysis
/// windows), continuous residual filtering, per-frame peak-normalized uniform
/// residual quantization, continuous synthesis through 1/A(z) with state
/// carried across frames. Length and rate are preserved.
audio::AudioClip celp_roundtrip(const audio::AudioClip& clip, const CodecConfig& config);

/// Sine-windowed MDCT round-trip with 50% overlap and uniform coefficient
/// quantization (step 0 = lossless TDAC reconstruction).
audio::AudioClip mdct_roundtrip(const audio::AudioClip& clip, const CodecConfig& config);

/// Runs external encode/decode command templates ({in}/{out} placeholders)
/// over temp WAV files; the decoded result is resampled and trimmed/padded
/// back to the input's rate and length.
audio::AudioClip external_codec(const audio::AudioClip& clip, const std::string& encode_cmd,
                                const std::string& decode_cmd);

}  // namespace audioshield::codec
