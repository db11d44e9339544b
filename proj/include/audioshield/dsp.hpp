#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace audioshield::dsp {

std::size_t next_pow2(std::size_t n);

/// In-place radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Magnitude spectrum of the first `count` samples of x, zero-padded to
/// fft_size (power of two). Returns fft_size/2 + 1 magnitudes.
std::vector<double> magnitude_spectrum(const double* x, std::size_t count, std::size_t fft_size);

/// Index of the strongest bin of a signal's windowed spectrum (test utility
/// quality: whole clip, one FFT).
std::size_t dominant_bin(const std::vector<double>& x, std::size_t fft_size);

/// 16-tap Hann-windowed sinc interpolation. Output sample j is taken at input
/// position j*ratio; `cutoff` in (0,1] is the anti-aliasing low-pass fraction
/// of the input Nyquist (use min(1, 1/ratio) when ratio > 1).
std::vector<double> sinc_interpolate(const std::vector<double>& x, std::size_t out_len, double ratio,
                                     double cutoff);

struct Biquad {
  double b0, b1, b2;  // numerator
  double a1, a2;      // denominator (a0 == 1)
};

/// Digital Butterworth band-pass as cascaded second-order sections via the
/// bilinear transform. `order` is the band-pass order (2, 4 or 8), yielding
/// order/2 sections. Gain is normalized to 1 at the geometric center.
std::vector<Biquad> butterworth_band_pass(double low_hz, double high_hz, int order, double sample_rate);

/// Analytic magnitude response of the same design at frequency hz (exact for
/// the bilinear-transformed filter; used as the test oracle).
double butterworth_band_pass_gain(double low_hz, double high_hz, int order, double sample_rate,
                                  double hz);

/// Single forward (causal) pass through the cascade, zero initial state.
std::vector<double> sos_filter(const std::vector<double>& x, const std::vector<Biquad>& sections);

/// MDCT with sine window and 50% overlap. `half` is the hop / coefficient
/// count; frames are 2*half samples. forward() applies the window; inverse()
/// applies window and 2/half scaling so that overlap-adding consecutive
/// inverse frames reconstructs the input (TDAC).
class MdctPlan {
 public:
  explicit MdctPlan(std::size_t half);
  std::size_t half() const { return half_; }
  const std::vector<double>& window() const { return window_; }
  void forward(const double* frame, double* coef) const;
  void inverse(const double* coef, double* frame) const;

 private:
  std::size_t half_;
  std::vector<double> window_;   // 2*half sine window
  std::vector<double> basis_;    // half x 2*half, row-major
  std::vector<double> basis_t_;  // 2*half x half, row-major
};

}  // namespace audioshield::dsp
