#include "audioshield/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"

namespace audioshield::dsp {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) throw Error("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::vector<double> magnitude_spectrum(const double* x, std::size_t count, std::size_t fft_size) {
  std::vector<std::complex<double>> buf(fft_size, {0.0, 0.0});
  for (std::size_t i = 0; i < std::min(count, fft_size); ++i) buf[i] = {x[i], 0.0};
  fft_inplace(buf);
  std::vector<double> mag(fft_size / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

std::size_t dominant_bin(const std::vector<double>& x, std::size_t fft_size) {
  const std::size_t n = std::min(x.size(), fft_size);
  const auto w = hann_window(n);
  std::vector<double> windowed(n);
  for (std::size_t i = 0; i < n; ++i) windowed[i] = x[i] * w[i];
  const auto mag = magnitude_spectrum(windowed.data(), n, fft_size);
  return static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
}

namespace {

double sinc(double u) {
  if (std::fabs(u) < 1e-12) return 1.0;
  const double p = kPi * u;
  return std::sin(p) / p;
}

}  // namespace

std::vector<double> sinc_interpolate(const std::vector<double>& x, std::size_t out_len, double ratio,
                                     double cutoff) {
  constexpr int kHalfTaps = 8;  // 16-tap kernel
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(out_len, 0.0);
  for (std::size_t j = 0; j < out_len; ++j) {
    const double pos = static_cast<double>(j) * ratio;
    const auto i0 = static_cast<std::ptrdiff_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i0);
    if (cutoff >= 1.0 && frac < 1e-12) {
      // Exactly on an input sample and no low-pass needed.
      out[j] = (i0 >= 0 && i0 < n) ? x[static_cast<std::size_t>(i0)] : 0.0;
      continue;
    }
    double acc = 0.0;
    double wsum = 0.0;
    for (std::ptrdiff_t k = i0 - kHalfTaps + 1; k <= i0 + kHalfTaps; ++k) {
      const double d = pos - static_cast<double>(k);
      const double u = d / kHalfTaps;
      if (u <= -1.0 || u >= 1.0) continue;
      const double taper = 0.5 + 0.5 * std::cos(kPi * u);
      const double h = cutoff * sinc(cutoff * d) * taper;
      wsum += h;
      if (k >= 0 && k < n) acc += h * x[static_cast<std::size_t>(k)];
    }
    out[j] = (wsum != 0.0) ? acc / wsum : 0.0;
  }
  return out;
}

namespace {

std::complex<double> bilinear(std::complex<double> s) { return (1.0 + s) / (1.0 - s); }

Biquad biquad_from_pole_pair(std::complex<double> z1, std::complex<double> z2, double w_center) {
  // Denominator (z - z1)(z - z2); numerator proportional to z^2 - 1.
  const double a1 = -(z1 + z2).real();
  const double a2 = (z1 * z2).real();
  const std::complex<double> ej(std::cos(w_center), std::sin(w_center));
  const std::complex<double> ej2 = ej * ej;
  const std::complex<double> num = ej2 - 1.0;
  const std::complex<double> den = ej2 + a1 * ej + a2;
  const double g = std::abs(den) / std::abs(num);
  return Biquad{g, 0.0, -g, a1, a2};
}

}  // namespace

std::vector<Biquad> butterworth_band_pass(double low_hz, double high_hz, int order,
                                          double sample_rate) {
  const int n = order / 2;  // analog prototype order
  const double wl = std::tan(kPi * low_hz / sample_rate);
  const double wh = std::tan(kPi * high_hz / sample_rate);
  const double w0sq = wl * wh;
  const double bw = wh - wl;
  const double w_center = 2.0 * std::atan(std::sqrt(w0sq));

  std::vector<Biquad> sections;
  sections.reserve(static_cast<std::size_t>(n));
  auto band_pass_roots = [&](std::complex<double> s) {
    const std::complex<double> bs = bw * s;
    const std::complex<double> disc = std::sqrt(bs * bs - 4.0 * w0sq);
    return std::pair{(bs + disc) / 2.0, (bs - disc) / 2.0};
  };

  if (n % 2 == 1) {
    // Real prototype pole at s = -1: its two band-pass roots form one section.
    auto [p1, p2] = band_pass_roots({-1.0, 0.0});
    sections.push_back(biquad_from_pole_pair(bilinear(p1), bilinear(p2), w_center));
  }
  for (int k = 0; k < n / 2; ++k) {
    const double theta = kPi * (2.0 * (k + 1) + n - 1.0) / (2.0 * n);  // Im > 0 half
    auto [p1, p2] = band_pass_roots({std::cos(theta), std::sin(theta)});
    const auto z1 = bilinear(p1);
    const auto z2 = bilinear(p2);
    sections.push_back(biquad_from_pole_pair(z1, std::conj(z1), w_center));
    sections.push_back(biquad_from_pole_pair(z2, std::conj(z2), w_center));
  }
  return sections;
}

double butterworth_band_pass_gain(double low_hz, double high_hz, int order, double sample_rate,
                                  double hz) {
  // Analog-prototype magnitude at the prewarped frequency; the bilinear
  // transform preserves this exactly, so it doubles as an independent oracle
  // for the coefficient route above.
  const int n = order / 2;
  const double wl = std::tan(kPi * low_hz / sample_rate);
  const double wh = std::tan(kPi * high_hz / sample_rate);
  const double w0sq = wl * wh;
  const double bw = wh - wl;
  const double w = std::tan(kPi * hz / sample_rate);
  if (!std::isfinite(w) || w == 0.0) return 0.0;
  const double ratio = (w * w - w0sq) / (bw * w);
  return 1.0 / std::sqrt(1.0 + std::pow(ratio * ratio, n));
}

std::vector<double> sos_filter(const std::vector<double>& x, const std::vector<Biquad>& sections) {
  std::vector<double> y = x;
  for (const auto& s : sections) {
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II state
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

MdctPlan::MdctPlan(std::size_t half) : half_(half) {
  if (half == 0 || (half & (half - 1)) != 0) throw Error("mdct window must be a power of two");
  const std::size_t full = 2 * half;
  window_.resize(full);
  for (std::size_t i = 0; i < full; ++i)
    window_[i] = std::sin(kPi / static_cast<double>(full) * (static_cast<double>(i) + 0.5));
  basis_.resize(half * full);
  basis_t_.resize(full * half);
  const double c = kPi / static_cast<double>(half);
  const double n0 = 0.5 + static_cast<double>(half) / 2.0;
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t nn = 0; nn < full; ++nn) {
      const double v = std::cos(c * (static_cast<double>(nn) + n0) * (static_cast<double>(k) + 0.5));
      basis_[k * full + nn] = v;
      basis_t_[nn * half + k] = v;
    }
  }
}

void MdctPlan::forward(const double* frame, double* coef) const {
  const std::size_t full = 2 * half_;
  std::vector<double> buf(full);
  for (std::size_t i = 0; i < full; ++i) buf[i] = frame[i] * window_[i];
  for (std::size_t k = 0; k < half_; ++k)
    coef[k] = kernels::dot(buf.data(), basis_.data() + k * full, full);
}

void MdctPlan::inverse(const double* coef, double* frame) const {
  const std::size_t full = 2 * half_;
  const double s = 2.0 / static_cast<double>(half_);
  for (std::size_t nn = 0; nn < full; ++nn)
    frame[nn] = s * window_[nn] * kernels::dot(coef, basis_t_.data() + nn * half_, half_);
}

}  // namespace audioshield::dsp
