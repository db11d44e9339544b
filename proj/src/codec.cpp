#include "audioshield/codec.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "audioshield/dsp.hpp"
#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"

namespace audioshield::codec {

LpcModel lpc_analyze(std::span<const double> frame, int order) {
  if (order < 0) throw Error("lpc order must be nonnegative");
  if (frame.size() < 2 * static_cast<std::size_t>(order))
    throw Error("lpc frame shorter than 2*order");
  const std::size_t n = frame.size();
  std::vector<double> r(static_cast<std::size_t>(order) + 1, 0.0);
  for (int lag = 0; lag <= order; ++lag) {
    double acc = 0.0;
    for (std::size_t i = static_cast<std::size_t>(lag); i < n; ++i)
      acc += frame[i] * frame[i - static_cast<std::size_t>(lag)];
    r[static_cast<std::size_t>(lag)] = acc;
  }
  if (r[0] <= 0.0) throw SilentFrame("zero-energy analysis frame");
  r[0] *= 1.0 + 1e-9;  // tiny ridge keeps the recursion well-posed

  LpcModel model;
  model.order = order;
  model.coeffs.assign(static_cast<std::size_t>(order), 0.0);
  std::vector<double> a(model.coeffs), prev(model.coeffs);
  double err = r[0];
  for (int i = 1; i <= order; ++i) {
    double acc = r[static_cast<std::size_t>(i)];
    for (int j = 1; j < i; ++j) acc -= a[static_cast<std::size_t>(j - 1)] * r[static_cast<std::size_t>(i - j)];
    const double k = acc / err;
    if (!(std::fabs(k) < 1.0)) break;  // degenerate frame: keep the stable lower-order fit
    prev = a;
    a[static_cast<std::size_t>(i - 1)] = k;
    for (int j = 1; j < i; ++j)
      a[static_cast<std::size_t>(j - 1)] = prev[static_cast<std::size_t>(j - 1)] - k * prev[static_cast<std::size_t>(i - j - 1)];
    err *= 1.0 - k * k;
    if (err <= 0.0) break;
  }
  model.coeffs = a;
  return model;
}

WeightingCoefficients weighting_coefficients(const LpcModel& model) {
  WeightingCoefficients w;
  const auto order = static_cast<std::size_t>(model.order);
  w.numerator.resize(order + 1);
  w.denominator.resize(order + 1);
  w.numerator[0] = 1.0;
  w.denominator[0] = 1.0;
  double g1 = 1.0, g2 = 1.0;
  for (std::size_t k = 1; k <= order; ++k) {
    g1 *= model.gamma1;
    g2 *= model.gamma2;
    w.numerator[k] = -model.coeffs[k - 1] * g1;
    w.denominator[k] = -model.coeffs[k - 1] * g2;
  }
  return w;
}

std::vector<double> weighting_filter(std::span<const double> signal, const LpcModel& model) {
  const auto [num, den] = weighting_coefficients(model);
  const std::size_t order = num.size() - 1;
  std::vector<double> out(signal.size());
  std::vector<double> hist(order, 0.0);  // hist[k-1] = w[n-k]
  for (std::size_t n = 0; n < signal.size(); ++n) {
    double w = signal[n];
    for (std::size_t k = 1; k <= order; ++k) w -= den[k] * hist[k - 1];
    double y = num[0] * w;
    for (std::size_t k = 1; k <= order; ++k) y += num[k] * hist[k - 1];
    out[n] = y;
    for (std::size_t k = order; k >= 2; --k) hist[k - 1] = hist[k - 2];
    if (order > 0) hist[0] = w;
  }
  return out;
}

namespace {

std::size_t celp_frame_length(const CodecConfig& config, int sample_rate, int order) {
  auto L = static_cast<std::size_t>(std::llround(config.frame_ms * sample_rate / 1000.0));
  L = std::max<std::size_t>(L, 2 * static_cast<std::size_t>(order) + 2);
  if (L % 2 != 0) ++L;
  return L;
}

}  // namespace

audio::AudioClip celp_roundtrip(const audio::AudioClip& clip, const CodecConfig& config) {
  if (clip.channels != 1) throw Error("celp_roundtrip: mono input required");
  if (config.residual_bits < 2 || config.residual_bits > 16)
    throw Error("celp residual_bits must be in [2,16]");
  const std::size_t n = clip.samples.size();
  audio::AudioClip out = clip;
  if (n == 0) return out;

  const int order = config.lpc_order;
  const std::size_t L = celp_frame_length(config, clip.sample_rate, order);
  const std::size_t H = L / 2;
  const std::size_t n_sub = (n + H - 1) / H;

  // Triangular analysis window, peak at the center of the subframe.
  std::vector<double> window(L);
  for (std::size_t i = 0; i < L; ++i) {
    const double pos = static_cast<double>(i) + 0.5;
    window[i] = (i < H) ? pos / static_cast<double>(H)
                        : (static_cast<double>(L) - pos) / static_cast<double>(H);
  }

  const std::vector<double>& x = clip.samples;
  std::vector<std::vector<double>> models(n_sub);
  std::vector<double> seg(L);
  for (std::size_t j = 0; j < n_sub; ++j) {
    const auto start = static_cast<std::ptrdiff_t>(j * H) - static_cast<std::ptrdiff_t>(H / 2);
    for (std::size_t i = 0; i < L; ++i) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(i);
      const double v = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n)) ? x[static_cast<std::size_t>(idx)] : 0.0;
      seg[i] = v * window[i];
    }
    try {
      models[j] = lpc_analyze(seg, order).coeffs;
    } catch (const SilentFrame&) {
      models[j].assign(static_cast<std::size_t>(order), 0.0);  // A(z) = 1: pass-through
    }
  }

  // Continuous analysis filtering: e = A(z) * x with raw-signal history.
  std::vector<double> residual(n);
  for (std::size_t j = 0; j < n_sub; ++j) {
    const auto& a = models[j];
    const std::size_t lo = j * H;
    const std::size_t hi = std::min(n, lo + H);
    for (std::size_t m = lo; m < hi; ++m) {
      double e = x[m];
      for (int k = 1; k <= order; ++k) {
        if (static_cast<std::size_t>(k) > m) break;
        e -= a[static_cast<std::size_t>(k - 1)] * x[m - static_cast<std::size_t>(k)];
      }
      residual[m] = e;
    }
  }

  // Per-subframe peak-normalized uniform quantization of the residual.
  const double levels = std::pow(2.0, config.residual_bits);
  for (std::size_t j = 0; j < n_sub; ++j) {
    const std::size_t lo = j * H;
    const std::size_t hi = std::min(n, lo + H);
    const double peak = kernels::max_abs(residual.data() + lo, hi - lo);
    if (peak <= 0.0) {
      for (std::size_t m = lo; m < hi; ++m) residual[m] = 0.0;
      continue;
    }
    const double step = 2.0 * peak / levels;
    for (std::size_t m = lo; m < hi; ++m)
      residual[m] = std::nearbyint(residual[m] / step) * step;
  }

  // Continuous synthesis through 1/A(z); reconstruction history carries
  // across frame boundaries.
  std::vector<double>& y = out.samples;
  for (std::size_t j = 0; j < n_sub; ++j) {
    const auto& a = models[j];
    const std::size_t lo = j * H;
    const std::size_t hi = std::min(n, lo + H);
    for (std::size_t m = lo; m < hi; ++m) {
      double v = residual[m];
      for (int k = 1; k <= order; ++k) {
        if (static_cast<std::size_t>(k) > m) break;
        v += a[static_cast<std::size_t>(k - 1)] * y[m - static_cast<std::size_t>(k)];
      }
      y[m] = v;
    }
  }
  audio::clamp_unit(out);
  return out;
}

audio::AudioClip mdct_roundtrip(const audio::AudioClip& clip, const CodecConfig& config) {
  if (clip.channels != 1) throw Error("mdct_roundtrip: mono input required");
  const std::size_t n = clip.samples.size();
  audio::AudioClip out = clip;
  if (n == 0) return out;

  const dsp::MdctPlan plan(config.mdct_window);
  const std::size_t w = plan.half();
  const std::size_t frames = (n + w + w - 1) / w;  // ceil((n+w)/w)
  const std::size_t padded = (frames + 1) * w;

  std::vector<double> input(padded, 0.0);
  std::copy(clip.samples.begin(), clip.samples.end(), input.begin() + static_cast<std::ptrdiff_t>(w));
  std::vector<double> ola(padded, 0.0);
  std::vector<double> coef(w);
  std::vector<double> frame(2 * w);
  for (std::size_t m = 0; m < frames; ++m) {
    plan.forward(input.data() + m * w, coef.data());
    if (config.mdct_step_size > 0.0) {
      const double step = config.mdct_step_size;
      for (double& c : coef) c = std::nearbyint(c / step) * step;
    }
    plan.inverse(coef.data(), frame.data());
    for (std::size_t i = 0; i < 2 * w; ++i) ola[m * w + i] += frame[i];
  }
  std::copy(ola.begin() + static_cast<std::ptrdiff_t>(w),
            ola.begin() + static_cast<std::ptrdiff_t>(w + n), out.samples.begin());
  audio::clamp_unit(out);
  return out;
}

namespace {

std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = tmpl.find(key, pos)) != std::string::npos) {
    tmpl.replace(pos, key.size(), value);
    pos += value.size();
  }
  return tmpl;
}

void run_codec_command(const std::string& tmpl, const std::filesystem::path& in,
                       const std::filesystem::path& out) {
  if (tmpl.find("{in}") == std::string::npos || tmpl.find("{out}") == std::string::npos)
    throw ConfigError("codec command template must contain {in} and {out}");
  std::string cmd = substitute(substitute(tmpl, "{in}", in.string()), "{out}", out.string());
  const int status = std::system(cmd.c_str());
  if (status == -1) throw CodecUnavailable("failed to spawn: " + cmd);
  if (WIFEXITED(status)) {
    const int code = WEXITSTATUS(status);
    if (code == 127) throw CodecUnavailable("command not found: " + cmd);
    if (code != 0) throw CodecFailed("exit " + std::to_string(code) + ": " + cmd);
    return;
  }
  throw CodecFailed("abnormal termination: " + cmd);
}

struct TempFiles {
  std::filesystem::path in, mid, dec;
  ~TempFiles() {
    std::error_code ec;
    std::filesystem::remove(in, ec);
    std::filesystem::remove(mid, ec);
    std::filesystem::remove(dec, ec);
  }
};

}  // namespace

audio::AudioClip external_codec(const audio::AudioClip& clip, const std::string& encode_cmd,
                                const std::string& decode_cmd) {
  static std::atomic<std::uint64_t> counter{0};
  const auto id = counter.fetch_add(1);
  const auto base = std::filesystem::temp_directory_path() /
                    ("audioshield_codec_" + std::to_string(::getpid()) + "_" + std::to_string(id));
  TempFiles files{base.string() + "_in.wav", base.string() + "_mid.enc", base.string() + "_out.wav"};

  audio::write_wav(clip, files.in);
  run_codec_command(encode_cmd, files.in, files.mid);
  run_codec_command(decode_cmd, files.mid, files.dec);

  audio::AudioClip decoded;
  try {
    decoded = audio::read_wav(files.dec);
  } catch (const Error& e) {
    throw BadOutput(std::string("decoded file unreadable: ") + e.what());
  }
  decoded = audio::to_mono(decoded);
  if (decoded.sample_rate != clip.sample_rate) decoded = audio::resample(decoded, clip.sample_rate);
  decoded.samples.resize(clip.samples.size(), 0.0);  // trim or zero-pad
  return decoded;
}

}  // namespace audioshield::codec
