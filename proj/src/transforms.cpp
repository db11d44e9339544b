#include "audioshield/transforms.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "audioshield/codec.hpp"
#include "audioshield/dsp.hpp"
#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"

namespace audioshield::transforms {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kSqrt2 = 1.4142135623730950488016887242096981;
}  // namespace

audio::AudioClip band_pass(const audio::AudioClip& clip, double low_hz, double high_hz, int order) {
  if (clip.channels != 1) throw Error("band_pass: mono input required");
  if (order != 2 && order != 4 && order != 8) throw InvalidBand("band-pass order must be 2, 4 or 8");
  if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < clip.sample_rate / 2.0))
    throw InvalidBand("band edges must satisfy 0 < low < high < rate/2");
  const auto sections = dsp::butterworth_band_pass(low_hz, high_hz, order, clip.sample_rate);
  audio::AudioClip out = clip;
  out.samples = dsp::sos_filter(clip.samples, sections);
  audio::clamp_unit(out);
  return out;
}

PanGains pan_gains(double pan) {
  const double theta = kPi * (pan + 1.0) / 4.0;
  return {std::cos(theta), std::sin(theta)};
}

audio::AudioClip pan_lengthen(const audio::AudioClip& clip, double pan, double stretch) {
  if (clip.channels != 1) throw Error("pan_lengthen: mono input required");
  if (!(stretch > 0.0)) throw ConfigError("pan_lengthen: stretch must be positive");
  if (pan < -1.0 || pan > 1.0) throw ConfigError("pan_lengthen: pan must be in [-1,1]");
  const std::size_t n = clip.samples.size();
  const auto out_len = static_cast<std::size_t>(std::llround(stretch * static_cast<double>(n)));

  audio::AudioClip out = clip;
  if (out_len == n && stretch == 1.0) {
    // stretch is exactly neutral; keep samples bit-identical
  } else {
    const double ratio = static_cast<double>(n) / static_cast<double>(out_len);
    out.samples = dsp::sinc_interpolate(clip.samples, out_len, ratio, std::min(1.0, 1.0 / ratio));
  }

  // Constant-power stereo spread followed by a mean downmix. The combined
  // per-sample factor is (gL+gR)/2; the sqrt(2) normalization makes the
  // neutral pan an exact identity.
  const PanGains g = pan_gains(pan);
  const double factor = kSqrt2 * (g.left + g.right) / 2.0;
  kernels::scale(factor, out.samples.data(), out.samples.size());
  audio::clamp_unit(out);
  return out;
}

audio::AudioClip quantize(const audio::AudioClip& clip, int q) {
  if (clip.channels != 1) throw Error("quantize: mono input required");
  if (q < 1) throw ConfigError("quantize: q must be >= 1");
  audio::AudioClip out = clip;
  kernels::quantize_lattice(out.samples.data(), out.samples.size(), static_cast<double>(q));
  audio::clamp_unit(out);
  return out;
}

const char* kind_name(TransformSpec::Kind kind) {
  switch (kind) {
    case TransformSpec::Kind::band_pass: return "band_pass";
    case TransformSpec::Kind::pan_lengthen: return "pan_lengthen";
    case TransformSpec::Kind::quantize: return "quantize";
    case TransformSpec::Kind::celp_like: return "celp_like";
    case TransformSpec::Kind::mdct_like: return "mdct_like";
    case TransformSpec::Kind::external_codec: return "external_codec";
  }
  return "unknown";
}

TransformSpec::Kind kind_from_name(const std::string& name) {
  if (name == "band_pass") return TransformSpec::Kind::band_pass;
  if (name == "pan_lengthen") return TransformSpec::Kind::pan_lengthen;
  if (name == "quantize") return TransformSpec::Kind::quantize;
  if (name == "celp_like") return TransformSpec::Kind::celp_like;
  if (name == "mdct_like") return TransformSpec::Kind::mdct_like;
  if (name == "external_codec") return TransformSpec::Kind::external_codec;
  throw ConfigError("unknown transform kind: " + name);
}

void validate_spec(const TransformSpec& spec) {
  if (spec.id.empty()) throw ConfigError("transform spec needs a non-empty id");
  switch (spec.kind) {
    case TransformSpec::Kind::band_pass:
      if (spec.order != 2 && spec.order != 4 && spec.order != 8)
        throw InvalidBand("band-pass order must be 2, 4 or 8");
      if (!(spec.low_hz > 0.0) || !(spec.low_hz < spec.high_hz))
        throw InvalidBand("band edges must be ordered");
      break;
    case TransformSpec::Kind::pan_lengthen:
      if (!(spec.stretch > 0.0)) throw ConfigError("stretch must be positive");
      if (spec.pan < -1.0 || spec.pan > 1.0) throw ConfigError("pan must be in [-1,1]");
      break;
    case TransformSpec::Kind::quantize:
      if (spec.q < 1) throw ConfigError("q must be >= 1");
      break;
    case TransformSpec::Kind::celp_like:
      if (spec.frame_ms <= 0.0) throw ConfigError("frame_ms must be positive");
      if (spec.residual_bits < 2 || spec.residual_bits > 16)
        throw ConfigError("residual_bits must be in [2,16]");
      break;
    case TransformSpec::Kind::mdct_like:
      if (spec.mdct_window == 0 || (spec.mdct_window & (spec.mdct_window - 1)) != 0)
        throw ConfigError("mdct_window must be a power of two");
      if (spec.mdct_step < 0.0) throw ConfigError("mdct_step must be >= 0");
      break;
    case TransformSpec::Kind::external_codec:
      if (spec.encode_cmd.empty() || spec.decode_cmd.empty())
        throw ConfigError("external_codec needs encode and decode commands");
      break;
  }
}

nlohmann::json spec_to_json(const TransformSpec& spec) {
  nlohmann::json params;
  switch (spec.kind) {
    case TransformSpec::Kind::band_pass:
      params = {{"low_hz", spec.low_hz}, {"high_hz", spec.high_hz}, {"order", spec.order}};
      break;
    case TransformSpec::Kind::pan_lengthen:
      params = {{"pan", spec.pan}, {"stretch", spec.stretch}};
      break;
    case TransformSpec::Kind::quantize:
      params = {{"q", spec.q}};
      break;
    case TransformSpec::Kind::celp_like:
      params = {{"frame_ms", spec.frame_ms},
                {"lpc_order", spec.lpc_order},
                {"residual_bits", spec.residual_bits}};
      break;
    case TransformSpec::Kind::mdct_like:
      params = {{"window", spec.mdct_window}, {"step", spec.mdct_step}};
      break;
    case TransformSpec::Kind::external_codec:
      params = {{"encode", spec.encode_cmd}, {"decode", spec.decode_cmd}};
      break;
  }
  return {{"id", spec.id}, {"kind", kind_name(spec.kind)}, {"params", params}};
}

TransformSpec spec_from_json(const nlohmann::json& j) {
  TransformSpec spec;
  if (!j.contains("id") || !j.contains("kind")) throw ConfigError("transform spec needs id and kind");
  spec.id = j.at("id").get<std::string>();
  spec.kind = kind_from_name(j.at("kind").get<std::string>());
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  switch (spec.kind) {
    case TransformSpec::Kind::band_pass:
      spec.low_hz = params.value("low_hz", spec.low_hz);
      spec.high_hz = params.value("high_hz", spec.high_hz);
      spec.order = params.value("order", spec.order);
      break;
    case TransformSpec::Kind::pan_lengthen:
      spec.pan = params.value("pan", spec.pan);
      spec.stretch = params.value("stretch", spec.stretch);
      break;
    case TransformSpec::Kind::quantize:
      spec.q = params.value("q", spec.q);
      break;
    case TransformSpec::Kind::celp_like:
      spec.frame_ms = params.value("frame_ms", spec.frame_ms);
      spec.lpc_order = params.value("lpc_order", spec.lpc_order);
      spec.residual_bits = params.value("residual_bits", spec.residual_bits);
      break;
    case TransformSpec::Kind::mdct_like:
      spec.mdct_window = params.value("window", spec.mdct_window);
      spec.mdct_step = params.value("step", spec.mdct_step);
      break;
    case TransformSpec::Kind::external_codec:
      spec.encode_cmd = params.value("encode", spec.encode_cmd);
      spec.decode_cmd = params.value("decode", spec.decode_cmd);
      break;
  }
  validate_spec(spec);
  return spec;
}

audio::AudioClip apply_transform(const TransformSpec& spec, const audio::AudioClip& clip) {
  switch (spec.kind) {
    case TransformSpec::Kind::band_pass:
      return band_pass(clip, spec.low_hz, spec.high_hz, spec.order);
    case TransformSpec::Kind::pan_lengthen:
      return pan_lengthen(clip, spec.pan, spec.stretch);
    case TransformSpec::Kind::quantize:
      return quantize(clip, spec.q);
    case TransformSpec::Kind::celp_like: {
      codec::CodecConfig cfg;
      cfg.frame_ms = spec.frame_ms;
      cfg.lpc_order = spec.lpc_order;
      cfg.residual_bits = spec.residual_bits;
      return codec::celp_roundtrip(clip, cfg);
    }
    case TransformSpec::Kind::mdct_like: {
      codec::CodecConfig cfg;
      cfg.mdct_window = spec.mdct_window;
      cfg.mdct_step_size = spec.mdct_step;
      return codec::mdct_roundtrip(clip, cfg);
    }
    case TransformSpec::Kind::external_codec:
      return codec::external_codec(clip, spec.encode_cmd, spec.decode_cmd);
  }
  throw Error("unreachable transform kind");
}

std::vector<TransformSpec> default_ensemble() {
  std::vector<TransformSpec> ensemble(6);
  ensemble[0].kind = TransformSpec::Kind::mdct_like;
  ensemble[0].id = "mp3_like";
  ensemble[0].mdct_window = 512;
  ensemble[0].mdct_step = 0.2;
  ensemble[1].kind = TransformSpec::Kind::mdct_like;
  ensemble[1].id = "aac_like";
  ensemble[1].mdct_window = 1024;
  ensemble[1].mdct_step = 0.05;
  ensemble[2].kind = TransformSpec::Kind::celp_like;
  ensemble[2].id = "speex_like";
  ensemble[2].residual_bits = 4;
  ensemble[3].kind = TransformSpec::Kind::celp_like;
  ensemble[3].id = "opus_like";
  ensemble[3].residual_bits = 6;
  ensemble[4].kind = TransformSpec::Kind::band_pass;
  ensemble[4].id = "band_pass";
  ensemble[5].kind = TransformSpec::Kind::pan_lengthen;
  ensemble[5].id = "pan_lengthen";
  return ensemble;
}

}  // namespace audioshield::transforms
