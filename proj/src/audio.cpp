#include "audioshield/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"
#include "audioshield/dsp.hpp"

namespace audioshield::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_le32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_le16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw MalformedHeader(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_size = 0;
  bool have_data = false;

  std::size_t off = 12;
  while (off + 8 <= size) {
    const char* id = bytes.data() + off;
    const std::uint32_t chunk_size = le32(p + off + 4);
    const std::size_t body = off + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > size) throw MalformedHeader("fmt chunk too small");
      format = le16(p + body);
      channels = le16(p + body + 2);
      rate = le32(p + body + 4);
      bits = le16(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_size = chunk_size;
      have_data = true;
      if (body + chunk_size > size)
        throw TruncatedData(path.string() + ": data chunk shorter than declared");
    }
    off = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !have_data) throw MalformedHeader(path.string() + ": missing fmt/data chunk");
  if (channels < 1 || channels > 2)
    throw UnsupportedFormat(path.string() + ": unsupported channel count");
  if (rate == 0) throw MalformedHeader(path.string() + ": zero sample rate");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.channels = channels;
  if (format == kFormatPcm && bits == 16) {
    const std::size_t count = data_size / 2;
    clip.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<std::int16_t>(le16(p + data_off + 2 * i));
      clip.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatIeeeFloat && bits == 32) {
    const std::size_t count = data_size / 4;
    clip.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t u = le32(p + data_off + 4 * i);
      float f;
      std::memcpy(&f, &u, sizeof f);
      clip.samples[i] = std::clamp(static_cast<double>(f), -1.0, 1.0);
    }
  } else {
    throw UnsupportedFormat(path.string() + ": format code " + std::to_string(format) + " / " +
                            std::to_string(bits) + " bits");
  }
  // drop a dangling partial frame rather than violating the interleave invariant
  clip.samples.resize(clip.samples.size() - clip.samples.size() % channels);
  return clip;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  std::string out;
  const auto count = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_size = count * 2;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_le32(out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  put_le32(out, 16);
  put_le16(out, kFormatPcm);
  put_le16(out, static_cast<std::uint16_t>(clip.channels));
  put_le32(out, static_cast<std::uint32_t>(clip.sample_rate));
  const std::uint32_t block_align = static_cast<std::uint32_t>(clip.channels) * 2;
  put_le32(out, static_cast<std::uint32_t>(clip.sample_rate) * block_align);
  put_le16(out, static_cast<std::uint16_t>(block_align));
  put_le16(out, 16);
  out += "data";
  put_le32(out, data_size);
  for (double s : clip.samples) {
    const long v = std::lrint(s * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L));
    put_le16(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoFailure("short write to " + path.string());
}

AudioClip to_mono(const AudioClip& clip) {
  if (clip.channels == 1) return clip;
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.channels = 1;
  const std::size_t frames = clip.frame_count();
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i)
    out.samples[i] = (clip.samples[2 * i] + clip.samples[2 * i + 1]) / 2.0;
  return out;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw Error("resample: target rate must be positive");
  if (clip.channels != 1) throw Error("resample: mono input required");
  if (target_rate == clip.sample_rate) return clip;
  const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
  const auto out_len = static_cast<std::size_t>(std::llround(
      static_cast<double>(clip.samples.size()) * target_rate / clip.sample_rate));
  const double cutoff = std::min(1.0, 1.0 / ratio);
  AudioClip out;
  out.sample_rate = target_rate;
  out.channels = 1;
  out.samples = dsp::sinc_interpolate(clip.samples, out_len, ratio, cutoff);
  clamp_unit(out);
  return out;
}

void clamp_unit(AudioClip& clip) {
  kernels::clamp(clip.samples.data(), clip.samples.size(), -1.0, 1.0);
}

LabeledClips scan_dataset(const std::filesystem::path& root,
                          const std::vector<std::string>& classes) {
  if (!std::filesystem::is_directory(root))
    throw ConfigError("dataset root not found: " + root.string());
  LabeledClips out;
  out.class_names = classes;
  if (out.class_names.empty()) {
    for (const auto& e : std::filesystem::directory_iterator(root))
      if (e.is_directory()) out.class_names.push_back(e.path().filename().string());
    std::sort(out.class_names.begin(), out.class_names.end());
  }
  for (std::size_t label = 0; label < out.class_names.size(); ++label) {
    const auto dir = root / out.class_names[label];
    if (!std::filesystem::is_directory(dir))
      throw ConfigError("dataset class directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      out.paths.push_back(std::move(f));
      out.labels.push_back(static_cast<int>(label));
    }
  }
  return out;
}

}  // namespace audioshield::audio
