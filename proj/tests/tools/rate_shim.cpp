// Re-writes a WAV file at half its sample rate (codec-adapter test helper).
#include <iostream>

#include "audioshield/audio.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: rate_shim <in.wav> <out.wav>\n";
    return 2;
  }
  try {
    const auto clip = audioshield::audio::to_mono(audioshield::audio::read_wav(argv[1]));
    const auto halved = audioshield::audio::resample(clip, clip.sample_rate / 2);
    audioshield::audio::write_wav(halved, argv[2]);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
