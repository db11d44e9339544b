#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "audioshield/attack.hpp"
#include "audioshield/errors.hpp"
#include "audioshield/synth.hpp"
#include "helpers.hpp"

using namespace audioshield;

namespace {

/// Analytic two-class oracle: p(quiet) falls smoothly as RMS passes 0.1.
class EnergyClassifier : public kw::Classifier {
 public:
  const std::vector<std::string>& class_names() const override { return names_; }
  kw::Prediction predict_full(const audio::AudioClip& clip) const override {
    const double rms = testutil::rms(clip.samples);
    const double p_loud = 1.0 / (1.0 + std::exp(-200.0 * (rms - 0.1)));
    kw::Prediction pred;
    pred.probs.class_names = names_;
    pred.probs.probs = {1.0 - p_loud, p_loud};
    pred.logits = {std::log(std::max(1.0 - p_loud, 1e-300)), std::log(std::max(p_loud, 1e-300))};
    return pred;
  }

 private:
  std::vector<std::string> names_ = {"quiet", "loud"};
};

audio::AudioClip quiet_clip() {
  auto clip = testutil::sine_clip(500.0, 16000, 0.2, 0.0707);  // rms ~= 0.05
  return clip;
}

}  // namespace

TEST_CASE("genetic_attack: target equal to current argmax succeeds at iteration 0") {
  EnergyClassifier oracle;
  attack::AttackConfig config;
  config.seed = 4;
  config.max_iterations = 10;
  const auto result = attack::genetic_attack(quiet_clip(), "quiet", oracle, config);
  CHECK(result.success);
  CHECK(result.iterations_used == 0);
  CHECK(result.best_fitness_history.size() == 1);
}

TEST_CASE("genetic_attack: epsilon 0 degenerates to the source") {
  EnergyClassifier oracle;
  attack::AttackConfig config;
  config.seed = 4;
  config.epsilon = 0.0;
  config.max_iterations = 3;
  const auto source = quiet_clip();
  const auto result = attack::genetic_attack(source, "loud", oracle, config);
  CHECK_FALSE(result.success);  // source rms 0.05 keeps the model at "quiet"
  CHECK(result.adversarial_clip.samples == source.samples);
}

TEST_CASE("genetic_attack: defeats the energy-threshold oracle within 500 iterations") {
  EnergyClassifier oracle;
  attack::AttackConfig config;
  config.seed = 99;
  config.epsilon = 0.2;
  config.max_iterations = 500;
  const auto source = quiet_clip();
  const auto result = attack::genetic_attack(source, "loud", oracle, config);
  CHECK(result.success);
  CHECK(result.iterations_used <= 500);

  // epsilon-ball constraint on the returned clip
  double max_diff = 0.0;
  for (std::size_t i = 0; i < source.samples.size(); ++i)
    max_diff = std::max(max_diff, std::fabs(result.adversarial_clip.samples[i] - source.samples[i]));
  CHECK(max_diff <= 0.2 + 1e-12);
}

TEST_CASE("genetic_attack: best fitness is monotonically non-decreasing") {
  EnergyClassifier oracle;
  attack::AttackConfig config;
  config.seed = 1234;
  config.epsilon = 0.03;  // too small to ever succeed: full run
  config.max_iterations = 40;
  const auto result = attack::genetic_attack(quiet_clip(), "loud", oracle, config);
  CHECK_FALSE(result.success);
  REQUIRE(result.best_fitness_history.size() == 41);
  for (std::size_t g = 1; g < result.best_fitness_history.size(); ++g)
    CHECK(result.best_fitness_history[g] >= result.best_fitness_history[g - 1]);
}

TEST_CASE("genetic_attack: all-elite population never changes (degenerate elitism)") {
  EnergyClassifier oracle;
  attack::AttackConfig config;
  config.seed = 8;
  config.population_size = 4;
  config.elite_count = 4;  // population frozen: evolution is a no-op
  config.epsilon = 0.03;
  config.max_iterations = 15;
  const auto result = attack::genetic_attack(quiet_clip(), "loud", oracle, config);
  CHECK_FALSE(result.success);  // iteration-0 failure stays a failure forever
  for (std::size_t g = 1; g < result.best_fitness_history.size(); ++g)
    CHECK(result.best_fitness_history[g] == result.best_fitness_history[0]);

  attack::AttackConfig over = config;
  over.elite_count = config.population_size + 1;
  CHECK_THROWS_AS(attack::genetic_attack(quiet_clip(), "loud", oracle, over), Error);
}

TEST_CASE("genetic_attack: serial and parallel evaluation are bit-identical") {
  EnergyClassifier oracle;
  attack::AttackConfig serial;
  serial.seed = 31337;
  serial.epsilon = 0.2;
  serial.max_iterations = 25;
  serial.jobs = 1;
  auto parallel = serial;
  parallel.jobs = 3;
  const auto source = quiet_clip();
  const auto a = attack::genetic_attack(source, "loud", oracle, serial);
  const auto b = attack::genetic_attack(source, "loud", oracle, parallel);
  CHECK(a.success == b.success);
  CHECK(a.iterations_used == b.iterations_used);
  CHECK(a.adversarial_clip.samples == b.adversarial_clip.samples);
  CHECK(a.best_fitness_history == b.best_fitness_history);
}

TEST_CASE("genetic_attack: unknown target") {
  EnergyClassifier oracle;
  attack::AttackConfig config;
  CHECK_THROWS_AS(attack::genetic_attack(quiet_clip(), "nonsense", oracle, config), UnknownTarget);
}

namespace {

/// Cheap spectral-ratio oracle over three synthetic words; fast enough for
/// corpus tests without training an MLP.
class BandEnergyClassifier : public kw::Classifier {
 public:
  const std::vector<std::string>& class_names() const override { return names_; }
  kw::Prediction predict_full(const audio::AudioClip& clip) const override {
    // energies around the three class fundamentals
    const std::vector<double> centers = {320.0, 450.0, 600.0};
    std::vector<double> energy(3, 1e-9);
    const std::size_t n = std::min<std::size_t>(clip.samples.size(), 4096);
    for (std::size_t c = 0; c < 3; ++c) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double phase = 2.0 * 3.141592653589793 * centers[c] * i / clip.sample_rate;
        re += clip.samples[i] * std::cos(phase);
        im += clip.samples[i] * std::sin(phase);
      }
      energy[c] += std::sqrt(re * re + im * im);
    }
    double total = energy[0] + energy[1] + energy[2];
    kw::Prediction pred;
    pred.probs.class_names = names_;
    for (double e : energy) pred.probs.probs.push_back(e / total);
    pred.logits = pred.probs.probs;
    return pred;
  }

 private:
  std::vector<std::string> names_ = {"word00", "word01", "word02"};
};

}  // namespace

TEST_CASE("generate_corpus: pair counting, determinism, empty per_pair") {
  const auto root = std::filesystem::temp_directory_path() / "audioshield_corpus_data";
  const auto out1 = std::filesystem::temp_directory_path() / "audioshield_corpus_out1";
  const auto out2 = std::filesystem::temp_directory_path() / "audioshield_corpus_out2";
  std::filesystem::remove_all(root);
  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);

  synth::SynthConfig synth_config;
  synth_config.classes = 3;
  synth_config.clips_per_class = 4;
  synth_config.duration_s = 0.2;
  synth::write_dataset(synth_config, 42, root);
  const auto dataset = audio::scan_dataset(root, {});

  BandEnergyClassifier oracle;
  attack::CorpusConfig config;
  config.per_pair = 2;
  config.attack.seed = 7;
  config.attack.population_size = 6;
  config.attack.max_iterations = 4;
  config.attack.epsilon = 0.08;

  const auto result = attack::generate_corpus(dataset, oracle, config, out1);
  CHECK(result.rows.size() <= 3 * 2 * 2);
  CHECK(result.rows.size() % 1 == 0);
  // with each class recognizable the full 12 rows should materialize
  CHECK(result.rows.size() == 12);
  for (const auto& row : result.rows) {
    CHECK(row.source_label != row.target_label);
    CHECK(std::filesystem::exists(row.adversarial_path));
  }

  // same seed, fresh output directory: identical manifest rows and WAV bytes
  const auto again = attack::generate_corpus(dataset, oracle, config, out2);
  REQUIRE(again.rows.size() == result.rows.size());
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    CHECK(result.rows[i].source_path == again.rows[i].source_path);
    CHECK(result.rows[i].success == again.rows[i].success);
    CHECK(result.rows[i].iterations == again.rows[i].iterations);
    std::ifstream f1(result.rows[i].adversarial_path, std::ios::binary);
    std::ifstream f2(again.rows[i].adversarial_path, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
  }

  // manifest round trip
  const auto manifest_path = out1 / "manifest.csv";
  attack::write_manifest(result.rows, manifest_path);
  const auto back = attack::read_manifest(manifest_path);
  REQUIRE(back.size() == result.rows.size());
  CHECK(back.front().source_label == result.rows.front().source_label);
  CHECK(back.back().final_target_prob ==
        doctest::Approx(result.rows.back().final_target_prob));

  // per_pair = 0: header-only manifest, no error
  attack::CorpusConfig empty_config = config;
  empty_config.per_pair = 0;
  const auto empty = attack::generate_corpus(dataset, oracle, empty_config, out2);
  CHECK(empty.rows.empty());
  attack::write_manifest(empty.rows, manifest_path);
  CHECK(attack::read_manifest(manifest_path).empty());

  std::filesystem::remove_all(root);
  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);
}

TEST_CASE("epsilon-ball bound survives the WAV round trip") {
  EnergyClassifier oracle;
  attack::AttackConfig config;
  config.seed = 5;
  config.epsilon = 0.1;
  config.max_iterations = 10;
  const auto source = quiet_clip();
  const auto result = attack::genetic_attack(source, "loud", oracle, config);

  const auto path = std::filesystem::temp_directory_path() / "audioshield_eps.wav";
  audio::write_wav(result.adversarial_clip, path);
  const auto reloaded = audio::read_wav(path);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < source.samples.size(); ++i)
    max_diff = std::max(max_diff, std::fabs(reloaded.samples[i] - source.samples[i]));
  CHECK(max_diff <= 0.1 + 1.0 / 32768.0);
  std::filesystem::remove(path);
}
