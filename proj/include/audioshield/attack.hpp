#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "audioshield/audio.hpp"
#include "audioshield/classifier.hpp"

namespace audioshield::attack {

struct AttackConfig {
  int population_size = 20;
  int max_iterations = 500;
  double epsilon = 0.05;           // max per-sample perturbation, fraction of full scale
  double mutation_prob = 0.005;    // per-sample mutation probability
  std::optional<double> mutation_std;  // defaults to epsilon/2
  int elite_count = 2;
  std::uint64_t seed = 0;
  int jobs = 1;

  double effective_mutation_std() const { return mutation_std.value_or(epsilon / 2.0); }
};

struct AttackResult {
  audio::AudioClip adversarial_clip;
  bool success = false;
  int iterations_used = 0;
  double final_target_prob = 0.0;
  std::string source_label;
  std::string target_label;
  std::vector<double> best_fitness_history;  // best fitness per generation
};

/// Gradient-free genetic attack: fitness is the target-class probability,
/// elitism plus fitness-proportional selection, uniform crossover, Gaussian
/// mutation, every candidate clamped into the epsilon-ball around the source.
/// Per-candidate RNG streams keyed on (seed, generation, index) make results
/// independent of the worker count.
AttackResult genetic_attack(const audio::AudioClip& source, const std::string& target,
                            const kw::Classifier& classifier, const AttackConfig& config);

struct ManifestRow {
  std::string source_path;
  std::string source_label;
  std::string target_label;
  std::string adversarial_path;
  bool success = false;
  int iterations = 0;
  double final_target_prob = 0.0;
};

struct CorpusConfig {
  AttackConfig attack;
  int per_pair = 2;  // attacks per ordered (source,target) label pair
};

struct CorpusResult {
  std::vector<ManifestRow> rows;
  int skipped_misclassified = 0;
};

/// Attacks per_pair correctly-classified clips of every ordered label pair,
/// writes adversarial WAVs into out_dir and returns the manifest.
CorpusResult generate_corpus(const audio::LabeledClips& dataset, const kw::Classifier& classifier,
                             const CorpusConfig& config, const std::filesystem::path& out_dir);

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace audioshield::attack
