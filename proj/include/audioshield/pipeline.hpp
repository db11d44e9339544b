#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "audioshield/attack.hpp"
#include "audioshield/detection.hpp"
#include "audioshield/eval.hpp"
#include "audioshield/learners.hpp"
#include "audioshield/transforms.hpp"

namespace audioshield::pipeline {

inline const std::vector<std::string> kSchemes = {
    "majority", "vote_threshold", "l1",     "forest_sad", "forest_cp",
    "ada_sad",  "ada_cp",         "gbt_sad", "gbt_cp"};

/// One JSON config drives every subcommand; see default_config().
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path dataset_root = "data";
  std::vector<std::string> classes;  // empty: scan the dataset root
  std::filesystem::path model_path;  // default: <output_dir>/model.kwsm

  kw::TrainConfig train;
  std::vector<transforms::TransformSpec> ensemble;
  attack::AttackConfig attack_config;
  int attacks_per_pair = 2;

  std::vector<std::string> schemes = kSchemes;
  detect::L1Mode l1_mode = detect::L1Mode::raw_vs_member;
  detect::VectorSource vector_source = detect::VectorSource::probabilities;
  std::optional<std::size_t> benign_count;  // default: match adversarial count

  learners::ForestConfig forest;
  learners::AdaConfig adaboost;
  learners::GbtConfig gbt;

  double split_ratio = 0.5;

  std::filesystem::path model_file() const {
    return model_path.empty() ? output_dir / "model.kwsm" : model_path;
  }
};

RunConfig default_config();
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Applies a dotted-path override ("attack.epsilon=0.1"); the value is parsed
/// as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

struct TrainOutput {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::filesystem::path model_path;
};
TrainOutput run_train(const RunConfig& config);

struct AttackOutput {
  std::size_t attempts = 0;
  std::size_t successes = 0;
  int skipped_misclassified = 0;
  std::filesystem::path manifest_path;
  std::filesystem::path corpus_dir;
};
AttackOutput run_attack(const RunConfig& config);

struct DetectOutput {
  std::map<std::string, std::filesystem::path> verdict_files;  // scheme -> jsonl
  std::filesystem::path truth_path;
  std::size_t test_count = 0;  // verdict lines per scheme
};
DetectOutput run_detect(const RunConfig& config, std::vector<std::string> schemes = {});

struct EvaluateOutput {
  std::map<std::string, eval::DetectionReport> reports;            // per scheme
  std::map<std::string, eval::DetectionReport> isolated_reports;   // per ensemble member
  std::map<std::string, std::filesystem::path> heat_maps;
};
EvaluateOutput run_evaluate(const RunConfig& config);

struct AnalyzeOutput {
  eval::FreqDiffAnalysis frequency;
  eval::ConditionalAccuracy benign_accuracy;
  std::filesystem::path analysis_path;
};
AnalyzeOutput run_analyze(const RunConfig& config, const std::string& scheme = "vote_threshold");

/// Written next to every command's outputs for provenance.
void write_resolved_config(const RunConfig& config);

}  // namespace audioshield::pipeline
