#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"
#include "audioshield/pipeline.hpp"
#include "audioshield/synth.hpp"

namespace {

using audioshield::pipeline::RunConfig;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;
};

RunConfig resolve_config(const CommonArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) throw audioshield::ConfigError("cannot open config file: " + args.config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw audioshield::ConfigError("config parse error: " + std::string(e.what()));
  }
  for (const auto& assignment : args.overrides) audioshield::pipeline::apply_override(j, assignment);
  RunConfig config = audioshield::pipeline::config_from_json(j);
  if (const char* env = std::getenv("AUDIOSHIELD_SEED")) {
    try {
      config.seed = std::stoull(env);
    } catch (...) {
      throw audioshield::ConfigError("AUDIOSHIELD_SEED must be an integer");
    }
  }
  if (args.jobs > 0) {
    config.jobs = args.jobs;
    config.attack_config.jobs = args.jobs;
    config.forest.jobs = args.jobs;
  }
  return config;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "JSON run configuration")->required();
  cmd->add_option("--set", args.overrides, "override a config field, e.g. --set attack.epsilon=0.1");
  cmd->add_option("-j,--jobs", args.jobs, "worker thread cap (results are independent of this)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial-audio detection toolkit"};
  app.require_subcommand(1);

  CommonArgs train_args, attack_args, detect_args, evaluate_args, analyze_args;
  std::string detect_scheme, analyze_scheme = "vote_threshold";

  auto* train_cmd = app.add_subcommand("train", "train the keyword classifier");
  add_common(train_cmd, train_args);

  auto* attack_cmd = app.add_subcommand("attack-gen", "generate the adversarial corpus");
  add_common(attack_cmd, attack_args);

  auto* detect_cmd = app.add_subcommand("detect", "probe clips and apply detection schemes");
  add_common(detect_cmd, detect_args);
  detect_cmd->add_option("--scheme", detect_scheme, "run a single scheme (default: all configured)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "score verdicts and emit reports");
  add_common(evaluate_cmd, evaluate_args);

  auto* analyze_cmd = app.add_subcommand("analyze", "frequency and benign-accuracy analyses");
  add_common(analyze_cmd, analyze_args);
  analyze_cmd->add_option("--scheme", analyze_scheme, "scheme whose verdicts are analyzed");

  auto* synth_cmd = app.add_subcommand("synth-data", "write a synthetic keyword dataset");
  std::string synth_out;
  audioshield::synth::SynthConfig synth_config;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("--out", synth_out, "dataset root directory")->required();
  synth_cmd->add_option("--classes", synth_config.classes, "class count (2..10)");
  synth_cmd->add_option("--clips", synth_config.clips_per_class, "clips per class");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  auto* info_cmd = app.add_subcommand("kernel-info", "print the selected SIMD backend");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      const auto out = audioshield::pipeline::run_train(resolve_config(train_args));
      std::cout << "model: " << out.model_path.string() << "\ntrain_accuracy: " << out.train_accuracy
                << "\nval_accuracy: " << out.val_accuracy << "\n";
    } else if (attack_cmd->parsed()) {
      const auto out = audioshield::pipeline::run_attack(resolve_config(attack_args));
      std::cout << "attempts: " << out.attempts << "\nsuccesses: " << out.successes
                << "\nskipped_misclassified: " << out.skipped_misclassified
                << "\nmanifest: " << out.manifest_path.string() << "\n";
    } else if (detect_cmd->parsed()) {
      std::vector<std::string> schemes;
      if (!detect_scheme.empty()) schemes.push_back(detect_scheme);
      const auto out = audioshield::pipeline::run_detect(resolve_config(detect_args), schemes);
      std::cout << "test_clips: " << out.test_count << "\n";
      for (const auto& [scheme, path] : out.verdict_files)
        std::cout << scheme << ": " << path.string() << "\n";
    } else if (evaluate_cmd->parsed()) {
      const auto out = audioshield::pipeline::run_evaluate(resolve_config(evaluate_args));
      for (const auto& [scheme, report] : out.reports)
        std::cout << scheme << ": precision=" << report.precision << " recall=" << report.recall
                  << " f1=" << report.f1 << "\n";
    } else if (analyze_cmd->parsed()) {
      const auto out =
          audioshield::pipeline::run_analyze(resolve_config(analyze_args), analyze_scheme);
      std::cout << "analysis: " << out.analysis_path.string() << "\n";
    } else if (synth_cmd->parsed()) {
      audioshield::synth::write_dataset(synth_config, synth_seed, synth_out);
      std::cout << "dataset: " << synth_out << "\n";
    } else if (info_cmd->parsed()) {
      std::cout << "backend: "
                << audioshield::kernels::backend_name(audioshield::kernels::active_backend())
                << "\navx2_supported: " << (audioshield::kernels::avx2_supported() ? "yes" : "no")
                << "\n";
    }
  } catch (const audioshield::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
