#include "audioshield/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "audioshield/errors.hpp"
#include "audioshield/parallel.hpp"
#include "audioshield/rng.hpp"

namespace audioshield::pipeline {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

RunConfig default_config() {
  RunConfig config;
  config.ensemble = transforms::default_ensemble();
  return config;
}

json config_to_json(const RunConfig& config) {
  json ensemble = json::array();
  for (const auto& spec : config.ensemble) ensemble.push_back(transforms::spec_to_json(spec));
  json j = {
      {"seed", config.seed},
      {"jobs", config.jobs},
      {"output_dir", config.output_dir.string()},
      {"dataset", {{"root", config.dataset_root.string()}, {"classes", config.classes}}},
      {"model_path", config.model_path.string()},
      {"train",
       {{"epochs", config.train.epochs},
        {"batch_size", config.train.batch_size},
        {"learning_rate", config.train.learning_rate},
        {"val_fraction", config.train.val_fraction},
        {"min_clips_per_class", config.train.min_clips_per_class},
        {"hidden", config.train.hidden}}},
      {"ensemble", ensemble},
      {"attack",
       {{"population_size", config.attack_config.population_size},
        {"max_iterations", config.attack_config.max_iterations},
        {"epsilon", config.attack_config.epsilon},
        {"mutation_prob", config.attack_config.mutation_prob},
        {"mutation_std", config.attack_config.mutation_std.has_value()
                             ? json(*config.attack_config.mutation_std)
                             : json(nullptr)},
        {"elite_count", config.attack_config.elite_count},
        {"per_pair", config.attacks_per_pair}}},
      {"detection",
       {{"schemes", config.schemes},
        {"l1_mode", config.l1_mode == detect::L1Mode::any_pair ? "any_pair" : "raw_vs_member"},
        {"vector_source",
         config.vector_source == detect::VectorSource::logits ? "logits" : "probs"},
        {"benign_count",
         config.benign_count.has_value() ? json(*config.benign_count) : json(nullptr)}}},
      {"learners",
       {{"forest",
         {{"trees", config.forest.tree_count},
          {"max_depth", config.forest.max_depth},
          {"min_leaf", config.forest.min_leaf},
          {"bootstrap", config.forest.bootstrap},
          {"feature_subsample", config.forest.feature_subsample}}},
        {"adaboost", {{"rounds", config.adaboost.rounds}}},
        {"gbt",
         {{"rounds", config.gbt.rounds},
          {"rate", config.gbt.rate},
          {"max_depth", config.gbt.max_depth},
          {"min_leaf", config.gbt.min_leaf},
          {"leaf_l2", config.gbt.leaf_l2}}}}},
      {"split", {{"ratio", config.split_ratio}}},
  };
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig config = default_config();
  config.seed = j.value("seed", config.seed);
  config.jobs = j.value("jobs", config.jobs);
  config.output_dir = j.value("output_dir", config.output_dir.string());
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    config.dataset_root = d.value("root", config.dataset_root.string());
    config.classes = d.value("classes", config.classes);
  }
  config.model_path = j.value("model_path", config.model_path.string());
  if (j.contains("train")) {
    const auto& t = j.at("train");
    config.train.epochs = t.value("epochs", config.train.epochs);
    config.train.batch_size = t.value("batch_size", config.train.batch_size);
    config.train.learning_rate = t.value("learning_rate", config.train.learning_rate);
    config.train.val_fraction = t.value("val_fraction", config.train.val_fraction);
    config.train.min_clips_per_class =
        t.value("min_clips_per_class", config.train.min_clips_per_class);
    config.train.hidden = t.value("hidden", config.train.hidden);
  }
  if (j.contains("ensemble")) {
    config.ensemble.clear();
    std::set<std::string> ids;
    for (const auto& spec : j.at("ensemble")) {
      config.ensemble.push_back(transforms::spec_from_json(spec));
      if (!ids.insert(config.ensemble.back().id).second)
        throw ConfigError("duplicate ensemble id: " + config.ensemble.back().id);
    }
  }
  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    config.attack_config.population_size =
        a.value("population_size", config.attack_config.population_size);
    config.attack_config.max_iterations =
        a.value("max_iterations", config.attack_config.max_iterations);
    config.attack_config.epsilon = a.value("epsilon", config.attack_config.epsilon);
    config.attack_config.mutation_prob =
        a.value("mutation_prob", config.attack_config.mutation_prob);
    if (a.contains("mutation_std") && !a.at("mutation_std").is_null())
      config.attack_config.mutation_std = a.at("mutation_std").get<double>();
    config.attack_config.elite_count = a.value("elite_count", config.attack_config.elite_count);
    config.attacks_per_pair = a.value("per_pair", config.attacks_per_pair);
  }
  if (j.contains("detection")) {
    const auto& d = j.at("detection");
    config.schemes = d.value("schemes", config.schemes);
    for (const auto& scheme : config.schemes)
      if (std::find(kSchemes.begin(), kSchemes.end(), scheme) == kSchemes.end())
        throw ConfigError("unknown detection scheme: " + scheme);
    const std::string l1_mode = d.value("l1_mode", "raw_vs_member");
    if (l1_mode == "any_pair") config.l1_mode = detect::L1Mode::any_pair;
    else if (l1_mode == "raw_vs_member") config.l1_mode = detect::L1Mode::raw_vs_member;
    else throw ConfigError("l1_mode must be raw_vs_member or any_pair");
    const std::string source = d.value("vector_source", "probs");
    if (source == "logits") config.vector_source = detect::VectorSource::logits;
    else if (source == "probs") config.vector_source = detect::VectorSource::probabilities;
    else throw ConfigError("vector_source must be probs or logits");
    if (d.contains("benign_count") && !d.at("benign_count").is_null())
      config.benign_count = d.at("benign_count").get<std::size_t>();
  }
  if (j.contains("learners")) {
    const auto& l = j.at("learners");
    if (l.contains("forest")) {
      const auto& f = l.at("forest");
      config.forest.tree_count = f.value("trees", config.forest.tree_count);
      config.forest.max_depth = f.value("max_depth", config.forest.max_depth);
      config.forest.min_leaf = f.value("min_leaf", config.forest.min_leaf);
      config.forest.bootstrap = f.value("bootstrap", config.forest.bootstrap);
      config.forest.feature_subsample =
          f.value("feature_subsample", config.forest.feature_subsample);
    }
    if (l.contains("adaboost"))
      config.adaboost.rounds = l.at("adaboost").value("rounds", config.adaboost.rounds);
    if (l.contains("gbt")) {
      const auto& g = l.at("gbt");
      config.gbt.rounds = g.value("rounds", config.gbt.rounds);
      config.gbt.rate = g.value("rate", config.gbt.rate);
      config.gbt.max_depth = g.value("max_depth", config.gbt.max_depth);
      config.gbt.min_leaf = g.value("min_leaf", config.gbt.min_leaf);
      config.gbt.leaf_l2 = g.value("leaf_l2", config.gbt.leaf_l2);
    }
  }
  if (j.contains("split")) config.split_ratio = j.at("split").value("ratio", config.split_ratio);
  config.attack_config.jobs = config.jobs;
  config.forest.jobs = config.jobs;
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  RunConfig config = config_from_json(j);
  if (const char* env = std::getenv("AUDIOSHIELD_SEED")) {
    try {
      config.seed = std::stoull(env);
    } catch (...) {
      throw ConfigError("AUDIOSHIELD_SEED must be an integer");
    }
  }
  return config;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &j;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("--set key must be non-empty");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // plain string
  }
  (*node)[parts.back()] = parsed;
}

void write_resolved_config(const RunConfig& config) {
  std::filesystem::create_directories(config.output_dir);
  std::ofstream out(config.output_dir / "resolved_config.json", std::ios::trunc);
  out << config_to_json(config).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TrainOutput run_train(const RunConfig& config) {
  write_resolved_config(config);
  const auto scan = audio::scan_dataset(config.dataset_root, config.classes);
  kw::Dataset dataset;
  dataset.class_names = scan.class_names;
  dataset.clips.reserve(scan.paths.size());
  for (const auto& path : scan.paths) dataset.clips.push_back(audio::to_mono(audio::read_wav(path)));
  dataset.labels = scan.labels;

  const auto result = kw::train(dataset, config.train, config.seed);
  const auto model_path = config.model_file();
  std::filesystem::create_directories(model_path.parent_path());
  kw::save_model(result.model, model_path);

  std::ofstream log(config.output_dir / "train_log.json", std::ios::trunc);
  ordered_json entry = {{"seed", config.seed},
                        {"train_accuracy", result.train_accuracy},
                        {"val_accuracy", result.val_accuracy},
                        {"epoch_loss", result.epoch_loss},
                        {"model_path", model_path.string()}};
  log << entry.dump(2) << '\n';
  return {result.train_accuracy, result.val_accuracy, model_path};
}

// ---------------------------------------------------------------------------
// attack corpus
// ---------------------------------------------------------------------------

AttackOutput run_attack(const RunConfig& config) {
  write_resolved_config(config);
  const auto scan = audio::scan_dataset(config.dataset_root, config.classes);
  const kw::MlpClassifier classifier(kw::load_model(config.model_file()));

  attack::CorpusConfig corpus_cfg;
  corpus_cfg.attack = config.attack_config;
  corpus_cfg.attack.seed = config.seed;
  corpus_cfg.per_pair = config.attacks_per_pair;

  const auto corpus_dir = config.output_dir / "adversarial";
  const auto result = attack::generate_corpus(scan, classifier, corpus_cfg, corpus_dir);
  const auto manifest_path = config.output_dir / "manifest.csv";
  attack::write_manifest(result.rows, manifest_path);

  AttackOutput out;
  out.attempts = result.rows.size();
  for (const auto& row : result.rows)
    if (row.success) ++out.successes;
  out.skipped_misclassified = result.skipped_misclassified;
  out.manifest_path = manifest_path;
  out.corpus_dir = corpus_dir;
  return out;
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

namespace {

struct ProbedClip {
  std::string path;
  bool is_adversarial = false;
  std::string source_label;
  std::string target_label;  // empty for benign clips
  std::string source_path;   // clean source for adversarial clips
  int true_label = -1;       // benign clips: dataset label index
  detect::EnsembleVerdict verdict;
};

bool scheme_needs_training(const std::string& scheme) { return scheme != "majority"; }

json verdict_line(const ProbedClip& clip, const std::string& scheme, bool adversarial) {
  json votes = json::array();
  for (bool v : clip.verdict.votes) votes.push_back(v);
  return json{{"clip", clip.path},
              {"votes", votes},
              {"vote_count", clip.verdict.vote_count},
              {"l1", clip.verdict.l1_score},
              {"adversarial", adversarial},
              {"scheme", scheme}};
}

std::vector<learners::LabeledVector> feature_set(const std::vector<const ProbedClip*>& clips,
                                                 bool use_cp) {
  std::vector<learners::LabeledVector> out;
  out.reserve(clips.size());
  for (const auto* clip : clips) {
    learners::LabeledVector v;
    v.features =
        use_cp ? detect::cp_vector(clip->verdict).values : detect::sad_vector(clip->verdict).values;
    v.label = clip->is_adversarial;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

DetectOutput run_detect(const RunConfig& config, std::vector<std::string> schemes) {
  write_resolved_config(config);
  if (schemes.empty()) schemes = config.schemes;
  for (const auto& scheme : schemes)
    if (std::find(kSchemes.begin(), kSchemes.end(), scheme) == kSchemes.end())
      throw ConfigError("unknown detection scheme: " + scheme);
  if (config.ensemble.empty()) throw ConfigError("detect requires a nonempty ensemble");
  const bool need_training = std::any_of(schemes.begin(), schemes.end(), scheme_needs_training);
  if (need_training && !(config.split_ratio > 0.0))
    throw ConfigError("scheme requires training data: set split.ratio > 0");

  const kw::MlpClassifier classifier(kw::load_model(config.model_file()));
  const auto manifest = attack::read_manifest(config.output_dir / "manifest.csv");

  std::vector<ProbedClip> adversarial;
  for (const auto& row : manifest) {
    if (!row.success) continue;
    ProbedClip clip;
    clip.path = row.adversarial_path;
    clip.is_adversarial = true;
    clip.source_label = row.source_label;
    clip.target_label = row.target_label;
    clip.source_path = row.source_path;
    adversarial.push_back(std::move(clip));
  }
  if (adversarial.empty()) throw ConfigError("manifest contains no successful adversarial examples");

  const auto scan = audio::scan_dataset(config.dataset_root, config.classes);
  const std::size_t want_benign = config.benign_count.value_or(adversarial.size());
  auto rng = SplitMix64::keyed(config.seed, {0x6000});
  std::vector<std::size_t> pool(scan.paths.size());
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.next_below(i)]);
  pool.resize(std::min(pool.size(), want_benign));
  std::sort(pool.begin(), pool.end());

  std::vector<ProbedClip> benign;
  for (std::size_t idx : pool) {
    ProbedClip clip;
    clip.path = scan.paths[idx].string();
    clip.is_adversarial = false;
    clip.true_label = scan.labels[idx];
    clip.source_label = scan.class_names[static_cast<std::size_t>(scan.labels[idx])];
    benign.push_back(std::move(clip));
  }

  detect::ProbeOptions probe_options;
  probe_options.l1_mode = config.l1_mode;
  probe_options.source = config.vector_source;
  auto probe_all = [&](std::vector<ProbedClip>& clips) {
    parallel_for(clips.size(), config.jobs, [&](std::size_t i) {
      const auto clip = audio::to_mono(audio::read_wav(clips[i].path));
      clips[i].verdict = detect::probe(classifier, clip, config.ensemble, probe_options);
    });
  };
  probe_all(adversarial);
  probe_all(benign);

  const auto split =
      eval::split_dataset(adversarial.size(), benign.size(), config.split_ratio, config.seed);

  std::vector<const ProbedClip*> train_clips, test_clips;
  for (std::size_t i : split.adv_train) train_clips.push_back(&adversarial[i]);
  for (std::size_t i : split.ben_train) train_clips.push_back(&benign[i]);
  for (std::size_t i : split.adv_test) test_clips.push_back(&adversarial[i]);
  for (std::size_t i : split.ben_test) test_clips.push_back(&benign[i]);

  std::vector<detect::EnsembleVerdict> train_verdicts;
  std::vector<bool> train_labels;
  for (const auto* clip : train_clips) {
    train_verdicts.push_back(clip->verdict);
    train_labels.push_back(clip->is_adversarial);
  }

  DetectOutput output;
  output.test_count = test_clips.size();
  std::filesystem::create_directories(config.output_dir);

  // ground truth sidecar covering both splits
  output.truth_path = config.output_dir / "detect_truth.csv";
  {
    std::ofstream truth(output.truth_path, std::ios::trunc);
    truth << "clip,split,is_adversarial,source_label,target_label,source_path\n";
    auto emit = [&](const ProbedClip& clip, const char* split_name) {
      truth << clip.path << ',' << split_name << ',' << (clip.is_adversarial ? "true" : "false")
            << ',' << clip.source_label << ',' << clip.target_label << ',' << clip.source_path
            << '\n';
    };
    for (const auto* clip : train_clips) emit(*clip, "train");
    for (const auto* clip : test_clips) emit(*clip, "test");
  }

  for (const auto& scheme : schemes) {
    std::vector<bool> predictions(test_clips.size(), false);
    json learned = nullptr;

    if (scheme == "majority") {
      for (std::size_t i = 0; i < test_clips.size(); ++i)
        predictions[i] = detect::majority_vote(test_clips[i]->verdict);
    } else if (scheme == "vote_threshold") {
      const auto model = detect::learn_vote_threshold(train_verdicts, train_labels);
      for (std::size_t i = 0; i < test_clips.size(); ++i)
        predictions[i] = detect::apply_threshold(model, test_clips[i]->verdict);
      learned = {{"kind", "vote_count"}, {"threshold", model.threshold},
                 {"training_f1", model.training_f1}};
    } else if (scheme == "l1") {
      std::vector<double> scores;
      for (const auto& v : train_verdicts) scores.push_back(v.l1_score);
      const auto model = detect::learn_l1_threshold(scores, train_labels);
      for (std::size_t i = 0; i < test_clips.size(); ++i)
        predictions[i] = detect::apply_threshold(model, test_clips[i]->verdict);
      learned = {{"kind", "l1"}, {"threshold", model.threshold},
                 {"training_f1", model.training_f1}};
    } else {
      const bool use_cp = scheme.ends_with("_cp");
      const auto train_set = feature_set(train_clips, use_cp);
      auto predict_all = [&](const auto& model) {
        for (std::size_t i = 0; i < test_clips.size(); ++i) {
          const auto features = use_cp ? detect::cp_vector(test_clips[i]->verdict).values
                                       : detect::sad_vector(test_clips[i]->verdict).values;
          predictions[i] = learners::predict_binary(model, features).adversarial;
        }
        return learners::to_json(model);
      };
      if (scheme.starts_with("forest_")) {
        learned = predict_all(learners::fit_forest(train_set, config.forest, config.seed));
      } else if (scheme.starts_with("ada_")) {
        learned = predict_all(learners::fit_adaboost(train_set, config.adaboost));
      } else {
        learned = predict_all(learners::fit_gbt(train_set, config.gbt));
      }
    }

    const auto verdict_path = config.output_dir / ("verdicts_" + scheme + ".jsonl");
    std::ofstream out(verdict_path, std::ios::trunc);
    for (std::size_t i = 0; i < test_clips.size(); ++i)
      out << verdict_line(*test_clips[i], scheme, predictions[i]).dump() << '\n';
    output.verdict_files[scheme] = verdict_path;

    if (!learned.is_null()) {
      std::ofstream model_out(config.output_dir / ("scheme_" + scheme + ".json"), std::ios::trunc);
      model_out << learned.dump(2) << '\n';
    }
  }
  return output;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

struct TruthRow {
  std::string clip;
  std::string split;
  bool is_adversarial = false;
  std::string source_label;
  std::string target_label;
  std::string source_path;
};

std::vector<TruthRow> read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing detect output: " + path.string());
  std::vector<TruthRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    fields.resize(6);
    rows.push_back({fields[0], fields[1], fields[2] == "true", fields[3], fields[4], fields[5]});
  }
  return rows;
}

struct VerdictRow {
  std::string clip;
  std::vector<bool> votes;
  int vote_count = 0;
  double l1 = 0.0;
  bool adversarial = false;
};

std::vector<VerdictRow> read_verdicts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing verdict file: " + path.string());
  std::vector<VerdictRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    VerdictRow row;
    row.clip = j.at("clip").get<std::string>();
    for (const auto& v : j.at("votes")) row.votes.push_back(v.get<bool>());
    row.vote_count = j.at("vote_count").get<int>();
    row.l1 = j.at("l1").get<double>();
    row.adversarial = j.at("adversarial").get<bool>();
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json report_to_json(const eval::DetectionReport& report) {
  ordered_json j = {{"scheme", report.scheme}, {"split", report.split},
                    {"tp", report.tp},         {"fp", report.fp},
                    {"tn", report.tn},         {"fn", report.fn}};
  ordered_json notes = ordered_json::array();
  if (report.precision_defined) j["precision"] = report.precision;
  else notes.push_back("precision undefined: no positive predictions");
  if (report.recall_defined) j["recall"] = report.recall;
  else notes.push_back("recall undefined: no adversarial examples");
  if (report.f1_defined) j["f1"] = report.f1;
  else notes.push_back("f1 undefined");
  j["notes"] = notes;
  return j;
}

}  // namespace

EvaluateOutput run_evaluate(const RunConfig& config) {
  write_resolved_config(config);
  const auto truth = read_truth(config.output_dir / "detect_truth.csv");
  std::map<std::string, const TruthRow*> truth_by_clip;
  for (const auto& row : truth)
    if (row.split == "test") truth_by_clip[row.clip] = &row;

  EvaluateOutput output;
  for (const auto& scheme : config.schemes) {
    const auto verdicts = read_verdicts(config.output_dir / ("verdicts_" + scheme + ".jsonl"));
    std::vector<std::pair<bool, bool>> predictions;
    std::vector<eval::HeatEntry> heat_entries;
    for (const auto& row : verdicts) {
      const auto it = truth_by_clip.find(row.clip);
      if (it == truth_by_clip.end()) throw Error("verdict clip missing from truth: " + row.clip);
      predictions.emplace_back(row.adversarial, it->second->is_adversarial);
      if (it->second->is_adversarial)
        heat_entries.push_back(
            {it->second->source_label, it->second->target_label, row.adversarial});
    }
    auto report = eval::score(predictions);
    report.scheme = scheme;
    report.split = "test";
    output.reports[scheme] = report;

    std::ofstream report_out(config.output_dir / ("report_" + scheme + ".json"), std::ios::trunc);
    report_out << report_to_json(report).dump(2) << '\n';

    std::set<std::string> labels;
    for (const auto& row : truth) {
      if (!row.source_label.empty()) labels.insert(row.source_label);
      if (!row.target_label.empty()) labels.insert(row.target_label);
    }
    const auto map =
        eval::heat_map(heat_entries, std::vector<std::string>(labels.begin(), labels.end()));
    const auto heat_path = config.output_dir / ("heatmap_" + scheme + ".csv");
    eval::write_heat_map_csv(map, heat_path);
    output.heat_maps[scheme] = heat_path;
  }

  // isolated per-member reports derived from the votes of any scheme file
  if (!config.schemes.empty()) {
    const auto verdicts =
        read_verdicts(config.output_dir / ("verdicts_" + config.schemes.front() + ".jsonl"));
    for (std::size_t member = 0; member < config.ensemble.size(); ++member) {
      std::vector<std::pair<bool, bool>> predictions;
      for (const auto& row : verdicts) {
        const auto it = truth_by_clip.find(row.clip);
        if (it == truth_by_clip.end() || member >= row.votes.size()) continue;
        predictions.emplace_back(row.votes[member], it->second->is_adversarial);
      }
      if (predictions.empty()) continue;
      auto report = eval::score(predictions);
      report.scheme = "isolated:" + config.ensemble[member].id;
      report.split = "test";
      output.isolated_reports[config.ensemble[member].id] = report;
      std::ofstream report_out(
          config.output_dir / ("report_isolated_" + config.ensemble[member].id + ".json"),
          std::ios::trunc);
      report_out << report_to_json(report).dump(2) << '\n';
    }
  }
  return output;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

AnalyzeOutput run_analyze(const RunConfig& config, const std::string& scheme) {
  write_resolved_config(config);
  const auto truth = read_truth(config.output_dir / "detect_truth.csv");
  const auto verdicts = read_verdicts(config.output_dir / ("verdicts_" + scheme + ".jsonl"));
  std::map<std::string, const VerdictRow*> verdict_by_clip;
  for (const auto& row : verdicts) verdict_by_clip[row.clip] = &row;

  const kw::MlpClassifier classifier(kw::load_model(config.model_file()));
  const auto& class_names = classifier.class_names();
  auto label_index = [&](const std::string& name) {
    const auto it = std::find(class_names.begin(), class_names.end(), name);
    return it == class_names.end() ? -1 : static_cast<int>(it - class_names.begin());
  };

  std::vector<eval::ClipPair> detected_pairs, undetected_pairs;
  std::vector<int> benign_true, benign_predicted;
  std::vector<bool> benign_flagged;
  for (const auto& row : truth) {
    if (row.split != "test") continue;
    const auto vit = verdict_by_clip.find(row.clip);
    if (vit == verdict_by_clip.end()) continue;
    if (row.is_adversarial) {
      eval::ClipPair pair{audio::to_mono(audio::read_wav(row.clip)),
                          audio::to_mono(audio::read_wav(row.source_path))};
      (vit->second->adversarial ? detected_pairs : undetected_pairs).push_back(std::move(pair));
    } else {
      const auto clip = audio::to_mono(audio::read_wav(row.clip));
      const auto probs = classifier.predict(clip);
      benign_true.push_back(label_index(row.source_label));
      benign_predicted.push_back(static_cast<int>(probs.argmax()));
      benign_flagged.push_back(vit->second->adversarial);
    }
  }

  AnalyzeOutput output;
  ordered_json j;
  j["scheme"] = scheme;
  if (detected_pairs.size() >= 2 && undetected_pairs.size() >= 2) {
    output.frequency = eval::freq_diff_ttest(detected_pairs, undetected_pairs);
    j["frequency"] = {{"n_detected", output.frequency.n_detected},
                      {"n_undetected", output.frequency.n_undetected},
                      {"mean_detected_hz", output.frequency.mean_detected_hz},
                      {"sd_detected_hz", output.frequency.sd_detected_hz},
                      {"mean_undetected_hz", output.frequency.mean_undetected_hz},
                      {"sd_undetected_hz", output.frequency.sd_undetected_hz},
                      {"t", output.frequency.test.t},
                      {"df", output.frequency.test.df},
                      {"p_one_tailed", output.frequency.test.p_one_tailed},
                      {"significant_99", output.frequency.test.significant_99}};
  } else {
    j["frequency"] = nullptr;
  }
  output.benign_accuracy = eval::conditional_accuracy(benign_true, benign_predicted, benign_flagged);
  ordered_json accuracy;
  if (output.benign_accuracy.flagged.has_value())
    accuracy["flagged"] = *output.benign_accuracy.flagged;
  if (output.benign_accuracy.unflagged.has_value())
    accuracy["unflagged"] = *output.benign_accuracy.unflagged;
  accuracy["overall"] = output.benign_accuracy.overall;
  j["benign_accuracy"] = accuracy;

  output.analysis_path = config.output_dir / ("analysis_" + scheme + ".json");
  std::ofstream out(output.analysis_path, std::ios::trunc);
  out << j.dump(2) << '\n';
  return output;
}

}  // namespace audioshield::pipeline
