#include "audioshield/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"
#include "audioshield/parallel.hpp"
#include "audioshield/rng.hpp"

namespace audioshield::attack {

namespace {

constexpr std::uint64_t kInitStream = 0x100;
constexpr std::uint64_t kEvolveStream = 0x200;
constexpr std::uint64_t kPoolStream = 0x300;
constexpr std::uint64_t kAttackSeedStream = 0x400;

std::size_t class_index(const std::vector<std::string>& names, const std::string& name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw UnknownTarget("class '" + name + "' not known to the classifier");
}

/// Candidate order: fitness descending, index ascending on ties.
std::vector<std::size_t> rank_by_fitness(const std::vector<double>& fitness) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  return order;
}

std::size_t roulette_pick(const std::vector<double>& fitness, double total, double u) {
  if (total <= 0.0) return 0;  // caller handles the uniform fallback
  const double threshold = u * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    acc += fitness[i];
    if (acc > threshold) return i;
  }
  return fitness.size() - 1;
}

}  // namespace

AttackResult genetic_attack(const audio::AudioClip& source, const std::string& target,
                            const kw::Classifier& classifier, const AttackConfig& config) {
  if (source.channels != 1) throw Error("genetic_attack: mono source required");
  if (config.population_size < 2) throw Error("population_size must be >= 2");
  // elite_count == population_size freezes the population (degenerate but legal)
  if (config.elite_count < 0 || config.elite_count > config.population_size)
    throw Error("elite_count must be in [0, population_size]");
  if (!(config.epsilon >= 0.0) || config.epsilon > 1.0) throw Error("epsilon must be in [0, 1]");
  const std::size_t target_idx = class_index(classifier.class_names(), target);

  const std::size_t n = source.samples.size();
  const auto pop_size = static_cast<std::size_t>(config.population_size);
  const auto elites = static_cast<std::size_t>(config.elite_count);
  const double eps = config.epsilon;
  const double mut_std = config.effective_mutation_std();

  std::vector<std::vector<double>> population(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) {
    auto rng = SplitMix64::keyed(config.seed, {kInitStream, i});
    auto& cand = population[i];
    cand.resize(n);
    for (std::size_t s = 0; s < n; ++s) cand[s] = source.samples[s] + rng.next_uniform(-eps, eps);
    kernels::clamp_ball(cand.data(), source.samples.data(), eps, n);
    kernels::clamp(cand.data(), n, -1.0, 1.0);
  }

  std::vector<double> fitness(pop_size, 0.0);
  std::vector<std::size_t> top_class(pop_size, 0);
  std::vector<char> cached(pop_size, 0);

  auto make_clip = [&](const std::vector<double>& samples) {
    audio::AudioClip clip;
    clip.samples = samples;
    clip.sample_rate = source.sample_rate;
    clip.channels = 1;
    return clip;
  };

  AttackResult result;
  result.target_label = target;

  for (int gen = 0;; ++gen) {
    parallel_for(pop_size, config.jobs, [&](std::size_t i) {
      if (cached[i]) return;
      const auto probs = classifier.predict(make_clip(population[i]));
      fitness[i] = probs.probs[target_idx];
      top_class[i] = probs.argmax();
      cached[i] = 1;
    });

    const auto order = rank_by_fitness(fitness);
    result.best_fitness_history.push_back(fitness[order[0]]);

    // success: any candidate whose top class is the target; prefer the
    // highest-fitness one
    std::size_t winner = pop_size;
    for (std::size_t i : order) {
      if (top_class[i] == target_idx) {
        winner = i;
        break;
      }
    }
    if (winner != pop_size || gen == config.max_iterations) {
      const std::size_t chosen = winner != pop_size ? winner : order[0];
      result.adversarial_clip = make_clip(population[chosen]);
      result.success = winner != pop_size;
      result.iterations_used = gen;
      result.final_target_prob = fitness[chosen];
      return result;
    }

    // next generation: elites unchanged, remainder by fitness-proportional
    // selection + uniform crossover + per-sample Gaussian mutation
    std::vector<std::vector<double>> next(pop_size);
    std::vector<double> next_fitness(pop_size, 0.0);
    std::vector<std::size_t> next_top(pop_size, 0);
    std::vector<char> next_cached(pop_size, 0);
    for (std::size_t e = 0; e < elites; ++e) {
      next[e] = population[order[e]];
      next_fitness[e] = fitness[order[e]];
      next_top[e] = top_class[order[e]];
      next_cached[e] = 1;
    }
    const double total_fitness = kernels::sum(fitness.data(), pop_size);
    parallel_for(pop_size - elites, config.jobs, [&](std::size_t slot) {
      const std::size_t j = elites + slot;
      auto rng = SplitMix64::keyed(config.seed, {kEvolveStream, static_cast<std::uint64_t>(gen), j});
      std::size_t pa, pb;
      if (total_fitness > 0.0) {
        pa = roulette_pick(fitness, total_fitness, rng.next_double());
        pb = roulette_pick(fitness, total_fitness, rng.next_double());
      } else {
        pa = static_cast<std::size_t>(rng.next_below(pop_size));
        pb = static_cast<std::size_t>(rng.next_below(pop_size));
      }
      auto& child = next[j];
      child.resize(n);
      const auto& a = population[pa];
      const auto& b = population[pb];
      for (std::size_t s = 0; s < n; ++s) {
        child[s] = rng.next_double() < 0.5 ? a[s] : b[s];
        if (rng.next_double() < config.mutation_prob) child[s] += mut_std * rng.next_normal();
      }
      kernels::clamp_ball(child.data(), source.samples.data(), eps, n);
      kernels::clamp(child.data(), n, -1.0, 1.0);
    });
    population = std::move(next);
    fitness = std::move(next_fitness);
    top_class = std::move(next_top);
    cached = std::move(next_cached);
  }
}

CorpusResult generate_corpus(const audio::LabeledClips& dataset, const kw::Classifier& classifier,
                             const CorpusConfig& config, const std::filesystem::path& out_dir) {
  const auto& model_classes = classifier.class_names();
  for (const auto& name : dataset.class_names) class_index(model_classes, name);
  std::filesystem::create_directories(out_dir);

  // One prediction pass marks the clips the model already gets right.
  std::vector<char> correct(dataset.paths.size(), 0);
  for (std::size_t i = 0; i < dataset.paths.size(); ++i) {
    const auto clip = audio::to_mono(audio::read_wav(dataset.paths[i]));
    const auto probs = classifier.predict(clip);
    const auto predicted = probs.class_names[probs.argmax()];
    correct[i] = predicted == dataset.class_names[static_cast<std::size_t>(dataset.labels[i])];
  }

  CorpusResult result;
  const std::size_t n_classes = dataset.class_names.size();
  for (std::size_t src = 0; src < n_classes; ++src) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < dataset.paths.size(); ++i)
      if (static_cast<std::size_t>(dataset.labels[i]) == src) {
        if (correct[i]) pool.push_back(i);
        else ++result.skipped_misclassified;
      }
    for (std::size_t tgt = 0; tgt < n_classes; ++tgt) {
      if (src == tgt) continue;
      auto rng = SplitMix64::keyed(config.attack.seed, {kPoolStream, src, tgt});
      std::vector<std::size_t> chosen = pool;
      for (std::size_t i = chosen.size(); i > 1; --i)
        std::swap(chosen[i - 1], chosen[rng.next_below(i)]);
      const std::size_t count = std::min<std::size_t>(chosen.size(),
                                                      static_cast<std::size_t>(std::max(0, config.per_pair)));
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t idx = chosen[k];
        const auto source = audio::to_mono(audio::read_wav(dataset.paths[idx]));
        AttackConfig attack_cfg = config.attack;
        attack_cfg.seed = SplitMix64::keyed(config.attack.seed, {kAttackSeedStream, src, tgt, k}).next_u64();
        auto attack_result =
            genetic_attack(source, dataset.class_names[tgt], classifier, attack_cfg);
        attack_result.source_label = dataset.class_names[src];

        ManifestRow row;
        row.source_path = dataset.paths[idx].string();
        row.source_label = dataset.class_names[src];
        row.target_label = dataset.class_names[tgt];
        row.success = attack_result.success;
        row.iterations = attack_result.iterations_used;
        row.final_target_prob = attack_result.final_target_prob;
        const auto out_name = "adv_" + row.source_label + "_to_" + row.target_label + "_" +
                              std::to_string(k) + ".wav";
        const auto out_path = out_dir / out_name;
        audio::write_wav(attack_result.adversarial_clip, out_path);
        row.adversarial_path = out_path.string();
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << "source_path,source_label,target_label,adversarial_path,success,iterations,final_target_prob\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.source_path << ',' << r.source_label << ',' << r.target_label << ','
        << r.adversarial_path << ',' << (r.success ? "true" : "false") << ',' << r.iterations << ','
        << r.final_target_prob << '\n';
  }
  if (!out) throw IoFailure("short write to " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::vector<ManifestRow> rows;
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
    if (fields.size() != 7) throw Error("malformed manifest row: " + line);
    ManifestRow r;
    r.source_path = fields[0];
    r.source_label = fields[1];
    r.target_label = fields[2];
    r.adversarial_path = fields[3];
    r.success = fields[4] == "true";
    r.iterations = std::stoi(fields[5]);
    r.final_target_prob = std::stod(fields[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace audioshield::attack
