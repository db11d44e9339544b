#include "audioshield/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "audioshield/errors.hpp"
#include "audioshield/parallel.hpp"
#include "audioshield/rng.hpp"

namespace audioshield::learners {

namespace {

int feature_dimension(const std::vector<LabeledVector>& data) {
  if (data.empty()) throw EmptyData("no training vectors");
  const auto d = static_cast<int>(data.front().features.size());
  for (const auto& v : data)
    if (static_cast<int>(v.features.size()) != d)
      throw DimensionMismatch("inconsistent feature dimensions");
  return d;
}

// ---------------------------------------------------------------------------
// shared greedy tree builder
// ---------------------------------------------------------------------------

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
};

/// Greedy builder shared by the classification and regression trees. The
/// split criterion is supplied as `metric(left_count, right_count, prefix)`
/// where prefix describes the left side after the sweep; bigger is better,
/// strict improvement keeps the first candidate in (feature asc, threshold
/// asc) order.
class TreeBuilder {
 public:
  template <class LeafScore, class SplitMetric>
  static TreeModel build(const std::vector<const std::vector<double>*>& xs, int dimension,
                         int max_depth, int min_leaf, const std::vector<std::size_t>& all,
                         LeafScore&& leaf_score, SplitMetric&& split_metric, SplitMix64* rng,
                         int mtry) {
    TreeModel model;
    model.dimension = dimension;
    grow(model, xs, max_depth, min_leaf, all, 0, leaf_score, split_metric, rng, mtry);
    return model;
  }

 private:
  template <class LeafScore, class SplitMetric>
  static int grow(TreeModel& model, const std::vector<const std::vector<double>*>& xs, int max_depth,
                  int min_leaf, const std::vector<std::size_t>& indices, int depth,
                  LeafScore& leaf_score, SplitMetric& split_metric, SplitMix64* rng, int mtry) {
    const int node = static_cast<int>(model.nodes.size());
    model.nodes.emplace_back();
    auto [score, splittable] = leaf_score(indices);
    model.nodes[static_cast<std::size_t>(node)].leaf_score = score;
    const auto n = indices.size();
    if (depth >= max_depth || !splittable || n < 2 * static_cast<std::size_t>(min_leaf))
      return node;

    std::vector<int> features(static_cast<std::size_t>(model.dimension));
    std::iota(features.begin(), features.end(), 0);
    if (rng && mtry > 0 && mtry < model.dimension) {
      for (int i = 0; i < mtry; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       static_cast<std::size_t>(rng->next_below(features.size() - static_cast<std::size_t>(i)));
        std::swap(features[static_cast<std::size_t>(i)], features[j]);
      }
      features.resize(static_cast<std::size_t>(mtry));
      std::sort(features.begin(), features.end());
    }

    SplitChoice best;
    double best_metric = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> sorted(indices);
    for (int f : features) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return (*xs[a])[static_cast<std::size_t>(f)] < (*xs[b])[static_cast<std::size_t>(f)];
      });
      split_metric.begin_feature(sorted);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        split_metric.push(sorted[i]);
        const double v0 = (*xs[sorted[i]])[static_cast<std::size_t>(f)];
        const double v1 = (*xs[sorted[i + 1]])[static_cast<std::size_t>(f)];
        if (!(v0 < v1)) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf))
          continue;
        const double metric = split_metric.value(nl, nr);
        if (metric > best_metric) {
          best_metric = metric;
          best.feature = f;
          best.threshold = (v0 + v1) / 2.0;
        }
      }
    }
    if (best.feature < 0) return node;

    std::vector<std::size_t> left, right;
    for (std::size_t i : indices)
      ((*xs[i])[static_cast<std::size_t>(best.feature)] < best.threshold ? left : right).push_back(i);
    model.nodes[static_cast<std::size_t>(node)].feature = best.feature;
    model.nodes[static_cast<std::size_t>(node)].threshold = best.threshold;
    const int l = grow(model, xs, max_depth, min_leaf, left, depth + 1, leaf_score, split_metric, rng, mtry);
    model.nodes[static_cast<std::size_t>(node)].left = l;
    const int r = grow(model, xs, max_depth, min_leaf, right, depth + 1, leaf_score, split_metric, rng, mtry);
    model.nodes[static_cast<std::size_t>(node)].right = r;
    return node;
  }
};

/// Gini criterion in sweep form: maximize (pl^2+ql^2)/nl + (pr^2+qr^2)/nr.
struct GiniMetric {
  const std::vector<char>* labels = nullptr;
  long long total_pos = 0;
  long long pos = 0;

  void begin_feature(const std::vector<std::size_t>&) { pos = 0; }
  void push(std::size_t idx) { pos += (*labels)[idx] ? 1 : 0; }
  double value(std::size_t nl, std::size_t nr) const {
    const long long pl = pos;
    const long long ql = static_cast<long long>(nl) - pl;
    const long long pr = total_pos - pl;
    const long long qr = static_cast<long long>(nr) - pr;
    return static_cast<double>(pl * pl + ql * ql) / static_cast<double>(nl) +
           static_cast<double>(pr * pr + qr * qr) / static_cast<double>(nr);
  }
};

/// Least-squares criterion: maximize (sum_l)^2/nl + (sum_r)^2/nr.
struct SseMetric {
  const std::vector<double>* targets = nullptr;
  double total = 0.0;
  double left = 0.0;

  void begin_feature(const std::vector<std::size_t>&) { left = 0.0; }
  void push(std::size_t idx) { left += (*targets)[idx]; }
  double value(std::size_t nl, std::size_t nr) const {
    const double right = total - left;
    return left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr);
  }
};

std::vector<const std::vector<double>*> feature_pointers(const std::vector<LabeledVector>& data) {
  std::vector<const std::vector<double>*> xs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) xs[i] = &data[i].features;
  return xs;
}

TreeModel fit_classification_tree(const std::vector<LabeledVector>& data,
                                  const std::vector<std::size_t>& indices, const TreeConfig& config,
                                  SplitMix64* rng, int mtry) {
  const int d = feature_dimension(data);
  const auto xs = feature_pointers(data);
  std::vector<char> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data[i].label ? 1 : 0;

  GiniMetric metric;
  metric.labels = &labels;
  auto leaf = [&](const std::vector<std::size_t>& idx) {
    long long pos = 0;
    for (std::size_t i : idx) pos += labels[i];
    metric.total_pos = pos;
    const double score = idx.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(idx.size());
    const bool splittable = pos != 0 && pos != static_cast<long long>(idx.size());
    return std::pair{score, splittable};
  };
  return TreeBuilder::build(xs, d, config.max_depth, config.min_leaf, indices, leaf, metric, rng, mtry);
}

}  // namespace

TreeModel fit_tree(const std::vector<LabeledVector>& data, const TreeConfig& config, std::uint64_t) {
  if (data.empty()) throw EmptyData("fit_tree: no training vectors");
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return fit_classification_tree(data, all, config, nullptr, 0);
}

ForestModel fit_forest(const std::vector<LabeledVector>& data, const ForestConfig& config,
                       std::uint64_t seed) {
  if (data.empty()) throw EmptyData("fit_forest: no training vectors");
  const int d = feature_dimension(data);
  ForestModel model;
  model.dimension = d;
  model.trees.resize(static_cast<std::size_t>(std::max(1, config.tree_count)));
  const int mtry = config.feature_subsample
                       ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))))
                       : 0;
  TreeConfig tree_cfg{config.max_depth, config.min_leaf};
  parallel_for(model.trees.size(), config.jobs, [&](std::size_t t) {
    auto rng = SplitMix64::keyed(seed, {0x500, t});
    std::vector<std::size_t> sample;
    if (config.bootstrap) {
      sample.resize(data.size());
      for (auto& idx : sample) idx = static_cast<std::size_t>(rng.next_below(data.size()));
    } else {
      sample.resize(data.size());
      std::iota(sample.begin(), sample.end(), 0);
    }
    model.trees[t] = fit_classification_tree(data, sample, tree_cfg, mtry > 0 ? &rng : nullptr, mtry);
  });
  return model;
}

namespace {

bool has_both_classes(const std::vector<LabeledVector>& data) {
  bool pos = false, neg = false;
  for (const auto& v : data) (v.label ? pos : neg) = true;
  return pos && neg;
}

double walk_tree(const TreeModel& model, std::span<const double> x) {
  int node = 0;
  while (model.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& nd = model.nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
  }
  return model.nodes[static_cast<std::size_t>(node)].leaf_score;
}

}  // namespace

AdaModel fit_adaboost(const std::vector<LabeledVector>& data, const AdaConfig& config) {
  if (data.empty()) throw EmptyData("fit_adaboost: no training vectors");
  if (!has_both_classes(data)) throw SingleClass("fit_adaboost: both classes required");
  const int d = feature_dimension(data);
  const std::size_t n = data.size();

  AdaModel model;
  model.dimension = d;

  // per-feature value ordering computed once
  std::vector<std::vector<std::size_t>> order(static_cast<std::size_t>(d));
  for (int f = 0; f < d; ++f) {
    auto& idx = order[static_cast<std::size_t>(f)];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return data[a].features[static_cast<std::size_t>(f)] < data[b].features[static_cast<std::size_t>(f)];
    });
  }

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  for (int round = 0; round < config.rounds; ++round) {
    double total_pos = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (data[i].label) total_pos += w[i];
    const double total = std::accumulate(w.begin(), w.end(), 0.0);

    Stump best;
    double best_err = std::numeric_limits<double>::infinity();
    for (int f = 0; f < d; ++f) {
      const auto& idx = order[static_cast<std::size_t>(f)];
      double pos_left = 0.0, all_left = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        pos_left += data[idx[i]].label ? w[idx[i]] : 0.0;
        all_left += w[idx[i]];
        const double v0 = data[idx[i]].features[static_cast<std::size_t>(f)];
        const double v1 = data[idx[i + 1]].features[static_cast<std::size_t>(f)];
        if (!(v0 < v1)) continue;
        // right side predicted adversarial: errors are positives on the left
        // plus negatives on the right
        const double err_right_adv = pos_left + (total - all_left) - (total_pos - pos_left);
        const double err_left_adv = total - err_right_adv;
        if (err_right_adv < best_err) {
          best_err = err_right_adv;
          best = {f, (v0 + v1) / 2.0, true};
        }
        if (err_left_adv < best_err) {
          best_err = err_left_adv;
          best = {f, (v0 + v1) / 2.0, false};
        }
      }
    }
    if (!std::isfinite(best_err)) break;  // no candidate splits at all
    if (best_err >= 0.5 * total) break;

    const double eps = best_err / total;
    const double safe = std::clamp(eps, 1e-12, 1.0 - 1e-12);
    const double alpha = 0.5 * std::log((1.0 - safe) / safe);
    model.stumps.push_back(best);
    model.alphas.push_back(alpha);
    model.round_errors.push_back(eps);
    if (eps <= 0.0) break;

    for (std::size_t i = 0; i < n; ++i) {
      const bool right = data[i].features[static_cast<std::size_t>(best.feature)] >= best.threshold;
      const bool predicted_adv = right == best.right_is_adversarial;
      const bool correct = predicted_adv == data[i].label;
      w[i] *= std::exp(correct ? -alpha : alpha);
    }
    const double z = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& wi : w) wi /= z;
  }
  model.final_weights = std::move(w);
  return model;
}

GbtModel fit_gbt(const std::vector<LabeledVector>& data, const GbtConfig& config) {
  if (data.empty()) throw EmptyData("fit_gbt: no training vectors");
  if (!has_both_classes(data)) throw SingleClass("fit_gbt: both classes required");
  const int d = feature_dimension(data);
  const std::size_t n = data.size();

  GbtModel model;
  model.dimension = d;
  model.rate = config.rate;
  std::size_t pos = 0;
  for (const auto& v : data) pos += v.label ? 1 : 0;
  model.base_log_odds =
      std::log(static_cast<double>(pos) / static_cast<double>(n - pos));

  const auto xs = feature_pointers(data);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  std::vector<double> f_value(n, model.base_log_odds);
  auto log_loss = [&] {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::clamp(1.0 / (1.0 + std::exp(-f_value[i])), 1e-15, 1.0 - 1e-15);
      loss -= data[i].label ? std::log(p) : std::log(1.0 - p);
    }
    return loss / static_cast<double>(n);
  };
  model.train_log_loss.push_back(log_loss());

  std::vector<double> grad(n), hess(n);
  for (int round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-f_value[i]));
      grad[i] = (data[i].label ? 1.0 : 0.0) - p;
      hess[i] = p * (1.0 - p);
    }
    SseMetric metric;
    metric.targets = &grad;
    auto leaf = [&](const std::vector<std::size_t>& idx) {
      double g = 0.0, h = 0.0;
      for (std::size_t i : idx) {
        g += grad[i];
        h += hess[i];
      }
      metric.total = g;
      const double value = g / (h + config.leaf_l2);  // Newton step with L2
      return std::pair{value, !idx.empty()};
    };
    TreeModel tree = TreeBuilder::build(xs, d, config.max_depth, config.min_leaf, all, leaf, metric,
                                        nullptr, 0);
    for (std::size_t i = 0; i < n; ++i)
      f_value[i] += config.rate * walk_tree(tree, data[i].features);
    model.trees.push_back(std::move(tree));
    model.train_log_loss.push_back(log_loss());
  }
  return model;
}

BinaryPrediction predict_binary(const TreeModel& model, std::span<const double> features) {
  if (static_cast<int>(features.size()) != model.dimension)
    throw DimensionMismatch("tree feature dimension");
  const double score = walk_tree(model, features);
  return {score >= 0.5, score};
}

BinaryPrediction predict_binary(const ForestModel& model, std::span<const double> features) {
  if (static_cast<int>(features.size()) != model.dimension)
    throw DimensionMismatch("forest feature dimension");
  std::size_t votes = 0;
  for (const auto& tree : model.trees)
    if (walk_tree(tree, features) >= 0.5) ++votes;
  const double score = static_cast<double>(votes) / static_cast<double>(model.trees.size());
  return {score >= 0.5, score};
}

BinaryPrediction predict_binary(const AdaModel& model, std::span<const double> features) {
  if (static_cast<int>(features.size()) != model.dimension)
    throw DimensionMismatch("adaboost feature dimension");
  double margin = 0.0, total = 0.0;
  for (std::size_t m = 0; m < model.stumps.size(); ++m) {
    const auto& s = model.stumps[m];
    const bool right = features[static_cast<std::size_t>(s.feature)] >= s.threshold;
    const double h = (right == s.right_is_adversarial) ? 1.0 : -1.0;
    margin += model.alphas[m] * h;
    total += model.alphas[m];
  }
  const double score = total > 0.0 ? 0.5 * (1.0 + margin / total) : 0.5;
  return {margin >= 0.0, score};
}

BinaryPrediction predict_binary(const GbtModel& model, std::span<const double> features) {
  if (static_cast<int>(features.size()) != model.dimension)
    throw DimensionMismatch("gbt feature dimension");
  double f = model.base_log_odds;
  for (const auto& tree : model.trees) f += model.rate * walk_tree(tree, features);
  const double score = 1.0 / (1.0 + std::exp(-f));
  return {score >= 0.5, score};
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

namespace {

constexpr int kSchemaVersion = 1;

nlohmann::json nodes_to_json(const TreeModel& model) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : model.nodes)
    nodes.push_back({{"feature", nd.feature},
                     {"threshold", nd.threshold},
                     {"left", nd.left},
                     {"right", nd.right},
                     {"score", nd.leaf_score}});
  return nodes;
}

TreeModel nodes_from_json(const nlohmann::json& nodes, int dimension) {
  TreeModel model;
  model.dimension = dimension;
  for (const auto& nd : nodes) {
    TreeNode node;
    node.feature = nd.at("feature").get<int>();
    node.threshold = nd.at("threshold").get<double>();
    node.left = nd.at("left").get<int>();
    node.right = nd.at("right").get<int>();
    node.leaf_score = nd.at("score").get<double>();
    model.nodes.push_back(node);
  }
  return model;
}

void check_schema(const nlohmann::json& j, const std::string& type) {
  if (j.value("schema", "") != "audioshield-learner")
    throw Error("not an audioshield learner model");
  if (j.value("version", 0) != kSchemaVersion)
    throw VersionMismatch("learner schema version " + std::to_string(j.value("version", 0)));
  if (j.value("type", "") != type) throw Error("expected learner type " + type);
}

nlohmann::json header(const std::string& type, int dimension) {
  return {{"schema", "audioshield-learner"}, {"version", kSchemaVersion}, {"type", type},
          {"dimension", dimension}};
}

}  // namespace

nlohmann::json to_json(const TreeModel& model) {
  auto j = header("tree", model.dimension);
  j["nodes"] = nodes_to_json(model);
  return j;
}

nlohmann::json to_json(const ForestModel& model) {
  auto j = header("forest", model.dimension);
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) trees.push_back(nodes_to_json(t));
  j["trees"] = trees;
  return j;
}

nlohmann::json to_json(const AdaModel& model) {
  auto j = header("adaboost", model.dimension);
  nlohmann::json stumps = nlohmann::json::array();
  for (std::size_t m = 0; m < model.stumps.size(); ++m)
    stumps.push_back({{"feature", model.stumps[m].feature},
                      {"threshold", model.stumps[m].threshold},
                      {"right_is_adversarial", model.stumps[m].right_is_adversarial},
                      {"alpha", model.alphas[m]}});
  j["stumps"] = stumps;
  return j;
}

nlohmann::json to_json(const GbtModel& model) {
  auto j = header("gbt", model.dimension);
  j["rate"] = model.rate;
  j["base_log_odds"] = model.base_log_odds;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) trees.push_back(nodes_to_json(t));
  j["trees"] = trees;
  return j;
}

TreeModel tree_from_json(const nlohmann::json& j) {
  check_schema(j, "tree");
  return nodes_from_json(j.at("nodes"), j.at("dimension").get<int>());
}

ForestModel forest_from_json(const nlohmann::json& j) {
  check_schema(j, "forest");
  ForestModel model;
  model.dimension = j.at("dimension").get<int>();
  for (const auto& t : j.at("trees")) model.trees.push_back(nodes_from_json(t, model.dimension));
  return model;
}

AdaModel ada_from_json(const nlohmann::json& j) {
  check_schema(j, "adaboost");
  AdaModel model;
  model.dimension = j.at("dimension").get<int>();
  for (const auto& s : j.at("stumps")) {
    model.stumps.push_back({s.at("feature").get<int>(), s.at("threshold").get<double>(),
                            s.at("right_is_adversarial").get<bool>()});
    model.alphas.push_back(s.at("alpha").get<double>());
  }
  return model;
}

GbtModel gbt_from_json(const nlohmann::json& j) {
  check_schema(j, "gbt");
  GbtModel model;
  model.dimension = j.at("dimension").get<int>();
  model.rate = j.at("rate").get<double>();
  model.base_log_odds = j.at("base_log_odds").get<double>();
  for (const auto& t : j.at("trees")) model.trees.push_back(nodes_from_json(t, model.dimension));
  return model;
}

}  // namespace audioshield::learners
