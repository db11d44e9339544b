#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace audioshield::learners {

struct LabeledVector {
  std::vector<double> features;
  bool label = false;  // true = adversarial
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_score = 0.0;  // classification: adversarial fraction; regression: value
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int dimension = 0;
};

struct TreeConfig {
  int max_depth = 8;
  int min_leaf = 1;
};

/// Greedy CART on Gini impurity. Split candidates are midpoints of sorted
/// distinct per-feature values (left: x < t, right: x >= t); gain ties break
/// toward (lower feature index, lower threshold). Zero-gain splits are taken
/// when no positive-gain split exists, so patterns like XOR still resolve
/// within the depth budget.
TreeModel fit_tree(const std::vector<LabeledVector>& data, const TreeConfig& config,
                   std::uint64_t seed = 0);

struct ForestConfig {
  int tree_count = 100;
  int max_depth = 8;
  int min_leaf = 1;
  bool bootstrap = true;
  bool feature_subsample = true;  // ceil(sqrt(d)) features per split
  int jobs = 1;
};

struct ForestModel {
  std::vector<TreeModel> trees;
  int dimension = 0;
};

ForestModel fit_forest(const std::vector<LabeledVector>& data, const ForestConfig& config,
                       std::uint64_t seed);

struct Stump {
  int feature = 0;
  double threshold = 0.0;
  bool right_is_adversarial = true;  // h(x) = +1 on the side marked adversarial
};

struct AdaConfig {
  int rounds = 100;
};

struct AdaModel {
  std::vector<Stump> stumps;
  std::vector<double> alphas;
  std::vector<double> round_errors;   // weighted error per accepted round
  std::vector<double> final_weights;  // sample weights after the last round (diagnostic)
  int dimension = 0;
};

/// Discrete AdaBoost over depth-1 stumps; stops early when the best stump's
/// weighted error reaches 0.5 or hits 0.
AdaModel fit_adaboost(const std::vector<LabeledVector>& data, const AdaConfig& config);

struct GbtConfig {
  int rounds = 100;
  double rate = 0.1;
  int max_depth = 3;
  int min_leaf = 1;
  double leaf_l2 = 1.0;
};

struct GbtModel {
  std::vector<TreeModel> trees;  // regression trees on logistic residuals
  double rate = 0.1;
  double base_log_odds = 0.0;
  std::vector<double> train_log_loss;  // loss before any tree, then after each round
  int dimension = 0;
};

/// Gradient boosting on logistic loss with Newton-step leaf values and L2
/// leaf regularization.
GbtModel fit_gbt(const std::vector<LabeledVector>& data, const GbtConfig& config);

struct BinaryPrediction {
  bool adversarial = false;
  double score = 0.0;
};

BinaryPrediction predict_binary(const TreeModel& model, std::span<const double> features);
BinaryPrediction predict_binary(const ForestModel& model, std::span<const double> features);
BinaryPrediction predict_binary(const AdaModel& model, std::span<const double> features);
BinaryPrediction predict_binary(const GbtModel& model, std::span<const double> features);

// JSON tree dumps (schema-versioned, inspectable)
nlohmann::json to_json(const TreeModel& model);
nlohmann::json to_json(const ForestModel& model);
nlohmann::json to_json(const AdaModel& model);
nlohmann::json to_json(const GbtModel& model);
TreeModel tree_from_json(const nlohmann::json& j);
ForestModel forest_from_json(const nlohmann::json& j);
AdaModel ada_from_json(const nlohmann::json& j);
GbtModel gbt_from_json(const nlohmann::json& j);

}  // namespace audioshield::learners
