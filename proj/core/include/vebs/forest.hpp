#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vebs::est {

// Random-forest classifier, self-contained and bit-deterministic under a
// fixed seed: bootstrap sampling, greedy Gini splits over sqrt(d) candidate
// features per node, majority vote over trees. Inputs are z-score normalized
// with statistics fitted on the training set.

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_leaf = 2;
  /// Candidate features per split; 0 means floor(sqrt(d)).
  int features_per_split = 0;
  std::uint64_t seed = 42;
};

/// Flat node array; feature < 0 marks a leaf carrying a class distribution.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  std::vector<double> leaf_distribution;
};

struct Tree {
  std::vector<TreeNode> nodes;
};

struct ForestModel {
  ForestParams params;
  std::vector<std::string> class_names;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;  // zero-variance features stored as 1
  std::vector<Tree> trees;
};

struct Prediction {
  int label = -1;
  std::vector<double> probabilities;  // per-class vote fractions, sum to 1
};

/// Trains on feature rows X (same length each) with integer labels y in
/// [0, n_classes). The dataset is canonicalized internally (sorted), so
/// training is invariant to input row order. Throws std::invalid_argument on
/// shape mismatches and NoSolutionError when only one class is present.
[[nodiscard]] ForestModel train_forest(std::span<const std::vector<double>> X,
                                       std::span<const int> y,
                                       std::vector<std::string> class_names,
                                       const ForestParams& params = {});

/// Majority vote across trees; ties resolve to the lowest class index.
[[nodiscard]] Prediction predict(const ForestModel& model, std::span<const double> features);

/// JSON persistence. Numeric fields round-trip exactly.
void save_model(const ForestModel& model, const std::filesystem::path& path);
[[nodiscard]] ForestModel load_model(const std::filesystem::path& path);

}  // namespace vebs::est
