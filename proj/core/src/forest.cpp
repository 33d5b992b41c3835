#include "vebs/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "vebs/errors.hpp"
#include "vebs/rng.hpp"

namespace vebs::est {

namespace {

using Matrix = std::vector<std::vector<double>>;

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double sum_sq = 0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double impurity = std::numeric_limits<double>::infinity();
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<int>& y, int n_classes,
              const ForestParams& params, int k_features, rng::Engine& rng)
      : x_(x), y_(y), n_classes_(n_classes), params_(params), k_features_(k_features), rng_(rng) {}

  Tree build(std::vector<int> sample_indices) {
    tree_.nodes.clear();
    grow(std::move(sample_indices), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int> idx, int depth) {
    std::vector<int> counts(static_cast<std::size_t>(n_classes_), 0);
    for (int i : idx) ++counts[static_cast<std::size_t>(y_[static_cast<std::size_t>(i)])];
    const int n = static_cast<int>(idx.size());
    const double node_gini = gini(counts, n);

    const bool pure = std::count(counts.begin(), counts.end(), 0) >= n_classes_ - 1;
    SplitChoice best;
    if (!pure && depth < params_.max_depth && n >= 2 * params_.min_leaf) {
      best = find_split(idx, node_gini);
    }
    if (best.feature < 0) return make_leaf(counts, n);

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(idx.size());
    right_idx.reserve(idx.size());
    for (int i : idx) {
      const double v = x_[static_cast<std::size_t>(i)][static_cast<std::size_t>(best.feature)];
      (v < best.threshold ? left_idx : right_idx).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    const int node = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[static_cast<std::size_t>(node)].feature = best.feature;
    tree_.nodes[static_cast<std::size_t>(node)].threshold = best.threshold;
    const int left = grow(std::move(left_idx), depth + 1);
    const int right = grow(std::move(right_idx), depth + 1);
    tree_.nodes[static_cast<std::size_t>(node)].left = left;
    tree_.nodes[static_cast<std::size_t>(node)].right = right;
    return node;
  }

  int make_leaf(const std::vector<int>& counts, int n) {
    TreeNode leaf;
    leaf.leaf_distribution.resize(static_cast<std::size_t>(n_classes_));
    for (int c = 0; c < n_classes_; ++c) {
      leaf.leaf_distribution[static_cast<std::size_t>(c)] =
          static_cast<double>(counts[static_cast<std::size_t>(c)]) / n;
    }
    tree_.nodes.push_back(std::move(leaf));
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  SplitChoice find_split(const std::vector<int>& idx, double parent_gini) {
    const int d = static_cast<int>(x_.front().size());
    // Draw k distinct candidate features (partial Fisher-Yates), then
    // evaluate in ascending order so ties resolve to the lowest index.
    std::vector<int> pool(static_cast<std::size_t>(d));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k_features_; ++i) {
      const auto j = i + static_cast<int>(rng_.below(static_cast<std::uint64_t>(d - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::vector<int> candidates(pool.begin(), pool.begin() + k_features_);
    std::sort(candidates.begin(), candidates.end());

    const int n = static_cast<int>(idx.size());
    SplitChoice best;
    std::vector<std::pair<double, int>> vals(static_cast<std::size_t>(n));
    std::vector<int> left_counts(static_cast<std::size_t>(n_classes_));

    for (int f : candidates) {
      for (int i = 0; i < n; ++i) {
        const int row = idx[static_cast<std::size_t>(i)];
        vals[static_cast<std::size_t>(i)] = {
            x_[static_cast<std::size_t>(row)][static_cast<std::size_t>(f)],
            y_[static_cast<std::size_t>(row)]};
      }
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::fill(left_counts.begin(), left_counts.end(), 0);
      std::vector<int> right_counts(static_cast<std::size_t>(n_classes_));
      for (const auto& [v, c] : vals) ++right_counts[static_cast<std::size_t>(c)];

      for (int i = 0; i < n - 1; ++i) {
        const auto& [v, c] = vals[static_cast<std::size_t>(i)];
        ++left_counts[static_cast<std::size_t>(c)];
        --right_counts[static_cast<std::size_t>(c)];
        const double v_next = vals[static_cast<std::size_t>(i) + 1].first;
        if (v_next <= v) continue;  // no boundary between equal values
        const int nl = i + 1, nr = n - nl;
        if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
        const double impurity = (nl * gini(left_counts, nl) + nr * gini(right_counts, nr)) / n;
        const double threshold = v + 0.5 * (v_next - v);
        // Candidates are swept in ascending (feature, threshold) order, so
        // requiring a strict improvement makes ties resolve to the lowest pair.
        if (impurity < best.impurity - 1e-12) best = SplitChoice{f, threshold, impurity};
      }
    }
    if (best.feature >= 0 && best.impurity < parent_gini - 1e-12) return best;
    return SplitChoice{};
  }

  Tree tree_;
  const Matrix& x_;
  const std::vector<int>& y_;
  int n_classes_;
  const ForestParams& params_;
  int k_features_;
  rng::Engine& rng_;
};

}  // namespace

ForestModel train_forest(std::span<const std::vector<double>> X, std::span<const int> y,
                         std::vector<std::string> class_names, const ForestParams& params) {
  if (X.empty()) throw std::invalid_argument("empty training set");
  if (X.size() != y.size()) throw std::invalid_argument("X and y sizes differ");
  const std::size_t d = X.front().size();
  if (d == 0) throw std::invalid_argument("feature dimension is zero");
  const int n_classes = static_cast<int>(class_names.size());
  if (n_classes < 2) throw std::invalid_argument("need at least two classes");
  for (const auto& row : X) {
    if (row.size() != d) throw std::invalid_argument("ragged feature matrix");
  }
  std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw std::invalid_argument("label out of range");
    seen[static_cast<std::size_t>(label)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw NoSolutionError("training set contains a single class; nothing to separate");
  }
  if (params.n_trees < 1 || params.max_depth < 1 || params.min_leaf < 1) {
    throw std::invalid_argument("invalid forest parameters");
  }

  ForestModel model;
  model.params = params;
  model.class_names = std::move(class_names);

  // Normalization statistics over the raw training set.
  model.feature_mean.assign(d, 0.0);
  model.feature_std.assign(d, 0.0);
  for (const auto& row : X) {
    for (std::size_t j = 0; j < d; ++j) model.feature_mean[j] += row[j];
  }
  for (std::size_t j = 0; j < d; ++j) model.feature_mean[j] /= static_cast<double>(X.size());
  for (const auto& row : X) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = row[j] - model.feature_mean[j];
      model.feature_std[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    model.feature_std[j] = std::sqrt(model.feature_std[j] / static_cast<double>(X.size()));
    if (model.feature_std[j] == 0.0) model.feature_std[j] = 1.0;
  }

  Matrix xn(X.size(), std::vector<double>(d));
  std::vector<int> yn(y.size());
  {
    // Canonical row order (lexicographic by features, then label) makes
    // training independent of how the caller happened to order the dataset.
    std::vector<int> order(X.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const auto& ra = X[static_cast<std::size_t>(a)];
      const auto& rb = X[static_cast<std::size_t>(b)];
      if (ra != rb) return ra < rb;
      return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)];
    });
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto src = static_cast<std::size_t>(order[i]);
      for (std::size_t j = 0; j < d; ++j) {
        xn[i][j] = (X[src][j] - model.feature_mean[j]) / model.feature_std[j];
      }
      yn[i] = y[src];
    }
  }

  int k = params.features_per_split;
  if (k <= 0) k = static_cast<int>(std::sqrt(static_cast<double>(d)));
  k = std::clamp(k, 1, static_cast<int>(d));

  const int n = static_cast<int>(xn.size());
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    rng::Engine rng(rng::Engine::derive(params.seed, static_cast<std::uint64_t>(t)));
    std::vector<int> bootstrap(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      bootstrap[static_cast<std::size_t>(i)] =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    }
    std::sort(bootstrap.begin(), bootstrap.end());
    TreeBuilder builder(xn, yn, n_classes, params, k, rng);
    model.trees.push_back(builder.build(std::move(bootstrap)));
  }
  return model;
}

Prediction predict(const ForestModel& model, std::span<const double> features) {
  const std::size_t d = model.feature_mean.size();
  if (features.size() != d) {
    throw std::invalid_argument("feature vector has wrong dimension");
  }
  std::vector<double> z(d);
  for (std::size_t j = 0; j < d; ++j) {
    z[j] = (features[j] - model.feature_mean[j]) / model.feature_std[j];
  }

  const int n_classes = static_cast<int>(model.class_names.size());
  std::vector<int> votes(static_cast<std::size_t>(n_classes), 0);
  for (const auto& tree : model.trees) {
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      node = (z[static_cast<std::size_t>(nd.feature)] < nd.threshold) ? nd.left : nd.right;
    }
    const auto& dist = tree.nodes[static_cast<std::size_t>(node)].leaf_distribution;
    int vote = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (dist[static_cast<std::size_t>(c)] > dist[static_cast<std::size_t>(vote)]) vote = c;
    }
    ++votes[static_cast<std::size_t>(vote)];
  }

  Prediction pred;
  pred.probabilities.resize(static_cast<std::size_t>(n_classes));
  int best = 0;
  for (int c = 0; c < n_classes; ++c) {
    pred.probabilities[static_cast<std::size_t>(c)] =
        static_cast<double>(votes[static_cast<std::size_t>(c)]) / model.trees.size();
    if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
  }
  pred.label = best;
  return pred;
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "vebs-forest-v1";
  j["params"] = {{"n_trees", model.params.n_trees},
                 {"max_depth", model.params.max_depth},
                 {"min_leaf", model.params.min_leaf},
                 {"features_per_split", model.params.features_per_split},
                 {"seed", model.params.seed}};
  j["class_names"] = model.class_names;
  j["feature_mean"] = model.feature_mean;
  j["feature_std"] = model.feature_std;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes) {
      if (nd.feature < 0) {
        nodes.push_back({{"dist", nd.leaf_distribution}});
      } else {
        nodes.push_back(
            {{"f", nd.feature}, {"t", nd.threshold}, {"l", nd.left}, {"r", nd.right}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << j.dump(1, '\t') << '\n';
  if (!out) throw IoError("model write failed: " + path.string());
}

ForestModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("model parse error in " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "vebs-forest-v1") {
      throw IoError("unsupported model format in " + path.string());
    }
    ForestModel model;
    const auto& p = j.at("params");
    model.params.n_trees = p.at("n_trees");
    model.params.max_depth = p.at("max_depth");
    model.params.min_leaf = p.at("min_leaf");
    model.params.features_per_split = p.at("features_per_split");
    model.params.seed = p.at("seed");
    model.class_names = j.at("class_names").get<std::vector<std::string>>();
    model.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    model.feature_std = j.at("feature_std").get<std::vector<double>>();
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      for (const auto& jn : jt) {
        TreeNode nd;
        if (jn.contains("dist")) {
          nd.leaf_distribution = jn.at("dist").get<std::vector<double>>();
        } else {
          nd.feature = jn.at("f");
          nd.threshold = jn.at("t");
          nd.left = jn.at("l");
          nd.right = jn.at("r");
        }
        tree.nodes.push_back(std::move(nd));
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("model schema error in " + path.string() + ": " + e.what());
  }
}

}  // namespace vebs::est
