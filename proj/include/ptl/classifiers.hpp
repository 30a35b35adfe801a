#pragma once

// Random forest (CART trees, Gini impurity, bootstrap bagging, sqrt(d)
// candidate features per split) and Euclidean k-nearest-neighbour
// classifiers over integer label ids. Label id 0 wins every tie.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptl/error.hpp"

namespace ptl {

struct LabeledDataset {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::string> label_names;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
  std::size_t dim() const noexcept { return rows.empty() ? 0 : rows.front().size(); }
  std::size_t n_labels() const noexcept { return label_names.size(); }

  void add(std::vector<double> row, int label) {
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
};

inline void validate(const LabeledDataset& data) {
  if (data.empty()) throw Error(Errc::empty_dataset, "dataset has no rows");
  if (data.labels.size() != data.rows.size()) throw Error(Errc::invariant, "row and label counts differ");
  if (data.n_labels() == 0) throw Error(Errc::missing_label, "dataset declares no labels");
  const std::size_t d = data.dim();
  if (d == 0) throw Error(Errc::dimension_mismatch, "rows have no features");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.rows[i].size() != d)
      throw Error(Errc::dimension_mismatch, "row " + std::to_string(i) + " has " + std::to_string(data.rows[i].size()) +
                                                " features, expected " + std::to_string(d));
    if (data.labels[i] < 0 || static_cast<std::size_t>(data.labels[i]) >= data.n_labels())
      throw Error(Errc::missing_label, "row " + std::to_string(i) + " has undeclared label id");
  }
}

struct Prediction {
  int label = 0;
  std::vector<double> confidences;  // indexed by label id, sums to 1
};

/// Index of the largest value; the lowest index wins ties.
inline int argmax_low(std::span<const double> v) noexcept {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// ---------------------------------------------------------------------------
// Random forest

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::vector<double> distribution;  // leaves only

  bool is_leaf() const noexcept { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const std::vector<double>& leaf_distribution(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[i].distribution;
  }
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 16;  // 0 = unlimited
  std::uint64_t seed = 0;
  bool bootstrap = true;
  int max_features = 0;  // 0 = floor(sqrt(d))
};

struct ForestModel {
  std::size_t dim = 0;
  std::vector<std::string> label_names;
  ForestParams params;
  std::vector<DecisionTree> trees;

  std::size_t n_labels() const noexcept { return label_names.size(); }
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const LabeledDataset& data, const ForestParams& params, std::mt19937_64& rng)
      : data_(data), params_(params), rng_(rng), n_labels_(data.n_labels()) {
    const std::size_t d = data.dim();
    mtry_ = params.max_features > 0 ? static_cast<std::size_t>(params.max_features)
                                    : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
    mtry_ = std::clamp<std::size_t>(mtry_, 1, d);
    features_.resize(d);
  }

  DecisionTree build(std::vector<std::uint32_t> sample) {
    tree_.nodes.clear();
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  std::vector<double> counts_of(const std::vector<std::uint32_t>& idx) const {
    std::vector<double> c(n_labels_, 0.0);
    for (auto i : idx) c[static_cast<std::size_t>(data_.labels[i])] += 1.0;
    return c;
  }

  static double gini_sum(const std::vector<double>& counts, double n) noexcept {
    // n * gini = n - sum(c^2) / n
    double sq = 0.0;
    for (double c : counts) sq += c * c;
    return n - sq / n;
  }

  bool best_split_on(std::size_t f, const std::vector<std::uint32_t>& idx, const std::vector<double>& total,
                     Split& best) {
    pairs_.clear();
    for (auto i : idx) pairs_.emplace_back(data_.rows[i][f], data_.labels[i]);
    std::sort(pairs_.begin(), pairs_.end());
    if (pairs_.front().first == pairs_.back().first) return false;

    std::vector<double> left(n_labels_, 0.0);
    std::vector<double> right = total;
    const double n = static_cast<double>(pairs_.size());
    bool found = false;
    for (std::size_t i = 0; i + 1 < pairs_.size(); ++i) {
      const auto lab = static_cast<std::size_t>(pairs_[i].second);
      left[lab] += 1.0;
      right[lab] -= 1.0;
      const double a = pairs_[i].first, b = pairs_[i + 1].first;
      if (a == b) continue;
      const double nl = static_cast<double>(i + 1);
      const double impurity = (gini_sum(left, nl) + gini_sum(right, n - nl)) / n;
      if (best.feature < 0 || impurity < best.impurity) {
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) thr = a;
        best = Split{static_cast<int>(f), thr, impurity};
        found = true;
      }
    }
    return found;
  }

  std::uint32_t make_leaf(const std::vector<double>& counts, double n) {
    TreeNode leaf;
    leaf.distribution.resize(n_labels_);
    for (std::size_t k = 0; k < n_labels_; ++k) leaf.distribution[k] = counts[k] / n;
    tree_.nodes.push_back(std::move(leaf));
    return static_cast<std::uint32_t>(tree_.nodes.size() - 1);
  }

  std::uint32_t grow(const std::vector<std::uint32_t>& idx, int depth) {
    const auto counts = counts_of(idx);
    const double n = static_cast<double>(idx.size());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
    const bool depth_capped = params_.max_depth > 0 && depth >= params_.max_depth;
    if (pure || depth_capped || idx.size() < 2) return make_leaf(counts, n);

    std::iota(features_.begin(), features_.end(), std::size_t{0});
    std::shuffle(features_.begin(), features_.end(), rng_);
    Split best;
    // Examine mtry features; keep drawing past mtry only while none splits.
    for (std::size_t j = 0; j < features_.size(); ++j) {
      if (j >= mtry_ && best.feature >= 0) break;
      best_split_on(features_[j], idx, counts, best);
    }
    if (best.feature < 0) return make_leaf(counts, n);

    std::vector<std::uint32_t> left, right;
    for (auto i : idx) (data_.rows[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);

    const auto self = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{best.feature, best.threshold, 0, 0, {}});
    const std::uint32_t l = grow(left, depth + 1);
    const std::uint32_t r = grow(right, depth + 1);
    tree_.nodes[self].left = l;
    tree_.nodes[self].right = r;
    return self;
  }

  const LabeledDataset& data_;
  const ForestParams& params_;
  std::mt19937_64& rng_;
  std::size_t n_labels_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, int>> pairs_;
  DecisionTree tree_;
};

}  // namespace detail

/// Grows `n_trees` trees. Each tree draws its own bootstrap sample from a
/// generator seeded by (seed, tree index), so training is reproducible.
inline ForestModel rf_train(const LabeledDataset& data, const ForestParams& params = {}) {
  validate(data);
  if (params.n_trees < 1) throw Error(Errc::invalid_config, "n_trees must be >= 1");
  if (params.max_depth < 0) throw Error(Errc::invalid_config, "max_depth must be >= 0");

  ForestModel model;
  model.dim = data.dim();
  model.label_names = data.label_names;
  model.params = params;
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));

  const auto n = static_cast<std::uint32_t>(data.size());
  for (int t = 0; t < params.n_trees; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    std::vector<std::uint32_t> sample(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
      for (auto& s : sample) s = pick(rng);
    } else {
      std::iota(sample.begin(), sample.end(), 0u);
    }
    detail::TreeBuilder builder(data, params, rng);
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

/// Mean of the leaf distributions reached in every tree.
inline Prediction rf_predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.dim)
    throw Error(Errc::dimension_mismatch, "forest expects " + std::to_string(model.dim) + " features, got " +
                                              std::to_string(x.size()));
  if (model.trees.empty()) throw Error(Errc::invariant, "forest has no trees");
  Prediction p;
  p.confidences.assign(model.n_labels(), 0.0);
  for (const auto& tree : model.trees) {
    const auto& dist = tree.leaf_distribution(x);
    for (std::size_t k = 0; k < dist.size(); ++k) p.confidences[k] += dist[k];
  }
  const double total = std::accumulate(p.confidences.begin(), p.confidences.end(), 0.0);
  for (auto& c : p.confidences) c /= total;
  p.label = argmax_low(p.confidences);
  return p;
}

// ---------------------------------------------------------------------------
// k-nearest neighbours

struct KnnModel {
  std::size_t dim = 0;
  std::vector<std::string> label_names;
  int k = 5;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  std::size_t n_labels() const noexcept { return label_names.size(); }
};

inline KnnModel knn_train(const LabeledDataset& data, int k = 5) {
  validate(data);
  if (k < 1 || static_cast<std::size_t>(k) > data.size())
    throw Error(Errc::invalid_config, "k must lie in [1, rows], got " + std::to_string(k));
  return KnnModel{data.dim(), data.label_names, k, data.rows, data.labels};
}

/// Majority vote among the k nearest rows. Among tied labels the one carrying
/// the closest neighbour wins. Equal distances are ordered by row index.
inline Prediction knn_predict(const KnnModel& model, std::span<const double> x) {
  if (x.size() != model.dim)
    throw Error(Errc::dimension_mismatch, "k-NN expects " + std::to_string(model.dim) + " features, got " +
                                              std::to_string(x.size()));
  std::vector<std::pair<double, std::size_t>> dist(model.rows.size());
  for (std::size_t i = 0; i < model.rows.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = model.rows[i][j] - x[j];
      s += d * d;
    }
    dist[i] = {s, i};
  }
  const auto k = static_cast<std::size_t>(model.k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::vector<double> votes(model.n_labels(), 0.0);
  for (std::size_t i = 0; i < k; ++i) votes[static_cast<std::size_t>(model.labels[dist[i].second])] += 1.0;
  const double top = *std::max_element(votes.begin(), votes.end());

  Prediction p;
  for (std::size_t i = 0; i < k; ++i) {
    const int lab = model.labels[dist[i].second];
    if (votes[static_cast<std::size_t>(lab)] == top) {
      p.label = lab;
      break;
    }
  }
  p.confidences.resize(votes.size());
  for (std::size_t j = 0; j < votes.size(); ++j) p.confidences[j] = votes[j] / static_cast<double>(k);
  return p;
}

}  // namespace ptl
