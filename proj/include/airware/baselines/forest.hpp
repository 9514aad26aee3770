#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "airware/dataset.hpp"
#include "airware/error.hpp"
#include "airware/parallel.hpp"
#include "airware/random.hpp"

namespace airware::baselines {

struct ForestConfig {
  std::size_t n_trees = 100;  // 1000 reproduces the published setting
  bool bootstrap = true;
  std::size_t max_features = 0;  // 0 = ceil(sqrt(d))
  std::size_t min_leaf = 1;
  std::size_t jobs = 1;
};

/// Gini impurity 1 - sum p_c^2 of a class histogram.
inline double gini(const std::vector<std::size_t>& counts) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (n == 0) return 0.0;
  double s = 0.0;
  for (auto c : counts) s += (static_cast<double>(c) / n) * (static_cast<double>(c) / n);
  return 1.0 - s;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  int label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(const double* x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].label;
  }
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_classes = 0;
  std::size_t n_features = 0;
};

namespace detail {

/// Majority label; ties go to the lowest class code.
inline int majority(const std::vector<std::size_t>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const std::vector<int>& y, int n_classes, std::size_t mtry, std::size_t min_leaf,
              Rng& rng)
      : X_(X), y_(y), C_(n_classes), mtry_(mtry), min_leaf_(min_leaf), rng_(rng) {
    features_.resize(static_cast<std::size_t>(X.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> idx) {
    DecisionTree t;
    grow(t, idx, 0, idx.size());
    return t;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  std::vector<std::size_t> histogram(const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) const {
    std::vector<std::size_t> c(static_cast<std::size_t>(C_), 0);
    for (std::size_t i = lo; i < hi; ++i) ++c[static_cast<std::size_t>(y_[idx[i]])];
    return c;
  }

  int grow(DecisionTree& t, std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    const auto counts = histogram(idx, lo, hi);
    t.nodes.back().label = majority(counts);
    const std::size_t n = hi - lo;
    if (gini(counts) == 0.0 || n < 2 * min_leaf_) return id;

    const Split s = best_split(idx, lo, hi, counts);
    if (s.feature < 0) return id;
    const auto mid = std::partition(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(hi),
                                    [&](std::size_t r) {
                                      return X_(static_cast<Eigen::Index>(r), s.feature) <= s.threshold;
                                    }) -
                     idx.begin();
    const int left = grow(t, idx, lo, static_cast<std::size_t>(mid));
    const int right = grow(t, idx, static_cast<std::size_t>(mid), hi);
    auto& node = t.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Candidate features are drawn without replacement until `mtry` of them
  // turned out non-constant in this node.
  Split best_split(const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                   const std::vector<std::size_t>& counts) {
    const std::size_t n = hi - lo;
    // Any valid split is accepted, even one that does not lower impurity, so
    // that trees always reach purity.
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::size_t visited = 0, drawn = 0;
    const std::size_t d = features_.size();
    std::vector<std::pair<double, int>> vals(n);
    std::vector<std::size_t> left(static_cast<std::size_t>(C_));
    while (visited < mtry_ && drawn < d) {
      const std::size_t j = drawn + rng_.index(d - drawn);
      std::swap(features_[drawn], features_[j]);
      const int f = static_cast<int>(features_[drawn++]);
      for (std::size_t i = 0; i < n; ++i)
        vals[i] = {X_(static_cast<Eigen::Index>(idx[lo + i]), f), y_[idx[lo + i]]};
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;
      ++visited;
      std::fill(left.begin(), left.end(), 0);
      double left_sq = 0.0, right_sq = 0.0;
      std::vector<std::size_t> right = counts;
      for (auto c : right) right_sq += static_cast<double>(c) * static_cast<double>(c);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(vals[i].second);
        left_sq += 2.0 * static_cast<double>(left[c]) + 1.0;
        right_sq -= 2.0 * static_cast<double>(right[c]) - 1.0;
        ++left[c];
        --right[c];
        if (vals[i].first == vals[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1), nr = static_cast<double>(n - i - 1);
        if (nl < static_cast<double>(min_leaf_) || nr < static_cast<double>(min_leaf_)) continue;
        // weighted Gini = (nl (1 - sum l^2/nl^2) + nr (1 - sum r^2/nr^2)) / n
        const double imp = (nl - left_sq / nl + nr - right_sq / nr) / static_cast<double>(n);
        if (imp < best.impurity) {
          best.impurity = imp;
          best.feature = f;
          best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
          if (best.threshold == vals[i + 1].first) best.threshold = vals[i].first;
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  const std::vector<int>& y_;
  int C_;
  std::size_t mtry_, min_leaf_;
  Rng& rng_;
  std::vector<std::size_t> features_;
};

inline int class_count(const std::vector<int>& y) {
  require(!y.empty(), ErrorCode::InvalidArgument, "empty label vector");
  require(*std::min_element(y.begin(), y.end()) >= 0, ErrorCode::InvalidArgument, "labels must be non-negative");
  return *std::max_element(y.begin(), y.end()) + 1;
}

}  // namespace detail

/// CART trees on bootstrap resamples with Gini splits, grown to purity.
/// Tree t uses the stream rng.split(t), so the forest is identical for any
/// worker count.
inline ForestModel forest_train(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg, const Rng& rng) {
  require(static_cast<std::size_t>(X.rows()) == y.size() && !y.empty(), ErrorCode::ShapeMismatch,
          "forest: feature/label count mismatch");
  require(cfg.n_trees >= 1, ErrorCode::InvalidArgument, "forest needs n_trees >= 1");
  ForestModel m;
  m.n_classes = detail::class_count(y);
  m.n_features = static_cast<std::size_t>(X.cols());
  {
    std::vector<int> seen(y);
    std::sort(seen.begin(), seen.end());
    require(std::unique(seen.begin(), seen.end()) - seen.begin() >= 2, ErrorCode::InvalidArgument,
            "forest needs at least 2 classes present");
  }
  const std::size_t mtry =
      cfg.max_features ? cfg.max_features
                       : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(X.cols())) - 1e-12));
  m.trees.resize(cfg.n_trees);
  parallel_for(cfg.n_trees, cfg.jobs, [&](std::size_t t) {
    Rng r = rng.split(t);
    std::vector<std::size_t> idx(y.size());
    if (cfg.bootstrap) {
      for (auto& i : idx) i = r.index(y.size());
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    detail::TreeBuilder b(X, y, m.n_classes, std::max<std::size_t>(mtry, 1), cfg.min_leaf, r);
    m.trees[t] = b.build(std::move(idx));
  });
  return m;
}

/// Vote fractions [n x n_classes].
inline Eigen::MatrixXd forest_votes(const ForestModel& m, const Matrix& X) {
  require(static_cast<std::size_t>(X.cols()) == m.n_features, ErrorCode::ShapeMismatch, "forest input width mismatch");
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(X.rows(), m.n_classes);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double* row = X.data() + i * X.cols();
    for (const auto& t : m.trees) v(i, t.predict(row)) += 1.0;
  }
  return v / static_cast<double>(m.trees.size());
}

/// Majority vote; ties go to the lowest class code.
inline std::vector<int> forest_predict(const ForestModel& m, const Matrix& X) {
  const auto v = forest_votes(m, X);
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < v.cols(); ++c)
      if (v(i, c) > v(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace airware::baselines
