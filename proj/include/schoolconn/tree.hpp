#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "schoolconn/rng.hpp"

namespace schoolconn {

/// How many features are examined at each split.
struct MaxFeatures {
  enum class Mode { All, Sqrt, Log2, Count };
  Mode mode = Mode::All;
  int count = 0;

  /// Resolved count for `n_features` columns, clipped to [1, n_features].
  int resolve(Eigen::Index n_features) const;
};

struct TreeGrowth {
  int max_depth = 0;  // <= 0: unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // P(connected) for classifiers, additive score for regressors
  double impurity = 0.0;
  int samples = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  int depth() const;
  /// Unnormalised impurity decrease per feature, weighted by node sample share.
  Eigen::VectorXd impurity_decrease(Eigen::Index n_features) const;
};

double gini(double positives, double total) noexcept;

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // weighted impurity decrease: n*I(parent) - nl*I(left) - nr*I(right)
};

/// Best Gini split over the candidate features for the given rows (rows may
/// repeat). The threshold is the largest value sent left, so predictions do
/// not change under strictly monotone feature transforms. Ties keep the
/// first candidate feature and the smallest threshold.
SplitChoice best_gini_split(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, std::span<const Eigen::Index> rows,
                            std::span<const int> features, int min_samples_leaf);

/// CART classifier with Gini impurity. `rows` selects (possibly repeated)
/// training rows; the rng is only consulted when max_features < n_features.
DecisionTree grow_classification_tree(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                                      std::span<const Eigen::Index> rows, const TreeGrowth& growth,
                                      SplitMix64& rng);

/// Least-squares regression tree on `target` with Newton leaf values
/// sum(target) / sum(hessian).
DecisionTree grow_newton_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, const Eigen::VectorXd& hessian,
                              std::span<const Eigen::Index> rows, const TreeGrowth& growth, SplitMix64& rng);

}  // namespace schoolconn
