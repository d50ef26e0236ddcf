#include "schoolconn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace schoolconn {

int MaxFeatures::resolve(Eigen::Index n_features) const {
  const double d = static_cast<double>(n_features);
  int k = static_cast<int>(n_features);
  switch (mode) {
    case Mode::All: break;
    case Mode::Sqrt: k = static_cast<int>(std::sqrt(d)); break;
    case Mode::Log2: k = static_cast<int>(std::log2(d)); break;
    case Mode::Count: k = count; break;
  }
  return std::clamp(k, 1, static_cast<int>(std::max<Eigen::Index>(n_features, 1)));
}

double DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int DecisionTree::depth() const {
  std::function<int(int)> rec = [&](int i) -> int {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    return n.is_leaf() ? 0 : 1 + std::max(rec(n.left), rec(n.right));
  };
  return nodes.empty() ? 0 : rec(0);
}

Eigen::VectorXd DecisionTree::impurity_decrease(Eigen::Index n_features) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_features);
  if (nodes.empty() || nodes[0].samples == 0) return out;
  const double root = nodes[0].samples;
  for (const TreeNode& n : nodes) {
    if (n.is_leaf()) continue;
    const TreeNode& l = nodes[static_cast<std::size_t>(n.left)];
    const TreeNode& r = nodes[static_cast<std::size_t>(n.right)];
    out(n.feature) += (n.samples * n.impurity - l.samples * l.impurity - r.samples * r.impurity) / root;
  }
  return out;
}

double gini(double positives, double total) noexcept {
  if (total <= 0.0) return 0.0;
  const double p = positives / total;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

namespace {

constexpr double kTieTolerance = 1e-12;


// Sufficient statistics for the two split criteria.
struct GiniStats {
  double n = 0, pos = 0;
  void add(double target, double) {
    n += 1;
    pos += target;
  }
  void remove(double target, double) {
    n -= 1;
    pos -= target;
  }
  double weighted_impurity() const { return n * gini(pos, n); }
};

struct SquaredErrorStats {
  double n = 0, sum = 0, sum_sq = 0;
  void add(double target, double) {
    n += 1;
    sum += target;
    sum_sq += target * target;
  }
  void remove(double target, double) {
    n -= 1;
    sum -= target;
    sum_sq -= target * target;
  }
  // n * variance
  double weighted_impurity() const { return n > 0 ? std::max(0.0, sum_sq - sum * sum / n) : 0.0; }
};

template <typename Stats>
SplitChoice best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, std::span<const Eigen::Index> rows,
                       std::span<const int> features, int min_samples_leaf) {
  SplitChoice best;
  bool found = false;
  Stats total;
  for (Eigen::Index r : rows) total.add(target(r), 0.0);
  const double parent = total.weighted_impurity();
  const auto n = static_cast<std::ptrdiff_t>(rows.size());

  std::vector<Eigen::Index> order(rows.begin(), rows.end());
  for (int f : features) {
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
    Stats left;
    Stats right = total;
    for (std::ptrdiff_t i = 0; i + 1 < n; ++i) {
      const Eigen::Index r = order[static_cast<std::size_t>(i)];
      left.add(target(r), 0.0);
      right.remove(target(r), 0.0);
      const double v = x(r, f);
      const double next = x(order[static_cast<std::size_t>(i + 1)], f);
      if (!(next > v)) continue;
      if (i + 1 < min_samples_leaf || n - i - 1 < min_samples_leaf) continue;
      const double gain = parent - left.weighted_impurity() - right.weighted_impurity();
      // Gains that differ only by rounding count as ties so the first candidate wins.
      if (!found || gain > best.gain + kTieTolerance * std::max(1.0, parent)) {
        best = {f, v, gain};
        found = true;
      }
    }
  }
  return best;
}

std::vector<int> candidate_features(Eigen::Index n_features, int k, SplitMix64& rng) {
  std::vector<int> all(static_cast<std::size_t>(n_features));
  std::iota(all.begin(), all.end(), 0);
  if (k >= n_features) return all;
  // Partial Fisher-Yates from the front.
  for (int i = 0; i < k; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(all.size() - static_cast<std::size_t>(i));
    std::swap(all[static_cast<std::size_t>(i)], all[j]);
  }
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end());
  return all;
}

template <typename Stats, typename LeafValue>
DecisionTree grow(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, std::span<const Eigen::Index> rows,
                  const TreeGrowth& growth, SplitMix64& rng, LeafValue&& leaf_value) {
  DecisionTree tree;
  const int k = growth.max_features.resolve(x.cols());
  const int min_leaf = std::max(1, growth.min_samples_leaf);
  const int min_split = std::max(2, growth.min_samples_split);

  std::function<int(std::vector<Eigen::Index>, int)> build = [&](std::vector<Eigen::Index> node_rows,
                                                                  int depth) -> int {
    Stats stats;
    for (Eigen::Index r : node_rows) stats.add(target(r), 0.0);
    const int idx = static_cast<int>(tree.nodes.size());
    TreeNode node;
    node.samples = static_cast<int>(node_rows.size());
    node.impurity = node_rows.empty() ? 0.0 : stats.weighted_impurity() / static_cast<double>(node_rows.size());
    node.value = leaf_value(node_rows);
    tree.nodes.push_back(node);

    const bool depth_ok = growth.max_depth <= 0 || depth < growth.max_depth;
    if (!depth_ok || node.samples < min_split || node.impurity <= 1e-15 || x.cols() == 0) return idx;
    const std::vector<int> features = candidate_features(x.cols(), k, rng);
    const SplitChoice split = best_split<Stats>(x, target, node_rows, features, min_leaf);
    if (split.feature < 0) return idx;

    std::vector<Eigen::Index> left_rows, right_rows;
    for (Eigen::Index r : node_rows) (x(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
    node_rows.clear();
    node_rows.shrink_to_fit();
    const int left = build(std::move(left_rows), depth + 1);
    const int right = build(std::move(right_rows), depth + 1);
    TreeNode& self = tree.nodes[static_cast<std::size_t>(idx)];
    self.feature = split.feature;
    self.threshold = split.threshold;
    self.left = left;
    self.right = right;
    return idx;
  };
  build(std::vector<Eigen::Index>(rows.begin(), rows.end()), 0);
  return tree;
}

}  // namespace

SplitChoice best_gini_split(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, std::span<const Eigen::Index> rows,
                            std::span<const int> features, int min_samples_leaf) {
  const Eigen::VectorXd target = y.cast<double>();
  return best_split<GiniStats>(x, target, rows, features, std::max(1, min_samples_leaf));
}

DecisionTree grow_classification_tree(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                                      std::span<const Eigen::Index> rows, const TreeGrowth& growth,
                                      SplitMix64& rng) {
  const Eigen::VectorXd target = y.cast<double>();
  return grow<GiniStats>(x, target, rows, growth, rng, [&](const std::vector<Eigen::Index>& r) {
    if (r.empty()) return 0.0;
    double pos = 0.0;
    for (Eigen::Index i : r) pos += target(i);
    return pos / static_cast<double>(r.size());
  });
}

DecisionTree grow_newton_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, const Eigen::VectorXd& hessian,
                              std::span<const Eigen::Index> rows, const TreeGrowth& growth, SplitMix64& rng) {
  return grow<SquaredErrorStats>(x, target, rows, growth, rng, [&](const std::vector<Eigen::Index>& r) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i : r) {
      num += target(i);
      den += hessian(i);
    }
    return den > 1e-12 ? num / den : 0.0;
  });
}

}  // namespace schoolconn
