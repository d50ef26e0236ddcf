#include "schoolconn/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "schoolconn/error.hpp"
#include "schoolconn/rng.hpp"

namespace schoolconn {

ScalerState minmax_fit(const FeatureTable& train) {
  if (train.rows() == 0) fail(ErrorKind::EmptyInput, "cannot fit a scaler on an empty table");
  return {train.names(), train.values().colwise().minCoeff().transpose(),
          train.values().colwise().maxCoeff().transpose()};
}

FeatureTable minmax_apply(const ScalerState& state, const FeatureTable& table) {
  FeatureTable selected = table.select_columns(state.columns);
  Eigen::MatrixXd x = selected.values();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double range = state.max(j) - state.min(j);
    if (range > 0.0) {
      x.col(j) = (x.col(j).array() - state.min(j)) / range;
    } else {
      x.col(j).setZero();
    }
  }
  return selected.with_values(std::move(x));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::LengthMismatch, "pearson: inputs differ in length");
  if (x.size() < 2) fail(ErrorKind::EmptyInput, "pearson: need at least two observations");
  const auto n = static_cast<Eigen::Index>(x.size());
  return pearson(Eigen::Map<const Eigen::VectorXd>(x.data(), n), Eigen::Map<const Eigen::VectorXd>(y.data(), n));
}

std::vector<std::string> correlation_prune(const FeatureTable& train, double threshold) {
  if (train.rows() < 2) fail(ErrorKind::EmptyInput, "correlation pruning needs at least two rows");
  const Eigen::MatrixXd& x = train.values();
  std::vector<Eigen::Index> kept;
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const bool redundant = std::any_of(kept.begin(), kept.end(), [&](Eigen::Index k) {
      return std::abs(pearson(x.col(j), x.col(k))) > threshold;
    });
    if (!redundant) {
      kept.push_back(j);
      names.push_back(train.names()[static_cast<std::size_t>(j)]);
    }
  }
  return names;
}

namespace {

// floor with a small guard so that e.g. 0.7 * 60 counts as 42.
std::size_t share(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::array<std::vector<Eigen::Index>, 2> rows_by_class(const Eigen::VectorXi& labels) {
  std::array<std::vector<Eigen::Index>, 2> out;  // [0] connected, [1] unconnected
  for (Eigen::Index i = 0; i < labels.size(); ++i) out[labels(i) == 1 ? 0 : 1].push_back(i);
  return out;
}

}  // namespace

SplitIndices stratified_split_indices(const Eigen::VectorXi& labels, const SplitSpec& spec) {
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9 || spec.train < 0 || spec.val < 0 || spec.test < 0) {
    fail(ErrorKind::InvalidConfig, "split fractions must be nonnegative and sum to 1");
  }
  SplitMix64 rng(spec.seed);
  SplitIndices out;
  for (auto& rows : rows_by_class(labels)) {
    if (rows.size() < 3) {
      fail(ErrorKind::DegenerateClass, "a class has fewer than 3 members (" + std::to_string(rows.size()) + ")");
    }
    rng.shuffle(rows);
    const std::size_t n = rows.size();
    std::array<std::size_t, 3> counts = {share(spec.train, n), share(spec.val, n), share(spec.test, n)};
    std::size_t assigned = counts[0] + counts[1] + counts[2];
    for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++counts[k];
    auto it = rows.begin();
    std::array<std::vector<Eigen::Index>*, 3> parts = {&out.train, &out.val, &out.test};
    for (std::size_t p = 0; p < 3; ++p) {
      parts[p]->insert(parts[p]->end(), it, it + static_cast<std::ptrdiff_t>(counts[p]));
      it += static_cast<std::ptrdiff_t>(counts[p]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitResult stratified_split(const FeatureTable& table, const SplitSpec& spec) {
  const SplitIndices idx = stratified_split_indices(table.labels(), spec);
  return {table.select_rows(idx.train), table.select_rows(idx.val), table.select_rows(idx.test)};
}

std::vector<int> stratified_folds(const Eigen::VectorXi& labels, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::InvalidConfig, "need at least 2 folds");
  SplitMix64 rng(seed);
  std::vector<int> fold(static_cast<std::size_t>(labels.size()), 0);
  for (auto& rows : rows_by_class(labels)) {
    if (rows.size() < static_cast<std::size_t>(k)) {
      fail(ErrorKind::DegenerateClass, "a class has fewer members (" + std::to_string(rows.size()) +
                                           ") than folds (" + std::to_string(k) + ")");
    }
    rng.shuffle(rows);
    const std::size_t n = rows.size();
    const std::size_t base = n / static_cast<std::size_t>(k);
    std::size_t remainder = n - base * static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (int f = 0; f < k; ++f) {
      std::size_t count = base + (remainder > 0 ? 1 : 0);
      if (remainder > 0) --remainder;
      for (std::size_t c = 0; c < count; ++c) fold[static_cast<std::size_t>(rows[pos++])] = f;
    }
  }
  return fold;
}

}  // namespace schoolconn
