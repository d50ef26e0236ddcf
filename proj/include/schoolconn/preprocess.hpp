#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "schoolconn/feature_table.hpp"

namespace schoolconn {

struct ScalerState {
  std::vector<std::string> columns;
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

ScalerState minmax_fit(const FeatureTable& train);

/// Returns a table with exactly the scaler's columns (looked up by name, in
/// scaler order). Constant columns map to 0; no clamping.
FeatureTable minmax_apply(const ScalerState& state, const FeatureTable& table);

/// Sample Pearson correlation; defined as 0 when either input is constant.
template <typename DerivedX, typename DerivedY>
double pearson(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y);

double pearson(std::span<const double> x, std::span<const double> y);

/// Greedy scan in column order: a column is dropped when |r| > threshold
/// against any column already retained.
std::vector<std::string> correlation_prune(const FeatureTable& train, double threshold = 0.9);

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;
};

struct SplitResult {
  FeatureTable train, val, test;
};

/// Per class (connected first, then unconnected): shuffle row indices with
/// SplitMix64(seed), take floor(f * n) per part and hand the remainder out
/// one at a time to train, val, test. Rows keep their table order inside
/// each part.
SplitResult stratified_split(const FeatureTable& table, const SplitSpec& spec);

struct SplitIndices {
  std::vector<Eigen::Index> train, val, test;
};
SplitIndices stratified_split_indices(const Eigen::VectorXi& labels, const SplitSpec& spec);

/// Fold assignment (0..k-1) per row under the same counting rule.
std::vector<int> stratified_folds(const Eigen::VectorXi& labels, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------

template <typename DerivedX, typename DerivedY>
double pearson(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  const auto xc = (x.array() - x.mean()).matrix();
  const auto yc = (y.array() - y.mean()).matrix();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  const double r = xc.dot(yc) / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace schoolconn
