#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "schoolconn/geo.hpp"
#include "schoolconn/models.hpp"

namespace schoolconn {

// Positive class is "connected" throughout.
struct ConfusionMatrix {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::int64_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> preds);
ConfusionMatrix confusion(const Eigen::VectorXi& labels, const Eigen::VectorXi& preds);

/// One run's rates. A rate whose denominator is zero is 0 and flagged.
struct MetricsRow {
  double accuracy = 0, f1 = 0, fp_rate = 0, tp_rate = 0, fn_rate = 0, tn_rate = 0;
  bool f1_degenerate = false;        // 2tp + fp + fn == 0
  bool positive_degenerate = false;  // tp + fn == 0
  bool negative_degenerate = false;  // fp + tn == 0

  static constexpr std::size_t kCount = 6;
  static constexpr std::array<const char*, kCount> kNames{"accuracy", "f1", "fp_rate", "tp_rate", "fn_rate", "tn_rate"};
  std::array<double, kCount> values() const { return {accuracy, f1, fp_rate, tp_rate, fn_rate, tn_rate}; }
  bool degenerate() const noexcept { return f1_degenerate || positive_degenerate || negative_degenerate; }
};

MetricsRow metrics(const ConfusionMatrix& cm);

struct MetricsReport {
  std::vector<std::uint64_t> seeds;
  std::vector<ConfusionMatrix> confusions;
  std::vector<MetricsRow> runs;
  std::array<double, MetricsRow::kCount> mean{};
  std::array<double, MetricsRow::kCount> variance{};  // population

  double mean_of(std::string_view metric) const;
  double variance_of(std::string_view metric) const;
};

/// Aggregates per-run confusion matrices (mean and population variance of every rate).
MetricsReport aggregate(std::vector<std::uint64_t> seeds, std::vector<ConfusionMatrix> confusions);

/// Runs `experiment` with seeds base_seed .. base_seed + n - 1.
MetricsReport repeated_runs(const std::function<ConfusionMatrix(std::uint64_t)>& experiment, int n,
                            std::uint64_t base_seed);

/// CSV with one row per run followed by "mean" and "variance" rows. Numbers
/// are written in shortest round-trip form.
std::string metrics_csv(const MetricsReport& report);

struct ParsedMetrics {
  std::vector<std::array<double, MetricsRow::kCount>> runs;
  std::array<double, MetricsRow::kCount> mean{};
  std::array<double, MetricsRow::kCount> variance{};
};
ParsedMetrics parse_metrics_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Report layouts

/// Two-level header table: groups across, metrics inside each group, one row
/// per model. Missing cells render as "-".
struct MetricTable {
  std::string title;
  std::vector<std::string> groups;
  std::vector<std::string> metrics;
  std::vector<std::pair<std::string, std::vector<std::optional<double>>>> rows;  // groups.size()*metrics.size() cells
};

std::string render_metric_table(const MetricTable& table, int decimals = 2);

/// Country block comparing runs without and with auxiliary school features
/// (F1, Acc, FP per block).
MetricTable auxiliary_table(std::string country,
                            const std::vector<std::pair<std::string, std::pair<const MetricsReport*, const MetricsReport*>>>&
                                models);

/// Best-parameter record: "Model | Parameters | <column>..." with one line per hyperparameter.
std::string render_config_record(const std::string& model_label, const std::vector<std::string>& columns,
                                 const std::vector<ModelConfig>& configs);

/// Hyperparameter names shown for a family, in display order.
std::vector<std::string> display_parameters(Family family);

// ---------------------------------------------------------------------------
// Feature importance

using Ranking = std::vector<std::pair<std::string, double>>;

/// Impurity decrease summed over the ensemble, normalised to sum to 1.
Ranking feature_importance(const TrainedModel& model);

/// Mean accuracy drop over n_repeats seeded shuffles of each column.
Ranking permutation_importance(const TrainedModel& model, const FeatureTable& table, int n_repeats,
                               std::uint64_t seed);

std::string ranking_csv(const Ranking& ranking);

// ---------------------------------------------------------------------------
// Prediction map

struct BBox {
  double min_lon, min_lat, max_lon, max_lat;
  bool contains(const GeoPoint& p) const noexcept {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
};

inline constexpr BBox kKigaliWindow{30.02, -2.01, 30.11, -1.93};

std::string export_prediction_map(const std::vector<SchoolRecord>& schools, const Eigen::VectorXi& predicted,
                                  const std::optional<Eigen::VectorXi>& actual = std::nullopt,
                                  const std::optional<BBox>& bbox = std::nullopt);

}  // namespace schoolconn
