#pragma once

// Experiment orchestration shared by the command-line tool and the
// acceptance harness. Every stage writes plain files under the output
// directory so that the subcommands compose.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "schoolconn/cleaning.hpp"
#include "schoolconn/eval.hpp"
#include "schoolconn/feature_table.hpp"
#include "schoolconn/features.hpp"
#include "schoolconn/grid_search.hpp"
#include "schoolconn/models.hpp"

namespace schoolconn {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr double kDefaultRadiusSweep[] = {300.0, 500.0, 750.0, 1000.0, 5000.0};

struct SourceSpec {
  std::string type;  // raster | lines | ookla | population | admin
  std::string name;
  std::vector<std::pair<std::string, std::filesystem::path>> paths;  // population: one per label
  std::vector<Stat> stats;
  std::optional<std::vector<int>> legend;  // categorical rasters
  bool auxiliary = false;
};

struct ModelSpec {
  std::string label;
  GridSpec grid;
  int cv_folds = 5;
};

struct ExperimentConfig {
  std::filesystem::path schools;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  int n_runs = 5;
  double buffer_radius_m = 1000.0;
  std::vector<double> radius_sweep;

  CleaningOptions cleaning;
  std::optional<std::filesystem::path> footprints, ghsl;

  std::vector<SourceSpec> features;
  bool auxiliary = true;
  bool auxiliary_comparison = false;
  std::optional<std::filesystem::path> embeddings;

  PreprocessOptions preprocess;
  SplitSpec split;
  std::vector<ModelSpec> models;
  int permutation_repeats = 0;
  std::optional<BBox> map_bbox;

  nlohmann::json resolved;  // normalised document: absolute paths, effective seed
};

/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {},
                             std::optional<std::filesystem::path> out_override = {});

/// FNV-1a 64 over the resolved document, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// IoError naming the first referenced input that does not exist.
void check_inputs(const ExperimentConfig& cfg);

nlohmann::json manifest(const ExperimentConfig& cfg, std::optional<double> radius_m);
void write_manifest(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::optional<double> radius_m);
/// True when `dir` holds a manifest written for this exact configuration.
bool manifest_matches(const ExperimentConfig& cfg, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Stages

CleaningResult run_clean(const ExperimentConfig& cfg);
LayerConfig load_layers(const ExperimentConfig& cfg, bool auxiliary_only = false);
FeatureTable run_featurize(const ExperimentConfig& cfg, const std::vector<SchoolRecord>& schools, double radius_m);
/// Names of auxiliary columns (flagged sources and per-school fields).
std::vector<std::string> auxiliary_columns(const ExperimentConfig& cfg, const FeatureTable& table,
                                           const std::vector<SchoolRecord>& schools);

struct TrainOutcome {
  GridSearchResult search;
  TrainedModel model;
};

/// Split with the root seed, fit preprocessing on the training part, grid
/// search on the preprocessed validation part, refit the best config on the
/// training part.
TrainOutcome run_train(const ExperimentConfig& cfg, const FeatureTable& table, const ModelSpec& spec);

/// Repeated runs with seeds seed .. seed + n_runs - 1 for a fixed model config.
MetricsReport run_evaluate(const ExperimentConfig& cfg, const FeatureTable& table, const ModelConfig& config);

std::string predictions_csv(const Predictions& predictions, const FeatureTable& table);

struct PredictionRows {
  std::vector<std::string> ids;
  Eigen::VectorXi predicted;
  std::optional<Eigen::VectorXi> actual;
};
PredictionRows parse_predictions_csv(std::string_view text, std::string_view source);

/// Prediction map for the schools listed in `rows` (matched by id).
std::string prediction_map(const std::vector<SchoolRecord>& schools, const PredictionRows& rows,
                           const std::optional<BBox>& bbox);

// ---------------------------------------------------------------------------
// Output layout

struct Layout {
  std::filesystem::path root;
  std::filesystem::path cleaned() const { return root / "cleaned_schools.csv"; }
  std::filesystem::path cleaning_report() const { return root / "cleaning_report.txt"; }
  std::filesystem::path radius_dir(const ExperimentConfig& cfg, double radius_m) const;
  static std::filesystem::path features(const std::filesystem::path& dir) { return dir / "features.csv"; }
  static std::filesystem::path model_dir(const std::filesystem::path& dir, const ModelSpec& m) { return dir / m.label; }
};

/// All per-radius work. Writes every model's outputs plus the summary tables
/// into `dir`.
void run_radius(const ExperimentConfig& cfg, const std::vector<SchoolRecord>& schools, double radius_m,
                const std::filesystem::path& dir, std::vector<MetricsReport>* reports = nullptr);

/// Full experiment including the buffer-radius sweep when configured.
void run_experiment(const ExperimentConfig& cfg);

std::string radius_label(double radius_m);

}  // namespace schoolconn
