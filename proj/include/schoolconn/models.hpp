#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "schoolconn/feature_table.hpp"
#include "schoolconn/objectives.hpp"
#include "schoolconn/preprocess.hpp"
#include "schoolconn/tree.hpp"

namespace schoolconn {

enum class Family { LogReg, Tree, RandomForest, GradientBoosting, LinearSvm, Mlp };

const char* to_string(Family family) noexcept;
Family parse_family(std::string_view name);

struct LogRegParams {
  bool l2 = true;  // false: no penalty
  double C = 1.0;
  int max_iter = 5000;
  double tol = 1e-6;  // on the gradient infinity-norm
};

struct TreeParams {
  int max_depth = 0;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features;  // all
};

struct ForestParams {
  int n_estimators = 100;
  int max_depth = 0;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features{MaxFeatures::Mode::Sqrt, 0};
};

struct BoostParams {
  double learning_rate = 0.1;  // also accepted as "eta"
  int n_estimators = 100;
  int max_depth = 3;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features;  // all
  double subsample = 1.0;
};

struct LinSvmParams {
  double C = 1.0;
  int epochs = 2000;
};

enum class LearningRateSchedule { Constant, InvScaling, Adaptive };

struct MlpParams {
  int hidden_size = 100;
  Activation activation = Activation::Relu;
  double alpha = 1e-4;
  LearningRateSchedule learning_rate = LearningRateSchedule::Constant;
  double learning_rate_init = 0.1;
  double momentum = 0.9;
  int max_iter = 3000;
  bool zero_init = false;
};

using Hyperparams = std::variant<LogRegParams, TreeParams, ForestParams, BoostParams, LinSvmParams, MlpParams>;

struct ModelConfig {
  Hyperparams params;
  std::uint64_t seed = 0;

  Family family() const noexcept;
  static ModelConfig defaults(Family family, std::uint64_t seed = 0);
};

// ---------------------------------------------------------------------------
// Fitted state

struct LinearState {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

struct EnsembleState {
  std::vector<DecisionTree> trees;
  double init_score = 0.0;     // boosting prior log-odds
  double learning_rate = 1.0;  // boosting shrinkage
  std::vector<double> train_loss;  // boosting: log-loss after each stage (index 0 = prior)
};

struct MlpState {
  Eigen::VectorXd theta;  // packed as in MlpObjective
  Eigen::Index inputs = 0;
  Eigen::Index hidden = 0;
  Activation activation = Activation::Relu;
};

using FittedState = std::variant<LinearState, EnsembleState, MlpState>;

struct TrainedModel {
  ModelConfig config;
  FittedState state;
  std::vector<std::string> columns;  // model input order
  std::optional<ScalerState> scaler;  // over `columns`, applied before the model
  std::size_t train_rows = 0;
};

// Low-level trainers on a dense design matrix and 0/1 labels.
LinearState fit_logreg(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const LogRegParams& p);
EnsembleState fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const TreeParams& p, std::uint64_t seed);
EnsembleState fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ForestParams& p,
                         std::uint64_t seed);
EnsembleState fit_boosting(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const BoostParams& p,
                           std::uint64_t seed);
LinearState fit_linsvm(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const LinSvmParams& p);
MlpState fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const MlpParams& p, std::uint64_t seed);
MlpState init_mlp(Eigen::Index inputs, const MlpParams& p, std::uint64_t seed);

/// Regularisation weight shared by the linear trainers: 1 / (C * n).
double inverse_c_lambda(double C, Eigen::Index n) noexcept;

// Table-level trainers: the model consumes the table's columns as given.
TrainedModel train(const FeatureTable& table, const ModelConfig& cfg);
TrainedModel train_logreg(const FeatureTable& table, const ModelConfig& cfg);
TrainedModel train_tree(const FeatureTable& table, const ModelConfig& cfg);
TrainedModel train_rf(const FeatureTable& table, const ModelConfig& cfg);
TrainedModel train_gb(const FeatureTable& table, const ModelConfig& cfg);
TrainedModel train_linsvm(const FeatureTable& table, const ModelConfig& cfg);
TrainedModel train_mlp(const FeatureTable& table, const ModelConfig& cfg);

struct PreprocessOptions {
  bool scale = true;
  std::optional<double> correlation_threshold = 0.9;
};

/// Min-max scaling and correlation pruning fitted on raw training features.
struct Preprocessor {
  std::vector<std::string> columns;   // retained, in table order
  std::optional<ScalerState> scaler;  // over `columns`

  FeatureTable apply(const FeatureTable& table) const;
};

Preprocessor fit_preprocessor(const FeatureTable& train, const PreprocessOptions& options);

/// Fits min-max scaling and correlation pruning on `train` (raw features),
/// trains on the result and attaches both to the model.
TrainedModel train_with_preprocessing(const FeatureTable& train, const ModelConfig& cfg,
                                      const PreprocessOptions& options = {});

/// Model-ready design matrix: columns looked up by name, scaler applied.
Eigen::MatrixXd model_inputs(const TrainedModel& model, const FeatureTable& table);

/// P(connected) for rows already in model input space.
Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& inputs);

struct Predictions {
  std::vector<std::string> ids;
  Eigen::VectorXd probability;
  Eigen::VectorXi label;  // probability > 0.5
};

Predictions predict(const TrainedModel& model, const FeatureTable& table);

// ---------------------------------------------------------------------------
// Serialization (schema "schoolconn.model/1")

inline constexpr const char* kModelSchema = "schoolconn.model/1";

nlohmann::json params_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(Family family, const nlohmann::json& params, std::uint64_t seed);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Hyperparameter grids

/// Ordered parameter axes; expansion varies the last axis fastest.
using ParamGrid = std::vector<std::pair<std::string, std::vector<nlohmann::json>>>;

struct GridSpec {
  Family family;
  ParamGrid grid;
};

/// Search spaces for "logreg", "tree", "rf", "gb", "xgb" (boosting with
/// eta/max_depth/subsample axes), "linsvm", "mlp".
GridSpec default_grid(std::string_view name);
std::vector<ModelConfig> expand_grid(const GridSpec& spec, std::uint64_t seed);

}  // namespace schoolconn
