#include "schoolconn/models.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"
#include "schoolconn/rng.hpp"

namespace schoolconn {

using nlohmann::json;

const char* to_string(Family family) noexcept {
  switch (family) {
    case Family::LogReg: return "logreg";
    case Family::Tree: return "tree";
    case Family::RandomForest: return "rf";
    case Family::GradientBoosting: return "gb";
    case Family::LinearSvm: return "linsvm";
    case Family::Mlp: return "mlp";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::LogReg, Family::Tree, Family::RandomForest, Family::GradientBoosting, Family::LinearSvm,
                   Family::Mlp}) {
    if (name == to_string(f)) return f;
  }
  if (name == "xgb") return Family::GradientBoosting;
  fail(ErrorKind::InvalidConfig, "unknown model family '" + std::string(name) + "'");
}

Family ModelConfig::family() const noexcept { return static_cast<Family>(params.index()); }

ModelConfig ModelConfig::defaults(Family family, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.seed = seed;
  switch (family) {
    case Family::LogReg: cfg.params = LogRegParams{}; break;
    case Family::Tree: cfg.params = TreeParams{}; break;
    case Family::RandomForest: cfg.params = ForestParams{}; break;
    case Family::GradientBoosting: cfg.params = BoostParams{}; break;
    case Family::LinearSvm: cfg.params = LinSvmParams{}; break;
    case Family::Mlp: cfg.params = MlpParams{}; break;
  }
  return cfg;
}

double inverse_c_lambda(double C, Eigen::Index n) noexcept {
  return 1.0 / (C * static_cast<double>(std::max<Eigen::Index>(n, 1)));
}

namespace {

void check_training_data(const Eigen::MatrixXd& x, const Eigen::VectorXi& y) {
  if (x.rows() == 0) fail(ErrorKind::EmptyInput, "no training rows");
  if (x.rows() != y.size()) fail(ErrorKind::LengthMismatch, "feature rows and labels differ in length");
}

void check_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) fail(ErrorKind::NonFiniteLoss, std::string(what) + " diverged (non-finite loss)");
}

// Largest eigenvalue of the (d+1)x(d+1) Gram matrix of [x 1] / n.
double gram_spectral_norm(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::MatrixXd gram(d + 1, d + 1);
  gram.topLeftCorner(d, d).noalias() = x.transpose() * x;
  gram.topRightCorner(d, 1) = x.colwise().sum().transpose();
  gram.bottomLeftCorner(1, d) = x.colwise().sum();
  gram(d, d) = static_cast<double>(n);
  gram /= static_cast<double>(n);
  if (d + 1 <= 400) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d + 1).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 300; ++it) {
    Eigen::VectorXd w = gram * v;
    lambda = w.norm();
    if (lambda == 0.0) break;
    v = w / lambda;
  }
  return lambda * 1.05;
}

}  // namespace

// ---------------------------------------------------------------------------

LinearState fit_logreg(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const LogRegParams& p) {
  check_training_data(x, y);
  const Eigen::VectorXd target = y.cast<double>();
  const double lambda = p.l2 ? inverse_c_lambda(p.C, x.rows()) : 0.0;
  const LogisticObjective<double> objective{x, target, lambda};
  const double lipschitz = 0.25 * gram_spectral_norm(x) + lambda;
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(x.cols() + 1);
  for (int it = 0; it < p.max_iter; ++it) {
    const Eigen::VectorXd g = objective.gradient(theta);
    if (!g.allFinite()) fail(ErrorKind::NonFiniteLoss, "logistic regression diverged");
    if (g.lpNorm<Eigen::Infinity>() < p.tol) break;
    theta -= step * g;
  }
  check_finite(objective.value(theta), "logistic regression");
  return {theta.head(x.cols()), theta(x.cols())};
}

EnsembleState fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const TreeParams& p, std::uint64_t seed) {
  check_training_data(x, y);
  SplitMix64 rng(seed);
  const auto rows = iota_indices(static_cast<std::size_t>(x.rows()));
  std::vector<Eigen::Index> r(rows.begin(), rows.end());
  EnsembleState out;
  out.trees.push_back(grow_classification_tree(
      x, y, r, TreeGrowth{p.max_depth, p.min_samples_split, p.min_samples_leaf, p.max_features}, rng));
  return out;
}

EnsembleState fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const ForestParams& p,
                         std::uint64_t seed) {
  check_training_data(x, y);
  if (p.n_estimators < 1) fail(ErrorKind::InvalidConfig, "n_estimators must be positive");
  const TreeGrowth growth{p.max_depth, p.min_samples_split, p.min_samples_leaf, p.max_features};
  const auto n = static_cast<std::size_t>(x.rows());
  EnsembleState out;
  out.trees.reserve(static_cast<std::size_t>(p.n_estimators));
  std::vector<Eigen::Index> sample(n);
  for (int t = 0; t < p.n_estimators; ++t) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    for (auto& s : sample) s = static_cast<Eigen::Index>(rng.below(n));
    std::sort(sample.begin(), sample.end());
    out.trees.push_back(grow_classification_tree(x, y, sample, growth, rng));
  }
  return out;
}

EnsembleState fit_boosting(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const BoostParams& p,
                           std::uint64_t seed) {
  check_training_data(x, y);
  if (p.n_estimators < 0) fail(ErrorKind::InvalidConfig, "n_estimators must be nonnegative");
  if (!(p.subsample > 0.0 && p.subsample <= 1.0)) fail(ErrorKind::InvalidConfig, "subsample must be in (0, 1]");
  const Eigen::VectorXd target = y.cast<double>();
  const Eigen::Index n = x.rows();
  const double prior = std::clamp(target.mean(), 1e-12, 1.0 - 1e-12);

  EnsembleState out;
  out.init_score = std::log(prior / (1.0 - prior));
  out.learning_rate = p.learning_rate;
  Eigen::VectorXd score = Eigen::VectorXd::Constant(n, out.init_score);
  out.train_loss.push_back(mean_log_loss<double>(score, target));

  const bool single_class = target.minCoeff() == target.maxCoeff();
  if (single_class) return out;

  const TreeGrowth growth{p.max_depth, p.min_samples_split, p.min_samples_leaf, p.max_features};
  SplitMix64 rng(seed);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  const auto sub_n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(p.subsample * static_cast<double>(n))));

  for (int stage = 0; stage < p.n_estimators; ++stage) {
    const Eigen::VectorXd prob = score.unaryExpr([](double z) { return sigmoid(z); });
    const Eigen::VectorXd residual = target - prob;
    const Eigen::VectorXd hessian = prob.array() * (1.0 - prob.array());
    std::vector<Eigen::Index> rows = all;
    if (sub_n < rows.size()) {
      rng.shuffle(rows);
      rows.resize(sub_n);
      std::sort(rows.begin(), rows.end());
    }
    DecisionTree tree = grow_newton_tree(x, residual, hessian, rows, growth, rng);
    for (Eigen::Index i = 0; i < n; ++i) score(i) += p.learning_rate * tree.predict(x.row(i));
    const double loss = mean_log_loss<double>(score, target);
    check_finite(loss, "gradient boosting");
    out.train_loss.push_back(loss);
    out.trees.push_back(std::move(tree));
  }
  return out;
}

namespace {

// Exact minimiser over the bias of mean hinge loss for fixed scores u = x.w.
double optimal_bias(const Eigen::VectorXd& u, const Eigen::VectorXd& s) {
  const Eigen::Index n = u.size();
  std::vector<std::pair<double, int>> breaks(static_cast<std::size_t>(n));
  int slope = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    breaks[static_cast<std::size_t>(i)] = {s(i) - u(i), s(i) > 0 ? 1 : -1};
    if (s(i) > 0) --slope;
  }
  std::sort(breaks.begin(), breaks.end());
  // Slope increases by one at every breakpoint.
  for (std::size_t i = 0; i < breaks.size(); ++i) {
    ++slope;
    if (slope > 0) return breaks[i].first;
    if (slope == 0) {
      const double hi = i + 1 < breaks.size() ? breaks[i + 1].first : breaks[i].first;
      return breaks[i].first + (hi - breaks[i].first) / 2.0;
    }
  }
  return breaks.empty() ? 0.0 : breaks.back().first;
}

}  // namespace

LinearState fit_linsvm(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const LinSvmParams& p) {
  check_training_data(x, y);
  if (!(p.C > 0.0)) fail(ErrorKind::InvalidConfig, "C must be positive");
  const Eigen::VectorXd s = (2 * y.array() - 1).cast<double>();
  const Eigen::Index d = x.cols();
  const double lambda = inverse_c_lambda(p.C, x.rows());
  const HingeObjective<double> objective{x, s, lambda};
  const double radius = std::sqrt(2.0 / lambda);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  theta(d) = optimal_bias(x * theta.head(d), s);
  Eigen::VectorXd best = theta;
  double best_value = objective.value(theta);
  for (int t = 1; t <= p.epochs; ++t) {
    const Eigen::VectorXd g = objective.subgradient(theta);
    theta.head(d) -= g.head(d) / (lambda * static_cast<double>(t));
    const double norm = theta.head(d).norm();
    if (norm > radius) theta.head(d) *= radius / norm;
    theta(d) = optimal_bias(x * theta.head(d), s);
    const double value = objective.value(theta);
    check_finite(value, "linear SVM");
    if (value < best_value) {
      best_value = value;
      best = theta;
    }
  }
  return {best.head(d), best(d)};
}

MlpState init_mlp(Eigen::Index inputs, const MlpParams& p, std::uint64_t seed) {
  if (p.hidden_size < 1) fail(ErrorKind::InvalidConfig, "hidden_size must be positive");
  MlpState state;
  state.inputs = inputs;
  state.hidden = p.hidden_size;
  state.activation = p.activation;
  state.theta = Eigen::VectorXd::Zero(MlpObjective<double>::parameter_count(inputs, p.hidden_size));
  if (!p.zero_init) {
    SplitMix64 rng(seed);
    for (Eigen::Index i = 0; i < state.theta.size(); ++i) state.theta(i) = rng.uniform(-0.1, 0.1);
  }
  return state;
}

MlpState fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, const MlpParams& p, std::uint64_t seed) {
  check_training_data(x, y);
  const Eigen::VectorXd target = y.cast<double>();
  MlpState state = init_mlp(x.cols(), p, seed);
  const MlpObjective<double> objective{x, target, state.hidden, p.activation, p.alpha};
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(state.theta.size());
  double rate = p.learning_rate_init;
  double previous = std::numeric_limits<double>::infinity();
  int increases = 0;
  for (int it = 1; it <= p.max_iter; ++it) {
    if (p.learning_rate == LearningRateSchedule::InvScaling) rate = p.learning_rate_init / std::sqrt(double(it));
    const Eigen::VectorXd g = objective.gradient(state.theta);
    if (!g.allFinite()) fail(ErrorKind::NonFiniteLoss, "MLP diverged");
    velocity = p.momentum * velocity - rate * g;
    state.theta += velocity;
    if (p.learning_rate == LearningRateSchedule::Adaptive) {
      const double loss = objective.value(state.theta);
      check_finite(loss, "MLP");
      increases = loss > previous ? increases + 1 : 0;
      if (increases >= 2) {
        rate /= 5.0;
        increases = 0;
      }
      previous = loss;
    }
  }
  check_finite(objective.value(state.theta), "MLP");
  return state;
}

// ---------------------------------------------------------------------------

namespace {

TrainedModel wrap(const FeatureTable& table, const ModelConfig& cfg, FittedState state) {
  TrainedModel m;
  m.config = cfg;
  m.state = std::move(state);
  m.columns = table.names();
  m.train_rows = static_cast<std::size_t>(table.rows());
  return m;
}

template <typename Params>
const Params& params_of(const ModelConfig& cfg, Family expected) {
  if (cfg.family() != expected) {
    fail(ErrorKind::InvalidConfig, std::string("expected a ") + to_string(expected) + " configuration, got " +
                                       to_string(cfg.family()));
  }
  return std::get<Params>(cfg.params);
}

}  // namespace

TrainedModel train_logreg(const FeatureTable& t, const ModelConfig& cfg) {
  return wrap(t, cfg, fit_logreg(t.values(), t.labels(), params_of<LogRegParams>(cfg, Family::LogReg)));
}
TrainedModel train_tree(const FeatureTable& t, const ModelConfig& cfg) {
  return wrap(t, cfg, fit_tree(t.values(), t.labels(), params_of<TreeParams>(cfg, Family::Tree), cfg.seed));
}
TrainedModel train_rf(const FeatureTable& t, const ModelConfig& cfg) {
  return wrap(t, cfg,
              fit_forest(t.values(), t.labels(), params_of<ForestParams>(cfg, Family::RandomForest), cfg.seed));
}
TrainedModel train_gb(const FeatureTable& t, const ModelConfig& cfg) {
  return wrap(t, cfg,
              fit_boosting(t.values(), t.labels(), params_of<BoostParams>(cfg, Family::GradientBoosting), cfg.seed));
}
TrainedModel train_linsvm(const FeatureTable& t, const ModelConfig& cfg) {
  return wrap(t, cfg, fit_linsvm(t.values(), t.labels(), params_of<LinSvmParams>(cfg, Family::LinearSvm)));
}
TrainedModel train_mlp(const FeatureTable& t, const ModelConfig& cfg) {
  return wrap(t, cfg, fit_mlp(t.values(), t.labels(), params_of<MlpParams>(cfg, Family::Mlp), cfg.seed));
}

TrainedModel train(const FeatureTable& table, const ModelConfig& cfg) {
  switch (cfg.family()) {
    case Family::LogReg: return train_logreg(table, cfg);
    case Family::Tree: return train_tree(table, cfg);
    case Family::RandomForest: return train_rf(table, cfg);
    case Family::GradientBoosting: return train_gb(table, cfg);
    case Family::LinearSvm: return train_linsvm(table, cfg);
    case Family::Mlp: return train_mlp(table, cfg);
  }
  fail(ErrorKind::UnsupportedFamily, "unknown family");
}

Preprocessor fit_preprocessor(const FeatureTable& train_raw, const PreprocessOptions& options) {
  Preprocessor prep;
  FeatureTable current = train_raw;
  std::optional<ScalerState> scaler;
  if (options.scale) {
    scaler = minmax_fit(current);
    current = minmax_apply(*scaler, current);
  }
  prep.columns = train_raw.names();
  if (options.correlation_threshold) prep.columns = correlation_prune(current, *options.correlation_threshold);
  if (scaler) {
    ScalerState restricted;
    restricted.columns = prep.columns;
    const auto k = static_cast<Eigen::Index>(prep.columns.size());
    restricted.min.resize(k);
    restricted.max.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index src = train_raw.require_column(prep.columns[static_cast<std::size_t>(j)]);
      restricted.min(j) = scaler->min(src);
      restricted.max(j) = scaler->max(src);
    }
    prep.scaler = std::move(restricted);
  }
  return prep;
}

FeatureTable Preprocessor::apply(const FeatureTable& table) const {
  if (scaler) return minmax_apply(*scaler, table);
  return table.select_columns(columns);
}

TrainedModel train_with_preprocessing(const FeatureTable& train_raw, const ModelConfig& cfg,
                                      const PreprocessOptions& options) {
  Preprocessor prep = fit_preprocessor(train_raw, options);
  TrainedModel model = train(prep.apply(train_raw), cfg);
  model.scaler = std::move(prep.scaler);
  return model;
}

Eigen::MatrixXd model_inputs(const TrainedModel& model, const FeatureTable& table) {
  if (model.scaler) return minmax_apply(*model.scaler, table).values();
  return table.select_columns(model.columns).values();
}

Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != static_cast<Eigen::Index>(model.columns.size())) {
    fail(ErrorKind::DimensionMismatch, "input width does not match the model");
  }
  const Eigen::Index n = x.rows();
  Eigen::VectorXd out(n);
  std::visit(
      [&](const auto& state) {
        using T = std::decay_t<decltype(state)>;
        if constexpr (std::is_same_v<T, LinearState>) {
          const Eigen::VectorXd z = (x * state.weights).array() + state.bias;
          out = z.unaryExpr([](double v) { return sigmoid(v); });
        } else if constexpr (std::is_same_v<T, EnsembleState>) {
          const Family f = model.config.family();
          for (Eigen::Index i = 0; i < n; ++i) {
            if (f == Family::GradientBoosting) {
              double score = state.init_score;
              for (const auto& tree : state.trees) score += state.learning_rate * tree.predict(x.row(i));
              out(i) = sigmoid(score);
            } else if (f == Family::Tree) {
              out(i) = state.trees.front().predict(x.row(i));
            } else {
              int votes = 0;
              for (const auto& tree : state.trees) votes += tree.predict(x.row(i)) > 0.5 ? 1 : 0;
              out(i) = static_cast<double>(votes) / static_cast<double>(state.trees.size());
            }
          }
        } else if constexpr (std::is_same_v<T, MlpState>) {
          const Eigen::VectorXd dummy = Eigen::VectorXd::Zero(n);
          const MlpObjective<double> net{x, dummy, state.hidden, state.activation, 0.0};
          out = net.forward(state.theta).z.unaryExpr([](double v) { return sigmoid(v); });
        }
      },
      model.state);
  return out;
}

Predictions predict(const TrainedModel& model, const FeatureTable& table) {
  Predictions p;
  p.ids = table.ids();
  p.probability = predict_proba(model, model_inputs(model, table));
  p.label = (p.probability.array() > 0.5).cast<int>();
  return p;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json max_features_json(const MaxFeatures& m) {
  switch (m.mode) {
    case MaxFeatures::Mode::All: return "all";
    case MaxFeatures::Mode::Sqrt: return "sqrt";
    case MaxFeatures::Mode::Log2: return "log2";
    case MaxFeatures::Mode::Count: return m.count;
  }
  return "all";
}

MaxFeatures max_features_from(const json& v) {
  if (v.is_null()) return {};
  if (v.is_number_integer()) {
    if (v.get<int>() < 1) fail(ErrorKind::InvalidConfig, "max_features must be positive");
    return {MaxFeatures::Mode::Count, v.get<int>()};
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "all" || s == "none" || s == "None") return {};
    if (s == "sqrt") return {MaxFeatures::Mode::Sqrt, 0};
    if (s == "log2") return {MaxFeatures::Mode::Log2, 0};
  }
  fail(ErrorKind::InvalidConfig, "invalid max_features " + v.dump());
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Logistic: return "logistic";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Activation activation_from(const std::string& s) {
  if (s == "logistic") return Activation::Logistic;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  fail(ErrorKind::InvalidConfig, "unknown activation '" + s + "'");
}

const char* schedule_name(LearningRateSchedule s) {
  switch (s) {
    case LearningRateSchedule::Constant: return "constant";
    case LearningRateSchedule::InvScaling: return "invscaling";
    case LearningRateSchedule::Adaptive: return "adaptive";
  }
  return "?";
}

LearningRateSchedule schedule_from(const std::string& s) {
  if (s == "constant") return LearningRateSchedule::Constant;
  if (s == "invscaling") return LearningRateSchedule::InvScaling;
  if (s == "adaptive") return LearningRateSchedule::Adaptive;
  fail(ErrorKind::InvalidConfig, "unknown learning-rate schedule '" + s + "'");
}

int depth_from(const json& v) {
  if (v.is_null()) return 0;
  return v.get<int>();
}

json depth_json(int d) { return d <= 0 ? json(nullptr) : json(d); }

template <typename T>
T number(const json& v, const std::string& key) {
  if (!v.is_number()) fail(ErrorKind::InvalidConfig, "parameter '" + key + "' must be numeric");
  if constexpr (std::is_integral_v<T>) {
    const double d = v.get<double>();
    if (std::floor(d) != d) fail(ErrorKind::InvalidConfig, "parameter '" + key + "' must be an integer");
    return static_cast<T>(d);
  } else {
    return v.get<T>();
  }
}

json vec_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vec_from(const json& v) {
  const auto values = v.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json tree_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const TreeNode& n : tree.nodes) {
    nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value, n.impurity, n.samples}));
  }
  return nodes;
}

DecisionTree tree_from(const json& nodes) {
  DecisionTree tree;
  for (const json& a : nodes) {
    TreeNode n;
    n.feature = a.at(0).get<int>();
    n.threshold = a.at(1).get<double>();
    n.left = a.at(2).get<int>();
    n.right = a.at(3).get<int>();
    n.value = a.at(4).get<double>();
    n.impurity = a.at(5).get<double>();
    n.samples = a.at(6).get<int>();
    tree.nodes.push_back(n);
  }
  const auto count = static_cast<int>(tree.nodes.size());
  for (const TreeNode& n : tree.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)) {
      fail(ErrorKind::ParseError, "model artifact: tree node references out of range");
    }
  }
  if (tree.nodes.empty()) fail(ErrorKind::ParseError, "model artifact: empty tree");
  return tree;
}

}  // namespace

json params_to_json(const ModelConfig& cfg) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LogRegParams>) {
          return {{"penalty", p.l2 ? "l2" : "none"}, {"C", p.C}, {"max_iter", p.max_iter}, {"tol", p.tol}};
        } else if constexpr (std::is_same_v<T, TreeParams>) {
          return {{"max_depth", depth_json(p.max_depth)},
                  {"min_samples_split", p.min_samples_split},
                  {"min_samples_leaf", p.min_samples_leaf},
                  {"max_features", max_features_json(p.max_features)}};
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          return {{"max_depth", depth_json(p.max_depth)},
                  {"max_features", max_features_json(p.max_features)},
                  {"min_samples_leaf", p.min_samples_leaf},
                  {"min_samples_split", p.min_samples_split},
                  {"n_estimators", p.n_estimators}};
        } else if constexpr (std::is_same_v<T, BoostParams>) {
          return {{"learning_rate", p.learning_rate},
                  {"n_estimators", p.n_estimators},
                  {"max_depth", depth_json(p.max_depth)},
                  {"min_samples_split", p.min_samples_split},
                  {"min_samples_leaf", p.min_samples_leaf},
                  {"max_features", max_features_json(p.max_features)},
                  {"subsample", p.subsample}};
        } else if constexpr (std::is_same_v<T, LinSvmParams>) {
          return {{"C", p.C}, {"epochs", p.epochs}};
        } else {
          return {{"hidden_size", p.hidden_size},
                  {"activation", activation_name(p.activation)},
                  {"alpha", p.alpha},
                  {"learning_rate", schedule_name(p.learning_rate)},
                  {"learning_rate_init", p.learning_rate_init},
                  {"momentum", p.momentum},
                  {"max_iter", p.max_iter},
                  {"zero_init", p.zero_init}};
        }
      },
      cfg.params);
}

ModelConfig config_from_json(Family family, const json& params, std::uint64_t seed) {
  ModelConfig cfg = ModelConfig::defaults(family, seed);
  if (params.is_null()) return cfg;
  if (!params.is_object()) fail(ErrorKind::InvalidConfig, "model parameters must be an object");
  for (const auto& [key, v] : params.items()) {
    auto unknown = [&]() {
      fail(ErrorKind::InvalidConfig, "unknown parameter '" + key + "' for family " + to_string(family));
    };
    std::visit(
        [&](auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, LogRegParams>) {
            if (key == "penalty") {
              const std::string s = v.is_null() ? "none" : v.get<std::string>();
              if (s != "l2" && s != "none" && s != "None") fail(ErrorKind::InvalidConfig, "penalty must be l2 or none");
              p.l2 = s == "l2";
            } else if (key == "C") {
              p.C = number<double>(v, key);
            } else if (key == "max_iter") {
              p.max_iter = number<int>(v, key);
            } else if (key == "tol") {
              p.tol = number<double>(v, key);
            } else {
              unknown();
            }
          } else if constexpr (std::is_same_v<T, TreeParams> || std::is_same_v<T, ForestParams>) {
            if (key == "max_depth") {
              p.max_depth = depth_from(v);
            } else if (key == "min_samples_split") {
              p.min_samples_split = number<int>(v, key);
            } else if (key == "min_samples_leaf") {
              p.min_samples_leaf = number<int>(v, key);
            } else if (key == "max_features") {
              p.max_features = max_features_from(v);
            } else if constexpr (std::is_same_v<T, ForestParams>) {
              if (key == "n_estimators") {
                p.n_estimators = number<int>(v, key);
              } else {
                unknown();
              }
            } else {
              unknown();
            }
          } else if constexpr (std::is_same_v<T, BoostParams>) {
            if (key == "learning_rate" || key == "eta") {
              p.learning_rate = number<double>(v, key);
            } else if (key == "n_estimators") {
              p.n_estimators = number<int>(v, key);
            } else if (key == "max_depth") {
              p.max_depth = depth_from(v);
            } else if (key == "min_samples_split") {
              p.min_samples_split = number<int>(v, key);
            } else if (key == "min_samples_leaf") {
              p.min_samples_leaf = number<int>(v, key);
            } else if (key == "max_features") {
              p.max_features = max_features_from(v);
            } else if (key == "subsample") {
              p.subsample = number<double>(v, key);
            } else {
              unknown();
            }
          } else if constexpr (std::is_same_v<T, LinSvmParams>) {
            if (key == "C") {
              p.C = number<double>(v, key);
            } else if (key == "epochs") {
              p.epochs = number<int>(v, key);
            } else {
              unknown();
            }
          } else {
            if (key == "hidden_size") {
              p.hidden_size = v.is_array() ? number<int>(v.at(0), key) : number<int>(v, key);
            } else if (key == "activation") {
              p.activation = activation_from(v.get<std::string>());
            } else if (key == "alpha") {
              p.alpha = number<double>(v, key);
            } else if (key == "learning_rate") {
              p.learning_rate = schedule_from(v.get<std::string>());
            } else if (key == "learning_rate_init") {
              p.learning_rate_init = number<double>(v, key);
            } else if (key == "momentum") {
              p.momentum = number<double>(v, key);
            } else if (key == "max_iter") {
              p.max_iter = number<int>(v, key);
            } else if (key == "zero_init") {
              p.zero_init = v.get<bool>();
            } else {
              unknown();
            }
          }
        },
        cfg.params);
  }
  return cfg;
}

json to_json(const TrainedModel& model) {
  json doc;
  doc["schema"] = kModelSchema;
  doc["family"] = to_string(model.config.family());
  doc["params"] = params_to_json(model.config);
  doc["seed"] = model.config.seed;
  doc["columns"] = model.columns;
  doc["train_rows"] = model.train_rows;
  if (model.scaler) {
    doc["scaler"] = {{"min", vec_json(model.scaler->min)}, {"max", vec_json(model.scaler->max)}};
  } else {
    doc["scaler"] = nullptr;
  }
  json state;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LinearState>) {
          state = {{"kind", "linear"}, {"weights", vec_json(s.weights)}, {"bias", s.bias}};
        } else if constexpr (std::is_same_v<T, EnsembleState>) {
          json trees = json::array();
          for (const auto& t : s.trees) trees.push_back(tree_json(t));
          state = {{"kind", "ensemble"},
                   {"init_score", s.init_score},
                   {"learning_rate", s.learning_rate},
                   {"train_loss", s.train_loss},
                   {"trees", std::move(trees)}};
        } else {
          state = {{"kind", "mlp"},
                   {"inputs", s.inputs},
                   {"hidden", s.hidden},
                   {"activation", activation_name(s.activation)},
                   {"theta", vec_json(s.theta)}};
        }
      },
      model.state);
  doc["state"] = std::move(state);
  return doc;
}

TrainedModel model_from_json(const json& doc) {
  try {
    if (doc.at("schema").get<std::string>() != kModelSchema) {
      fail(ErrorKind::ParseError, "unsupported model schema '" + doc.at("schema").get<std::string>() + "'");
    }
    TrainedModel m;
    const Family family = parse_family(doc.at("family").get<std::string>());
    m.config = config_from_json(family, doc.at("params"), doc.at("seed").get<std::uint64_t>());
    m.columns = doc.at("columns").get<std::vector<std::string>>();
    m.train_rows = doc.at("train_rows").get<std::size_t>();
    if (!doc.at("scaler").is_null()) {
      ScalerState sc;
      sc.columns = m.columns;
      sc.min = vec_from(doc["scaler"].at("min"));
      sc.max = vec_from(doc["scaler"].at("max"));
      if (sc.min.size() != static_cast<Eigen::Index>(m.columns.size()) || sc.max.size() != sc.min.size()) {
        fail(ErrorKind::ParseError, "model artifact: scaler width mismatch");
      }
      m.scaler = std::move(sc);
    }
    const json& st = doc.at("state");
    const std::string kind = st.at("kind").get<std::string>();
    if (kind == "linear") {
      LinearState s{vec_from(st.at("weights")), st.at("bias").get<double>()};
      if (s.weights.size() != static_cast<Eigen::Index>(m.columns.size())) {
        fail(ErrorKind::ParseError, "model artifact: weight count mismatch");
      }
      m.state = std::move(s);
    } else if (kind == "ensemble") {
      EnsembleState s;
      s.init_score = st.at("init_score").get<double>();
      s.learning_rate = st.at("learning_rate").get<double>();
      s.train_loss = st.at("train_loss").get<std::vector<double>>();
      for (const json& t : st.at("trees")) s.trees.push_back(tree_from(t));
      if (s.trees.empty() && family != Family::GradientBoosting) {
        fail(ErrorKind::ParseError, "model artifact: ensemble without trees");
      }
      m.state = std::move(s);
    } else if (kind == "mlp") {
      MlpState s;
      s.inputs = st.at("inputs").get<Eigen::Index>();
      s.hidden = st.at("hidden").get<Eigen::Index>();
      s.activation = activation_from(st.at("activation").get<std::string>());
      s.theta = vec_from(st.at("theta"));
      if (s.theta.size() != MlpObjective<double>::parameter_count(s.inputs, s.hidden) ||
          s.inputs != static_cast<Eigen::Index>(m.columns.size())) {
        fail(ErrorKind::ParseError, "model artifact: MLP parameter count mismatch");
      }
      m.state = std::move(s);
    } else {
      fail(ErrorKind::ParseError, "model artifact: unknown state kind '" + kind + "'");
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("model artifact: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  csv::write_text_file(path, to_json(model).dump(1) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(csv::read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const Error& e) {
    throw e.annotated(path.string());
  }
}

// ---------------------------------------------------------------------------
// Grids

GridSpec default_grid(std::string_view name) {
  using L = std::vector<json>;
  if (name == "rf") {
    return {Family::RandomForest,
            {{"max_depth", L{80, 90, 100}},
             {"max_features", L{2, 3, 4}},
             {"min_samples_leaf", L{3, 4, 5}},
             {"min_samples_split", L{4, 6, 8}},
             {"n_estimators", L{100, 200, 300, 500}}}};
  }
  if (name == "linsvm") return {Family::LinearSvm, {{"C", L{0.001, 0.01, 0.1, 1.0, 10.0}}}};
  if (name == "logreg") return {Family::LogReg, {{"penalty", L{"l2", "none"}}, {"C", L{0.01, 0.1, 1.0}}}};
  if (name == "gb") {
    return {Family::GradientBoosting,
            {{"learning_rate", L{0.05, 0.1, 0.5, 1.0}},
             {"n_estimators", L{100, 200, 300}},
             {"min_samples_split", L{2, 4, 6}},
             {"min_samples_leaf", L{1, 3, 5}},
             {"max_features", L{"sqrt", "log2", "all"}}}};
  }
  if (name == "xgb") {
    return {Family::GradientBoosting,
            {{"eta", L{0.01, 0.05, 0.1, 0.15, 0.2}}, {"max_depth", L{3, 4, 5, 6}}, {"subsample", L{0.5, 0.75, 1.0}}}};
  }
  if (name == "mlp") {
    return {Family::Mlp,
            {{"hidden_size", L{100, 150, 200}},
             {"activation", L{"logistic", "tanh", "relu"}},
             {"alpha", L{0.0001, 0.005, 0.001}},
             {"learning_rate", L{"constant", "invscaling", "adaptive"}}}};
  }
  if (name == "tree") {
    return {Family::Tree, {{"max_depth", L{2, 4, 8, nullptr}}, {"min_samples_leaf", L{1, 3, 5}}}};
  }
  fail(ErrorKind::InvalidConfig, "no default grid named '" + std::string(name) + "'");
}

std::vector<ModelConfig> expand_grid(const GridSpec& spec, std::uint64_t seed) {
  for (const auto& [name, values] : spec.grid) {
    if (values.empty()) fail(ErrorKind::InvalidConfig, "grid axis '" + name + "' is empty");
  }
  std::vector<ModelConfig> out;
  std::vector<std::size_t> pos(spec.grid.size(), 0);
  while (true) {
    json params = json::object();
    for (std::size_t a = 0; a < spec.grid.size(); ++a) params[spec.grid[a].first] = spec.grid[a].second[pos[a]];
    out.push_back(config_from_json(spec.family, params, seed));
    std::size_t a = spec.grid.size();
    while (a > 0) {
      --a;
      if (++pos[a] < spec.grid[a].second.size()) break;
      pos[a] = 0;
      if (a == 0) return out;
    }
    if (spec.grid.empty()) return out;
  }
}

}  // namespace schoolconn
