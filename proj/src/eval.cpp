#include "schoolconn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"
#include "schoolconn/rng.hpp"

namespace schoolconn {

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> preds) {
  if (labels.size() != preds.size()) {
    fail(ErrorKind::LengthMismatch, "confusion: " + std::to_string(labels.size()) + " labels vs " +
                                        std::to_string(preds.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] != 0, predicted = preds[i] != 0;
    if (actual && predicted) ++cm.tp;
    else if (!actual && predicted) ++cm.fp;
    else if (actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

ConfusionMatrix confusion(const Eigen::VectorXi& labels, const Eigen::VectorXi& preds) {
  return confusion(std::span<const int>(labels.data(), static_cast<std::size_t>(labels.size())),
                   std::span<const int>(preds.data(), static_cast<std::size_t>(preds.size())));
}

namespace {

double ratio(std::int64_t num, std::int64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsRow metrics(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) fail(ErrorKind::EmptyMatrix, "metrics of an empty confusion matrix");
  MetricsRow m;
  bool unused = false;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), unused);
  m.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, m.f1_degenerate);
  // Complements are taken as 1 - rate so that the pairs sum to 1 exactly.
  m.fp_rate = ratio(cm.fp, cm.fp + cm.tn, m.negative_degenerate);
  m.tn_rate = m.negative_degenerate ? 0.0 : 1.0 - m.fp_rate;
  m.tp_rate = ratio(cm.tp, cm.tp + cm.fn, m.positive_degenerate);
  m.fn_rate = m.positive_degenerate ? 0.0 : 1.0 - m.tp_rate;
  return m;
}

namespace {

std::size_t metric_index(std::string_view name) {
  for (std::size_t i = 0; i < MetricsRow::kCount; ++i) {
    if (name == MetricsRow::kNames[i]) return i;
  }
  fail(ErrorKind::UnknownColumn, "unknown metric '" + std::string(name) + "'");
}

}  // namespace

double MetricsReport::mean_of(std::string_view metric) const { return mean[metric_index(metric)]; }
double MetricsReport::variance_of(std::string_view metric) const { return variance[metric_index(metric)]; }

MetricsReport aggregate(std::vector<std::uint64_t> seeds, std::vector<ConfusionMatrix> confusions) {
  if (confusions.empty()) fail(ErrorKind::EmptyInput, "no runs to aggregate");
  if (seeds.size() != confusions.size()) fail(ErrorKind::LengthMismatch, "seeds and runs differ in length");
  MetricsReport r;
  r.seeds = std::move(seeds);
  r.confusions = std::move(confusions);
  for (const auto& cm : r.confusions) r.runs.push_back(metrics(cm));
  const double n = static_cast<double>(r.runs.size());
  for (std::size_t k = 0; k < MetricsRow::kCount; ++k) {
    // Offsetting by the first run keeps identical runs at exactly zero variance.
    const double base = r.runs.front().values()[k];
    double shifted = 0.0;
    for (const auto& run : r.runs) shifted += run.values()[k] - base;
    r.mean[k] = base + shifted / n;
    double sq = 0.0;
    for (const auto& run : r.runs) sq += (run.values()[k] - r.mean[k]) * (run.values()[k] - r.mean[k]);
    r.variance[k] = sq / n;
  }
  return r;
}

MetricsReport repeated_runs(const std::function<ConfusionMatrix(std::uint64_t)>& experiment, int n,
                            std::uint64_t base_seed) {
  if (n < 1) fail(ErrorKind::InvalidConfig, "n_runs must be at least 1");
  std::vector<std::uint64_t> seeds;
  std::vector<ConfusionMatrix> cms;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    try {
      cms.push_back(experiment(seed));
    } catch (const Error& e) {
      throw e.annotated("run " + std::to_string(i));
    }
    seeds.push_back(seed);
  }
  return aggregate(std::move(seeds), std::move(cms));
}

std::string metrics_csv(const MetricsReport& report) {
  std::ostringstream out;
  std::vector<std::string> header{"run", "seed", "tp", "fp", "fn", "tn"};
  for (const char* name : MetricsRow::kNames) header.emplace_back(name);
  header.emplace_back("degenerate");
  csv::write_row(out, header);
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& cm = report.confusions[i];
    std::vector<std::string> row{std::to_string(i), std::to_string(report.seeds[i]), std::to_string(cm.tp),
                                 std::to_string(cm.fp), std::to_string(cm.fn), std::to_string(cm.tn)};
    for (double v : report.runs[i].values()) row.push_back(csv::format_double(v));
    row.emplace_back(report.runs[i].degenerate() ? "1" : "0");
    csv::write_row(out, row);
  }
  for (const auto& [label, values] : {std::pair{"mean", &report.mean}, std::pair{"variance", &report.variance}}) {
    std::vector<std::string> row{label, "", "", "", "", ""};
    for (double v : *values) row.push_back(csv::format_double(v));
    row.emplace_back("");
    csv::write_row(out, row);
  }
  return out.str();
}

ParsedMetrics parse_metrics_csv(std::string_view text) {
  const csv::Document doc = csv::parse(text, "metrics");
  std::array<std::size_t, MetricsRow::kCount> cols{};
  for (std::size_t k = 0; k < MetricsRow::kCount; ++k) cols[k] = doc.require_column(MetricsRow::kNames[k]);
  const std::size_t run_col = doc.require_column("run");
  ParsedMetrics parsed;
  bool saw_mean = false, saw_var = false;
  for (const auto& row : doc.rows) {
    std::array<double, MetricsRow::kCount> values{};
    for (std::size_t k = 0; k < MetricsRow::kCount; ++k) values[k] = csv::parse_double(row[cols[k]], MetricsRow::kNames[k]);
    if (row[run_col] == "mean") {
      parsed.mean = values;
      saw_mean = true;
    } else if (row[run_col] == "variance") {
      parsed.variance = values;
      saw_var = true;
    } else {
      parsed.runs.push_back(values);
    }
  }
  if (!saw_mean || !saw_var) fail(ErrorKind::ParseError, "metrics CSV lacks mean/variance rows");
  return parsed;
}

// ---------------------------------------------------------------------------

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < width.size(); ++c) {
      std::string cell = c < r.size() ? r[c] : "";
      cell.resize(width[c], ' ');
      line += (c == 0 ? "" : " | ") + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string render_metric_table(const MetricTable& t, int decimals) {
  const std::size_t per = t.metrics.size();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> groups{t.title}, metrics_row{""};
  for (const auto& g : t.groups) {
    for (std::size_t m = 0; m < per; ++m) {
      groups.push_back(m == 0 ? g : "");
      metrics_row.push_back(t.metrics[m]);
    }
  }
  rows.push_back(groups);
  rows.push_back(metrics_row);
  for (const auto& [model, cells] : t.rows) {
    if (cells.size() != t.groups.size() * per) fail(ErrorKind::LengthMismatch, "table row '" + model + "' has wrong width");
    std::vector<std::string> r{model};
    for (const auto& c : cells) r.push_back(c ? fixed(*c, decimals) : "-");
    rows.push_back(r);
  }
  return render_rows(rows);
}

MetricTable auxiliary_table(
    std::string country,
    const std::vector<std::pair<std::string, std::pair<const MetricsReport*, const MetricsReport*>>>& models) {
  MetricTable t;
  t.title = std::move(country);
  t.groups = {"No Auxiliary", "Incl. Auxiliary"};
  t.metrics = {"F1", "Acc", "FP"};
  for (const auto& [model, reports] : models) {
    std::vector<std::optional<double>> cells;
    for (const MetricsReport* r : {reports.first, reports.second}) {
      if (r) {
        cells.insert(cells.end(), {r->mean_of("f1"), r->mean_of("accuracy"), r->mean_of("fp_rate")});
      } else {
        cells.insert(cells.end(), 3, std::nullopt);
      }
    }
    t.rows.emplace_back(model, std::move(cells));
  }
  return t;
}

std::vector<std::string> display_parameters(Family family) {
  switch (family) {
    case Family::RandomForest:
      return {"max_depth", "max_features", "min_samples_leaf", "min_samples_split", "n_estimators"};
    case Family::LinearSvm: return {"C"};
    case Family::LogReg: return {"penalty", "C"};
    case Family::GradientBoosting:
      return {"learning_rate", "n_estimators", "max_depth", "min_samples_split", "min_samples_leaf", "max_features",
              "subsample"};
    case Family::Mlp: return {"hidden_size", "activation", "alpha", "learning_rate"};
    case Family::Tree: return {"max_depth", "min_samples_split", "min_samples_leaf", "max_features"};
  }
  return {};
}

std::string render_config_record(const std::string& model_label, const std::vector<std::string>& columns,
                                 const std::vector<ModelConfig>& configs) {
  if (columns.size() != configs.size()) fail(ErrorKind::LengthMismatch, "one config per column expected");
  if (configs.empty()) fail(ErrorKind::EmptyInput, "no configurations to render");
  const Family family = configs.front().family();
  std::vector<nlohmann::json> params;
  for (const auto& c : configs) {
    if (c.family() != family) fail(ErrorKind::InvalidConfig, "mixed families in one record");
    params.push_back(params_to_json(c));
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Model", "Parameters"};
  header.insert(header.end(), columns.begin(), columns.end());
  rows.push_back(header);
  bool first = true;
  for (const std::string& key : display_parameters(family)) {
    std::string label = key;
    std::replace(label.begin(), label.end(), '_', ' ');
    std::vector<std::string> r{first ? model_label : "", label};
    for (const auto& p : params) {
      const auto& v = p.at(key);
      r.push_back(v.is_null() ? "None" : v.is_string() ? v.get<std::string>() : v.dump());
    }
    rows.push_back(r);
    first = false;
  }
  return render_rows(rows);
}

// ---------------------------------------------------------------------------

namespace {

Ranking rank(const std::vector<std::string>& names, const Eigen::VectorXd& scores) {
  Ranking out;
  for (std::size_t j = 0; j < names.size(); ++j) out.emplace_back(names[j], scores(static_cast<Eigen::Index>(j)));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace

Ranking feature_importance(const TrainedModel& model) {
  const auto* ensemble = std::get_if<EnsembleState>(&model.state);
  if (!ensemble) {
    fail(ErrorKind::UnsupportedFamily,
         std::string("impurity importance needs a tree-family model, got ") + to_string(model.config.family()));
  }
  const auto d = static_cast<Eigen::Index>(model.columns.size());
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  for (const auto& tree : ensemble->trees) total += tree.impurity_decrease(d);
  const double sum = total.sum();
  if (sum > 0.0) total /= sum;
  return rank(model.columns, total);
}

Ranking permutation_importance(const TrainedModel& model, const FeatureTable& table, int n_repeats,
                               std::uint64_t seed) {
  if (n_repeats < 1) fail(ErrorKind::InvalidConfig, "n_repeats must be positive");
  const Eigen::MatrixXd x = model_inputs(model, table);
  const Eigen::VectorXi& y = table.labels();
  auto accuracy = [&](const Eigen::MatrixXd& inputs) {
    const Eigen::VectorXi pred = (predict_proba(model, inputs).array() > 0.5).cast<int>();
    return metrics(confusion(y, pred)).accuracy;
  };
  const double base = accuracy(x);
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(x.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (int r = 0; r < n_repeats; ++r) {
      SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(j * n_repeats + r)));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      rng.shuffle(order);
      Eigen::MatrixXd shuffled = x;
      for (Eigen::Index i = 0; i < x.rows(); ++i) shuffled(i, j) = x(order[static_cast<std::size_t>(i)], j);
      scores(j) += base - accuracy(shuffled);
    }
    scores(j) /= n_repeats;
  }
  return rank(model.columns, scores);
}

std::string ranking_csv(const Ranking& ranking) {
  std::ostringstream out;
  csv::write_row(out, {"rank", "feature", "importance"});
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    csv::write_row(out, {std::to_string(i + 1), ranking[i].first, csv::format_double(ranking[i].second)});
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::string export_prediction_map(const std::vector<SchoolRecord>& schools, const Eigen::VectorXi& predicted,
                                  const std::optional<Eigen::VectorXi>& actual, const std::optional<BBox>& bbox) {
  const auto n = static_cast<Eigen::Index>(schools.size());
  if (predicted.size() != n) fail(ErrorKind::LengthMismatch, "predictions do not align with schools");
  if (actual && actual->size() != n) fail(ErrorKind::LengthMismatch, "labels do not align with schools");
  nlohmann::json features = nlohmann::json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    const SchoolRecord& s = schools[static_cast<std::size_t>(i)];
    if (bbox && !bbox->contains(s.location)) continue;
    nlohmann::json props{{"id", s.id}, {"predicted", predicted(i)}};
    if (actual) {
      const int a = (*actual)(i), p = predicted(i);
      props["actual"] = a;
      props["outcome"] = a ? (p ? "TP" : "FN") : (p ? "FP" : "TN");
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {s.location.lon, s.location.lat}}}},
                        {"properties", std::move(props)}});
  }
  const nlohmann::json doc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
  return doc.dump(1) + "\n";
}

}  // namespace schoolconn
