#include "schoolconn/grid_search.hpp"

#include <sstream>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"
#include "schoolconn/eval.hpp"
#include "schoolconn/preprocess.hpp"

namespace schoolconn {

GridSearchResult grid_search_cv(const FeatureTable& table, const GridSpec& spec, int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::InvalidConfig, "grid search needs k >= 2 folds");
  const std::vector<ModelConfig> configs = expand_grid(spec, seed);
  if (configs.empty()) fail(ErrorKind::InvalidConfig, "empty parameter grid");
  const std::vector<int> folds = stratified_folds(table.labels(), k, seed);

  std::vector<std::vector<Eigen::Index>> train_rows(static_cast<std::size_t>(k)), test_rows(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < folds.size(); ++i) {
    for (int f = 0; f < k; ++f) {
      (folds[i] == f ? test_rows : train_rows)[static_cast<std::size_t>(f)].push_back(static_cast<Eigen::Index>(i));
    }
  }
  std::vector<FeatureTable> train_parts, test_parts;
  for (int f = 0; f < k; ++f) {
    train_parts.push_back(table.select_rows(train_rows[static_cast<std::size_t>(f)]));
    test_parts.push_back(table.select_rows(test_rows[static_cast<std::size_t>(f)]));
  }

  GridSearchResult result;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    GridCandidate cand;
    cand.config = configs[c];
    cand.config.seed = seed ^ static_cast<std::uint64_t>(c);
    for (int f = 0; f < k; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      const TrainedModel model = train(train_parts[fi], cand.config);
      const Predictions pred = predict(model, test_parts[fi]);
      const MetricsRow m = metrics(confusion(test_parts[fi].labels(), pred.label));
      cand.mean_accuracy += m.accuracy;
      cand.mean_f1 += m.f1;
    }
    cand.mean_accuracy /= k;
    cand.mean_f1 /= k;
    cand.score = cand.mean_f1 + cand.mean_accuracy;
    if (result.candidates.empty() || cand.score > result.best().score) result.best_index = c;
    result.candidates.push_back(std::move(cand));
  }
  return result;
}

std::string grid_search_csv(const GridSearchResult& result) {
  std::ostringstream out;
  csv::write_row(out, {"candidate", "family", "params", "mean_accuracy", "mean_f1", "score", "best"});
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& c = result.candidates[i];
    csv::write_row(out, {std::to_string(i), to_string(c.config.family()), params_to_json(c.config).dump(),
                         csv::format_double(c.mean_accuracy), csv::format_double(c.mean_f1),
                         csv::format_double(c.score), i == result.best_index ? "1" : "0"});
  }
  return out.str();
}

}  // namespace schoolconn
