#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "schoolconn/feature_table.hpp"
#include "schoolconn/models.hpp"

namespace schoolconn {

struct GridCandidate {
  ModelConfig config;
  double mean_accuracy = 0.0;
  double mean_f1 = 0.0;
  double score = 0.0;  // mean_f1 + mean_accuracy
};

struct GridSearchResult {
  std::vector<GridCandidate> candidates;  // grid enumeration order
  std::size_t best_index = 0;

  const GridCandidate& best() const { return candidates.at(best_index); }
};

/// Stratified k-fold search. Candidate i trains with seed (seed ^ i); the
/// first candidate with the highest score wins.
GridSearchResult grid_search_cv(const FeatureTable& table, const GridSpec& spec, int k = 5, std::uint64_t seed = 0);

std::string grid_search_csv(const GridSearchResult& result);

}  // namespace schoolconn
