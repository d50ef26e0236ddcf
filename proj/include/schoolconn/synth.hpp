#pragma once

// Seeded synthetic layers and school sets with known ground truth.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "schoolconn/eval.hpp"
#include "schoolconn/geo.hpp"
#include "schoolconn/raster.hpp"
#include "schoolconn/rng.hpp"

namespace schoolconn::synth {

struct RasterParams {
  LayerKind kind = LayerKind::Continuous;
  double xll = 0.0, yll = 0.0, cellsize = 0.001;
  double nodata = -9999.0;
  // continuous: base + amplitude * smooth value noise in [0, 1)
  double base = 0.0;
  double amplitude = 1.0;
  int correlation_cells = 8;
  // categorical: nearest-seed regions, each labelled with a legend class
  std::vector<int> legend;
  int regions = 16;
};

RasterLayer gen_raster(std::uint64_t seed, Eigen::Index nrows, Eigen::Index ncols, const RasterParams& params);

struct PlantSpec {
  std::size_t n_schools = 200;
  BBox region{0.0, 0.0, 0.1, 0.1};
  double radius_m = 1000.0;
  std::optional<double> threshold;  // default: median signal (balanced classes)
  double noise = 0.0;               // label flip probability, < 0.5
  // Schools whose signal lies within this distance of the threshold are
  // redrawn, leaving a clean gap between the classes.
  double margin = 0.0;
  std::uint64_t seed = 0;
};

struct PlantedSchools {
  std::vector<SchoolRecord> schools;
  std::vector<double> signal;  // buffer mean of the signal layer
  std::vector<int> rule_labels;
  double threshold = 0.0;
  std::size_t flipped = 0;
};

/// Connected iff the buffer mean of `signal_layer` exceeds the threshold,
/// then each label flips independently with probability `noise`.
PlantedSchools gen_schools(const PlantSpec& spec, const RasterLayer& signal_layer);

/// Pronounceable multi-word school name.
std::string random_name(SplitMix64& rng);

// ---------------------------------------------------------------------------
// Cleaning corpus with planted defects

struct CorpusSpec {
  std::size_t n_base = 60;
  std::size_t n_keyword = 4;
  std::size_t n_pairs = 5;    // duplicates 30 m from a base record
  std::size_t n_chains = 3;   // two extra records 40 m and 80 m from a base record
  std::size_t n_names = 5;    // near-identical name 150 m from a base record
  std::size_t n_off = 4;      // outside every settlement
  std::uint64_t seed = 0;
};

struct CleaningCorpus {
  std::vector<SchoolRecord> schools;
  RasterLayer footprints;
  RasterLayer ghsl;  // categorical, nodata where there is no settlement
  std::vector<std::string> keyword_ids, proximity_ids, name_ids, settlement_ids;  // expected removals
  std::vector<std::string> survivor_ids;
};

CleaningCorpus gen_cleaning_corpus(const CorpusSpec& spec);

// ---------------------------------------------------------------------------
// Complete on-disk dataset

struct DatasetSpec {
  std::size_t n_schools = 300;
  double noise = 0.05;
  std::uint64_t seed = 7;
  std::vector<double> radius_sweep;  // empty: single 1000 m run
  int n_runs = 5;
  std::vector<std::string> families{"rf"};
};

/// Writes schools, rasters, vector layers and an experiment.json that
/// references them into `dir`. Returns the config path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec);

}  // namespace schoolconn::synth
