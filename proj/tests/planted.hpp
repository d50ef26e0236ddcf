#pragma once

// Planted-signal feature tables: the label is a threshold on the buffer
// mean of one layer, the other columns are unrelated noise layers.

#include <string>

#include "schoolconn/features.hpp"
#include "schoolconn/synth.hpp"

namespace testing {

struct PlantedTable {
  schoolconn::synth::PlantedSchools planted;
  schoolconn::FeatureTable table;
};

inline PlantedTable planted_table(std::size_t n, double noise, std::uint64_t seed, double margin = 0.0,
                                  int noise_layers = 3) {
  using namespace schoolconn;
  synth::RasterParams rp;
  rp.xll = 30.0;
  rp.yll = -2.0;
  rp.cellsize = 0.002;
  rp.amplitude = 100.0;
  rp.correlation_cells = 10;
  const RasterLayer signal = synth::gen_raster(seed, 150, 150, rp);

  synth::PlantSpec ps;
  ps.n_schools = n;
  ps.region = {30.02, -1.98, 30.28, -1.72};
  ps.noise = noise;
  ps.margin = margin;
  ps.seed = seed;
  PlantedTable out;
  out.planted = synth::gen_schools(ps, signal);

  LayerConfig cfg;
  cfg.sources.push_back(RasterSource{"signal", signal, {Stat::Mean}});
  for (int k = 0; k < noise_layers; ++k) {
    cfg.sources.push_back(RasterSource{"noise" + std::to_string(k),
                                       synth::gen_raster(seed * 31 + 100 + static_cast<std::uint64_t>(k), 150, 150, rp),
                                       {Stat::Mean, Stat::Variance}});
  }
  out.table = build_feature_table(out.planted.schools, cfg, {1000.0});
  return out;
}

}  // namespace testing
