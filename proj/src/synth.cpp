#include "schoolconn/synth.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <json.hpp>

#include "schoolconn/cleaning.hpp"
#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"
#include "schoolconn/features.hpp"
#include "schoolconn/io.hpp"

namespace schoolconn::synth {

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

RasterGrid value_noise(SplitMix64& rng, Eigen::Index nrows, Eigen::Index ncols, int corr) {
  const double step = std::max(1, corr);
  const auto lr = static_cast<Eigen::Index>(std::floor(static_cast<double>(nrows) / step)) + 2;
  const auto lc = static_cast<Eigen::Index>(std::floor(static_cast<double>(ncols) / step)) + 2;
  Eigen::MatrixXd lattice(lr, lc);
  for (Eigen::Index i = 0; i < lr; ++i) {
    for (Eigen::Index j = 0; j < lc; ++j) lattice(i, j) = rng.uniform01();
  }
  RasterGrid out(nrows, ncols);
  for (Eigen::Index r = 0; r < nrows; ++r) {
    const double fr = static_cast<double>(r) / step;
    const auto i = static_cast<Eigen::Index>(fr);
    const double tr = smoothstep(fr - static_cast<double>(i));
    for (Eigen::Index c = 0; c < ncols; ++c) {
      const double fc = static_cast<double>(c) / step;
      const auto j = static_cast<Eigen::Index>(fc);
      const double tc = smoothstep(fc - static_cast<double>(j));
      const double top = lattice(i, j) + (lattice(i, j + 1) - lattice(i, j)) * tc;
      const double bottom = lattice(i + 1, j) + (lattice(i + 1, j + 1) - lattice(i + 1, j)) * tc;
      out(r, c) = top + (bottom - top) * tr;
    }
  }
  return out;
}

}  // namespace

RasterLayer gen_raster(std::uint64_t seed, Eigen::Index nrows, Eigen::Index ncols, const RasterParams& p) {
  if (nrows <= 0 || ncols <= 0) fail(ErrorKind::DimensionMismatch, "synthetic raster needs positive dimensions");
  SplitMix64 rng(seed);
  if (p.kind == LayerKind::Continuous) {
    RasterGrid v = value_noise(rng, nrows, ncols, p.correlation_cells);
    if (p.amplitude == 0.0) {
      v.setConstant(p.base);
    } else {
      v = (p.base + p.amplitude * v.array()).matrix();
    }
    return RasterLayer(std::move(v), p.xll, p.yll, p.cellsize, p.nodata);
  }

  if (p.legend.empty()) fail(ErrorKind::InvalidConfig, "categorical synthetic raster needs a legend");
  const int regions = std::max(1, p.regions);
  std::vector<std::array<double, 2>> seeds;
  std::vector<int> classes;
  for (int k = 0; k < regions; ++k) {
    seeds.push_back({rng.uniform01() * static_cast<double>(nrows), rng.uniform01() * static_cast<double>(ncols)});
    classes.push_back(p.legend[rng.below(p.legend.size())]);
  }
  RasterGrid v(nrows, ncols);
  for (Eigen::Index r = 0; r < nrows; ++r) {
    for (Eigen::Index c = 0; c < ncols; ++c) {
      double best = std::numeric_limits<double>::infinity();
      int cls = classes.front();
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        const double dr = static_cast<double>(r) + 0.5 - seeds[k][0];
        const double dc = static_cast<double>(c) + 0.5 - seeds[k][1];
        const double d = dr * dr + dc * dc;
        if (d < best) {
          best = d;
          cls = classes[k];
        }
      }
      v(r, c) = cls;
    }
  }
  RasterLayer layer(std::move(v), p.xll, p.yll, p.cellsize, p.nodata);
  layer.set_categorical(p.legend);
  return layer;
}

std::string random_name(SplitMix64& rng) {
  static constexpr std::array<const char*, 24> syllables{"ka", "bo", "lo", "me", "tsa", "ng", "ri", "mo",
                                                           "se", "di", "pha", "tu", "wa", "na", "go", "le",
                                                           "ku", "ra", "mbi", "si", "tho", "za", "ye", "fu"};
  static constexpr std::array<const char*, 4> suffixes{"Primary School", "Secondary School", "Junior School",
                                                        "Community School"};
  std::string name;
  for (int word = 0; word < 2; ++word) {
    std::string w;
    const std::size_t count = 2 + rng.below(2);
    for (std::size_t k = 0; k < count; ++k) w += syllables[rng.below(syllables.size())];
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    name += w + " ";
  }
  return name + suffixes[rng.below(suffixes.size())];
}

PlantedSchools gen_schools(const PlantSpec& spec, const RasterLayer& signal_layer) {
  if (!(spec.noise >= 0.0 && spec.noise < 0.5)) fail(ErrorKind::InvalidConfig, "label noise must be in [0, 0.5)");
  SplitMix64 where(derive_seed(spec.seed, 0)), flips(derive_seed(spec.seed, 1)), names(derive_seed(spec.seed, 2));
  PlantedSchools out;
  const BufferSpec buffer{spec.radius_m};
  for (std::size_t i = 0; i < spec.n_schools; ++i) {
    SchoolRecord s;
    char id[32];
    std::snprintf(id, sizeof id, "sch-%05zu", i);
    s.id = id;
    s.location = {where.uniform(spec.region.min_lon, spec.region.max_lon),
                  where.uniform(spec.region.min_lat, spec.region.max_lat)};
    s.name = random_name(names);
    const std::vector<double> values = extract_buffer_values(signal_layer, s.location, buffer);
    out.signal.push_back(continuous_stats(values).mean);
    out.schools.push_back(std::move(s));
  }
  if (spec.threshold) {
    out.threshold = *spec.threshold;
  } else if (!out.signal.empty()) {
    std::vector<double> sorted = out.signal;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    out.threshold = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
  }
  if (spec.margin > 0.0) {
    for (std::size_t i = 0; i < out.schools.size(); ++i) {
      for (int attempt = 0; std::abs(out.signal[i] - out.threshold) < spec.margin; ++attempt) {
        if (attempt == 10000) fail(ErrorKind::InvalidConfig, "margin leaves no room for school locations");
        out.schools[i].location = {where.uniform(spec.region.min_lon, spec.region.max_lon),
                                   where.uniform(spec.region.min_lat, spec.region.max_lat)};
        out.signal[i] = continuous_stats(extract_buffer_values(signal_layer, out.schools[i].location, buffer)).mean;
      }
    }
  }
  for (std::size_t i = 0; i < out.schools.size(); ++i) {
    const int rule = out.signal[i] > out.threshold ? 1 : 0;
    out.rule_labels.push_back(rule);
    const bool flip = flips.uniform01() < spec.noise;
    out.flipped += flip ? 1 : 0;
    out.schools[i].label = static_cast<Connectivity>(flip ? 1 - rule : rule);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kCorpusXll = 25.0, kCorpusYll = -24.4, kCorpusCell = 0.002;
constexpr Eigen::Index kCorpusCells = 200;
constexpr double kDesertLon = 25.32;  // no settlement east of this meridian

std::string tagged(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
  return buf;
}

SchoolRecord record(std::string id, std::string name, GeoPoint at, SplitMix64& rng) {
  SchoolRecord s;
  s.id = std::move(id);
  s.name = std::move(name);
  s.location = at;
  s.label = rng.below(2) ? Connectivity::Connected : Connectivity::Unconnected;
  return s;
}

void clear_desert(RasterLayer& layer, double fill) {
  RasterGrid v = layer.values();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (layer.pixel_center(r, c).lon >= kDesertLon) v(r, c) = fill;
    }
  }
  RasterLayer out(std::move(v), layer.xll(), layer.yll(), layer.cellsize(), layer.nodata());
  if (layer.kind() == LayerKind::Categorical) out.set_categorical(layer.legend());
  layer = std::move(out);
}

}  // namespace

CleaningCorpus gen_cleaning_corpus(const CorpusSpec& spec) {
  const std::size_t defects = spec.n_pairs + spec.n_chains + spec.n_names;
  if (defects > spec.n_base) fail(ErrorKind::InvalidConfig, "corpus needs at least one base record per defect");
  SplitMix64 rng(spec.seed);
  CleaningCorpus out;

  RasterParams fp;
  fp.xll = kCorpusXll;
  fp.yll = kCorpusYll;
  fp.cellsize = kCorpusCell;
  fp.base = 0.1;
  out.footprints = gen_raster(derive_seed(spec.seed, 10), kCorpusCells, kCorpusCells, fp);
  clear_desert(out.footprints, 0.0);
  RasterParams gp = fp;
  gp.kind = LayerKind::Categorical;
  gp.legend = ghsl_legend();
  out.ghsl = gen_raster(derive_seed(spec.seed, 11), kCorpusCells, kCorpusCells, gp);
  clear_desert(out.ghsl, out.ghsl.nodata());

  // Settled slots 0.02 deg apart, far beyond the 300 m name radius.
  std::vector<GeoPoint> slots;
  for (int i = 0; i < 15; ++i) {
    for (int j = 0; j < 19; ++j) slots.push_back({25.02 + 0.02 * i, -24.38 + 0.02 * j});
  }
  rng.shuffle(slots);
  if (spec.n_base + spec.n_keyword > slots.size()) fail(ErrorKind::InvalidConfig, "corpus too large");
  auto jitter = [&](GeoPoint p) {
    return GeoPoint{p.lon + rng.uniform(-0.002, 0.002), p.lat + rng.uniform(-0.002, 0.002)};
  };

  std::vector<SchoolRecord> bases;
  for (std::size_t i = 0; i < spec.n_base; ++i) {
    bases.push_back(record(tagged("b", i), random_name(rng), jitter(slots[i]), rng));
    out.survivor_ids.push_back(bases.back().id);
  }
  std::vector<SchoolRecord> extra;
  static constexpr std::array<const char*, 3> kKeywordNames{"Sunrise Nursery School", "Little Stars Kindergarten",
                                                           "Preschool Annex"};
  for (std::size_t i = 0; i < spec.n_keyword; ++i) {
    std::string name = i < kKeywordNames.size() ? std::string(kKeywordNames[i])
                                                : random_name(rng) + " Nursery";
    extra.push_back(record(tagged("k", i), name, jitter(slots[spec.n_base + i]), rng));
    out.keyword_ids.push_back(extra.back().id);
  }
  std::size_t b = 0;
  for (std::size_t i = 0; i < spec.n_pairs; ++i, ++b) {
    const GeoPoint at = destination(bases[b].location, rng.uniform(0.0, 360.0), 30.0);
    extra.push_back(record(tagged("p", i), random_name(rng), at, rng));
    out.proximity_ids.push_back(extra.back().id);
  }
  for (std::size_t i = 0; i < spec.n_chains; ++i, ++b) {
    const double bearing = rng.uniform(0.0, 360.0);
    const GeoPoint mid = destination(bases[b].location, bearing, 40.0);
    const GeoPoint end = destination(mid, bearing, 40.0);
    extra.push_back(record(tagged("c", i) + "-1", random_name(rng), mid, rng));
    out.proximity_ids.push_back(extra.back().id);
    extra.push_back(record(tagged("c", i) + "-2", random_name(rng), end, rng));
    out.proximity_ids.push_back(extra.back().id);
  }
  for (std::size_t i = 0; i < spec.n_names; ++i, ++b) {
    std::string name = bases[b].name;
    name.erase(1 + rng.below(name.size() - 1), 1);
    const GeoPoint at = destination(bases[b].location, rng.uniform(0.0, 360.0), 150.0);
    extra.push_back(record(tagged("n", i), name, at, rng));
    out.name_ids.push_back(extra.back().id);
  }
  for (std::size_t i = 0; i < spec.n_off; ++i) {
    const GeoPoint at{rng.uniform(25.34, 25.39), -24.38 + 0.02 * static_cast<double>(i % 19)};
    extra.push_back(record(tagged("o", i), random_name(rng), at, rng));
    out.settlement_ids.push_back(extra.back().id);
  }

  out.schools = std::move(bases);
  out.schools.insert(out.schools.end(), extra.begin(), extra.end());
  rng.shuffle(out.schools);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kXll = 25.0, kYll = -24.44, kCell = 0.002;
constexpr Eigen::Index kCells = 220;
constexpr double kDatasetDesertLon = 25.38;

nlohmann::json small_grid(const std::string& family) {
  if (family == "rf") return {{"n_estimators", {25, 50}}, {"max_depth", {6, nullptr}}};
  if (family == "gb") return {{"learning_rate", {0.1, 0.5}}, {"n_estimators", {30}}};
  if (family == "xgb") return {{"eta", {0.1, 0.2}}, {"max_depth", {3}}, {"subsample", {0.75, 1.0}}, {"n_estimators", {30}}};
  if (family == "logreg") return {{"penalty", {"l2"}}, {"C", {0.1, 1.0}}};
  if (family == "linsvm") return {{"C", {0.1, 1.0}}, {"epochs", {300}}};
  if (family == "mlp") return {{"hidden_size", {8}}, {"activation", {"tanh"}}, {"max_iter", {300}}};
  if (family == "tree") return {{"max_depth", {2, 4}}};
  fail(ErrorKind::InvalidConfig, "no synthetic grid for family '" + family + "'");
}

std::string label_of(const std::string& family) {
  if (family == "logreg") return "LR";
  if (family == "linsvm") return "SVM";
  std::string up = family;
  for (char& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return up;
}

}  // namespace

std::filesystem::path write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::uint64_t seed = spec.seed;
  RasterParams base;
  base.xll = kXll;
  base.yll = kYll;
  base.cellsize = kCell;

  auto continuous = [&](std::uint64_t stream, double b, double amp, int corr) {
    RasterParams p = base;
    p.base = b;
    p.amplitude = amp;
    p.correlation_cells = corr;
    return gen_raster(derive_seed(seed, stream), kCells, kCells, p);
  };
  auto categorical = [&](std::uint64_t stream, std::vector<int> legend, int regions) {
    RasterParams p = base;
    p.kind = LayerKind::Categorical;
    p.legend = std::move(legend);
    p.regions = regions;
    return gen_raster(derive_seed(seed, stream), kCells, kCells, p);
  };
  auto desert = [&](RasterLayer layer, double fill) {
    RasterGrid v = layer.values();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        if (layer.pixel_center(r, c).lon >= kDatasetDesertLon) v(r, c) = fill;
      }
    }
    RasterLayer out(std::move(v), layer.xll(), layer.yll(), layer.cellsize(), layer.nodata());
    if (layer.kind() == LayerKind::Categorical) out.set_categorical(layer.legend());
    return out;
  };

  const RasterLayer nightlight = continuous(1, 0.0, 10.0, 20);
  write_raster(nightlight, dir / "nightlight.asc");
  write_raster(categorical(2, modis_legend(), 30), dir / "modis.asc");
  const RasterLayer ghsl = categorical(3, ghsl_legend(), 40);
  write_raster(desert(ghsl, ghsl.nodata()), dir / "ghsl.asc");
  write_raster(desert(continuous(4, 0.1, 1.0, 6), 0.0), dir / "footprints.asc");
  write_raster(continuous(5, 0.0, 1.0, 10), dir / "ghm.asc");
  write_raster(continuous(6, 0.0, 500.0, 15), dir / "population.asc");
  const std::array<const char*, 4> groups{"male_primary", "female_primary", "male_secondary", "female_secondary"};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    write_raster(continuous(20 + g, 0.0, 100.0, 12), dir / (std::string("schoolpop_") + groups[g] + ".asc"));
  }

  SplitMix64 rng(derive_seed(seed, 30));
  PolyLineSet lines;
  for (int l = 0; l < 6; ++l) {
    std::vector<GeoPoint> line;
    for (int v = 0; v < 5; ++v) line.push_back({rng.uniform(25.02, 25.42), rng.uniform(-24.42, -24.02)});
    lines.lines.push_back(std::move(line));
  }
  csv::write_text_file(dir / "grid.geojson", write_geojson_text(lines));

  std::vector<OoklaTile> tiles;
  for (int t = 0; t < 150; ++t) {
    OoklaTile tile;
    tile.center = {rng.uniform(25.0, 25.44), rng.uniform(-24.44, -24.0)};
    tile.kind = t % 2 ? NetworkKind::Fixed : NetworkKind::Mobile;
    tile.avg_d_kbps = std::round(rng.uniform(500.0, 50000.0));
    tile.avg_u_kbps = std::round(rng.uniform(100.0, 20000.0));
    tile.avg_lat_ms = std::round(rng.uniform(10.0, 200.0));
    tile.tests = static_cast<double>(1 + rng.below(50));
    tile.devices = static_cast<double>(1 + rng.below(20));
    tiles.push_back(tile);
  }
  csv::write_text_file(dir / "ookla.geojson", write_geojson_text(tiles));

  PolygonSet zones;
  const double mid_lon = kXll + kCell * kCells / 2.0, mid_lat = kYll + kCell * kCells / 2.0;
  const double x1 = kXll + kCell * kCells, y1 = kYll + kCell * kCells;
  const std::array<std::array<double, 4>, 4> boxes{{{kXll, kYll, mid_lon, mid_lat},
                                                    {mid_lon, kYll, x1, mid_lat},
                                                    {kXll, mid_lat, mid_lon, y1},
                                                    {mid_lon, mid_lat, x1, y1}}};
  const std::array<const char*, 4> zone_names{"South-West", "South-East", "North-West", "North-East"};
  for (std::size_t z = 0; z < boxes.size(); ++z) {
    const auto& bb = boxes[z];
    zones.zones.push_back({zone_names[z], {{{bb[0], bb[1]}, {bb[2], bb[1]}, {bb[2], bb[3]}, {bb[0], bb[3]}, {bb[0], bb[1]}}}});
  }
  csv::write_text_file(dir / "admin.geojson", write_geojson_text(zones));

  PlantSpec plant;
  plant.n_schools = spec.n_schools;
  plant.region = {25.05, -24.39, 25.33, -24.05};
  plant.noise = spec.noise;
  plant.seed = derive_seed(seed, 40);
  PlantedSchools planted = gen_schools(plant, nightlight);
  std::vector<SchoolRecord> schools = planted.schools;
  SplitMix64 aux(derive_seed(seed, 41));
  for (auto& s : schools) {
    s.education_level = aux.below(2) ? "secondary" : "primary";
    s.cell_distances[CellTech::LTE] = std::round(aux.uniform(100.0, 20000.0));
    s.cell_distances[CellTech::UMTS] = std::round(aux.uniform(100.0, 20000.0));
    s.cell_distances[CellTech::GSM] = std::round(aux.uniform(100.0, 20000.0));
  }
  // A few records the cleaning cascade must drop.
  const std::size_t n_planted = schools.size();
  for (std::size_t i = 0; i < 3 && i < n_planted; ++i) {
    SchoolRecord dup = schools[i];
    dup.id += "-dup";
    dup.name = random_name(aux);
    dup.location = destination(dup.location, aux.uniform(0.0, 360.0), 30.0);
    schools.push_back(dup);
  }
  for (std::size_t i = 0; i < 2 && i < n_planted; ++i) {
    SchoolRecord nursery = schools[n_planted - 1 - i];
    nursery.id += "-n";
    nursery.name = "Bright Nursery " + std::to_string(i);
    nursery.location = destination(nursery.location, 90.0, 2000.0);
    schools.push_back(nursery);
  }
  for (std::size_t i = 0; i < 2 && i < n_planted; ++i) {
    SchoolRecord off = schools[i + 3];
    off.id += "-off";
    off.name = random_name(aux);
    off.location = {aux.uniform(25.40, 25.43), aux.uniform(-24.4, -24.05)};
    schools.push_back(off);
  }
  write_schools_csv(schools, dir / "schools.csv");

  using nlohmann::json;
  json features = json::array();
  features.push_back({{"type", "raster"}, {"name", "modis"}, {"path", "modis.asc"}, {"legend", "modis"},
                      {"stats", {"pct", "mode", "variance"}}});
  features.push_back({{"type", "raster"}, {"name", "population"}, {"path", "population.asc"},
                      {"stats", {"mean", "variance", "max", "min"}}});
  features.push_back({{"type", "raster"}, {"name", "nightlight"}, {"path", "nightlight.asc"},
                      {"stats", {"mean", "variance", "max", "min"}}});
  features.push_back({{"type", "raster"}, {"name", "ghsl"}, {"path", "ghsl.asc"}, {"legend", "ghsl"},
                      {"stats", {"pct", "mode", "variance"}}});
  features.push_back({{"type", "raster"}, {"name", "ghm"}, {"path", "ghm.asc"},
                      {"stats", {"mode", "variance", "mean", "max", "min"}}});
  features.push_back({{"type", "lines"}, {"name", "grid"}, {"path", "grid.geojson"}});
  features.push_back({{"type", "ookla"}, {"name", "ookla"}, {"path", "ookla.geojson"}});
  json pop_layers = json::array();
  for (const char* g : groups) pop_layers.push_back({{"label", g}, {"path", std::string("schoolpop_") + g + ".asc"}});
  features.push_back({{"type", "population"}, {"name", "schoolpop"}, {"auxiliary", true}, {"layers", pop_layers}});
  features.push_back({{"type", "admin"}, {"name", "admin"}, {"auxiliary", true}, {"path", "admin.geojson"}});

  json models = json::array();
  for (const std::string& family : spec.families) {
    models.push_back({{"label", label_of(family)}, {"family", family}, {"grid", small_grid(family)}, {"cv_folds", 5}});
  }
  json config{{"schools", "schools.csv"},
              {"output_dir", "out"},
              {"seed", seed},
              {"n_runs", spec.n_runs},
              {"buffer_radius_m", 1000.0},
              {"cleaning",
               {{"keywords", true},
                {"proximity", true},
                {"names", true},
                {"settlement", true},
                {"footprints", "footprints.asc"},
                {"ghsl", "ghsl.asc"}}},
              {"features", features},
              {"auxiliary", true},
              {"auxiliary_comparison", true},
              {"preprocess", {{"scale", true}, {"correlation_threshold", 0.9}}},
              {"split", {{"train", 0.7}, {"val", 0.15}, {"test", 0.15}}},
              {"models", models},
              {"importance", {{"permutation_repeats", 3}}}};
  if (!spec.radius_sweep.empty()) config["radius_sweep"] = spec.radius_sweep;
  const fs::path path = dir / "experiment.json";
  csv::write_text_file(path, config.dump(2) + "\n");
  return path;
}

}  // namespace schoolconn::synth
