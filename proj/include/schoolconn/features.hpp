#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "schoolconn/feature_table.hpp"
#include "schoolconn/geo.hpp"
#include "schoolconn/raster.hpp"

namespace schoolconn {

struct BufferSpec {
  double radius_m = 1000.0;
};

/// Values of every non-nodata pixel whose centre lies within radius_m
/// (great-circle) of `center`, in row-major order. Throws EmptyBuffer.
std::vector<double> extract_buffer_values(const RasterLayer& raster, const GeoPoint& center,
                                          const BufferSpec& spec);

/// Sum of buffer pixels with nodata counted as zero; an empty buffer sums to zero.
double buffer_sum_or_zero(const RasterLayer& raster, const GeoPoint& center, const BufferSpec& spec);

struct ContinuousStats {
  double mean = 0.0;
  double variance = 0.0;  // population
  double max = 0.0;
  double min = 0.0;
  double sum = 0.0;
};

ContinuousStats continuous_stats(std::span<const double> values);

struct CategoricalStats {
  std::map<int, double> pct;  // every legend class, absent ones are 0
  int mode = 0;               // ties -> smallest class id
  double variance = 0.0;      // population variance of the raw codes
};

CategoricalStats categorical_stats(std::span<const double> values, std::span<const int> legend);

/// Most frequent value after rounding to 3 decimals; ties -> smallest value.
double quantized_mode(std::span<const double> values);

double distance_to_nearest_line(const GeoPoint& p, const PolyLineSet& lines);

struct TileFeatures {
  double avg_d_kbps = 0.0;
  double avg_u_kbps = 0.0;
  double avg_lat_ms = 0.0;
  double tests = 0.0;
  double devices = 0.0;
  double distance_m = 0.0;
};

TileFeatures nearest_tile_features(const GeoPoint& p, std::span<const OoklaTile> tiles, NetworkKind kind);

ContinuousStats population_zonal(const RasterLayer& raster, const GeoPoint& p, const BufferSpec& spec);

/// Even-odd containment over all rings; points on a ring edge count as inside.
bool zone_contains(const Zone& zone, const GeoPoint& p);

/// One-hot vector over zones (in PolygonSet order). Falls back to the zone
/// with the nearest boundary when no zone contains p.
std::vector<double> admin_one_hot(const GeoPoint& p, const PolygonSet& zones);

/// Appends emb_0..emb_{d-1} from a CSV whose first column is the school id.
FeatureTable merge_embeddings_text(const FeatureTable& table, std::string_view embedding_csv,
                              std::string_view source = "<memory>");
FeatureTable merge_embeddings(const FeatureTable& table, const std::filesystem::path& embedding_csv);

// ---------------------------------------------------------------------------
// Feature plan

enum class Stat { Mean, Variance, Max, Min, Mode, ClassPct, Sum };

const char* to_string(Stat stat) noexcept;
Stat parse_stat(std::string_view name);

struct RasterSource {
  std::string name;
  RasterLayer layer;
  std::vector<Stat> stats;
};

struct LineSource {
  std::string name;
  PolyLineSet lines;
};

struct TileSource {
  std::string name;
  std::vector<OoklaTile> tiles;
};

// Sex- and level-disaggregated school-age population rasters, e.g.
// {"male_primary", raster}, {"female_secondary", raster}.
struct PopulationSource {
  std::string name;
  std::vector<std::pair<std::string, RasterLayer>> layers;
};

struct AdminSource {
  std::string name;
  PolygonSet zones;
};

using FeatureSource = std::variant<RasterSource, LineSource, TileSource, PopulationSource, AdminSource>;

struct LayerConfig {
  std::vector<FeatureSource> sources;
  bool auxiliary = true;  // education level and cell-tower distances when present on every record
};

/// Throws InvalidConfig when a stat plan is illegal for its layer.
void validate(const LayerConfig& cfg);

/// Column names in the exact order build_feature_table emits them.
std::vector<std::string> feature_columns(const LayerConfig& cfg, const std::vector<SchoolRecord>& schools);

FeatureTable build_feature_table(const std::vector<SchoolRecord>& schools, const LayerConfig& cfg,
                                 const BufferSpec& spec);

// MODIS LC_Type1 classes 1..17 and GHSL built-C classes.
std::vector<int> modis_legend();
std::vector<int> ghsl_legend();

}  // namespace schoolconn
