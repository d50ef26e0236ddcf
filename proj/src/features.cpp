#include "schoolconn/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"

namespace schoolconn {

namespace {

struct PixelWindow {
  Eigen::Index row0, row1, col0, col1;  // inclusive
  bool empty() const { return row0 > row1 || col0 > col1; }
};

// Conservative row/column window containing every pixel centre within the radius.
PixelWindow buffer_window(const RasterLayer& raster, const GeoPoint& center, double radius_m) {
  const double cs = raster.cellsize();
  const double angular = radius_m / kEarthRadiusM;
  const double dlat = angular / kDegToRad;
  Eigen::Index row0 = static_cast<Eigen::Index>(std::floor((raster.ymax() - (center.lat + dlat)) / cs)) - 1;
  Eigen::Index row1 = static_cast<Eigen::Index>(std::floor((raster.ymax() - (center.lat - dlat)) / cs)) + 1;

  Eigen::Index col0 = 0, col1 = raster.ncols() - 1;
  const double coslat = std::cos(center.lat * kDegToRad);
  const double s = angular < kPi / 2 ? std::sin(angular) / coslat : 2.0;
  if (s < 1.0 && std::abs(center.lat) + dlat < 90.0) {
    const double dlon = std::asin(s) / kDegToRad;
    col0 = static_cast<Eigen::Index>(std::floor((center.lon - dlon - raster.xll()) / cs)) - 1;
    col1 = static_cast<Eigen::Index>(std::floor((center.lon + dlon - raster.xll()) / cs)) + 1;
  }
  return {std::max<Eigen::Index>(row0, 0), std::min(row1, raster.nrows() - 1),
          std::max<Eigen::Index>(col0, 0), std::min(col1, raster.ncols() - 1)};
}

template <typename Visit>
void visit_buffer(const RasterLayer& raster, const GeoPoint& center, const BufferSpec& spec, Visit&& visit) {
  if (!(spec.radius_m > 0.0)) fail(ErrorKind::InvalidConfig, "buffer radius must be positive");
  const PixelWindow w = buffer_window(raster, center, spec.radius_m);
  if (w.empty()) return;
  for (Eigen::Index r = w.row0; r <= w.row1; ++r) {
    for (Eigen::Index c = w.col0; c <= w.col1; ++c) {
      if (haversine_distance(center, raster.pixel_center(r, c)) <= spec.radius_m) visit(raster.at(r, c));
    }
  }
}

}  // namespace

std::vector<double> extract_buffer_values(const RasterLayer& raster, const GeoPoint& center,
                                          const BufferSpec& spec) {
  std::vector<double> out;
  visit_buffer(raster, center, spec, [&](double v) {
    if (!raster.is_nodata(v)) out.push_back(v);
  });
  if (out.empty()) fail(ErrorKind::EmptyBuffer, "no valid pixels within the buffer");
  return out;
}

double buffer_sum_or_zero(const RasterLayer& raster, const GeoPoint& center, const BufferSpec& spec) {
  double sum = 0.0;
  visit_buffer(raster, center, spec, [&](double v) {
    if (!raster.is_nodata(v)) sum += v;
  });
  return sum;
}

ContinuousStats continuous_stats(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::EmptyInput, "statistics of an empty sample");
  const Eigen::Map<const Eigen::ArrayXd> x(values.data(), static_cast<Eigen::Index>(values.size()));
  ContinuousStats s;
  s.sum = x.sum();
  s.mean = s.sum / static_cast<double>(x.size());
  s.variance = (x - s.mean).square().mean();
  s.max = x.maxCoeff();
  s.min = x.minCoeff();
  return s;
}

CategoricalStats categorical_stats(std::span<const double> values, std::span<const int> legend) {
  if (values.empty()) fail(ErrorKind::EmptyInput, "statistics of an empty sample");
  std::map<int, std::size_t> counts;
  for (int c : legend) counts[c] = 0;
  for (double v : values) {
    const double r = std::round(v);
    auto it = r == v ? counts.find(static_cast<int>(r)) : counts.end();
    if (it == counts.end()) {
      fail(ErrorKind::UnknownClass, "value " + csv::format_double(v) + " is not a legend class");
    }
    ++it->second;
  }
  CategoricalStats s;
  const double n = static_cast<double>(values.size());
  std::size_t best = 0;
  bool first = true;
  for (auto [cls, count] : counts) {
    s.pct[cls] = static_cast<double>(count) / n;
    if (first || count > best) {
      best = count;
      s.mode = cls;
      first = false;
    }
  }
  s.variance = continuous_stats(values).variance;
  return s;
}

double quantized_mode(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::EmptyInput, "mode of an empty sample");
  std::map<long long, std::size_t> counts;
  for (double v : values) ++counts[std::llround(v * 1000.0)];
  long long best_key = counts.begin()->first;
  std::size_t best = 0;
  for (auto [key, count] : counts) {
    if (count > best) {
      best = count;
      best_key = key;
    }
  }
  return static_cast<double>(best_key) / 1000.0;
}

double distance_to_nearest_line(const GeoPoint& p, const PolyLineSet& lines) {
  if (lines.empty()) fail(ErrorKind::EmptyLayer, "line layer has no lines");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& line : lines.lines) best = std::min(best, distance_to_polyline(p, line));
  return best;
}

TileFeatures nearest_tile_features(const GeoPoint& p, std::span<const OoklaTile> tiles, NetworkKind kind) {
  const OoklaTile* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const OoklaTile& t : tiles) {
    if (t.kind != kind) continue;
    const double d = haversine_distance(p, t.center);
    if (d < best) {
      best = d;
      nearest = &t;
    }
  }
  if (!nearest) fail(ErrorKind::EmptyLayer, std::string("no ") + to_string(kind) + " tiles");
  return {nearest->avg_d_kbps, nearest->avg_u_kbps, nearest->avg_lat_ms, nearest->tests, nearest->devices, best};
}

ContinuousStats population_zonal(const RasterLayer& raster, const GeoPoint& p, const BufferSpec& spec) {
  const auto values = extract_buffer_values(raster, p, spec);
  return continuous_stats(values);
}

namespace {

bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
  const double scale = std::max({std::abs(b.lon - a.lon), std::abs(b.lat - a.lat), 1e-300});
  if (std::abs(cross) > 1e-12 * scale) return false;
  return p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) &&
         p.lat >= std::min(a.lat, b.lat) && p.lat <= std::max(a.lat, b.lat);
}

}  // namespace

bool zone_contains(const Zone& zone, const GeoPoint& p) {
  bool inside = false;
  for (const Ring& ring : zone.rings) {
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const GeoPoint& a = ring[i];
      const GeoPoint& b = ring[j];
      if (on_segment(p, a, b)) return true;
      if ((a.lat > p.lat) != (b.lat > p.lat)) {
        const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
        if (p.lon < x) inside = !inside;
      }
    }
  }
  return inside;
}

std::vector<double> admin_one_hot(const GeoPoint& p, const PolygonSet& zones) {
  if (zones.empty()) fail(ErrorKind::EmptyLayer, "admin layer has no zones");
  std::vector<double> out(zones.zones.size(), 0.0);
  for (std::size_t z = 0; z < zones.zones.size(); ++z) {
    if (zone_contains(zones.zones[z], p)) {
      out[z] = 1.0;
      return out;
    }
  }
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < zones.zones.size(); ++z) {
    for (const Ring& ring : zones.zones[z].rings) {
      const double d = distance_to_polyline(p, ring);
      if (d < best) {
        best = d;
        nearest = z;
      }
    }
  }
  out[nearest] = 1.0;
  return out;
}

FeatureTable merge_embeddings_text(const FeatureTable& table, std::string_view embedding_csv, std::string_view source) {
  const csv::Document doc = csv::parse(embedding_csv, source, ErrorKind::DimensionMismatch);
  if (doc.header.size() < 2) fail(ErrorKind::DimensionMismatch, std::string(source) + ": no embedding columns");
  const std::size_t dim = doc.header.size() - 1;
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) by_id.emplace(doc.rows[r][0], r);

  Eigen::MatrixXd block(table.rows(), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    const std::string& id = table.ids()[static_cast<std::size_t>(i)];
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::MissingEmbedding, "no embedding for school '" + id + "'");
    const auto& row = doc.rows[it->second];
    for (std::size_t d = 0; d < dim; ++d) {
      block(i, static_cast<Eigen::Index>(d)) = csv::parse_double(row[d + 1], "embedding value");
    }
  }
  std::vector<std::string> names;
  for (std::size_t d = 0; d < dim; ++d) names.push_back("emb_" + std::to_string(d));
  return table.append_columns(names, block);
}

FeatureTable merge_embeddings(const FeatureTable& table, const std::filesystem::path& embedding_csv) {
  // csv::parse rejects ragged rows as ParseError; report them as a dimension problem.
  const std::string text = csv::read_text_file(embedding_csv);
  try {
    return merge_embeddings_text(table, text, embedding_csv.string());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw Error(ErrorKind::DimensionMismatch, e.what());
    throw;
  }
}

// ---------------------------------------------------------------------------

const char* to_string(Stat stat) noexcept {
  switch (stat) {
    case Stat::Mean: return "mean";
    case Stat::Variance: return "variance";
    case Stat::Max: return "max";
    case Stat::Min: return "min";
    case Stat::Mode: return "mode";
    case Stat::ClassPct: return "pct";
    case Stat::Sum: return "sum";
  }
  return "?";
}

Stat parse_stat(std::string_view name) {
  for (Stat s : {Stat::Mean, Stat::Variance, Stat::Max, Stat::Min, Stat::Mode, Stat::ClassPct, Stat::Sum}) {
    if (name == to_string(s)) return s;
  }
  fail(ErrorKind::InvalidConfig, "unknown statistic '" + std::string(name) + "'");
}

std::vector<int> modis_legend() {
  std::vector<int> legend(17);
  for (int i = 0; i < 17; ++i) legend[static_cast<std::size_t>(i)] = i + 1;
  return legend;
}

std::vector<int> ghsl_legend() { return {1, 2, 3, 4, 5, 11, 12, 13, 14, 15, 21, 22, 23, 24, 25}; }

void validate(const LayerConfig& cfg) {
  std::set<std::string> names;
  for (const FeatureSource& src : cfg.sources) {
    const std::string& name = std::visit([](const auto& s) -> const std::string& { return s.name; }, src);
    if (name.empty()) fail(ErrorKind::InvalidConfig, "feature source without a name");
    if (!names.insert(name).second) fail(ErrorKind::InvalidConfig, "duplicate feature source '" + name + "'");
    if (const auto* r = std::get_if<RasterSource>(&src)) {
      if (r->stats.empty()) fail(ErrorKind::InvalidConfig, "raster source '" + name + "' has no statistics");
      for (Stat s : r->stats) {
        if (s == Stat::ClassPct && r->layer.kind() != LayerKind::Categorical) {
          fail(ErrorKind::InvalidConfig,
               "class percentages requested on continuous layer '" + name + "'");
        }
      }
    } else if (const auto* p = std::get_if<PopulationSource>(&src)) {
      if (p->layers.empty()) fail(ErrorKind::InvalidConfig, "population source '" + name + "' has no rasters");
    }
  }
}

namespace {

constexpr CellTech kCellTechs[] = {CellTech::LTE, CellTech::UMTS, CellTech::GSM};
constexpr Stat kPopulationStats[] = {Stat::Sum, Stat::Mean, Stat::Min, Stat::Max, Stat::Variance};
constexpr const char* kTileFields[] = {"avg_d_kbps", "avg_u_kbps", "avg_lat_ms", "tests", "devices",
                                       "ookla_distance"};

struct AuxiliaryPlan {
  std::vector<std::string> education_levels;  // sorted; empty when not on every record
  std::vector<CellTech> cell_techs;
};

AuxiliaryPlan auxiliary_plan(const LayerConfig& cfg, const std::vector<SchoolRecord>& schools) {
  AuxiliaryPlan plan;
  if (!cfg.auxiliary || schools.empty()) return plan;
  const bool all_edu = std::all_of(schools.begin(), schools.end(),
                                   [](const SchoolRecord& s) { return s.education_level.has_value(); });
  if (all_edu) {
    std::set<std::string> levels;
    for (const auto& s : schools) levels.insert(*s.education_level);
    plan.education_levels.assign(levels.begin(), levels.end());
  }
  for (CellTech tech : kCellTechs) {
    if (std::all_of(schools.begin(), schools.end(),
                    [&](const SchoolRecord& s) { return s.cell_distances.count(tech) > 0; })) {
      plan.cell_techs.push_back(tech);
    }
  }
  return plan;
}

void append_source_columns(const FeatureSource& src, std::vector<std::string>& out) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RasterSource>) {
          for (Stat stat : s.stats) {
            if (stat == Stat::ClassPct) {
              for (int cls : s.layer.legend()) out.push_back(s.name + ".pct." + std::to_string(cls));
            } else {
              out.push_back(s.name + "." + to_string(stat));
            }
          }
        } else if constexpr (std::is_same_v<T, LineSource>) {
          out.push_back(s.name + ".distance");
        } else if constexpr (std::is_same_v<T, TileSource>) {
          for (NetworkKind kind : {NetworkKind::Mobile, NetworkKind::Fixed}) {
            for (const char* field : kTileFields) {
              out.push_back(s.name + "." + field + "_" + to_string(kind));
            }
          }
        } else if constexpr (std::is_same_v<T, PopulationSource>) {
          for (const auto& [label, layer] : s.layers) {
            for (Stat stat : kPopulationStats) out.push_back(s.name + "_" + label + "." + to_string(stat));
          }
        } else if constexpr (std::is_same_v<T, AdminSource>) {
          for (const Zone& z : s.zones.zones) out.push_back(s.name + ".zone." + z.id);
        }
      },
      src);
}

double stat_value(Stat stat, const RasterLayer& layer, const std::vector<double>& values,
                  const ContinuousStats& cs) {
  switch (stat) {
    case Stat::Mean: return cs.mean;
    case Stat::Variance: return cs.variance;
    case Stat::Max: return cs.max;
    case Stat::Min: return cs.min;
    case Stat::Sum: return cs.sum;
    case Stat::Mode:
      return layer.kind() == LayerKind::Categorical ? categorical_stats(values, layer.legend()).mode
                                                    : quantized_mode(values);
    case Stat::ClassPct: break;
  }
  return 0.0;
}

void append_source_row(const FeatureSource& src, const GeoPoint& p, const BufferSpec& spec,
                       std::vector<double>& row) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RasterSource>) {
          const auto values = extract_buffer_values(s.layer, p, spec);
          const ContinuousStats cs = continuous_stats(values);
          std::optional<CategoricalStats> cat;
          if (s.layer.kind() == LayerKind::Categorical) cat = categorical_stats(values, s.layer.legend());
          for (Stat stat : s.stats) {
            if (stat == Stat::ClassPct) {
              for (int cls : s.layer.legend()) row.push_back(cat->pct.at(cls));
            } else if (stat == Stat::Mode && cat) {
              row.push_back(cat->mode);
            } else {
              row.push_back(stat_value(stat, s.layer, values, cs));
            }
          }
        } else if constexpr (std::is_same_v<T, LineSource>) {
          row.push_back(distance_to_nearest_line(p, s.lines));
        } else if constexpr (std::is_same_v<T, TileSource>) {
          for (NetworkKind kind : {NetworkKind::Mobile, NetworkKind::Fixed}) {
            const TileFeatures f = nearest_tile_features(p, s.tiles, kind);
            row.insert(row.end(), {f.avg_d_kbps, f.avg_u_kbps, f.avg_lat_ms, f.tests, f.devices, f.distance_m});
          }
        } else if constexpr (std::is_same_v<T, PopulationSource>) {
          for (const auto& [label, layer] : s.layers) {
            const ContinuousStats cs = population_zonal(layer, p, spec);
            row.insert(row.end(), {cs.sum, cs.mean, cs.min, cs.max, cs.variance});
          }
        } else if constexpr (std::is_same_v<T, AdminSource>) {
          const auto hot = admin_one_hot(p, s.zones);
          row.insert(row.end(), hot.begin(), hot.end());
        }
      },
      src);
}

}  // namespace

std::vector<std::string> feature_columns(const LayerConfig& cfg, const std::vector<SchoolRecord>& schools) {
  std::vector<std::string> names;
  for (const FeatureSource& src : cfg.sources) append_source_columns(src, names);
  const AuxiliaryPlan aux = auxiliary_plan(cfg, schools);
  for (const auto& level : aux.education_levels) names.push_back("school.education_level." + level);
  for (CellTech tech : aux.cell_techs) names.push_back(std::string("school.dist_") + to_string(tech) + "_m");
  return names;
}

FeatureTable build_feature_table(const std::vector<SchoolRecord>& schools, const LayerConfig& cfg,
                                 const BufferSpec& spec) {
  validate(cfg);
  const std::vector<std::string> names = feature_columns(cfg, schools);
  const AuxiliaryPlan aux = auxiliary_plan(cfg, schools);
  const auto n = static_cast<Eigen::Index>(schools.size());
  Eigen::MatrixXd values(n, static_cast<Eigen::Index>(names.size()));
  std::vector<std::string> ids;
  ids.reserve(schools.size());
  std::vector<double> row;
  for (Eigen::Index i = 0; i < n; ++i) {
    const SchoolRecord& s = schools[static_cast<std::size_t>(i)];
    ids.push_back(s.id);
    row.clear();
    try {
      for (const FeatureSource& src : cfg.sources) append_source_row(src, s.location, spec, row);
    } catch (const Error& e) {
      throw e.annotated("school '" + s.id + "'");
    }
    for (const auto& level : aux.education_levels) row.push_back(*s.education_level == level ? 1.0 : 0.0);
    for (CellTech tech : aux.cell_techs) row.push_back(s.cell_distances.at(tech));
    values.row(i) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
  }

  std::optional<Eigen::VectorXi> labels;
  if (!schools.empty() &&
      std::all_of(schools.begin(), schools.end(), [](const SchoolRecord& s) { return s.label.has_value(); })) {
    labels = Eigen::VectorXi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      (*labels)(i) = *schools[static_cast<std::size_t>(i)].label == Connectivity::Connected ? 1 : 0;
    }
  }
  return FeatureTable(std::move(ids), names, std::move(values), std::move(labels));
}

}  // namespace schoolconn
