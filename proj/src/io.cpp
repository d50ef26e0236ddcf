#include "schoolconn/io.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>
#include <sstream>

#include "schoolconn/csv.hpp"
#include "schoolconn/error.hpp"

namespace schoolconn {

using nlohmann::json;

namespace {

std::string trim_lower(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string at_line(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

constexpr CellTech kCellTechs[] = {CellTech::LTE, CellTech::UMTS, CellTech::GSM};

std::string cell_column(CellTech tech) { return std::string("dist_") + to_string(tech) + "_m"; }

}  // namespace

std::vector<SchoolRecord> parse_schools_csv_text(std::string_view text, std::string_view source) {
  const csv::Document doc = csv::parse(text, source);
  std::size_t id_col, name_col, lon_col, lat_col, label_col;
  try {
    id_col = doc.require_column("id");
    name_col = doc.require_column("name");
    lon_col = doc.require_column("lon");
    lat_col = doc.require_column("lat");
    label_col = doc.require_column("label");
  } catch (const Error& e) {
    throw e.annotated(source);
  }
  const auto edu_col = doc.column("education_level");
  std::vector<std::pair<CellTech, std::size_t>> cell_cols;
  for (CellTech tech : kCellTechs) {
    if (auto c = doc.column(cell_column(tech))) cell_cols.emplace_back(tech, *c);
  }

  std::vector<SchoolRecord> schools;
  schools.reserve(doc.rows.size());
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    const std::string where = at_line(source, doc.line_numbers[r]);
    SchoolRecord s;
    s.id = row[id_col];
    if (s.id.empty()) fail(ErrorKind::ParseError, where + "empty school id");
    s.name = row[name_col];
    double lon, lat;
    try {
      lon = csv::parse_double(row[lon_col], "lon");
      lat = csv::parse_double(row[lat_col], "lat");
      s.location = GeoPoint::checked(lon, lat);
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
    const std::string label = trim_lower(row[label_col]);
    if (label == "yes") {
      s.label = Connectivity::Connected;
    } else if (label == "no") {
      s.label = Connectivity::Unconnected;
    } else if (!label.empty()) {
      fail(ErrorKind::ParseError, where + "label must be yes, no or empty, got '" + row[label_col] + "'");
    }
    if (edu_col && !row[*edu_col].empty()) s.education_level = row[*edu_col];
    for (auto [tech, col] : cell_cols) {
      if (row[col].empty()) continue;
      try {
        double d = csv::parse_double(row[col], cell_column(tech));
        if (!(d >= 0.0) || !std::isfinite(d)) {
          fail(ErrorKind::ParseError, cell_column(tech) + " must be a nonnegative distance");
        }
        s.cell_distances[tech] = d;
      } catch (const Error& e) {
        fail(e.kind(), where + e.what());
      }
    }
    schools.push_back(std::move(s));
  }
  return schools;
}

std::vector<SchoolRecord> parse_schools_csv(const std::filesystem::path& path) {
  return parse_schools_csv_text(csv::read_text_file(path), path.string());
}

std::string write_schools_csv_text(const std::vector<SchoolRecord>& schools) {
  const bool has_edu = std::any_of(schools.begin(), schools.end(),
                                   [](const SchoolRecord& s) { return s.education_level.has_value(); });
  const bool has_cells = std::any_of(schools.begin(), schools.end(),
                                     [](const SchoolRecord& s) { return !s.cell_distances.empty(); });
  std::ostringstream out;
  std::vector<std::string> header = {"id", "name", "lon", "lat", "label"};
  if (has_edu || has_cells) header.push_back("education_level");
  if (has_cells) {
    for (CellTech tech : kCellTechs) header.push_back(cell_column(tech));
  }
  csv::write_row(out, header);
  for (const SchoolRecord& s : schools) {
    std::vector<std::string> row = {s.id, s.name, csv::format_double(s.location.lon),
                                    csv::format_double(s.location.lat),
                                    !s.label ? "" : (*s.label == Connectivity::Connected ? "yes" : "no")};
    if (has_edu || has_cells) row.push_back(s.education_level.value_or(""));
    if (has_cells) {
      for (CellTech tech : kCellTechs) {
        auto it = s.cell_distances.find(tech);
        row.push_back(it == s.cell_distances.end() ? "" : csv::format_double(it->second));
      }
    }
    csv::write_row(out, row);
  }
  return out.str();
}

void write_schools_csv(const std::vector<SchoolRecord>& schools, const std::filesystem::path& path) {
  csv::write_text_file(path, write_schools_csv_text(schools));
}

// ---------------------------------------------------------------------------
// GeoJSON

namespace {

[[noreturn]] void geojson_error(std::string_view source, const std::string& msg) {
  fail(ErrorKind::ParseError, std::string(source) + ": " + msg);
}

GeoPoint position(const json& coord, std::string_view source) {
  if (!coord.is_array() || coord.size() < 2 || !coord[0].is_number() || !coord[1].is_number()) {
    geojson_error(source, "invalid position");
  }
  try {
    return GeoPoint::checked(coord[0].get<double>(), coord[1].get<double>());
  } catch (const Error& e) {
    throw e.annotated(source);
  }
}

std::vector<GeoPoint> positions(const json& coords, std::string_view source) {
  if (!coords.is_array()) geojson_error(source, "coordinates must be an array");
  std::vector<GeoPoint> pts;
  pts.reserve(coords.size());
  for (const json& c : coords) pts.push_back(position(c, source));
  return pts;
}

std::vector<GeoPoint> line_string(const json& coords, std::string_view source) {
  auto pts = positions(coords, source);
  if (pts.size() < 2) geojson_error(source, "LineString needs at least 2 positions");
  return pts;
}

std::vector<Ring> polygon_rings(const json& coords, std::string_view source) {
  if (!coords.is_array() || coords.empty()) geojson_error(source, "Polygon needs at least one ring");
  std::vector<Ring> rings;
  for (const json& r : coords) {
    Ring ring = positions(r, source);
    if (ring.size() < 4 || !(ring.front() == ring.back())) {
      geojson_error(source, "polygon rings must be closed with at least 4 positions");
    }
    rings.push_back(std::move(ring));
  }
  return rings;
}

std::string zone_id_of(const json& feature, std::size_t index) {
  const json* props = feature.contains("properties") && feature["properties"].is_object()
                          ? &feature["properties"]
                          : nullptr;
  for (const char* key : {"zone_id", "shapeID", "shapeName", "id"}) {
    if (props && props->contains(key)) {
      const json& v = (*props)[key];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number()) return v.dump();
    }
  }
  if (feature.contains("id")) {
    const json& v = feature["id"];
    return v.is_string() ? v.get<std::string>() : v.dump();
  }
  return "zone_" + std::to_string(index);
}

double tile_number(const json& props, const char* key, std::string_view source) {
  if (!props.contains(key) || !props[key].is_number()) {
    fail(ErrorKind::MissingColumn, std::string(source) + ": tile property '" + key + "' missing");
  }
  double v = props[key].get<double>();
  if (!(v >= 0.0) || !std::isfinite(v)) {
    geojson_error(source, std::string("tile property '") + key + "' must be nonnegative");
  }
  return v;
}

enum class GeomClass { Lines, Polygons, Points };

GeomClass classify(const std::string& type, std::string_view source) {
  if (type == "LineString" || type == "MultiLineString") return GeomClass::Lines;
  if (type == "Polygon" || type == "MultiPolygon") return GeomClass::Polygons;
  if (type == "Point") return GeomClass::Points;
  geojson_error(source, "unsupported geometry type '" + type + "'");
}

}  // namespace

VectorLayer parse_geojson_text(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    geojson_error(source, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    geojson_error(source, "expected a FeatureCollection");
  }
  const json& features = doc["features"];
  if (features.empty()) geojson_error(source, "FeatureCollection has no features");

  std::optional<GeomClass> cls;
  PolyLineSet lines;
  PolygonSet zones;
  std::vector<OoklaTile> tiles;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const json& f = features[i];
    if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) {
      geojson_error(source, "feature " + std::to_string(i) + " has no geometry");
    }
    const json& geom = f["geometry"];
    const std::string type = geom.value("type", "");
    if (!geom.contains("coordinates")) geojson_error(source, "geometry without coordinates");
    const json& coords = geom["coordinates"];
    GeomClass c = classify(type, source);
    if (cls && *cls != c) geojson_error(source, "mixed geometry classes in one FeatureCollection");
    cls = c;

    switch (c) {
      case GeomClass::Lines:
        if (type == "LineString") {
          lines.lines.push_back(line_string(coords, source));
        } else {
          if (!coords.is_array()) geojson_error(source, "MultiLineString coordinates must be an array");
          for (const json& part : coords) lines.lines.push_back(line_string(part, source));
        }
        break;
      case GeomClass::Polygons: {
        std::vector<Ring> rings;
        if (type == "Polygon") {
          rings = polygon_rings(coords, source);
        } else {
          if (!coords.is_array()) geojson_error(source, "MultiPolygon coordinates must be an array");
          for (const json& part : coords) {
            auto pr = polygon_rings(part, source);
            rings.insert(rings.end(), pr.begin(), pr.end());
          }
        }
        std::string id = zone_id_of(f, i);
        auto it = std::find_if(zones.zones.begin(), zones.zones.end(),
                               [&](const Zone& z) { return z.id == id; });
        if (it == zones.zones.end()) {
          zones.zones.push_back(Zone{std::move(id), std::move(rings)});
        } else {
          it->rings.insert(it->rings.end(), rings.begin(), rings.end());
        }
        break;
      }
      case GeomClass::Points: {
        OoklaTile t;
        t.center = position(coords, source);
        const json props = f.contains("properties") && f["properties"].is_object() ? f["properties"]
                                                                                  : json::object();
        const std::string kind = props.value("kind", "");
        if (kind == "mobile") {
          t.kind = NetworkKind::Mobile;
        } else if (kind == "fixed") {
          t.kind = NetworkKind::Fixed;
        } else {
          geojson_error(source, "tile kind must be 'mobile' or 'fixed'");
        }
        t.avg_d_kbps = tile_number(props, "avg_d_kbps", source);
        t.avg_u_kbps = tile_number(props, "avg_u_kbps", source);
        t.avg_lat_ms = tile_number(props, "avg_lat_ms", source);
        t.tests = tile_number(props, "tests", source);
        t.devices = tile_number(props, "devices", source);
        tiles.push_back(t);
        break;
      }
    }
  }
  switch (*cls) {
    case GeomClass::Lines: return lines;
    case GeomClass::Polygons: return zones;
    case GeomClass::Points: return tiles;
  }
  return lines;
}

VectorLayer parse_geojson(const std::filesystem::path& path) {
  return parse_geojson_text(csv::read_text_file(path), path.string());
}

namespace {

template <typename T>
T expect_layer(const std::filesystem::path& path, const char* what) {
  VectorLayer layer = parse_geojson(path);
  if (auto* v = std::get_if<T>(&layer)) return std::move(*v);
  fail(ErrorKind::ParseError, path.string() + ": expected " + what + " features");
}

json coord(const GeoPoint& p) { return json::array({p.lon, p.lat}); }

json coords(const std::vector<GeoPoint>& pts) {
  json arr = json::array();
  for (const GeoPoint& p : pts) arr.push_back(coord(p));
  return arr;
}

json collection(json features) {
  return json{{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace

PolyLineSet parse_polylines(const std::filesystem::path& path) {
  return expect_layer<PolyLineSet>(path, "LineString");
}

PolygonSet parse_polygons(const std::filesystem::path& path) {
  return expect_layer<PolygonSet>(path, "Polygon");
}

std::vector<OoklaTile> parse_ookla_tiles(const std::filesystem::path& path) {
  return expect_layer<std::vector<OoklaTile>>(path, "Point");
}

std::string write_geojson_text(const PolyLineSet& lines) {
  json features = json::array();
  for (const auto& line : lines.lines) {
    features.push_back({{"type", "Feature"},
                        {"properties", json::object()},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords(line)}}}});
  }
  return collection(std::move(features)).dump() + "\n";
}

std::string write_geojson_text(const PolygonSet& zones) {
  json features = json::array();
  for (const Zone& z : zones.zones) {
    json rings = json::array();
    for (const Ring& r : z.rings) rings.push_back(coords(r));
    // Rings are emitted as one Polygon; holes and disjoint parts both
    // survive a round trip because containment is even-odd.
    features.push_back({{"type", "Feature"},
                        {"properties", {{"zone_id", z.id}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", std::move(rings)}}}});
  }
  return collection(std::move(features)).dump() + "\n";
}

std::string write_geojson_text(const std::vector<OoklaTile>& tiles) {
  json features = json::array();
  for (const OoklaTile& t : tiles) {
    features.push_back({{"type", "Feature"},
                        {"properties",
                         {{"kind", to_string(t.kind)},
                          {"avg_d_kbps", t.avg_d_kbps},
                          {"avg_u_kbps", t.avg_u_kbps},
                          {"avg_lat_ms", t.avg_lat_ms},
                          {"tests", t.tests},
                          {"devices", t.devices}}},
                        {"geometry", {{"type", "Point"}, {"coordinates", coord(t.center)}}}});
  }
  return collection(std::move(features)).dump() + "\n";
}

}  // namespace schoolconn
