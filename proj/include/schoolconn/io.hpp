#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "schoolconn/geo.hpp"

namespace schoolconn {

// Schools CSV: id,name,lon,lat,label[,education_level,dist_lte_m,dist_umts_m,dist_gsm_m]
// label is yes / no / empty.
std::vector<SchoolRecord> parse_schools_csv_text(std::string_view text,
                                                 std::string_view source = "<memory>");
std::vector<SchoolRecord> parse_schools_csv(const std::filesystem::path& path);
std::string write_schools_csv_text(const std::vector<SchoolRecord>& schools);
void write_schools_csv(const std::vector<SchoolRecord>& schools, const std::filesystem::path& path);

using VectorLayer = std::variant<PolyLineSet, PolygonSet, std::vector<OoklaTile>>;

// The variant alternative is chosen from the geometry type of the features:
// (Multi)LineString, (Multi)Polygon, or Point (speed-test tiles).
VectorLayer parse_geojson_text(std::string_view text, std::string_view source = "<memory>");
VectorLayer parse_geojson(const std::filesystem::path& path);

PolyLineSet parse_polylines(const std::filesystem::path& path);
PolygonSet parse_polygons(const std::filesystem::path& path);
std::vector<OoklaTile> parse_ookla_tiles(const std::filesystem::path& path);

std::string write_geojson_text(const PolyLineSet& lines);
std::string write_geojson_text(const PolygonSet& zones);
std::string write_geojson_text(const std::vector<OoklaTile>& tiles);

}  // namespace schoolconn
