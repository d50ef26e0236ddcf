#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "schoolconn/geo.hpp"
#include "schoolconn/io.hpp"
#include "schoolconn/raster.hpp"
#include "support.hpp"

using namespace schoolconn;

namespace {

// Independent planar oracle: project onto the tangent plane at p and
// clamp the foot of the perpendicular.
double planar_oracle(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double k = std::cos(p.lat * kDegToRad);
  const double ax = (a.lon - p.lon) * k, ay = a.lat - p.lat;
  const double bx = (b.lon - p.lon) * k, by = b.lat - p.lat;
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? -(ax * dx + ay * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double x = ax + t * dx, y = ay + t * dy;
  return std::hypot(x, y) * kMetersPerDegree;
}

// Dense sampling of the great-circle distance along a lon/lat segment.
double sampled_oracle(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b, int steps = 4000) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    best = std::min(best, haversine_distance(p, {a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat)}));
  }
  return best;
}

}  // namespace

TEST_CASE("haversine closed forms") {
  CHECK(haversine_distance({0, 0}, {0, 0}) == 0.0);
  CHECK(haversine_distance({0, 0}, {1, 0}) == doctest::Approx(2 * kPi * kEarthRadiusM / 360).epsilon(1e-12));
  CHECK(std::abs(haversine_distance({0, 0}, {1, 0}) - 111195.08) < 0.01);
  CHECK(std::abs(haversine_distance({0, 0}, {180, 0}) - 20015114.4) < 1.0);
  CHECK(std::abs(haversine_distance({0, 0}, {180, 0}) - kPi * kEarthRadiusM) < 1e-6);
}

TEST_CASE("haversine symmetry and triangle inequality on random triples") {
  SplitMix64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    GeoPoint p{rng.uniform(-180, 180), rng.uniform(-90, 90)};
    GeoPoint q{rng.uniform(-180, 180), rng.uniform(-90, 90)};
    GeoPoint r{rng.uniform(-180, 180), rng.uniform(-90, 90)};
    const double pq = haversine_distance(p, q), qp = haversine_distance(q, p);
    CHECK(pq == qp);
    CHECK(pq >= 0.0);
    const double pr = haversine_distance(p, r), rq = haversine_distance(r, q);
    CHECK(pq <= (pr + rq) * (1 + 1e-6) + 1e-6);
  }
}

TEST_CASE("destination inverts haversine distance") {
  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    GeoPoint p{rng.uniform(-170, 170), rng.uniform(-60, 60)};
    const double d = rng.uniform(1, 50000);
    CHECK(haversine_distance(p, destination(p, rng.uniform(0, 360), d)) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("coordinate validation") {
  CHECK_ERROR_KIND(GeoPoint::checked(0, 95), ErrorKind::InvalidCoordinate);
  CHECK_ERROR_KIND(GeoPoint::checked(181, 0), ErrorKind::InvalidCoordinate);
  CHECK_ERROR_KIND(GeoPoint::checked(std::nan(""), 0), ErrorKind::InvalidCoordinate);
  CHECK(GeoPoint::checked(-180, 90) == GeoPoint{-180, 90});
}

TEST_CASE("point to segment distance examples") {
  CHECK(std::abs(point_segment_distance({0, 0.001}, {-1, 0}, {1, 0}) - 111.195) < 0.01);
  CHECK(point_segment_distance({0.3, 0}, {-1, 0}, {1, 0}) == doctest::Approx(0.0));
  CHECK(point_segment_distance({-1, 0}, {-1, 0}, {1, 0}) == 0.0);
  CHECK(point_segment_distance({2, 0}, {-1, 0}, {1, 0}) == haversine_distance({2, 0}, {1, 0}));
  CHECK_ERROR_KIND(point_segment_distance({0, 0}, {6, 0}, {7, 0}), ErrorKind::LocalityViolation);
}

TEST_CASE("point to segment distance against planar and sampled oracles") {
  SplitMix64 rng(5);
  for (int i = 0; i < 500; ++i) {
    GeoPoint p{rng.uniform(-170, 170), rng.uniform(-60, 60)};
    GeoPoint a{p.lon + rng.uniform(-0.05, 0.05), p.lat + rng.uniform(-0.05, 0.05)};
    GeoPoint b{p.lon + rng.uniform(-0.05, 0.05), p.lat + rng.uniform(-0.05, 0.05)};
    const double d = point_segment_distance(p, a, b);
    const double endpoint_min = std::min(haversine_distance(p, a), haversine_distance(p, b));
    CHECK(d <= endpoint_min + 0.01);
    CHECK(d == doctest::Approx(planar_oracle(p, a, b)).epsilon(5e-3));
    CHECK(std::abs(d - sampled_oracle(p, a, b)) <= 5e-3 * d + 3.0);
  }
}

TEST_CASE("polyline distance equals the exhaustive segment scan") {
  SplitMix64 rng(17);
  for (int set = 0; set < 100; ++set) {
    GeoPoint p{rng.uniform(-170, 170), rng.uniform(-60, 60)};
    std::vector<GeoPoint> line;
    const int n = 2 + static_cast<int>(rng.below(8));
    for (int k = 0; k < n; ++k) line.push_back({p.lon + rng.uniform(-2, 2), p.lat + rng.uniform(-2, 2)});
    double brute = std::numeric_limits<double>::infinity();
    for (int k = 0; k + 1 < n; ++k) brute = std::min(brute, point_segment_distance(p, line[k], line[k + 1]));
    CHECK(distance_to_polyline(p, line) == brute);
  }
}

TEST_CASE("raster parsing") {
  const auto r = parse_raster_text("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n");
  REQUIRE(r.nrows() == 2);
  REQUIRE(r.ncols() == 2);
  CHECK(std::vector<double>(r.values().data(), r.values().data() + 4) == std::vector<double>{1, 2, 3, 4});
  CHECK(r.pixel_center(0, 0) == GeoPoint{0.5, 1.5});

  CHECK_ERROR_KIND(parse_raster_text("ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n"
                                     "1 2 3 4 5 6 7 8\n"),
                   ErrorKind::DimensionMismatch);

  const auto nd = parse_raster_text("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n5 -9999\n");
  CHECK_FALSE(nd.is_nodata(nd.at(0, 0)));
  CHECK(nd.is_nodata(nd.at(0, 1)));

  const auto msg = testing::error_message(
      [] { parse_raster_text("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize abc\nNODATA_value -9999\n1 2\n"); });
  CHECK(msg.find("<memory>:5:") != std::string::npos);
}

TEST_CASE("raster write then parse is bit exact") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = testing::random_raster(seed, 7, 9, -3.125, 12.5, 0.0083333333333, -1e6, 1e6);
    const auto back = parse_raster_text(write_raster_text(r));
    CHECK(back.values() == r.values());
    CHECK(back.xll() == r.xll());
    CHECK(back.yll() == r.yll());
    CHECK(back.cellsize() == r.cellsize());
    CHECK(back.nodata() == r.nodata());
  }
  const auto dir = testing::scratch_dir("raster_rt");
  auto r = testing::random_raster(42, 4, 3, 0, 0, 0.5);
  write_raster(r, dir / "r.asc");
  CHECK(parse_raster(dir / "r.asc").values() == r.values());
  CHECK_ERROR_KIND(parse_raster(dir / "missing.asc"), ErrorKind::IoError);
}

TEST_CASE("categorical legend enforcement") {
  auto r = parse_raster_text("ncols 3\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 -9999\n");
  r.set_categorical({1, 2, 3});
  CHECK(r.kind() == LayerKind::Categorical);
  auto bad = r;
  CHECK_ERROR_KIND(bad.set_categorical({1}), ErrorKind::UnknownClass);
}

TEST_CASE("schools csv") {
  const auto rows = parse_schools_csv_text("id,name,lon,lat,label\ns1,Alpha School,30.1,-1.95,yes\ns2,Beta,30.2,-1.9,no\n"
                                           "s3,Gamma,30.3,-1.8,\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].id == "s1");
  CHECK(rows[0].name == "Alpha School");
  CHECK(rows[0].location == GeoPoint{30.1, -1.95});
  CHECK(rows[0].label == Connectivity::Connected);
  CHECK(rows[1].label == Connectivity::Unconnected);
  CHECK_FALSE(rows[2].label.has_value());

  CHECK_ERROR_KIND(parse_schools_csv_text("id,name,lon,lat,label\ns1,A,30,95,yes\n"), ErrorKind::InvalidCoordinate);
  CHECK_ERROR_KIND(parse_schools_csv_text("id,name,lon,label\ns1,A,30,yes\n"), ErrorKind::MissingColumn);
  CHECK_ERROR_KIND(parse_schools_csv_text("id,name,lon,lat,label\ns1,A,x,1,yes\n"), ErrorKind::ParseError);

  const auto full = parse_schools_csv_text(
      "id,name,lon,lat,label,education_level,dist_lte_m,dist_umts_m,dist_gsm_m\n"
      "s1,\"Alpha, School\",30.1,-1.95,yes,primary,120.5,300,900\n");
  REQUIRE(full.size() == 1);
  CHECK(full[0].name == "Alpha, School");
  CHECK(full[0].education_level == "primary");
  CHECK(full[0].cell_distances.at(CellTech::LTE) == 120.5);
  CHECK(parse_schools_csv_text(write_schools_csv_text(full))[0].cell_distances == full[0].cell_distances);
}

TEST_CASE("geojson layers") {
  const auto v = parse_geojson_text(R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{},"geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]})");
  REQUIRE(std::holds_alternative<PolyLineSet>(v));
  const auto& lines = std::get<PolyLineSet>(v);
  REQUIRE(lines.lines.size() == 1);
  CHECK(lines.lines[0].size() == 2);

  const auto tiles = parse_geojson_text(R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"kind":"fixed","avg_d_kbps":10,"avg_u_kbps":5,"avg_lat_ms":30,"tests":4,"devices":2},
     "geometry":{"type":"Point","coordinates":[30,-2]}}]})");
  REQUIRE(std::holds_alternative<std::vector<OoklaTile>>(tiles));
  const auto& t = std::get<std::vector<OoklaTile>>(tiles)[0];
  CHECK(t.kind == NetworkKind::Fixed);
  CHECK(t.avg_d_kbps == 10);
  CHECK(t.devices == 2);

  PolygonSet zones;
  zones.zones.push_back({"A", {{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}}});
  const auto back = parse_geojson_text(write_geojson_text(zones));
  REQUIRE(std::holds_alternative<PolygonSet>(back));
  CHECK(std::get<PolygonSet>(back).zones[0].id == "A");
  CHECK(std::get<PolygonSet>(back).zones[0].rings == zones.zones[0].rings);

  CHECK_ERROR_KIND(parse_geojson_text("{not json"), ErrorKind::ParseError);
  CHECK_ERROR_KIND(parse_geojson_text(R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{},"geometry":{"type":"LineString","coordinates":[[0,0]]}}]})"),
                   ErrorKind::ParseError);
}
