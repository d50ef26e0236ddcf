#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "schoolconn/features.hpp"
#include "schoolconn/geo.hpp"
#include "support.hpp"

using namespace schoolconn;

namespace {

// Every pixel of the raster is visited; no window arithmetic.
std::vector<double> exhaustive_buffer(const RasterLayer& r, const GeoPoint& c, double radius) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < r.nrows(); ++i)
    for (Eigen::Index j = 0; j < r.ncols(); ++j)
      if (haversine_distance(c, r.pixel_center(i, j)) <= radius && !r.is_nodata(r.at(i, j))) out.push_back(r.at(i, j));
  return out;
}

struct Moments {
  long double sum = 0, mean = 0, var = 0, min = 0, max = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.sum += x;
  m.mean = m.sum / v.size();
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= v.size();
  m.min = *std::min_element(v.begin(), v.end());
  m.max = *std::max_element(v.begin(), v.end());
  return m;
}

RasterLayer constant_raster(double v, Eigen::Index rows, Eigen::Index cols, double xll, double yll, double cs) {
  return RasterLayer(RasterGrid::Constant(rows, cols, v), xll, yll, cs, -9999.0);
}

SchoolRecord school(std::string id, double lon, double lat) {
  SchoolRecord s;
  s.id = std::move(id);
  s.name = s.id;
  s.location = {lon, lat};
  return s;
}

}  // namespace

TEST_CASE("buffer smaller than a pixel returns that pixel") {
  auto r = testing::random_raster(1, 10, 10, 30.0, -2.0, 0.01);
  const GeoPoint c = r.pixel_center(3, 4);
  const auto v = extract_buffer_values(r, c, {100.0});
  REQUIRE(v.size() == 1);
  CHECK(v[0] == r.at(3, 4));
}

TEST_CASE("buffer outside the extent is empty") {
  auto r = testing::random_raster(1, 10, 10, 30.0, -2.0, 0.01);
  CHECK_ERROR_KIND(extract_buffer_values(r, {10.0, 10.0}, {1000.0}), ErrorKind::EmptyBuffer);
  CHECK(buffer_sum_or_zero(r, {10.0, 10.0}, {1000.0}) == 0.0);
}

TEST_CASE("1000 m buffer on a 500 m equatorial raster matches the pixel count of a full scan") {
  const double cs = 500.0 / kMetersPerDegree;
  auto r = testing::random_raster(2, 40, 40, -10 * cs * 2, -10 * cs * 2, cs);
  SplitMix64 rng(9);
  for (int k = 0; k < 50; ++k) {
    GeoPoint c{rng.uniform(r.xll(), r.xmax()), rng.uniform(r.yll(), r.ymax())};
    auto expect = exhaustive_buffer(r, c, 1000.0);
    if (expect.empty()) {
      CHECK_ERROR_KIND(extract_buffer_values(r, c, {1000.0}), ErrorKind::EmptyBuffer);
      continue;
    }
    CHECK(extract_buffer_values(r, c, {1000.0}) == expect);
  }
}

TEST_CASE("zonal statistics equal a brute-force scan on random rasters") {
  SplitMix64 rng(21);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = testing::random_raster(seed, 100, 100, rng.uniform(-20, 20), rng.uniform(-20, 20), 0.002);
    for (int k = 0; k < 10; ++k) {
      GeoPoint c{rng.uniform(r.xll(), r.xmax()), rng.uniform(r.yll(), r.ymax())};
      const double radius = rng.uniform(150, 3000);
      const auto expect = exhaustive_buffer(r, c, radius);
      if (expect.empty()) continue;
      const auto got = extract_buffer_values(r, c, {radius});
      REQUIRE(got == expect);
      const auto s = continuous_stats(got);
      const Moments m = moments(expect);
      CHECK(std::abs(s.mean - static_cast<double>(m.mean)) < 1e-9);
      CHECK(std::abs(s.variance - static_cast<double>(m.var)) < 1e-9);
      CHECK(std::abs(s.sum - static_cast<double>(m.sum)) < 1e-9 * std::max(1.0L, m.sum));
      CHECK(s.min == static_cast<double>(m.min));
      CHECK(s.max == static_cast<double>(m.max));
      const auto p = population_zonal(r, c, {radius});
      CHECK(p.sum == s.sum);
    }
  }
}

TEST_CASE("buffer pixel sets are monotone in radius") {
  auto r = testing::random_raster(4, 60, 60, 0, 0, 0.001);
  SplitMix64 rng(4);
  for (int k = 0; k < 30; ++k) {
    GeoPoint c{rng.uniform(0, 0.06), rng.uniform(0, 0.06)};
    double prev = 0;
    for (double radius : {5000.0, 1000.0, 750.0, 500.0, 300.0}) {
      const auto count = exhaustive_buffer(r, c, radius).size();
      if (prev > 0) CHECK(count <= prev);
      double got = 0;
      try {
        got = static_cast<double>(extract_buffer_values(r, c, {radius}).size());
      } catch (const Error&) {
      }
      CHECK(got == static_cast<double>(count));
      prev = static_cast<double>(count);
    }
  }
}

TEST_CASE("continuous stats examples") {
  const std::vector<double> a{5, 5, 5};
  auto s = continuous_stats(a);
  CHECK(s.mean == 5);
  CHECK(s.variance == 0);
  CHECK(s.max == 5);
  CHECK(s.min == 5);
  const std::vector<double> b{1, 2, 3, 4};
  s = continuous_stats(b);
  CHECK(s.mean == 2.5);
  CHECK(s.variance == 1.25);
  CHECK(s.max == 4);
  CHECK(s.min == 1);
  const std::vector<double> c{-7.25};
  s = continuous_stats(c);
  CHECK(s.mean == -7.25);
  CHECK(s.variance == 0);
  CHECK_ERROR_KIND(continuous_stats(std::vector<double>{}), ErrorKind::EmptyInput);
}

TEST_CASE("categorical stats examples") {
  const std::vector<int> legend{1, 2, 3};
  auto s = categorical_stats(std::vector<double>{1, 1, 2}, legend);
  CHECK(s.pct.at(1) == doctest::Approx(2.0 / 3));
  CHECK(s.pct.at(2) == doctest::Approx(1.0 / 3));
  CHECK(s.pct.at(3) == 0.0);
  CHECK(s.mode == 1);
  CHECK(categorical_stats(std::vector<double>{2, 1}, legend).mode == 1);
  CHECK(categorical_stats(std::vector<double>{3, 2, 3, 2}, legend).mode == 2);
  CHECK_ERROR_KIND(categorical_stats(std::vector<double>{4}, legend), ErrorKind::UnknownClass);
  CHECK_ERROR_KIND(categorical_stats(std::vector<double>{1.5}, legend), ErrorKind::UnknownClass);
}

TEST_CASE("categorical percentages equal exhaustive counts") {
  const auto legend = ghsl_legend();
  SplitMix64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(200);
    for (auto& x : v) x = legend[rng.below(legend.size())];
    const auto s = categorical_stats(v, legend);
    double total = 0;
    std::map<int, int> counts;
    for (double x : v) ++counts[static_cast<int>(x)];
    int best_class = 0, best_count = -1;
    for (int c : legend) {
      CHECK(s.pct.at(c) == static_cast<double>(counts[c]) / 200.0);
      total += s.pct.at(c);
      if (counts[c] > best_count) best_count = counts[c], best_class = c;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
    CHECK(s.mode == best_class);
  }
}

TEST_CASE("quantized mode ties go to the smallest value") {
  CHECK(quantized_mode(std::vector<double>{0.2, 0.1, 0.2, 0.1}) == 0.1);
  CHECK(quantized_mode(std::vector<double>{0.30004, 0.29996, 0.9}) == 0.3);
}

TEST_CASE("distance to nearest line") {
  PolyLineSet lines;
  lines.lines.push_back({{-1, 0}, {1, 0}});
  CHECK(distance_to_nearest_line({-1, 0}, lines) == 0.0);
  CHECK(std::abs(distance_to_nearest_line({0, 0.001}, lines) - 111.195) < 0.01);
  CHECK_ERROR_KIND(distance_to_nearest_line({0, 0}, PolyLineSet{}), ErrorKind::EmptyLayer);

  SplitMix64 rng(13);
  PolyLineSet random;
  for (int k = 0; k < 100; ++k) {
    GeoPoint a{rng.uniform(29, 31), rng.uniform(-3, -1)};
    random.lines.push_back({a, {a.lon + rng.uniform(-0.2, 0.2), a.lat + rng.uniform(-0.2, 0.2)}});
  }
  for (int k = 0; k < 50; ++k) {
    GeoPoint p{rng.uniform(29, 31), rng.uniform(-3, -1)};
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& l : random.lines) brute = std::min(brute, point_segment_distance(p, l[0], l[1]));
    CHECK(distance_to_nearest_line(p, random) == brute);
  }
}

TEST_CASE("nearest tile features") {
  std::vector<OoklaTile> tiles{{{30.0, -2.0}, NetworkKind::Mobile, 100, 50, 20, 7, 3}};
  auto f = nearest_tile_features({30.01, -2.0}, tiles, NetworkKind::Mobile);
  CHECK(f.avg_d_kbps == 100);
  CHECK(f.avg_u_kbps == 50);
  CHECK(f.avg_lat_ms == 20);
  CHECK(f.tests == 7);
  CHECK(f.devices == 3);
  CHECK(f.distance_m == haversine_distance({30.01, -2.0}, {30.0, -2.0}));
  CHECK_ERROR_KIND(nearest_tile_features({30, -2}, tiles, NetworkKind::Fixed), ErrorKind::EmptyLayer);

  std::vector<OoklaTile> tie{{{29.99, -2.0}, NetworkKind::Fixed, 1, 0, 0, 0, 0},
                             {{30.01, -2.0}, NetworkKind::Fixed, 2, 0, 0, 0, 0}};
  CHECK(nearest_tile_features({30.0, -2.0}, tie, NetworkKind::Fixed).avg_d_kbps == 1);

  SplitMix64 rng(77);
  std::vector<OoklaTile> many;
  for (int k = 0; k < 50; ++k)
    many.push_back({{rng.uniform(29, 31), rng.uniform(-3, -1)}, k % 3 ? NetworkKind::Mobile : NetworkKind::Fixed,
                    static_cast<double>(k), 0, 0, 0, 0});
  for (int trial = 0; trial < 50; ++trial) {
    GeoPoint p{rng.uniform(29, 31), rng.uniform(-3, -1)};
    for (NetworkKind kind : {NetworkKind::Mobile, NetworkKind::Fixed}) {
      std::size_t best = 0;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < many.size(); ++k)
        if (many[k].kind == kind && haversine_distance(p, many[k].center) < d)
          d = haversine_distance(p, many[k].center), best = k;
      const auto got = nearest_tile_features(p, many, kind);
      CHECK(got.avg_d_kbps == many[best].avg_d_kbps);
      CHECK(got.distance_m == d);
    }
  }
}

TEST_CASE("population zonal on a uniform raster") {
  auto r = constant_raster(2.5, 50, 50, 0, 0, 0.001);
  const GeoPoint c{0.025, 0.025};
  const auto n = exhaustive_buffer(r, c, 1000).size();
  const auto s = population_zonal(r, c, {1000});
  CHECK(s.sum == doctest::Approx(2.5 * n));
  CHECK(s.variance == 0.0);
  CHECK_ERROR_KIND(population_zonal(r, {5, 5}, {1000}), ErrorKind::EmptyBuffer);
}

TEST_CASE("admin one-hot") {
  PolygonSet zones;
  zones.zones.push_back({"A", {{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}}});
  zones.zones.push_back({"B", {{{2, 0}, {3, 0}, {3, 1}, {2, 1}, {2, 0}}}});
  CHECK(admin_one_hot({0.5, 0.5}, zones) == std::vector<double>{1, 0});
  CHECK(admin_one_hot({2.5, 0.5}, zones) == std::vector<double>{0, 1});
  CHECK(admin_one_hot({1.2, 0.5}, zones) == std::vector<double>{1, 0});
  CHECK(admin_one_hot({1.0, 0.5}, zones) == std::vector<double>{1, 0});  // boundary counts as inside
  CHECK_ERROR_KIND(admin_one_hot({0, 0}, PolygonSet{}), ErrorKind::EmptyLayer);

  // A has a hole; B sits inside the hole.
  PolygonSet holes;
  holes.zones.push_back({"A", {{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {0, 0}}, {{1, 1}, {3, 1}, {3, 3}, {1, 3}, {1, 1}}}});
  holes.zones.push_back({"B", {{{1.5, 1.5}, {2.5, 1.5}, {2.5, 2.5}, {1.5, 2.5}, {1.5, 1.5}}}});
  CHECK(admin_one_hot({2, 2}, holes) == std::vector<double>{0, 1});
  CHECK(admin_one_hot({0.5, 0.5}, holes) == std::vector<double>{1, 0});
}

TEST_CASE("merge embeddings") {
  FeatureTable t({"a", "b"}, {"x"}, (Eigen::MatrixXd(2, 1) << 1, 2).finished());
  auto m = merge_embeddings_text(t, "id,e0,e1,e2,e3\nb,5,6,7,8\na,1,2,3,4\n");
  CHECK(m.cols() == 5);
  CHECK(m.names()[1] == "emb_0");
  CHECK(m.names()[4] == "emb_3");
  CHECK(m.values()(0, 1) == 1);
  CHECK(m.values()(1, 4) == 8);

  auto msg = testing::error_message([&] { merge_embeddings_text(t, "id,e0\na,1\n"); });
  CHECK(msg.find("'b'") != std::string::npos);
  CHECK_ERROR_KIND(merge_embeddings_text(t, "id,e0\na,1\n"), ErrorKind::MissingEmbedding);
  CHECK_ERROR_KIND(merge_embeddings_text(t, "id,e0,e1\na,1,2\nb,3\n"), ErrorKind::DimensionMismatch);

  std::ostringstream wide;
  wide << "id";
  for (int d = 0; d < 256; ++d) wide << ",f" << d;
  wide << "\n";
  for (const char* id : {"a", "b"}) {
    wide << id;
    for (int d = 0; d < 256; ++d) wide << "," << d;
    wide << "\n";
  }
  CHECK(merge_embeddings_text(t, wide.str()).cols() == 257);
}

TEST_CASE("feature plans") {
  const double cs = 0.002;
  auto modis = RasterLayer(RasterGrid::Constant(60, 60, 12), 30, -2, cs, -9999);
  modis.set_categorical(modis_legend());
  auto ghsl = RasterLayer(RasterGrid::Constant(60, 60, 21), 30, -2, cs, -9999);
  ghsl.set_categorical(ghsl_legend());
  auto cont = testing::random_raster(3, 60, 60, 30, -2, cs, 0, 1);

  LayerConfig cfg;
  cfg.sources.push_back(RasterSource{"modis", modis, {Stat::ClassPct, Stat::Mode, Stat::Variance}});
  cfg.sources.push_back(RasterSource{"population", cont, {Stat::Mean, Stat::Variance, Stat::Max, Stat::Min}});
  cfg.sources.push_back(RasterSource{"nightlight", cont, {Stat::Mean, Stat::Variance, Stat::Max, Stat::Min}});
  cfg.sources.push_back(RasterSource{"ghsl", ghsl, {Stat::ClassPct, Stat::Mode, Stat::Variance}});
  cfg.sources.push_back(
      RasterSource{"ghm", cont, {Stat::Mode, Stat::Variance, Stat::Mean, Stat::Max, Stat::Min}});
  cfg.sources.push_back(LineSource{"grid", {{{{30.0, -2.0}, {30.1, -1.9}}}}});
  cfg.sources.push_back(TileSource{"ookla",
                                   {{{30.05, -1.95}, NetworkKind::Mobile, 1, 2, 3, 4, 5},
                                    {{30.06, -1.95}, NetworkKind::Fixed, 6, 7, 8, 9, 10}}});
  validate(cfg);

  std::vector<SchoolRecord> schools{school("s1", 30.05, -1.95), school("s2", 30.08, -1.92), school("s3", 30.02, -1.97)};
  const auto cols = feature_columns(cfg, schools);
  CHECK(cols.size() == 19 + 4 + 4 + 17 + 5 + 1 + 12);
  CHECK(cols.front() == "modis.pct.1");
  CHECK(std::find(cols.begin(), cols.end(), "ghsl.pct.21") != cols.end());
  CHECK(std::find(cols.begin(), cols.end(), "ookla.ookla_distance_fixed") != cols.end());

  const auto table = build_feature_table(schools, cfg, {1000});
  CHECK(table.rows() == 3);
  CHECK(table.names() == cols);
  CHECK(table.values()(0, *table.column_index("modis.pct.12")) == 1.0);
  CHECK(table.values()(0, *table.column_index("ghsl.mode")) == 21.0);
  CHECK(table.to_csv() == build_feature_table(schools, cfg, {1000}).to_csv());

  LayerConfig night;
  night.sources.push_back(RasterSource{"nightlight", cont, {Stat::Mean, Stat::Variance, Stat::Max, Stat::Min}});
  CHECK(build_feature_table(schools, night, {1000}).cols() == 4);

  LayerConfig illegal;
  illegal.sources.push_back(RasterSource{"nightlight", cont, {Stat::ClassPct}});
  CHECK_ERROR_KIND(validate(illegal), ErrorKind::InvalidConfig);

  auto far = schools;
  far.push_back(school("s-far", 10, 10));
  const auto msg = testing::error_message([&] { build_feature_table(far, night, {1000}); });
  CHECK(msg.find("s-far") != std::string::npos);
  CHECK_ERROR_KIND(build_feature_table(far, night, {1000}), ErrorKind::EmptyBuffer);
}

TEST_CASE("auxiliary school fields are appended when present on every record") {
  auto cont = testing::random_raster(3, 60, 60, 30, -2, 0.002, 0, 1);
  LayerConfig cfg;
  cfg.sources.push_back(RasterSource{"nightlight", cont, {Stat::Mean}});
  std::vector<SchoolRecord> schools{school("s1", 30.05, -1.95), school("s2", 30.08, -1.92)};
  schools[0].education_level = "primary";
  schools[1].education_level = "secondary";
  for (auto& s : schools) s.cell_distances = {{CellTech::LTE, 10.0}, {CellTech::GSM, 20.0}};
  const auto t = build_feature_table(schools, cfg, {1000});
  CHECK(t.names() == std::vector<std::string>{"nightlight.mean", "school.education_level.primary",
                                              "school.education_level.secondary", "school.dist_lte_m",
                                              "school.dist_gsm_m"});
  CHECK(t.values()(1, 2) == 1.0);
  CHECK(t.values()(1, 4) == 20.0);

  schools[1].education_level.reset();
  CHECK(build_feature_table(schools, cfg, {1000}).cols() == 3);
  cfg.auxiliary = false;
  CHECK(build_feature_table(schools, cfg, {1000}).cols() == 1);
}

TEST_CASE("feature table csv round trip") {
  Eigen::MatrixXd v(2, 2);
  v << 0.1, 1e-300, -3.5, 2.0 / 3.0;
  FeatureTable t({"a", "b"}, {"x", "y"}, v, Eigen::VectorXi::Map(std::vector<int>{1, 0}.data(), 2));
  const auto back = FeatureTable::from_csv(t.to_csv());
  CHECK(back.values() == t.values());
  CHECK(back.labels() == t.labels());
  CHECK(back.ids() == t.ids());
  CHECK(t.to_csv().rfind("id,x,y,label", 0) == 0);
  CHECK_ERROR_KIND(t.select_columns(std::vector<std::string>{"z"}), ErrorKind::UnknownColumn);
}
