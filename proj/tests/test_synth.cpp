#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "planted.hpp"
#include "schoolconn/csv.hpp"
#include "schoolconn/io.hpp"
#include "schoolconn/pipeline.hpp"
#include "schoolconn/preprocess.hpp"
#include "support.hpp"

using namespace schoolconn;

namespace {

synth::RasterParams small_params() {
  synth::RasterParams rp;
  rp.xll = 30.0;
  rp.yll = -2.0;
  rp.cellsize = 0.002;
  rp.base = 5.0;
  rp.amplitude = 20.0;
  return rp;
}

// Independent buffer mean: every pixel whose centre lies within r of p.
double buffer_mean(const RasterLayer& layer, GeoPoint p, double r) {
  long double sum = 0;
  std::size_t n = 0;
  for (Eigen::Index row = 0; row < layer.nrows(); ++row) {
    for (Eigen::Index col = 0; col < layer.ncols(); ++col) {
      if (haversine_distance(layer.pixel_center(row, col), p) <= r && !layer.is_nodata(layer.values()(row, col))) {
        sum += layer.values()(row, col);
        ++n;
      }
    }
  }
  return n ? static_cast<double>(sum / n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TEST_CASE("continuous rasters are seeded and bounded") {
  const auto rp = small_params();
  const auto a = synth::gen_raster(5, 40, 50, rp), b = synth::gen_raster(5, 40, 50, rp);
  const auto c = synth::gen_raster(6, 40, 50, rp);
  CHECK(a.nrows() == 40);
  CHECK(a.ncols() == 50);
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());
  CHECK(a.values().minCoeff() >= 5.0);
  CHECK(a.values().maxCoeff() < 25.0);
  CHECK(a.kind() == LayerKind::Continuous);

  auto flat = rp;
  flat.amplitude = 0.0;
  const auto f = synth::gen_raster(5, 10, 10, flat);
  CHECK((f.values().array() == 5.0).all());
  CHECK_ERROR_KIND(synth::gen_raster(1, 0, 4, rp), ErrorKind::DimensionMismatch);
}

TEST_CASE("categorical rasters draw from the legend") {
  auto rp = small_params();
  rp.kind = LayerKind::Categorical;
  rp.legend = {11, 12, 13, 21, 22};
  const auto layer = synth::gen_raster(9, 60, 60, rp);
  CHECK(layer.kind() == LayerKind::Categorical);
  const std::set<int> legend(rp.legend.begin(), rp.legend.end());
  std::set<int> seen;
  for (Eigen::Index i = 0; i < layer.values().size(); ++i) {
    const double v = layer.values().data()[i];
    CHECK(v == std::floor(v));
    seen.insert(static_cast<int>(v));
  }
  for (int v : seen) CHECK(legend.count(v) == 1);
  CHECK(seen.size() > 1);
  rp.legend.clear();
  CHECK_ERROR_KIND(synth::gen_raster(9, 4, 4, rp), ErrorKind::InvalidConfig);
}

TEST_CASE("noise-free planted labels follow the rule") {
  const auto pt = testing::planted_table(120, 0.0, 3);
  const auto& pl = pt.planted;
  REQUIRE(pl.schools.size() == 120);
  CHECK(pl.flipped == 0);

  auto rp = small_params();
  rp.base = 0.0;
  rp.amplitude = 100.0;
  rp.correlation_cells = 10;
  const auto signal = synth::gen_raster(3, 150, 150, rp);
  std::size_t connected = 0;
  for (std::size_t i = 0; i < pl.schools.size(); ++i) {
    const double oracle = buffer_mean(signal, pl.schools[i].location, 1000.0);
    CHECK(pl.signal[i] == doctest::Approx(oracle).epsilon(1e-9));
    const int rule = oracle > pl.threshold ? 1 : 0;
    CHECK(pl.rule_labels[i] == rule);
    CHECK(static_cast<int>(*pl.schools[i].label) == rule);
    connected += static_cast<std::size_t>(rule);
    CHECK(pt.table.labels()(static_cast<Eigen::Index>(i)) == rule);
  }
  // Median threshold on distinct signals balances the classes.
  CHECK(connected == 60);
}

TEST_CASE("label noise flips close to the requested fraction") {
  const auto pt = testing::planted_table(1000, 0.05, 21, 0.0, 0);
  std::size_t differs = 0;
  for (std::size_t i = 0; i < 1000; ++i)
    differs += static_cast<int>(*pt.planted.schools[i].label) != pt.planted.rule_labels[i] ? 1 : 0;
  CHECK(differs == pt.planted.flipped);
  const double fraction = static_cast<double>(differs) / 1000.0;
  CHECK(fraction >= 0.03);
  CHECK(fraction <= 0.07);
}

TEST_CASE("planted schools are deterministic") {
  const auto a = testing::planted_table(80, 0.1, 8, 0.0, 1), b = testing::planted_table(80, 0.1, 8, 0.0, 1);
  for (std::size_t i = 0; i < 80; ++i) {
    CHECK(a.planted.schools[i].id == b.planted.schools[i].id);
    CHECK(a.planted.schools[i].name == b.planted.schools[i].name);
    CHECK(a.planted.schools[i].location == b.planted.schools[i].location);
    CHECK(a.planted.schools[i].label == b.planted.schools[i].label);
  }
  CHECK(a.table.values() == b.table.values());

  SplitMix64 r1(4), r2(4);
  CHECK(synth::random_name(r1) == synth::random_name(r2));
}

TEST_CASE("margin and noise validation") {
  const auto pt = testing::planted_table(150, 0.0, 5, 2.0, 0);
  for (double s : pt.planted.signal) CHECK(std::abs(s - pt.planted.threshold) >= 2.0);

  auto rp = small_params();
  rp.amplitude = 0.0;
  const auto flat = synth::gen_raster(1, 150, 150, rp);
  synth::PlantSpec ps;
  ps.n_schools = 3;
  ps.region = {30.02, -1.98, 30.2, -1.8};
  ps.margin = 1.0;
  CHECK_ERROR_KIND(synth::gen_schools(ps, flat), ErrorKind::InvalidConfig);
  ps.margin = 0.0;
  ps.noise = 0.5;
  CHECK_ERROR_KIND(synth::gen_schools(ps, flat), ErrorKind::InvalidConfig);
  ps.noise = 0.0;
  ps.threshold = 4.0;
  const auto fixed = synth::gen_schools(ps, flat);
  CHECK(fixed.threshold == 4.0);
  for (int l : fixed.rule_labels) CHECK(l == 1);
}

TEST_CASE("a shallow tree recovers a noise-free planted rule") {
  const auto pt = testing::planted_table(400, 0.0, 12, 2.0);
  SplitSpec spec;
  spec.seed = 12;
  const auto parts = stratified_split(pt.table, spec);
  TreeParams p;
  p.max_depth = 2;
  const auto m = train(parts.train, {p, 0});
  const auto pred = predict(m, parts.test);
  CHECK(metrics(confusion(parts.test.labels(), pred.label)).accuracy == 1.0);
}

TEST_CASE("written datasets load and reference existing inputs") {
  const auto dir = testing::scratch_dir("synth_dataset");
  synth::DatasetSpec spec;
  spec.n_schools = 60;
  spec.families = {"rf", "logreg"};
  const auto path = synth::write_dataset(dir, spec);
  CHECK(std::filesystem::exists(path));
  const auto cfg = load_config(path);
  CHECK_NOTHROW(check_inputs(cfg));
  CHECK(cfg.seed == spec.seed);
  CHECK(cfg.models.size() == 2);
  CHECK(cfg.buffer_radius_m == 1000.0);
  const auto schools = parse_schools_csv(cfg.schools);
  CHECK(schools.size() > 60);

  // Same spec, same bytes.
  const auto dir2 = testing::scratch_dir("synth_dataset2");
  synth::write_dataset(dir2, spec);
  for (const char* f : {"schools.csv", "nightlight.asc", "ookla.geojson", "admin.geojson"}) {
    CHECK(csv::read_text_file(dir / f) == csv::read_text_file(dir2 / f));
  }
}
