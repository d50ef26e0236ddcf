#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "schoolconn/cleaning.hpp"
#include "schoolconn/synth.hpp"
#include "support.hpp"

using namespace schoolconn;

namespace {

SchoolRecord rec(std::string id, std::string name, GeoPoint at, std::optional<Connectivity> label = {}) {
  SchoolRecord s;
  s.id = std::move(id);
  s.name = std::move(name);
  s.location = at;
  s.label = label;
  return s;
}

// Textbook edit-distance table, kept separate from the library code.
std::size_t dp_edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

std::set<std::string> ids_of(const std::vector<SchoolRecord>& v) {
  std::set<std::string> out;
  for (const auto& s : v) out.insert(s.id);
  return out;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

const GeoPoint kOrigin{30.0, -2.0};

}  // namespace

TEST_CASE("keyword filter") {
  std::vector<SchoolRecord> v{rec("a", "Sunrise Nursery School", kOrigin), rec("b", "Preschool Annex", kOrigin),
                              rec("c", "Primary School Kigali", kOrigin), rec("d", "KINDERGARTEN of Hope", kOrigin)};
  const auto p = filter_keywords(v);
  CHECK(ids_of(p.kept) == std::set<std::string>{"c"});
  CHECK(ids_of(p.removed) == std::set<std::string>{"a", "b", "d"});
}

TEST_CASE("proximity dedup") {
  SUBCASE("30 m pair") {
    std::vector<SchoolRecord> v{rec("b", "X", kOrigin, Connectivity::Connected),
                                rec("a", "Y", destination(kOrigin, 90, 30), Connectivity::Unconnected)};
    const auto r = dedup_by_proximity(v);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].id == "a");
    CHECK(r.kept[0].label == Connectivity::Connected);
    CHECK(r.removed == 1);
    CHECK(r.groups.at("a") == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("40 m chain is transitive") {
    const GeoPoint b = destination(kOrigin, 90, 40);
    const GeoPoint c = destination(b, 90, 40);
    REQUIRE(haversine_distance(kOrigin, c) > 50);
    std::vector<SchoolRecord> v{rec("C", "x", c), rec("A", "y", kOrigin), rec("B", "z", b)};
    const auto r = dedup_by_proximity(v);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].id == "A");
    CHECK(r.groups.at("A") == std::vector<std::string>{"A", "B", "C"});
  }
  SUBCASE("60 m apart") {
    std::vector<SchoolRecord> v{rec("a", "x", kOrigin), rec("b", "y", destination(kOrigin, 0, 60))};
    CHECK(dedup_by_proximity(v).kept.size() == 2);
  }
  SUBCASE("label stays unconnected when no member is connected") {
    std::vector<SchoolRecord> v{rec("a", "x", kOrigin, Connectivity::Unconnected),
                                rec("b", "y", destination(kOrigin, 0, 10), Connectivity::Unconnected)};
    CHECK(dedup_by_proximity(v).kept[0].label == Connectivity::Unconnected);
  }
}

TEST_CASE("union-find grouping against a component oracle on random points") {
  SplitMix64 rng(31);
  std::vector<SchoolRecord> v;
  for (int i = 0; i < 120; ++i)
    v.push_back(rec("s" + std::to_string(1000 + i), "n", destination(kOrigin, rng.uniform(0, 360), rng.uniform(0, 600))));
  // Oracle: flood fill on the < 50 m graph.
  std::vector<int> comp(v.size(), -1);
  int ncomp = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (comp[i] >= 0) continue;
    std::vector<std::size_t> stack{i};
    comp[i] = ncomp;
    while (!stack.empty()) {
      const auto k = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < v.size(); ++j)
        if (comp[j] < 0 && haversine_distance(v[k].location, v[j].location) < 50.0) comp[j] = ncomp, stack.push_back(j);
    }
    ++ncomp;
  }
  const auto r = dedup_by_proximity(v);
  CHECK(r.kept.size() == static_cast<std::size_t>(ncomp));
  for (const auto& [rep, members] : r.groups) {
    std::set<int> cs;
    for (const auto& m : members) {
      const auto it = std::find_if(v.begin(), v.end(), [&](const SchoolRecord& s) { return s.id == m; });
      cs.insert(comp[static_cast<std::size_t>(it - v.begin())]);
    }
    CHECK(cs.size() == 1);
    CHECK(rep == *std::min_element(members.begin(), members.end()));
  }
}

TEST_CASE("normalized levenshtein") {
  CHECK(normalized_levenshtein("abc", "abc") == 1.0);
  CHECK(normalized_levenshtein("kitten", "sitting") == doctest::Approx(1.0 - 3.0 / 7.0));
  CHECK(normalized_levenshtein("", "abc") == 0.0);
  CHECK(normalized_levenshtein("", "") == 1.0);
  CHECK(normalized_levenshtein("  Mary ", "mary") == 1.0);

  SplitMix64 rng(2);
  for (int i = 0; i < 300; ++i) {
    std::string a, b;
    const auto la = rng.below(12), lb = rng.below(12);
    for (std::size_t k = 0; k < la; ++k) a += static_cast<char>('a' + rng.below(4));
    for (std::size_t k = 0; k < lb; ++k) b += static_cast<char>('a' + rng.below(4));
    const double expect =
        a.empty() && b.empty() ? 1.0 : 1.0 - static_cast<double>(dp_edit_distance(a, b)) / std::max(a.size(), b.size());
    CHECK(normalized_levenshtein(a, b) == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("name dedup") {
  const double sim = 1.0 - static_cast<double>(dp_edit_distance("st. mary primary", "st mary primary")) / 16.0;
  REQUIRE(sim >= 0.85);
  std::vector<SchoolRecord> v{rec("b", "St. Mary Primary", kOrigin),
                              rec("a", "St Mary Primary", destination(kOrigin, 45, 100))};
  auto r = dedup_by_name(v);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0].id == "a");

  std::vector<SchoolRecord> far{rec("a", "Hillside", kOrigin), rec("b", "Hillside", destination(kOrigin, 45, 1000))};
  CHECK(dedup_by_name(far).kept.size() == 2);

  // "abcdefghijklmnopqrstuvwxy" (25) vs 4 substitutions: similarity 0.84.
  const std::string base = "abcdefghijklmnopqrstuvwxy";
  std::string other = base;
  for (int k : {0, 5, 10, 15}) other[static_cast<std::size_t>(k)] = 'Z';
  REQUIRE(normalized_levenshtein(base, other) == doctest::Approx(0.84));
  std::vector<SchoolRecord> edge{rec("a", base, kOrigin), rec("b", other, destination(kOrigin, 0, 100))};
  CHECK(dedup_by_name(edge).kept.size() == 2);
}

TEST_CASE("settlement filter") {
  RasterGrid ones = RasterGrid::Constant(20, 20, 1.0);
  RasterGrid zeros = RasterGrid::Zero(20, 20);
  RasterGrid fives = RasterGrid::Constant(20, 20, 5.0);
  const RasterLayer fp(ones, 29.99, -2.01, 0.001, -9999), fp0(zeros, 29.99, -2.01, 0.001, -9999);
  const RasterLayer gh(fives, 29.99, -2.01, 0.001, -9999), gh0(zeros, 29.99, -2.01, 0.001, -9999);
  std::vector<SchoolRecord> v{rec("a", "x", kOrigin)};
  CHECK(settlement_filter(v, fp, gh).kept.size() == 1);
  CHECK(settlement_filter(v, fp0, gh).removed.size() == 1);
  CHECK(settlement_filter(v, fp0, gh0).removed.size() == 1);
  std::vector<SchoolRecord> outside{rec("z", "x", {10, 10})};
  CHECK(settlement_filter(outside, fp, gh).removed.size() == 1);
}

TEST_CASE("cascade on the planted corpus removes exactly the planted records") {
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    synth::CorpusSpec spec;
    spec.seed = seed;
    const auto corpus = synth::gen_cleaning_corpus(spec);
    const auto out = clean_schools(corpus.schools, {}, {&corpus.footprints, &corpus.ghsl});
    const auto& rep = out.report;
    CHECK(sorted(rep.keyword_removed_ids) == sorted(corpus.keyword_ids));
    CHECK(sorted(rep.settlement_removed_ids) == sorted(corpus.settlement_ids));
    std::vector<std::string> prox, names;
    for (const auto& [r, members] : rep.proximity_groups)
      for (const auto& m : members)
        if (m != r) prox.push_back(m);
    for (const auto& [r, members] : rep.name_groups)
      for (const auto& m : members)
        if (m != r) names.push_back(m);
    CHECK(sorted(prox) == sorted(corpus.proximity_ids));
    CHECK(sorted(names) == sorted(corpus.name_ids));
    CHECK(sorted(rep.surviving_ids) == sorted(corpus.survivor_ids));
    CHECK(rep.total_removed() + rep.surviving_ids.size() == rep.input_count);

    const auto again = clean_schools(out.schools, {}, {&corpus.footprints, &corpus.ghsl});
    CHECK(again.report.total_removed() == 0);
    CHECK(ids_of(again.schools) == ids_of(out.schools));

    auto shuffled = corpus.schools;
    SplitMix64 rng(seed + 5);
    rng.shuffle(shuffled);
    const auto perm = clean_schools(shuffled, {}, {&corpus.footprints, &corpus.ghsl});
    CHECK(perm.report.proximity_groups == rep.proximity_groups);
    CHECK(perm.report.name_groups == rep.name_groups);
    CHECK(ids_of(perm.schools) == ids_of(out.schools));
  }
}

TEST_CASE("report text lists every stage") {
  const auto corpus = synth::gen_cleaning_corpus({});
  const auto out = clean_schools(corpus.schools, {}, {&corpus.footprints, &corpus.ghsl});
  const auto text = out.report.to_text();
  for (const char* key : {"input_count:", "removed.keyword:", "removed.proximity_dup:", "removed.name_dup:",
                          "removed.settlement:", "surviving_count:"})
    CHECK_MESSAGE(text.find(key) != std::string::npos, key);
}

TEST_CASE("settlement stage needs both rasters unless disabled") {
  const auto corpus = synth::gen_cleaning_corpus({});
  CHECK_ERROR_KIND(clean_schools(corpus.schools, {}), ErrorKind::InvalidConfig);
  CleaningOptions off;
  off.settlement = false;
  const auto out = clean_schools(corpus.schools, off);
  CHECK(out.report.removed_settlement == 0);
  CHECK(out.schools.size() == corpus.survivor_ids.size() + corpus.settlement_ids.size());
}
