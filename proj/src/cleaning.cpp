#include "schoolconn/cleaning.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include "schoolconn/error.hpp"
#include "schoolconn/features.hpp"

namespace schoolconn {

namespace {

std::string fold(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Calls on_pair(i, j) for every i < j with haversine distance < radius_m
// (strict) or <= radius_m (inclusive). Candidates come from a latitude sweep.
template <typename OnPair>
void for_each_close_pair(const std::vector<SchoolRecord>& schools, double radius_m, bool inclusive,
                         OnPair&& on_pair) {
  std::vector<std::size_t> order(schools.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return schools[a].location.lat < schools[b].location.lat;
  });
  // Latitude difference bounds great-circle distance from below; pad slightly.
  const double dlat = radius_m / kMetersPerDegree * (1.0 + 1e-9) + 1e-12;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const SchoolRecord& sa = schools[order[a]];
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const SchoolRecord& sb = schools[order[b]];
      if (sb.location.lat - sa.location.lat > dlat) break;
      const double d = haversine_distance(sa.location, sb.location);
      if (inclusive ? d <= radius_m : d < radius_m) {
        on_pair(std::min(order[a], order[b]), std::max(order[a], order[b]));
      }
    }
  }
}

DedupResult merge_groups(const std::vector<SchoolRecord>& schools, UnionFind& uf) {
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < schools.size(); ++i) members[uf.find(i)].push_back(i);

  // Emit representatives in input order of their first member.
  std::vector<std::pair<std::size_t, const std::vector<std::size_t>*>> ordered;
  for (const auto& [root, m] : members) ordered.emplace_back(m.front(), &m);
  std::sort(ordered.begin(), ordered.end());

  DedupResult out;
  for (const auto& [first, m] : ordered) {
    std::size_t rep = (*m)[0];
    for (std::size_t i : *m) {
      if (schools[i].id < schools[rep].id) rep = i;
    }
    SchoolRecord merged = schools[rep];
    bool any_label = false, any_connected = false;
    for (std::size_t i : *m) {
      if (schools[i].label) {
        any_label = true;
        any_connected = any_connected || *schools[i].label == Connectivity::Connected;
      }
    }
    if (any_label) merged.label = any_connected ? Connectivity::Connected : Connectivity::Unconnected;
    if (m->size() > 1) {
      std::vector<std::string> ids;
      for (std::size_t i : *m) ids.push_back(schools[i].id);
      std::sort(ids.begin(), ids.end());
      out.groups[merged.id] = std::move(ids);
      out.removed += m->size() - 1;
    }
    out.kept.push_back(std::move(merged));
  }
  return out;
}

}  // namespace

Partition filter_keywords(const std::vector<SchoolRecord>& schools) {
  Partition out;
  for (const SchoolRecord& s : schools) {
    const std::string name = fold(s.name);
    const bool hit = std::any_of(std::begin(kExcludedKeywords), std::end(kExcludedKeywords),
                                 [&](std::string_view kw) { return name.find(kw) != std::string::npos; });
    (hit ? out.removed : out.kept).push_back(s);
  }
  return out;
}

DedupResult dedup_by_proximity(const std::vector<SchoolRecord>& schools, double buffer_radius_m) {
  UnionFind uf(schools.size());
  for_each_close_pair(schools, 2.0 * buffer_radius_m, false, [&](std::size_t i, std::size_t j) { uf.unite(i, j); });
  return merge_groups(schools, uf);
}

double normalized_levenshtein(std::string_view a_in, std::string_view b_in) {
  const std::string a = fold(a_in);
  const std::string b = fold(b_in);
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  const double dist = static_cast<double>(prev[b.size()]);
  return 1.0 - dist / static_cast<double>(std::max(a.size(), b.size()));
}

DedupResult dedup_by_name(const std::vector<SchoolRecord>& schools, double radius_m, double threshold) {
  UnionFind uf(schools.size());
  for_each_close_pair(schools, radius_m, true, [&](std::size_t i, std::size_t j) {
    if (normalized_levenshtein(schools[i].name, schools[j].name) >= threshold) uf.unite(i, j);
  });
  return merge_groups(schools, uf);
}

Partition settlement_filter(const std::vector<SchoolRecord>& schools, const RasterLayer& footprints,
                            const RasterLayer& ghsl, double radius_m) {
  Partition out;
  const BufferSpec spec{radius_m};
  for (const SchoolRecord& s : schools) {
    const bool keep = buffer_sum_or_zero(footprints, s.location, spec) != 0.0 &&
                      buffer_sum_or_zero(ghsl, s.location, spec) != 0.0;
    (keep ? out.kept : out.removed).push_back(s);
  }
  return out;
}

CleaningResult clean_schools(const std::vector<SchoolRecord>& schools, const CleaningOptions& options,
                             SettlementLayers settlement) {
  CleaningResult result;
  CleaningReport& report = result.report;
  report.input_count = schools.size();
  std::vector<SchoolRecord> current = schools;

  if (options.keywords) {
    Partition p = filter_keywords(current);
    report.removed_keyword = p.removed.size();
    for (const auto& s : p.removed) report.keyword_removed_ids.push_back(s.id);
    current = std::move(p.kept);
  }
  if (options.proximity) {
    DedupResult d = dedup_by_proximity(current, options.proximity_buffer_m);
    report.removed_proximity_dup = d.removed;
    report.proximity_groups = std::move(d.groups);
    current = std::move(d.kept);
  }
  if (options.names) {
    DedupResult d = dedup_by_name(current, options.name_radius_m, options.name_threshold);
    report.removed_name_dup = d.removed;
    report.name_groups = std::move(d.groups);
    current = std::move(d.kept);
  }
  if (options.settlement) {
    if (!settlement.footprints || !settlement.ghsl) {
      fail(ErrorKind::InvalidConfig, "settlement filter needs both the footprint and GHSL rasters");
    }
    Partition p = settlement_filter(current, *settlement.footprints, *settlement.ghsl, options.settlement_radius_m);
    report.removed_settlement = p.removed.size();
    for (const auto& s : p.removed) report.settlement_removed_ids.push_back(s.id);
    current = std::move(p.kept);
  }
  for (const auto& s : current) report.surviving_ids.push_back(s.id);
  result.schools = std::move(current);
  return result;
}

std::string CleaningReport::to_text() const {
  std::ostringstream out;
  auto join = [](const std::vector<std::string>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ' ';
      s += ids[i];
    }
    return s;
  };
  out << "input_count: " << input_count << '\n'
      << "removed.keyword: " << removed_keyword << '\n'
      << "removed.proximity_dup: " << removed_proximity_dup << '\n'
      << "removed.name_dup: " << removed_name_dup << '\n'
      << "removed.settlement: " << removed_settlement << '\n'
      << "removed.total: " << total_removed() << '\n'
      << "surviving_count: " << surviving_ids.size() << '\n';
  out << "keyword_removed: " << join(keyword_removed_ids) << '\n';
  for (const auto& [rep, members] : proximity_groups) out << "proximity_group " << rep << ": " << join(members) << '\n';
  for (const auto& [rep, members] : name_groups) out << "name_group " << rep << ": " << join(members) << '\n';
  out << "settlement_removed: " << join(settlement_removed_ids) << '\n';
  out << "surviving: " << join(surviving_ids) << '\n';
  return out.str();
}

}  // namespace schoolconn
