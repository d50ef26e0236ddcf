#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "schoolconn/geo.hpp"
#include "schoolconn/raster.hpp"

namespace schoolconn {

struct CleaningReport {
  std::size_t input_count = 0;
  std::size_t removed_keyword = 0;
  std::size_t removed_proximity_dup = 0;
  std::size_t removed_name_dup = 0;
  std::size_t removed_settlement = 0;
  std::vector<std::string> surviving_ids;
  // representative id -> all member ids (representative included), per dedup stage
  std::map<std::string, std::vector<std::string>> proximity_groups;
  std::map<std::string, std::vector<std::string>> name_groups;
  std::vector<std::string> keyword_removed_ids;
  std::vector<std::string> settlement_removed_ids;

  std::size_t total_removed() const noexcept {
    return removed_keyword + removed_proximity_dup + removed_name_dup + removed_settlement;
  }

  /// Structured plain-text rendering (key: value lines, one group per line).
  std::string to_text() const;
};

struct Partition {
  std::vector<SchoolRecord> kept;
  std::vector<SchoolRecord> removed;
};

struct DedupResult {
  std::vector<SchoolRecord> kept;
  std::map<std::string, std::vector<std::string>> groups;  // only groups with >= 2 members
  std::size_t removed = 0;
};

inline constexpr std::string_view kExcludedKeywords[] = {"preschool", "nursery", "kindergarten"};

Partition filter_keywords(const std::vector<SchoolRecord>& schools);

/// Records whose 25 m buffers overlap (centre distance < 50 m) are merged
/// transitively. The representative keeps the smallest id; its label is
/// connected if any member is connected.
DedupResult dedup_by_proximity(const std::vector<SchoolRecord>& schools, double buffer_radius_m = 25.0);

/// 1 - levenshtein(a, b) / max(|a|, |b|) on trimmed, case-folded input.
double normalized_levenshtein(std::string_view a, std::string_view b);

DedupResult dedup_by_name(const std::vector<SchoolRecord>& schools, double radius_m = 300.0,
                          double threshold = 0.85);

/// Keeps a record iff the 150 m buffer sums of both rasters are nonzero.
Partition settlement_filter(const std::vector<SchoolRecord>& schools, const RasterLayer& footprints,
                            const RasterLayer& ghsl, double radius_m = 150.0);

struct CleaningOptions {
  bool keywords = true;
  bool proximity = true;
  bool names = true;
  bool settlement = true;  // requires both rasters
  double proximity_buffer_m = 25.0;
  double name_radius_m = 300.0;
  double name_threshold = 0.85;
  double settlement_radius_m = 150.0;
};

struct SettlementLayers {
  const RasterLayer* footprints = nullptr;
  const RasterLayer* ghsl = nullptr;
};

struct CleaningResult {
  std::vector<SchoolRecord> schools;
  CleaningReport report;
};

/// keywords -> proximity -> name -> settlement.
CleaningResult clean_schools(const std::vector<SchoolRecord>& schools, const CleaningOptions& options,
                             SettlementLayers settlement = {});

}  // namespace schoolconn
