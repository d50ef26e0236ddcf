#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace schoolconn {

inline constexpr double kEarthRadiusM = 6'371'008.8;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
// Meters per degree of arc on the mean-radius sphere.
inline constexpr double kMetersPerDegree = kEarthRadiusM * kDegToRad;
// Half-width (degrees) of the window in which the planar segment metric is trusted.
inline constexpr double kLocalityWindowDeg = 5.0;

/// WGS84 longitude/latitude in degrees.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  /// Throws InvalidCoordinate unless finite and within [-180,180] x [-90,90].
  static GeoPoint checked(double lon, double lat);

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(const GeoPoint& p) noexcept;

/// Great-circle distance in meters on the mean-radius sphere.
double haversine_distance(const GeoPoint& p, const GeoPoint& q) noexcept;

/// Point reached from `p` along the great circle with the given initial
/// bearing (degrees clockwise from north).
GeoPoint destination(const GeoPoint& p, double bearing_deg, double distance_m) noexcept;

/// Distance from p to segment ab in a local equirectangular plane centred
/// on p. Endpoints farther than the locality window raise LocalityViolation.
/// When the foot of the perpendicular falls on an endpoint the exact
/// great-circle distance to that endpoint is returned.
double point_segment_distance(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b);

/// Longitude difference b - a folded into [-180, 180).
double wrap_lon_delta(double delta) noexcept;

/// Distance from p to an open polyline (>= 2 vertices). Segments are
/// prefiltered by the locality window and partially-visible segments are
/// clipped to it; if no segment reaches the window the nearest vertex
/// distance is used.
double distance_to_polyline(const GeoPoint& p, std::span<const GeoPoint> vertices);

struct PolyLineSet {
  std::vector<std::vector<GeoPoint>> lines;

  bool empty() const noexcept { return lines.empty(); }
};

using Ring = std::vector<GeoPoint>;  // closed: front() == back()

struct Zone {
  std::string id;
  std::vector<Ring> rings;  // outer ring(s) and holes, evaluated with even-odd
};

struct PolygonSet {
  std::vector<Zone> zones;

  bool empty() const noexcept { return zones.empty(); }
};

enum class NetworkKind { Mobile, Fixed };

struct OoklaTile {
  GeoPoint center;
  NetworkKind kind = NetworkKind::Mobile;
  double avg_d_kbps = 0.0;
  double avg_u_kbps = 0.0;
  double avg_lat_ms = 0.0;
  double tests = 0.0;
  double devices = 0.0;
};

enum class Connectivity { Unconnected = 0, Connected = 1 };

enum class CellTech { LTE, UMTS, GSM };

struct SchoolRecord {
  std::string id;
  std::string name;
  GeoPoint location;
  std::optional<Connectivity> label;
  std::optional<std::string> education_level;
  std::map<CellTech, double> cell_distances;  // meters
};

const char* to_string(CellTech tech) noexcept;
const char* to_string(NetworkKind kind) noexcept;

}  // namespace schoolconn
