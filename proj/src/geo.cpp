#include "schoolconn/geo.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "schoolconn/error.hpp"

namespace schoolconn {

bool is_valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180.0 && p.lon <= 180.0 &&
         p.lat >= -90.0 && p.lat <= 90.0;
}

GeoPoint GeoPoint::checked(double lon, double lat) {
  GeoPoint p{lon, lat};
  if (!is_valid(p)) {
    fail(ErrorKind::InvalidCoordinate,
         "coordinate out of range (lon=" + std::to_string(lon) + ", lat=" + std::to_string(lat) + ")");
  }
  return p;
}

double haversine_distance(const GeoPoint& p, const GeoPoint& q) noexcept {
  const double phi1 = p.lat * kDegToRad;
  const double phi2 = q.lat * kDegToRad;
  const double dphi = (q.lat - p.lat) * kDegToRad;
  const double dlambda = (q.lon - p.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

GeoPoint destination(const GeoPoint& p, double bearing_deg, double distance_m) noexcept {
  const double delta = distance_m / kEarthRadiusM;
  const double theta = bearing_deg * kDegToRad;
  const double phi1 = p.lat * kDegToRad;
  const double lambda1 = p.lon * kDegToRad;
  const double sin_phi2 = std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
  const double phi2 = std::asin(std::clamp(sin_phi2, -1.0, 1.0));
  const double lambda2 = lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                              std::cos(delta) - std::sin(phi1) * sin_phi2);
  return {wrap_lon_delta(lambda2 / kDegToRad), phi2 / kDegToRad};
}

double wrap_lon_delta(double delta) noexcept {
  double d = std::fmod(delta + 180.0, 360.0);
  if (d < 0) d += 360.0;
  return d - 180.0;
}

namespace {

struct LocalFrame {
  GeoPoint origin;
  double lon_scale;

  explicit LocalFrame(const GeoPoint& p) : origin(p), lon_scale(std::cos(p.lat * kDegToRad)) {}

  // Offsets in degrees (before the cos(lat) scaling).
  Eigen::Vector2d degrees(const GeoPoint& q) const {
    return {wrap_lon_delta(q.lon - origin.lon), q.lat - origin.lat};
  }

  Eigen::Vector2d meters(const GeoPoint& q) const {
    Eigen::Vector2d d = degrees(q);
    return {d.x() * lon_scale * kMetersPerDegree, d.y() * kMetersPerDegree};
  }
};

bool inside_window(const Eigen::Vector2d& deg) {
  return std::abs(deg.x()) <= kLocalityWindowDeg && std::abs(deg.y()) <= kLocalityWindowDeg;
}

double segment_distance_in_frame(const LocalFrame& frame, const GeoPoint& a, const GeoPoint& b,
                                 bool a_is_vertex, bool b_is_vertex) {
  const Eigen::Vector2d pa = frame.meters(a);
  const Eigen::Vector2d pb = frame.meters(b);
  const Eigen::Vector2d ab = pb - pa;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? -pa.dot(ab) / len2 : 0.0;
  if (t <= 0.0) return a_is_vertex ? haversine_distance(frame.origin, a) : pa.norm();
  if (t >= 1.0) return b_is_vertex ? haversine_distance(frame.origin, b) : pb.norm();
  double planar = (pa + t * ab).norm();
  // Never report more than the true distance to a real vertex.
  if (a_is_vertex) planar = std::min(planar, haversine_distance(frame.origin, a));
  if (b_is_vertex) planar = std::min(planar, haversine_distance(frame.origin, b));
  return planar;
}

// Liang-Barsky clip of the segment u->v (degree offsets) against the window.
bool clip_to_window(Eigen::Vector2d& u, Eigen::Vector2d& v, bool& u_clipped, bool& v_clipped) {
  const double w = kLocalityWindowDeg;
  const Eigen::Vector2d d = v - u;
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {u.x() + w, w - u.x(), u.y() + w, w - u.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return false;
  }
  Eigen::Vector2d nu = u + t0 * d;
  Eigen::Vector2d nv = u + t1 * d;
  u_clipped = t0 > 0.0;
  v_clipped = t1 < 1.0;
  u = nu;
  v = nv;
  return true;
}

}  // namespace

double point_segment_distance(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const LocalFrame frame(p);
  if (!inside_window(frame.degrees(a)) || !inside_window(frame.degrees(b))) {
    fail(ErrorKind::LocalityViolation, "segment endpoint outside the 5 degree locality window");
  }
  return segment_distance_in_frame(frame, a, b, true, true);
}

double distance_to_polyline(const GeoPoint& p, std::span<const GeoPoint> vertices) {
  const LocalFrame frame(p);
  double best = std::numeric_limits<double>::infinity();
  bool any_local = false;
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
    const GeoPoint& a = vertices[i];
    const GeoPoint& b = vertices[i + 1];
    Eigen::Vector2d u = frame.degrees(a);
    Eigen::Vector2d v = frame.degrees(b);
    if (inside_window(u) && inside_window(v)) {
      any_local = true;
      best = std::min(best, segment_distance_in_frame(frame, a, b, true, true));
      continue;
    }
    // Cheap reject on the bounding box before clipping.
    if (std::max(u.x(), v.x()) < -kLocalityWindowDeg || std::min(u.x(), v.x()) > kLocalityWindowDeg ||
        std::max(u.y(), v.y()) < -kLocalityWindowDeg || std::min(u.y(), v.y()) > kLocalityWindowDeg) {
      continue;
    }
    bool u_clipped = false, v_clipped = false;
    if (!clip_to_window(u, v, u_clipped, v_clipped)) continue;
    any_local = true;
    GeoPoint ca{p.lon + u.x(), p.lat + u.y()};
    GeoPoint cb{p.lon + v.x(), p.lat + v.y()};
    best = std::min(best, segment_distance_in_frame(frame, u_clipped ? ca : a, v_clipped ? cb : b,
                                                    !u_clipped, !v_clipped));
  }
  if (!any_local) {
    for (const GeoPoint& q : vertices) best = std::min(best, haversine_distance(p, q));
  }
  return best;
}

const char* to_string(CellTech tech) noexcept {
  switch (tech) {
    case CellTech::LTE: return "lte";
    case CellTech::UMTS: return "umts";
    case CellTech::GSM: return "gsm";
  }
  return "?";
}

const char* to_string(NetworkKind kind) noexcept {
  return kind == NetworkKind::Mobile ? "mobile" : "fixed";
}

}  // namespace schoolconn
