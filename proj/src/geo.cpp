#include "geoloc/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace geoloc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double cross(const Vector2& o, const Vector2& a, const Vector2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

double geodesic_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat * kDeg, phi2 = b.lat * kDeg;
  const double dl = (b.lon - a.lon) * kDeg;
  const double s1 = std::sin(phi1), c1 = std::cos(phi1);
  const double s2 = std::sin(phi2), c2 = std::cos(phi2);
  const double sdl = std::sin(dl), cdl = std::cos(dl);
  const double num = std::hypot(c2 * sdl, c1 * s2 - s1 * c2 * cdl);
  const double den = s1 * s2 + c1 * c2 * cdl;
  return kEarthRadiusKm * std::atan2(num, den);
}

Vector2 mollweide_project(const GeoPoint& p) {
  const double lambda = p.lon * kDeg;
  const double phi = p.lat * kDeg;
  const double target = std::numbers::pi * std::sin(phi);
  double theta;  // auxiliary angle
  if (std::abs(std::abs(p.lat) - 90.0) < 1e-12) {
    theta = std::copysign(std::numbers::pi / 2, phi);
  } else {
    // Solve 2t + sin 2t = pi sin(phi) for u = 2t.
    double u = 2.0 * phi;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      const double f = u + std::sin(u) - target;
      const double fp = 1.0 + std::cos(u);
      if (fp < 1e-15) break;
      const double step = f / fp;
      u -= step;
      if (std::abs(step) < 2e-10) {
        converged = true;
        break;
      }
    }
    if (!converged || !std::isfinite(u) || std::abs(u) > std::numbers::pi) {
      // The residual is monotone in u on [-pi, pi].
      double lo = -std::numbers::pi, hi = std::numbers::pi;
      while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (mid + std::sin(mid) < target) lo = mid;
        else hi = mid;
      }
      u = 0.5 * (lo + hi);
    }
    theta = u / 2.0;
  }
  const double x = kEarthRadiusKm * 2.0 * std::numbers::sqrt2 / std::numbers::pi * lambda * std::cos(theta);
  const double y = kEarthRadiusKm * std::numbers::sqrt2 * std::sin(theta);
  return {x, y};
}

Polygon convex_hull(std::span<const Vector2> points) {
  std::vector<Vector2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vector2& a, const Vector2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(std::span<const Vector2> ring) {
  if (ring.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++)
    twice += ring[j].x() * ring[i].y() - ring[i].x() * ring[j].y();
  return std::abs(twice) / 2.0;
}

double geo_polygon_area(const GeoPolygon& poly) {
  if (poly.ring.size() < 3) return 0.0;
  std::vector<Vector2> projected;
  projected.reserve(poly.ring.size());
  for (const auto& p : poly.ring)
    projected.push_back(mollweide_project({std::clamp(p.lon, -180.0, 180.0), std::clamp(p.lat, -90.0, 90.0)}));
  return polygon_area(projected);
}

GeoPolygon densify(const GeoPolygon& poly, double max_step_deg) {
  GeoPolygon out;
  const auto n = poly.ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint& a = poly.ring[i];
    const GeoPoint& b = poly.ring[(i + 1) % n];
    const double span = std::max(std::abs(b.lon - a.lon), std::abs(b.lat - a.lat));
    const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step_deg)));
    for (int s = 0; s < steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      out.ring.push_back({a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat)});
    }
  }
  return out;
}

}  // namespace geoloc
