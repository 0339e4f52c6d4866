#pragma once

#include <span>
#include <vector>

#include "geoloc/types.hpp"

namespace geoloc {

/// Planar polygon ring, counter-clockwise, closed implicitly.
using Polygon = std::vector<Vector2>;

/// Ring of lon/lat vertices (counter-clockwise in plate carree).
struct GeoPolygon {
  std::vector<GeoPoint> ring;
};

/// Great-circle distance in km on a sphere of radius kEarthRadiusKm
/// (Vincenty's arctangent form, stable for both tiny and antipodal spans).
double geodesic_distance(const GeoPoint& a, const GeoPoint& b);

/// Forward Mollweide projection, central meridian 0, output in km. The
/// auxiliary angle is solved by Newton iteration to 1e-10 rad, with a
/// bisection fallback near the poles.
Vector2 mollweide_project(const GeoPoint& p);

/// Monotone-chain hull. Collinear points are dropped; inputs with fewer than
/// three non-collinear points yield a degenerate (zero-area) ring.
Polygon convex_hull(std::span<const Vector2> points);

/// Shoelace area, always non-negative.
double polygon_area(std::span<const Vector2> ring);

/// Area in km^2 of a lon/lat ring after projecting its vertices to Mollweide.
/// Vertices outside the valid coordinate range are clamped first.
double geo_polygon_area(const GeoPolygon& poly);

/// Inserts extra vertices so no edge spans more than max_step_deg. Needed when
/// measuring large rings, since projected edges are straight chords.
GeoPolygon densify(const GeoPolygon& poly, double max_step_deg);

}  // namespace geoloc
