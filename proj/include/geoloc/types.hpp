#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace geoloc {

using Vector2 = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;

using TimePoint = std::chrono::sys_seconds;

// IUGG mean earth radius.
inline constexpr double kEarthRadiusKm = 6371.0088;

/// A WGS84 longitude/latitude pair in degrees.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  bool valid() const;
  Vector2 vec() const { return {lon, lat}; }
  static GeoPoint from(const Vector2& v) { return {v.x(), v.y()}; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Wraps longitude into [-180, 180] and folds latitude over the poles, so an
/// unbounded plate carree point maps back onto the globe.
GeoPoint wrap_to_globe(const Vector2& lonlat);

/// The five message fields a model can draw n-grams from.
enum class Field : std::uint8_t { tx = 0, ds = 1, lo = 2, ln = 3, tz = 4 };

inline constexpr std::array<Field, 5> kAllFields = {Field::tx, Field::ds, Field::lo,
                                                    Field::ln, Field::tz};

std::string_view field_name(Field f);
std::optional<Field> parse_field(std::string_view name);
/// Parses "tx,lo,tz" style lists; throws std::invalid_argument on unknown names.
std::vector<Field> parse_field_list(std::string_view list);
std::string format_field_list(const std::vector<Field>& fields);

/// An n-gram tagged with the field it came from. The same text in two fields
/// is two different n-grams.
struct NGram {
  Field field = Field::tx;
  std::string gram;

  friend auto operator<=>(const NGram&, const NGram&) = default;
  friend bool operator==(const NGram&, const NGram&) = default;
};

std::string to_string(const NGram& g);

struct NGramHash {
  std::size_t operator()(const NGram& g) const noexcept {
    return std::hash<std::string>{}(g.gram) * 31u + static_cast<std::size_t>(g.field);
  }
};

/// A tokenized message: a sorted set of n-grams plus the true origin if known.
struct Message {
  std::string id;
  std::vector<NGram> grams;
  std::optional<GeoPoint> origin;
};

}  // namespace geoloc
