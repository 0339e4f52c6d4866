#include "geoloc/types.hpp"

#include <cmath>
#include <stdexcept>

namespace geoloc {

bool GeoPoint::valid() const {
  return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 &&
         lat >= -90.0 && lat <= 90.0;
}

GeoPoint wrap_to_globe(const Vector2& lonlat) {
  double lon = lonlat.x();
  double lat = lonlat.y();
  // Fold latitude into [-90, 90]; crossing a pole shifts longitude by 180.
  lat = std::fmod(lat + 90.0, 360.0);
  if (lat < 0) lat += 360.0;
  if (lat > 180.0) {
    lat = 360.0 - lat;
    lon += 180.0;
  }
  lat -= 90.0;
  lon = std::fmod(lon + 180.0, 360.0);
  if (lon < 0) lon += 360.0;
  lon -= 180.0;
  return {lon, lat};
}

std::string_view field_name(Field f) {
  switch (f) {
    case Field::tx: return "tx";
    case Field::ds: return "ds";
    case Field::lo: return "lo";
    case Field::ln: return "ln";
    case Field::tz: return "tz";
  }
  return "?";
}

std::optional<Field> parse_field(std::string_view name) {
  for (Field f : kAllFields)
    if (field_name(f) == name) return f;
  return std::nullopt;
}

std::vector<Field> parse_field_list(std::string_view list) {
  std::vector<Field> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t comma = list.find(',', pos);
    if (comma == std::string_view::npos) comma = list.size();
    std::string_view item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      auto f = parse_field(item);
      if (!f) throw std::invalid_argument("unknown field '" + std::string(item) + "'");
      bool seen = false;
      for (Field g : out) seen = seen || g == *f;
      if (!seen) out.push_back(*f);
    }
    pos = comma + 1;
  }
  return out;
}

std::string format_field_list(const std::vector<Field>& fields) {
  std::string out;
  for (Field f : fields) {
    if (!out.empty()) out += ',';
    out += field_name(f);
  }
  return out;
}

std::string to_string(const NGram& g) {
  return std::string(field_name(g.field)) + ":" + g.gram;
}

}  // namespace geoloc
