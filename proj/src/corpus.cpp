#include "geoloc/corpus.hpp"

#include <glob.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "geoloc/errors.hpp"
#include "geoloc/random.hpp"

namespace geoloc {

using json = nlohmann::json;
using namespace std::chrono;

const std::string& RawRecord::field(Field f) const {
  switch (f) {
    case Field::tx: return text;
    case Field::ds: return user_description;
    case Field::lo: return user_location;
    case Field::ln: return user_lang;
    case Field::tz: return user_timezone;
  }
  return text;
}

std::string& RawRecord::field(Field f) {
  return const_cast<std::string&>(std::as_const(*this).field(f));
}

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  auto first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

}  // namespace

std::optional<TimePoint> parse_rfc3339(std::string_view s) {
  int y, mo, d, h = 0, mi = 0, sec = 0;
  if (!read_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !read_int(s, 5, 2, mo) ||
      s[7] != '-' || !read_int(s, 8, 2, d))
    return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::size_t pos = 10;
  seconds offset{0};
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ') return std::nullopt;
    if (!read_int(s, pos + 1, 2, h) || s.size() < pos + 9 || s[pos + 3] != ':' ||
        !read_int(s, pos + 4, 2, mi) || s[pos + 6] != ':' || !read_int(s, pos + 7, 2, sec))
      return std::nullopt;
    if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    pos += 9;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    if (pos >= s.size()) return std::nullopt;
    if (s[pos] == 'Z' || s[pos] == 'z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int oh, om;
      if (!read_int(s, pos + 1, 2, oh) || s.size() < pos + 6 || s[pos + 3] != ':' ||
          !read_int(s, pos + 4, 2, om))
        return std::nullopt;
      offset = hours{oh} + minutes{om};
      if (s[pos] == '-') offset = -offset;
      pos += 6;
    } else {
      return std::nullopt;
    }
    if (pos != s.size()) return std::nullopt;
  }
  return TimePoint{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{sec} - offset;
}

std::string format_rfc3339(TimePoint t) {
  auto dp = floor<days>(t);
  year_month_day ymd{dp};
  hh_mm_ss hms{t - dp};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

std::optional<TimePoint> parse_date(std::string_view s) { return parse_rfc3339(s); }

RawRecord parse_record(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "record is not a JSON object");

  auto get_string = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw ParseError(line_no, std::string("missing key '") + key + "'");
      return {};
    }
    if (!it->is_string()) throw ParseError(line_no, std::string("key '") + key + "' is not a string");
    return it->get<std::string>();
  };

  RawRecord r;
  r.id = get_string("id", true);
  if (r.id.empty()) throw ParseError(line_no, "empty id");
  r.user_id = get_string("user", false);
  if (r.user_id.empty()) r.user_id = r.id;
  auto ts = parse_rfc3339(get_string("ts", true));
  if (!ts) throw ParseError(line_no, "bad timestamp");
  r.timestamp = *ts;

  auto lon = j.find("lon");
  auto lat = j.find("lat");
  bool has_lon = lon != j.end() && !lon->is_null();
  bool has_lat = lat != j.end() && !lat->is_null();
  if (has_lon != has_lat) throw ParseError(line_no, "lon and lat must appear together");
  if (has_lon) {
    if (!lon->is_number() || !lat->is_number())
      throw ParseError(line_no, "coordinates must be numbers");
    GeoPoint p{lon->get<double>(), lat->get<double>()};
    if (!p.valid()) throw ParseError(line_no, "coordinates out of range");
    r.origin = p;
  }
  r.text = get_string("tx", false);
  r.user_description = get_string("ds", false);
  r.user_location = get_string("lo", false);
  r.user_lang = get_string("ln", false);
  r.user_timezone = get_string("tz", false);
  return r;
}

std::string serialize_record(const RawRecord& r) {
  json j;
  j["id"] = r.id;
  j["user"] = r.user_id;
  j["ts"] = format_rfc3339(r.timestamp);
  if (r.origin) {
    j["lon"] = r.origin->lon;
    j["lat"] = r.origin->lat;
  }
  j["tx"] = r.text;
  j["ds"] = r.user_description;
  j["lo"] = r.user_location;
  j["ln"] = r.user_lang;
  j["tz"] = r.user_timezone;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<RawRecord> read_corpus(std::span<const std::filesystem::path> paths,
                                   const ReadOptions& options, ReadStats* stats) {
  std::vector<RawRecord> out;
  ReadStats local;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      ++local.lines;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(parse_record(line, line_no));
      } catch (const ParseError& e) {
        if (!options.skip_bad_lines) throw ParseError(line_no, path.string() + ": " + e.what());
        ++local.skipped;
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<std::filesystem::path> expand_globs(std::span<const std::string> patterns) {
  std::vector<std::filesystem::path> out;
  for (const auto& pattern : patterns) {
    glob_t g{};
    int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    } else {
      out.emplace_back(pattern);
    }
    ::globfree(&g);
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const RawRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

std::uint64_t corpus_hash(std::span<const RawRecord> records) {
  std::vector<std::uint64_t> hashes;
  hashes.reserve(records.size());
  for (const auto& r : records) hashes.push_back(fnv1a64(serialize_record(r)));
  std::sort(hashes.begin(), hashes.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto x : hashes) h = splitmix64(h ^ x);
  return h;
}

std::vector<RawRecord> concatenate_by_user(std::span<const RawRecord> records) {
  std::vector<const RawRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return std::tie(a->timestamp, a->id) < std::tie(b->timestamp, b->id);
  });
  std::map<std::string, RawRecord> by_user;
  for (const RawRecord* r : sorted) {
    auto [it, fresh] = by_user.try_emplace(r->user_id, *r);
    if (fresh) continue;
    RawRecord& acc = it->second;
    if (!acc.origin) acc.origin = r->origin;
    if (!r->text.empty()) acc.text += (acc.text.empty() ? "" : "\n") + r->text;
  }
  std::vector<RawRecord> out;
  out.reserve(by_user.size());
  for (auto& [user, r] : by_user) out.push_back(std::move(r));
  return out;
}

void Schedule::validate() const {
  if (!(training_days >= 0) || !(test_days >= 0) || !(gap_days >= 0))
    throw std::invalid_argument("schedule durations must be >= 0");
  if (!(stride_days >= 1)) throw std::invalid_argument("stride must be >= 1 day");
  if (test_sample_size < 1) throw std::invalid_argument("test sample size must be >= 1");
}

std::chrono::seconds days_to_seconds(double days) {
  return seconds{static_cast<std::int64_t>(std::llround(days * 86400.0))};
}

std::vector<Window> schedule_windows(TimePoint corpus_start, TimePoint corpus_end, const Schedule& s) {
  s.validate();
  std::vector<Window> out;
  if (corpus_end <= corpus_start) return out;
  const auto train = days_to_seconds(s.training_days);
  const auto test = days_to_seconds(s.test_days);
  const auto gap = days_to_seconds(s.gap_days);
  const auto stride = days_to_seconds(s.stride_days);
  for (std::size_t k = 0;; ++k) {
    Window w;
    w.index = k;
    w.train.begin = corpus_start + stride * static_cast<std::int64_t>(k);
    w.train.end = w.train.begin + train;
    w.test.begin = w.train.end + gap;
    w.test.end = w.test.begin + test;
    if (w.test.end > corpus_end) break;
    out.push_back(w);
  }
  return out;
}

namespace {

std::vector<const RawRecord*> geotagged_in(std::span<const RawRecord> records, const Interval& iv) {
  std::vector<const RawRecord*> out;
  for (const auto& r : records)
    if (r.origin && iv.contains(r.timestamp)) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) {
    return std::tie(a->timestamp, a->id) < std::tie(b->timestamp, b->id);
  });
  return out;
}

}  // namespace

std::vector<RawRecord> select_training(std::span<const RawRecord> records, const Interval& interval) {
  std::unordered_set<std::string> seen;
  std::vector<RawRecord> out;
  for (const RawRecord* r : geotagged_in(records, interval))
    if (seen.insert(r->user_id).second) out.push_back(*r);
  return out;
}

std::vector<RawRecord> select_test(std::span<const RawRecord> records, const Interval& interval,
                                   const std::unordered_set<std::string>& training_users,
                                   std::size_t n, std::uint64_t seed) {
  std::vector<const RawRecord*> pool;
  for (const RawRecord* r : geotagged_in(records, interval))
    if (!training_users.contains(r->user_id)) pool.push_back(r);
  const std::size_t k = std::min(n, pool.size());
  // Partial Fisher-Yates; the chosen records are returned in pool order.
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<RawRecord> out;
  out.reserve(k);
  for (auto i : idx) out.push_back(*pool[i]);
  return out;
}

std::unordered_set<std::string> user_set(std::span<const RawRecord> records) {
  std::unordered_set<std::string> out;
  for (const auto& r : records) out.insert(r.user_id);
  return out;
}

}  // namespace geoloc
