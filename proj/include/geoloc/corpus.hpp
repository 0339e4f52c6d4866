#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "geoloc/types.hpp"

namespace geoloc {

/// One corpus line as stored on disk.
struct RawRecord {
  std::string id;
  std::string user_id;
  TimePoint timestamp{};
  std::optional<GeoPoint> origin;
  std::string text;              // tx
  std::string user_description;  // ds
  std::string user_location;     // lo
  std::string user_lang;         // ln
  std::string user_timezone;     // tz

  const std::string& field(Field f) const;
  std::string& field(Field f);

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

/// Parses an RFC 3339 timestamp ("2012-05-01T00:00:00Z", offsets and
/// fractional seconds accepted; fractions are truncated).
std::optional<TimePoint> parse_rfc3339(std::string_view s);
std::string format_rfc3339(TimePoint t);
/// Parses "YYYY-MM-DD" or a full RFC 3339 timestamp.
std::optional<TimePoint> parse_date(std::string_view s);

/// Parses one NDJSON line. Throws ParseError carrying `line_no`.
RawRecord parse_record(std::string_view line, std::size_t line_no = 0);
std::string serialize_record(const RawRecord& r);

struct ReadOptions {
  bool skip_bad_lines = false;
};

struct ReadStats {
  std::size_t lines = 0;
  std::size_t skipped = 0;
};

/// Streams every line of every file into records.
std::vector<RawRecord> read_corpus(std::span<const std::filesystem::path> paths,
                                   const ReadOptions& options = {}, ReadStats* stats = nullptr);
/// Expands shell-style globs; literal paths that match nothing are kept so the
/// caller gets a clear "cannot open" error.
std::vector<std::filesystem::path> expand_globs(std::span<const std::string> patterns);
void write_corpus(const std::filesystem::path& path, std::span<const RawRecord> records);

/// Order-independent-of-input content hash used as model provenance.
std::uint64_t corpus_hash(std::span<const RawRecord> records);

/// Merges each user's records into one message (texts joined by newlines,
/// origin of the earliest geotagged record). Used for user-level datasets.
std::vector<RawRecord> concatenate_by_user(std::span<const RawRecord> records);

/// Half-open time interval [begin, end).
struct Interval {
  TimePoint begin{};
  TimePoint end{};

  bool contains(TimePoint t) const { return begin <= t && t < end; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Schedule {
  double training_days = 1.0;
  double test_days = 1.0;
  double gap_days = 0.0;
  double stride_days = 6.0;
  std::size_t test_sample_size = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Window {
  std::size_t index = 0;
  Interval train;
  Interval test;
};

std::chrono::seconds days_to_seconds(double days);

/// Windows start at corpus_start and advance by the stride; each test
/// interval begins `gap` after its training interval ends. Windows whose test
/// interval runs past corpus_end are dropped.
std::vector<Window> schedule_windows(TimePoint corpus_start, TimePoint corpus_end,
                                     const Schedule& s);

/// Geotagged records in the interval, keeping only each user's first record
/// by (timestamp, id).
std::vector<RawRecord> select_training(std::span<const RawRecord> records, const Interval& interval);

/// Seeded uniform sample of at most n geotagged records in the interval whose
/// users do not appear in `training_users`.
std::vector<RawRecord> select_test(std::span<const RawRecord> records, const Interval& interval,
                                   const std::unordered_set<std::string>& training_users,
                                   std::size_t n, std::uint64_t seed);

std::unordered_set<std::string> user_set(std::span<const RawRecord> records);

}  // namespace geoloc
