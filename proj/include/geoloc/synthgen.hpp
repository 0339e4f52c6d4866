#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "geoloc/corpus.hpp"
#include "geoloc/types.hpp"

namespace geoloc {

struct VocabEntry {
  std::string token;
  double probability = 1.0;  // relative emission weight within the city
  double specificity = 1.0;  // chance the token is emitted rather than a shared one
};

struct CityModel {
  std::string name;  // also the toponym written into `lo`
  GeoPoint center;
  double sigma_deg = 0.3;
  double weight = 1.0;
  std::vector<VocabEntry> vocabulary;
  std::string language;
  std::string timezone;
};

struct SynthConfig {
  std::vector<CityModel> cities;
  std::vector<std::string> shared_tokens;
  std::size_t n_messages = 1000;
  std::size_t tokens_per_message = 6;
  double location_probability = 0.9;     // lo holds the city name
  double description_probability = 0.5;  // ds holds a few more tokens
  double language_noise = 0.0;           // ln taken from a random city instead
  double timezone_noise = 0.0;
  TimePoint start{};
  double days = 1.0;  // timestamps uniform in [start, start + days)
  std::size_t messages_per_user = 1;
  std::string id_prefix = "m";
  std::string user_prefix = "u";
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on an unusable config.
  void validate() const;
};

struct SynthCorpus {
  std::vector<RawRecord> records;
  std::vector<std::uint32_t> city;  // generating city of each record
};

SynthCorpus generate(const SynthConfig& config);
/// Streams NDJSON lines; same records as generate().
void generate_to(std::ostream& out, const SynthConfig& config);

/// Fixed-width lowercase code, so concatenations stay unambiguous.
std::string letter_code(std::size_t n, std::size_t width = 3);

/// Up to 20 well separated real-world cities with equal weights. Each gets
/// `vocab_size` private tokens with Zipf-like emission weights.
std::vector<CityModel> world_cities(std::size_t n, double sigma_deg = 0.3, std::size_t vocab_size = 12,
                                    double specificity = 0.8);
std::vector<std::string> shared_vocabulary(std::size_t n);

/// Reads the JSON city config described in the README.
SynthConfig load_synth_config(const std::filesystem::path& path);

}  // namespace geoloc
