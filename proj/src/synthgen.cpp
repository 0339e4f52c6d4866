#include "geoloc/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "geoloc/errors.hpp"
#include "geoloc/random.hpp"

namespace geoloc {

namespace {

struct Site {
  const char* name;
  double lon, lat;
  const char* language;
  const char* timezone;
};

constexpr Site kSites[] = {
    {"newyork", -74.006, 40.713, "en", "Eastern Time (US & Canada)"},
    {"london", -0.128, 51.507, "en-gb", "London"},
    {"tokyo", 139.692, 35.690, "ja", "Tokyo"},
    {"sydney", 151.209, -33.869, "en-au", "Sydney"},
    {"saopaulo", -46.633, -23.551, "pt", "Brasilia"},
    {"cairo", 31.236, 30.044, "ar", "Cairo"},
    {"moscow", 37.618, 55.756, "ru", "Moscow"},
    {"mumbai", 72.878, 19.076, "hi", "Mumbai"},
    {"lagos", 3.379, 6.524, "yo", "West Central Africa"},
    {"losangeles", -118.244, 34.052, "es", "Pacific Time (US & Canada)"},
    {"mexicocity", -99.133, 19.433, "es-mx", "Mexico City"},
    {"jakarta", 106.846, -6.208, "id", "Jakarta"},
    {"istanbul", 28.978, 41.008, "tr", "Istanbul"},
    {"seoul", 126.978, 37.567, "ko", "Seoul"},
    {"buenosaires", -58.382, -34.604, "es-ar", "Buenos Aires"},
    {"nairobi", 36.822, -1.292, "sw", "Nairobi"},
    {"paris", 2.352, 48.857, "fr", "Paris"},
    {"chicago", -87.630, 41.878, "en-us", "Central Time (US & Canada)"},
    {"bangkok", 100.502, 13.756, "th", "Bangkok"},
    {"perth", 115.861, -31.951, "en-au", "Perth"},
};

std::size_t pick_weighted(Rng& rng, const std::vector<double>& cumulative) {
  std::uniform_real_distribution<double> u(0.0, cumulative.back());
  const double x = u(rng);
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

std::vector<double> cumulate(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) c[i] = s += w[i];
  return c;
}

template <typename Emit>
void run(const SynthConfig& cfg, Emit&& emit) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "synth"));
  std::vector<double> city_w;
  std::vector<std::vector<double>> vocab_cum;
  for (const auto& c : cfg.cities) {
    city_w.push_back(c.weight);
    std::vector<double> w;
    for (const auto& v : c.vocabulary) w.push_back(v.probability);
    vocab_cum.push_back(cumulate(w));
  }
  const auto city_cum = cumulate(city_w);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_city(0, cfg.cities.size() - 1);
  const auto span_s = days_to_seconds(cfg.days).count();
  std::uniform_int_distribution<std::int64_t> offset(0, std::max<std::int64_t>(span_s - 1, 0));

  auto words = [&](std::size_t city, std::size_t count) {
    std::string out;
    const auto& c = cfg.cities[city];
    for (std::size_t k = 0; k < count; ++k) {
      const auto& entry = c.vocabulary[pick_weighted(rng, vocab_cum[city])];
      std::string tok = entry.token;
      if (unit(rng) >= entry.specificity && !cfg.shared_tokens.empty())
        tok = cfg.shared_tokens[std::uniform_int_distribution<std::size_t>(0, cfg.shared_tokens.size() - 1)(rng)];
      if (!out.empty()) out += ' ';
      out += tok;
    }
    return out;
  };

  std::size_t city = 0;
  for (std::size_t i = 0; i < cfg.n_messages; ++i) {
    const std::size_t user = i / cfg.messages_per_user;
    if (i % cfg.messages_per_user == 0) city = pick_weighted(rng, city_cum);
    const CityModel& c = cfg.cities[city];

    RawRecord r;
    r.id = cfg.id_prefix + std::to_string(i);
    r.user_id = cfg.user_prefix + std::to_string(user);
    r.timestamp = cfg.start + std::chrono::seconds(offset(rng));
    const double lon = c.center.lon + c.sigma_deg * normal(rng);
    const double lat = c.center.lat + c.sigma_deg * normal(rng);
    r.origin = wrap_to_globe(Vector2(lon, lat));
    r.text = words(city, cfg.tokens_per_message);
    if (unit(rng) < cfg.description_probability) r.user_description = words(city, 3);
    if (unit(rng) < cfg.location_probability) r.user_location = c.name;
    r.user_lang = (unit(rng) < cfg.language_noise ? cfg.cities[any_city(rng)] : c).language;
    r.user_timezone = (unit(rng) < cfg.timezone_noise ? cfg.cities[any_city(rng)] : c).timezone;
    emit(std::move(r), static_cast<std::uint32_t>(city));
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (cities.empty()) throw std::invalid_argument("synthetic config needs at least one city");
  double total = 0.0;
  for (const auto& c : cities) {
    if (!(c.sigma_deg > 0.0)) throw std::invalid_argument("city " + c.name + ": sigma must be positive");
    if (!(c.weight >= 0.0)) throw std::invalid_argument("city " + c.name + ": negative weight");
    if (!c.center.valid()) throw std::invalid_argument("city " + c.name + ": center out of range");
    if (c.vocabulary.empty()) throw std::invalid_argument("city " + c.name + ": empty vocabulary");
    for (const auto& v : c.vocabulary) {
      if (!(v.probability > 0.0)) throw std::invalid_argument("token " + v.token + ": probability must be positive");
      if (!(v.specificity >= 0.0 && v.specificity <= 1.0))
        throw std::invalid_argument("token " + v.token + ": specificity outside [0, 1]");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("city weights must sum to 1");
  if (messages_per_user == 0) throw std::invalid_argument("messages_per_user must be positive");
  if (!(days > 0.0)) throw std::invalid_argument("days must be positive");
  for (double p : {location_probability, description_probability, language_noise, timezone_noise})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
}

SynthCorpus generate(const SynthConfig& config) {
  SynthCorpus out;
  out.records.reserve(config.n_messages);
  out.city.reserve(config.n_messages);
  run(config, [&](RawRecord r, std::uint32_t c) {
    out.records.push_back(std::move(r));
    out.city.push_back(c);
  });
  return out;
}

void generate_to(std::ostream& out, const SynthConfig& config) {
  run(config, [&](RawRecord r, std::uint32_t) { out << serialize_record(r) << '\n'; });
}

std::string letter_code(std::size_t n, std::size_t width) {
  std::string s(width, 'a');
  for (std::size_t i = width; i-- > 0;) {
    s[i] = static_cast<char>('a' + n % 26);
    n /= 26;
  }
  return s;
}

std::vector<CityModel> world_cities(std::size_t n, double sigma_deg, std::size_t vocab_size, double specificity) {
  constexpr std::size_t kMax = std::size(kSites);
  if (n == 0 || n > kMax) throw std::invalid_argument("world_cities supports 1 to 20 cities");
  std::vector<CityModel> out;
  for (std::size_t i = 0; i < n; ++i) {
    CityModel c;
    c.name = kSites[i].name;
    c.center = {kSites[i].lon, kSites[i].lat};
    c.sigma_deg = sigma_deg;
    c.weight = 1.0 / static_cast<double>(n);
    c.language = kSites[i].language;
    c.timezone = kSites[i].timezone;
    for (std::size_t j = 0; j < vocab_size; ++j)
      c.vocabulary.push_back({"t" + letter_code(i) + letter_code(j), 1.0 / static_cast<double>(j + 1), specificity});
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> shared_vocabulary(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < n; ++j) out.push_back("s" + letter_code(j));
  return out;
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    SynthConfig c;
    for (const auto& jc : j.at("cities")) {
      CityModel m;
      m.name = jc.at("name").get<std::string>();
      m.center = {jc.at("lon").get<double>(), jc.at("lat").get<double>()};
      m.sigma_deg = jc.value("sigma", 0.3);
      m.weight = jc.value("weight", 1.0 / static_cast<double>(j.at("cities").size()));
      m.language = jc.value("language", m.name);
      m.timezone = jc.value("timezone", m.name);
      if (jc.contains("vocabulary")) {
        for (const auto& jv : jc.at("vocabulary"))
          m.vocabulary.push_back(
              {jv.at("token").get<std::string>(), jv.value("probability", 1.0), jv.value("specificity", 1.0)});
      } else {
        const std::size_t n = jc.value("vocabulary_size", std::size_t{12});
        const double spec = jc.value("specificity", 0.8);
        for (std::size_t k = 0; k < n; ++k)
          m.vocabulary.push_back({m.name + letter_code(k), 1.0 / static_cast<double>(k + 1), spec});
      }
      c.cities.push_back(std::move(m));
    }
    if (j.contains("shared_tokens")) {
      if (j.at("shared_tokens").is_number())
        c.shared_tokens = shared_vocabulary(j.at("shared_tokens").get<std::size_t>());
      else
        c.shared_tokens = j.at("shared_tokens").get<std::vector<std::string>>();
    }
    c.n_messages = j.value("messages", c.n_messages);
    c.tokens_per_message = j.value("tokens_per_message", c.tokens_per_message);
    c.location_probability = j.value("location_probability", c.location_probability);
    c.description_probability = j.value("description_probability", c.description_probability);
    c.language_noise = j.value("language_noise", c.language_noise);
    c.timezone_noise = j.value("timezone_noise", c.timezone_noise);
    c.days = j.value("days", c.days);
    c.messages_per_user = j.value("messages_per_user", c.messages_per_user);
    c.id_prefix = j.value("id_prefix", c.id_prefix);
    c.user_prefix = j.value("user_prefix", c.user_prefix);
    c.seed = j.value("seed", c.seed);
    if (j.contains("start")) {
      auto t = parse_date(j.at("start").get<std::string>());
      if (!t) throw DataError(path.string() + ": bad start date");
      c.start = *t;
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace geoloc
