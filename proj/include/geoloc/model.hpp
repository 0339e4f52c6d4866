#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geoloc/corpus.hpp"
#include "geoloc/gmm.hpp"
#include "geoloc/types.hpp"
#include "geoloc/weighting.hpp"

namespace geoloc {

/// How n-gram mixture weights are set.
enum class Algorithm : std::uint8_t {
  one,         // every n-gram weighted 1
  all_tweets,  // one corpus-wide mixture for every message
  err_sae,     // 1 / (e_j + eps)^alpha
  qpr,         // quality property, see TrainConfig::qpr_property
  opt_id,
  opt_attr,
  opt_both,
};

std::string_view algorithm_id(Algorithm a);
/// Accepts the CLI ids: one, all-tweets, err-sae, qpr, qpr-covar-sum-prod,
/// qpr-aic, qpr-<property>, opt-id, opt-attr, opt-both.
struct AlgorithmSpec {
  Algorithm algorithm;
  std::optional<QualityProperty> property;
};
std::optional<AlgorithmSpec> parse_algorithm(std::string_view id);

struct TrainConfig {
  Algorithm algorithm = Algorithm::err_sae;
  double alpha = 4.0;
  double lambda = 1.0;
  QualityProperty qpr_property = QualityProperty::covar_sum_prod;
  std::vector<Field> fields = {Field::lo, Field::tz, Field::tx, Field::ln};
  std::size_t min_instances = 3;
  int max_components = 20;  // 1 gives the single-gaussian variants
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  EmOptions em{};
  LbfgsOptions lbfgs{};

  /// Display name in the usual naming scheme, e.g. "GMM-Err-SAE4".
  std::string display_name() const;
};

struct ModelEntry {
  NGram ngram;
  Gmm2D gmm;
  double weight = 1.0;  // raw, unnormalized
  QualityProperties properties;
  double mean_error = 0.0;  // e_j, km
  std::size_t n_messages = 0;
};

struct Provenance {
  std::int64_t train_begin = 0;  // unix seconds
  std::int64_t train_end = 0;
  std::uint64_t corpus_hash = 0;
  std::size_t n_training = 0;
};

/// A trained n-gram -> (mixture, weight) map. Immutable once built.
class LocationModel {
 public:
  LocationModel() = default;
  LocationModel(TrainConfig config, Provenance provenance, std::vector<ModelEntry> entries,
                std::optional<Gmm2D> all_tweets = std::nullopt);

  const TrainConfig& config() const { return config_; }
  const Provenance& provenance() const { return provenance_; }
  const std::vector<ModelEntry>& entries() const { return entries_; }
  const ModelEntry* find(const NGram& g) const;
  const std::optional<Gmm2D>& all_tweets() const { return all_tweets_; }

 private:
  TrainConfig config_;
  Provenance provenance_;
  std::vector<ModelEntry> entries_;  // sorted by n-gram
  std::optional<Gmm2D> all_tweets_;
  std::unordered_map<NGram, std::size_t, NGramHash> index_;
};

/// Trains from tokenized, geotagged messages.
LocationModel train(std::span<const Message> messages, const TrainConfig& config, Provenance provenance = {});
/// Tokenizes with config.fields, then trains. Provenance records the corpus hash.
LocationModel train(std::span<const RawRecord> records, const TrainConfig& config,
                    std::optional<Interval> interval = std::nullopt);

struct Contribution {
  NGram ngram;
  double share = 0.0;
};

/// The flattened message mixture, its per-n-gram weight shares (descending),
/// and the weighted-mean point estimate.
struct MessageDensity {
  Gmm2D gmm;
  std::vector<Contribution> contributions;
  GeoPoint point_estimate;
};

/// Returns nothing iff the message has no n-gram known to the model.
std::optional<MessageDensity> locate(const LocationModel& model, const Message& message);

/// Weighted average of component means, wrapped onto the globe.
GeoPoint point_estimate(const Gmm2D& g);

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const LocationModel& model);
/// Throws ModelLoadError (bad_magic, version, truncated, checksum, format).
LocationModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const LocationModel& model, const std::filesystem::path& path);
LocationModel load_model(const std::filesystem::path& path);

}  // namespace geoloc
