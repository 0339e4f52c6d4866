#include "geoloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "geoloc/errors.hpp"
#include "geoloc/parallel.hpp"
#include "geoloc/random.hpp"
#include "geoloc/tokenize.hpp"

namespace geoloc {

std::string_view algorithm_id(Algorithm a) {
  switch (a) {
    case Algorithm::one: return "one";
    case Algorithm::all_tweets: return "all-tweets";
    case Algorithm::err_sae: return "err-sae";
    case Algorithm::qpr: return "qpr";
    case Algorithm::opt_id: return "opt-id";
    case Algorithm::opt_attr: return "opt-attr";
    case Algorithm::opt_both: return "opt-both";
  }
  return "?";
}

std::optional<AlgorithmSpec> parse_algorithm(std::string_view id) {
  for (auto a : {Algorithm::one, Algorithm::all_tweets, Algorithm::err_sae, Algorithm::qpr, Algorithm::opt_id,
                 Algorithm::opt_attr, Algorithm::opt_both})
    if (algorithm_id(a) == id) return AlgorithmSpec{a, std::nullopt};
  if (id.starts_with("qpr-")) {
    if (auto p = parse_property(id.substr(4))) return AlgorithmSpec{Algorithm::qpr, p};
  }
  return std::nullopt;
}

std::string TrainConfig::display_name() const {
  std::string name = max_components == 1 ? "Gaussian-" : "GMM-";
  switch (algorithm) {
    case Algorithm::one: return name + "One";
    case Algorithm::all_tweets: return name + "All-Tweets";
    case Algorithm::err_sae: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", alpha);
      return name + "Err-SAE" + buf;
    }
    case Algorithm::qpr: {
      std::string prop(property_name(qpr_property));
      if (qpr_property == QualityProperty::aic || qpr_property == QualityProperty::bic) {
        for (auto& c : prop) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      } else {
        bool up = true;
        for (auto& c : prop) {
          if (up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
          up = c == '-';
        }
      }
      return name + "Qpr-" + prop;
    }
    case Algorithm::opt_id: return name + "Opt-ID";
    case Algorithm::opt_attr: return name + "Opt-Attr";
    case Algorithm::opt_both: return name + "Opt-Both";
  }
  return name;
}

LocationModel::LocationModel(TrainConfig config, Provenance provenance, std::vector<ModelEntry> entries,
                             std::optional<Gmm2D> all_tweets)
    : config_(std::move(config)),
      provenance_(provenance),
      entries_(std::move(entries)),
      all_tweets_(std::move(all_tweets)) {
  std::sort(entries_.begin(), entries_.end(), [](const ModelEntry& a, const ModelEntry& b) { return a.ngram < b.ngram; });
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].ngram, i);
}

const ModelEntry* LocationModel::find(const NGram& g) const {
  auto it = index_.find(g);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

namespace {

Gmm2D fit_points(std::span<const Vector2> points, const TrainConfig& config, std::string_view label) {
  const int r = choose_components(points.size(), config.max_components);
  return fit_em<double>(points, r, derive_seed(config.seed, label), config.em).model;
}

}  // namespace

LocationModel train(std::span<const Message> messages, const TrainConfig& config, Provenance provenance) {
  if (messages.empty()) throw DataError("empty training set");
  for (const auto& m : messages)
    if (!m.origin) throw DataError("training message " + m.id + " has no geotag");
  provenance.n_training = messages.size();

  if (config.algorithm == Algorithm::all_tweets) {
    std::vector<Vector2> points;
    points.reserve(messages.size());
    for (const auto& m : messages) points.push_back(m.origin->vec());
    return LocationModel(config, provenance, {}, fit_points(points, config, "all-tweets"));
  }

  std::map<NGram, std::vector<std::uint32_t>> occurrences;
  for (std::size_t i = 0; i < messages.size(); ++i)
    for (const auto& g : messages[i].grams) occurrences[g].push_back(static_cast<std::uint32_t>(i));

  std::vector<ModelEntry> entries;
  std::vector<const std::vector<std::uint32_t>*> members;
  for (auto& [g, idx] : occurrences) {
    if (idx.size() < config.min_instances) continue;
    ModelEntry e;
    e.ngram = g;
    entries.push_back(std::move(e));
    members.push_back(&idx);
  }
  if (entries.empty()) throw DataError("no n-gram occurs at least min_instances times");

  const std::size_t V = entries.size();
  parallel_for(V, config.threads, [&](std::size_t j) {
    std::vector<Vector2> points;
    points.reserve(members[j]->size());
    for (auto i : *members[j]) points.push_back(messages[i].origin->vec());
    entries[j].gmm = fit_points(points, config, "em:" + to_string(entries[j].ngram));
    entries[j].properties = quality_properties(entries[j].gmm, points);
  });

  std::vector<std::vector<std::uint32_t>> message_ngrams(messages.size());
  for (std::uint32_t j = 0; j < V; ++j)
    for (auto i : *members[j]) message_ngrams[i].push_back(j);
  std::vector<GeoPoint> origins;
  origins.reserve(messages.size());
  for (const auto& m : messages) origins.push_back(*m.origin);
  std::vector<Gmm2D> gmms;
  gmms.reserve(V);
  for (const auto& e : entries) gmms.push_back(e.gmm);
  const ErrorTable errors = training_errors(gmms, message_ngrams, origins);
  for (std::size_t j = 0; j < V; ++j) {
    entries[j].mean_error = errors.mean_error[j];
    entries[j].n_messages = errors.count[j];
  }

  std::vector<QualityProperties> props;
  props.reserve(V);
  for (const auto& e : entries) props.push_back(e.properties);

  switch (config.algorithm) {
    case Algorithm::one:
      for (auto& e : entries) e.weight = 1.0;
      break;
    case Algorithm::err_sae:
      for (auto& e : entries) e.weight = weight_inverse_error(e.mean_error, config.alpha);
      break;
    case Algorithm::qpr: {
      const auto w = qpr_weights(props, config.qpr_property);
      for (std::size_t j = 0; j < V; ++j) entries[j].weight = w[j];
      break;
    }
    case Algorithm::opt_id:
    case Algorithm::opt_attr:
    case Algorithm::opt_both: {
      const FeatureMode mode = config.algorithm == Algorithm::opt_id     ? FeatureMode::id
                               : config.algorithm == Algorithm::opt_attr ? FeatureMode::attr
                                                                         : FeatureMode::both;
      const FeatureSet features = build_features(props, mode);
      const auto result = optimize_theta(errors, features, {config.lambda, config.lbfgs});
      for (std::size_t j = 0; j < V; ++j) entries[j].weight = delta_logistic(features.per_ngram[j], result.theta);
      break;
    }
    case Algorithm::all_tweets:
      break;
  }
  for (const auto& e : entries)
    if (!std::isfinite(e.weight) || e.weight < 0) throw NumericalError("non-finite weight for " + to_string(e.ngram));
  return LocationModel(config, provenance, std::move(entries));
}

LocationModel train(std::span<const RawRecord> records, const TrainConfig& config, std::optional<Interval> interval) {
  if (config.fields.empty()) throw std::invalid_argument("no fields selected");
  std::vector<Message> messages(records.size());
  parallel_for(records.size(), config.threads,
               [&](std::size_t i) { messages[i] = tokenize_message(records[i], config.fields); });
  Provenance prov;
  prov.corpus_hash = corpus_hash(records);
  if (interval) {
    prov.train_begin = interval->begin.time_since_epoch().count();
    prov.train_end = interval->end.time_since_epoch().count();
  }
  return train(messages, config, prov);
}

GeoPoint point_estimate(const Gmm2D& g) { return wrap_to_globe(g.mean()); }

std::optional<MessageDensity> locate(const LocationModel& model, const Message& message) {
  if (model.all_tweets()) {
    MessageDensity md{*model.all_tweets(), {}, point_estimate(*model.all_tweets())};
    return md;
  }
  std::vector<const ModelEntry*> known;
  for (const auto& g : message.grams)
    if (const ModelEntry* e = model.find(g)) known.push_back(e);
  if (known.empty()) return std::nullopt;

  std::vector<double> raw;
  raw.reserve(known.size());
  for (const auto* e : known) raw.push_back(e->weight);
  const std::vector<double> shares = normalize_weights(raw);

  std::vector<GaussComponent2D> comps;
  double total = 0.0;
  for (std::size_t j = 0; j < known.size(); ++j) {
    if (!(shares[j] > 0)) continue;
    for (const auto& c : known[j]->gmm.components()) {
      const double tau = shares[j] * c.weight;
      if (!(tau > 0)) continue;
      comps.push_back({tau, c.mean, c.cov});
      total += tau;
    }
  }
  for (auto& c : comps) c.weight /= total;

  MessageDensity md;
  md.gmm = Gmm2D(std::move(comps));
  md.contributions.reserve(known.size());
  for (std::size_t j = 0; j < known.size(); ++j) md.contributions.push_back({known[j]->ngram, shares[j]});
  std::stable_sort(md.contributions.begin(), md.contributions.end(),
                   [](const Contribution& a, const Contribution& b) { return a.share > b.share; });
  md.point_estimate = point_estimate(md.gmm);
  return md;
}

}  // namespace geoloc
