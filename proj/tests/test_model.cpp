#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geoloc/errors.hpp"
#include "geoloc/geo.hpp"
#include "geoloc/model.hpp"
#include "geoloc/synthgen.hpp"
#include "geoloc/tokenize.hpp"

using namespace geoloc;

namespace {

SynthConfig two_cities(std::size_t n, std::uint64_t seed, const std::string& prefix = "u") {
  SynthConfig c;
  c.cities = world_cities(2, 0.3, 8, 1.0);
  c.n_messages = n;
  c.seed = seed;
  c.user_prefix = prefix;
  c.id_prefix = prefix + "m";
  return c;
}

Message msg(std::vector<NGram> grams, GeoPoint origin) {
  Message m;
  m.id = "x";
  std::sort(grams.begin(), grams.end());
  m.grams = std::move(grams);
  m.origin = origin;
  return m;
}

}  // namespace

TEST(Model, AlgorithmIdsAndNames) {
  EXPECT_EQ(parse_algorithm("err-sae")->algorithm, Algorithm::err_sae);
  EXPECT_EQ(parse_algorithm("qpr-aic")->property, QualityProperty::aic);
  EXPECT_EQ(parse_algorithm("qpr-covar-sum-prod")->property, QualityProperty::covar_sum_prod);
  EXPECT_EQ(parse_algorithm("opt-both")->algorithm, Algorithm::opt_both);
  EXPECT_FALSE(parse_algorithm("qpr-bogus"));
  EXPECT_FALSE(parse_algorithm("magic"));
  TrainConfig c;
  EXPECT_EQ(c.display_name(), "GMM-Err-SAE4");
  c.alpha = 0.5;
  EXPECT_EQ(c.display_name(), "GMM-Err-SAE0.5");
  c.algorithm = Algorithm::qpr;
  EXPECT_EQ(c.display_name(), "GMM-Qpr-Covar-Sum-Prod");
  c.qpr_property = QualityProperty::aic;
  EXPECT_EQ(c.display_name(), "GMM-Qpr-AIC");
  c.algorithm = Algorithm::all_tweets;
  c.max_components = 1;
  EXPECT_EQ(c.display_name(), "Gaussian-All-Tweets");
}

TEST(Model, MinInstancesThreshold) {
  const NGram a{Field::tx, "a"}, b{Field::tx, "b"};
  std::vector<Message> ms{msg({a, b}, {0, 0}), msg({a}, {0.1, 0}), msg({a, b}, {0, 0.1})};
  TrainConfig c;
  c.min_instances = 3;
  const auto m = train(std::span<const Message>(ms), c);
  ASSERT_EQ(m.entries().size(), 1u);
  EXPECT_EQ(m.entries()[0].ngram, a);
  EXPECT_EQ(m.entries()[0].n_messages, 3u);
  EXPECT_TRUE(m.find(a));
  EXPECT_FALSE(m.find(b));
  c.min_instances = 2;
  EXPECT_EQ(train(std::span<const Message>(ms), c).entries().size(), 2u);
  c.min_instances = 4;
  EXPECT_THROW(train(std::span<const Message>(ms), c), DataError);
  EXPECT_THROW(train(std::span<const Message>{}, c), DataError);
  ms[0].origin.reset();
  EXPECT_THROW(train(std::span<const Message>(ms), TrainConfig{}), DataError);
}

TEST(Model, InverseErrorWeightsFollowMeanError) {
  const auto corpus = generate(two_cities(600, 1));
  TrainConfig c;
  c.fields = {Field::tx, Field::lo};
  const auto m = train(std::span<const RawRecord>(corpus.records), c);
  ASSERT_FALSE(m.entries().empty());
  for (const auto& e : m.entries()) {
    EXPECT_DOUBLE_EQ(e.weight, 1 / std::pow(e.mean_error + 1.0, 4.0));
    EXPECT_GE(e.n_messages, 3u);
  }
  EXPECT_EQ(m.provenance().n_training, 600u);
  EXPECT_EQ(m.provenance().corpus_hash, corpus_hash(corpus.records));
}

TEST(Model, TwoDisjointCitiesAreRecovered) {
  // success 100% and median SAE well under three sigma
  const auto train_set = generate(two_cities(2000, 1));
  const auto test_set = generate(two_cities(300, 2, "t"));
  TrainConfig c;
  const auto m = train(std::span<const RawRecord>(train_set.records), c);
  std::vector<double> sae;
  for (const auto& r : test_set.records) {
    const auto md = locate(m, tokenize_message(r, c.fields));
    ASSERT_TRUE(md);
    sae.push_back(geodesic_distance(md->point_estimate, *r.origin));
  }
  std::nth_element(sae.begin(), sae.begin() + 150, sae.end());
  EXPECT_LT(sae[150], 3 * 0.3 * 111.195);
}

TEST(Model, LocateFlattensMixtures) {
  const NGram a{Field::tx, "a"}, b{Field::tx, "b"}, z{Field::tx, "zzz"};
  std::vector<Message> ms;
  for (int i = 0; i < 20; ++i) {
    ms.push_back(msg({a}, {0.01 * i, 0.02 * (i % 3)}));
    ms.push_back(msg({b}, {30 + 0.03 * i, 10 - 0.01 * (i % 4)}));
  }
  TrainConfig c;
  const auto m = train(std::span<const Message>(ms), c);
  const auto md = locate(m, msg({a, b, z}, {0, 0}));
  ASSERT_TRUE(md);
  ASSERT_EQ(md->contributions.size(), 2u);
  EXPECT_GE(md->contributions[0].share, md->contributions[1].share);
  EXPECT_NEAR(md->contributions[0].share + md->contributions[1].share, 1.0, 1e-12);
  const auto* ea = m.find(a);
  const auto* eb = m.find(b);
  EXPECT_EQ(md->gmm.size(), ea->gmm.size() + eb->gmm.size());
  const double share_a = ea->weight / (ea->weight + eb->weight);
  double mass_a = 0;
  for (const auto& comp : md->gmm.components())
    if (comp.mean.x() < 15) mass_a += comp.weight;
  EXPECT_NEAR(mass_a, share_a, 1e-12);
  // the density is the share-weighted sum of n-gram densities
  const Vector2 p(0.1, 0.01);
  EXPECT_NEAR(md->gmm.density(p), share_a * ea->gmm.density(p) + (1 - share_a) * eb->gmm.density(p),
              1e-9 * md->gmm.density(p));
  EXPECT_FALSE(locate(m, msg({z}, {0, 0})));
  EXPECT_FALSE(locate(m, msg({}, {0, 0})));
}

TEST(Model, ScalingWeightsLeavesDensityUnchanged) {
  const auto corpus = generate(two_cities(400, 3));
  TrainConfig c;
  const auto m = train(std::span<const RawRecord>(corpus.records), c);
  auto entries = m.entries();
  for (auto& e : entries) e.weight *= 1234.5;
  const LocationModel scaled(m.config(), m.provenance(), entries);
  for (std::size_t i = 0; i < 50; ++i) {
    const Message q = tokenize_message(corpus.records[i], c.fields);
    const auto a = locate(m, q), b = locate(scaled, q);
    ASSERT_TRUE(a && b);
    ASSERT_EQ(a->gmm.size(), b->gmm.size());
    for (std::size_t k = 0; k < a->gmm.size(); ++k)
      EXPECT_NEAR(a->gmm.components()[k].weight, b->gmm.components()[k].weight, 1e-12);
  }
}

TEST(Model, AllZeroWeightsFallBackToEqualShares) {
  const NGram a{Field::tx, "a"}, b{Field::tx, "b"};
  std::vector<Message> ms;
  for (int i = 0; i < 5; ++i) ms.push_back(msg({a, b}, {0.1 * i, 0}));
  const auto m = train(std::span<const Message>(ms), TrainConfig{});
  auto entries = m.entries();
  for (auto& e : entries) e.weight = 0;
  const LocationModel zero(m.config(), m.provenance(), entries);
  const auto md = locate(zero, msg({a, b}, {0, 0}));
  ASSERT_TRUE(md);
  EXPECT_DOUBLE_EQ(md->contributions[0].share, 0.5);
}

TEST(Model, AllTweetsIgnoresText) {
  const auto corpus = generate(two_cities(300, 4));
  TrainConfig c;
  c.algorithm = Algorithm::all_tweets;
  const auto m = train(std::span<const RawRecord>(corpus.records), c);
  ASSERT_TRUE(m.all_tweets());
  EXPECT_TRUE(m.entries().empty());
  const auto md = locate(m, msg({}, {0, 0}));
  ASSERT_TRUE(md);
  EXPECT_EQ(md->gmm.size(), m.all_tweets()->size());
  EXPECT_TRUE(md->contributions.empty());
}

TEST(Model, EveryAlgorithmTrains) {
  const auto corpus = generate(two_cities(500, 5));
  for (const char* id : {"one", "all-tweets", "err-sae", "qpr", "qpr-aic", "qpr-bic", "qpr-n-points", "opt-id",
                         "opt-attr", "opt-both"}) {
    TrainConfig c;
    const auto spec = parse_algorithm(id);
    ASSERT_TRUE(spec) << id;
    c.algorithm = spec->algorithm;
    if (spec->property) c.qpr_property = *spec->property;
    const auto m = train(std::span<const RawRecord>(corpus.records), c);
    for (const auto& e : m.entries()) EXPECT_TRUE(std::isfinite(e.weight) && e.weight >= 0) << id;
    EXPECT_TRUE(locate(m, tokenize_message(corpus.records[0], c.fields))) << id;
  }
}

TEST(Model, SingleGaussianVariant) {
  const auto corpus = generate(two_cities(500, 6));
  TrainConfig c;
  c.max_components = 1;
  const auto m = train(std::span<const RawRecord>(corpus.records), c);
  for (const auto& e : m.entries()) EXPECT_EQ(e.gmm.size(), 1u);
}

TEST(Model, TrainingIsDeterministicAcrossThreadCounts) {
  const auto corpus = generate(two_cities(500, 7));
  TrainConfig c;
  c.threads = 1;
  const auto a = serialize_model(train(std::span<const RawRecord>(corpus.records), c));
  c.threads = 4;
  const auto b = serialize_model(train(std::span<const RawRecord>(corpus.records), c));
  EXPECT_EQ(a, b);
}

TEST(ModelIo, RoundTrip) {
  const auto corpus = generate(two_cities(400, 8));
  TrainConfig c;
  c.algorithm = Algorithm::qpr;
  c.qpr_property = QualityProperty::bic;
  c.fields = {Field::tx, Field::tz};
  const auto m = train(std::span<const RawRecord>(corpus.records), c);
  const auto bytes = serialize_model(m);
  const auto back = deserialize_model(bytes);
  EXPECT_EQ(serialize_model(back), bytes);
  EXPECT_EQ(back.config().algorithm, Algorithm::qpr);
  EXPECT_EQ(back.config().qpr_property, QualityProperty::bic);
  EXPECT_EQ(back.config().fields, c.fields);
  ASSERT_EQ(back.entries().size(), m.entries().size());
  const Message q = tokenize_message(corpus.records[3], c.fields);
  EXPECT_EQ(locate(m, q)->gmm.log_density(Vector2(1, 2)), locate(back, q)->gmm.log_density(Vector2(1, 2)));

  c.algorithm = Algorithm::all_tweets;
  const auto all = train(std::span<const RawRecord>(corpus.records), c);
  EXPECT_EQ(serialize_model(deserialize_model(serialize_model(all))), serialize_model(all));

  const auto path = std::filesystem::temp_directory_path() / "geoloc_model_test.bin";
  save_model(m, path);
  EXPECT_EQ(serialize_model(load_model(path)), bytes);
}

TEST(ModelIo, CorruptionIsDetected) {
  const auto corpus = generate(two_cities(300, 9));
  const auto bytes = serialize_model(train(std::span<const RawRecord>(corpus.records), TrainConfig{}));
  auto kind_of = [](std::vector<std::uint8_t> b) {
    try {
      deserialize_model(b);
    } catch (const ModelLoadError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "corruption not detected";
    return ModelLoadError::Kind::io;
  };
  auto b = bytes;
  b[0] = 'X';
  EXPECT_EQ(kind_of(b), ModelLoadError::Kind::bad_magic);
  b = bytes;
  b[8] = 99;
  EXPECT_EQ(kind_of(b), ModelLoadError::Kind::version);
  b = bytes;
  b.resize(b.size() / 2);
  EXPECT_EQ(kind_of(b), ModelLoadError::Kind::truncated);
  b = bytes;
  b[b.size() / 2] ^= 0x40;
  EXPECT_EQ(kind_of(b), ModelLoadError::Kind::checksum);
  EXPECT_EQ(kind_of({}), ModelLoadError::Kind::truncated);
  EXPECT_THROW(load_model("/nonexistent/model.bin"), ModelLoadError);
}
