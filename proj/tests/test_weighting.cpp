#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "geoloc/geo.hpp"
#include "geoloc/lbfgs.hpp"
#include "geoloc/weighting.hpp"

using namespace geoloc;

namespace {

// Random toy problem: V n-grams, M messages, each message a random non-empty
// subset with random per-message errors.
struct Toy {
  ErrorTable table;
  FeatureSet features;
};

Toy random_toy(std::mt19937_64& rng, FeatureMode mode) {
  std::uniform_int_distribution<std::size_t> count(1, 10);
  std::uniform_real_distribution<double> err(0, 3000), prop(-5, 5);
  const std::size_t V = count(rng), M = count(rng);
  Toy t;
  std::vector<QualityProperties> props(V);
  for (auto& p : props)
    for (auto& v : p.values) v = prop(rng);
  t.features = build_features(props, mode);
  t.table.mean_error.assign(V, 0);
  t.table.count.assign(V, 0);
  for (std::size_t i = 0; i < M; ++i) {
    ErrorTable::Row row;
    for (std::uint32_t j = 0; j < V; ++j)
      if (rng() % 2) row.ngram.push_back(j);
    if (row.ngram.empty()) row.ngram.push_back(static_cast<std::uint32_t>(rng() % V));
    for (std::size_t k = 0; k < row.ngram.size(); ++k) row.error.push_back(err(rng));
    t.table.messages.push_back(row);
  }
  return t;
}

// Objective written directly from its definition.
double reference_objective(const Eigen::VectorXd& theta, const Toy& t, double lambda) {
  double total = 0;
  for (const auto& row : t.table.messages) {
    double num = 0, den = 0;
    for (std::size_t k = 0; k < row.ngram.size(); ++k) {
      double z = 0;
      for (const auto& [id, v] : t.features.per_ngram[row.ngram[k]].entries) z += v * theta[id];
      const double d = 1 / (1 + std::exp(-z));
      num += row.error[k] * d;
      den += d;
    }
    if (den > 0) total += num / den;
  }
  return total + 0.5 * lambda * theta.squaredNorm();
}

}  // namespace

TEST(Weighting, PropertyNames) {
  for (std::size_t k = 0; k < kQualityPropertyCount; ++k) {
    const auto p = static_cast<QualityProperty>(k);
    EXPECT_EQ(parse_property(property_name(p)), p);
  }
  EXPECT_EQ(property_name(QualityProperty::covar_sum_prod), "covar-sum-prod");
  EXPECT_FALSE(parse_property("nonsense"));
}

TEST(Weighting, QualityPropertiesByHand) {
  Eigen::Matrix2d c1, c2;
  c1 << 1, 0.5, 0.5, 2;
  c2 << 3, 0, 0, 1;
  const Gmm2D g({{0.5, Vector2(0, 0), c1}, {0.5, Vector2(1, 1), c2}}, 4, -10);
  const std::vector<Vector2> pts{{0, 0}, {2, 0}, {0, 2}, {2, 2}};
  const auto q = quality_properties(g, pts);
  using P = QualityProperty;
  EXPECT_DOUBLE_EQ(q[P::n_points], 4);
  EXPECT_DOUBLE_EQ(q[P::spatial_variance], 2.0);  // var x = 1, var y = 1
  EXPECT_DOUBLE_EQ(q[P::n_components], 2);
  EXPECT_DOUBLE_EQ(q[P::covar_sum], 4.0 + 4.0);
  EXPECT_DOUBLE_EQ(q[P::covar_sum_prod], 0.5 + 0.0);
  EXPECT_DOUBLE_EQ(q[P::variance_per_point], 0.5);
  EXPECT_DOUBLE_EQ(q[P::components_per_point], 0.5);
  EXPECT_DOUBLE_EQ(q[P::covar_sum_per_point], 2.0);
  EXPECT_DOUBLE_EQ(q[P::covar_sum_prod_per_point], 0.125);
  EXPECT_DOUBLE_EQ(q[P::points_per_component], 2);
  EXPECT_DOUBLE_EQ(q[P::variance_per_component], 1.0);
  EXPECT_DOUBLE_EQ(q[P::covar_sum_per_component], 4.0);
  EXPECT_DOUBLE_EQ(q[P::covar_sum_prod_per_component], 0.25);
  EXPECT_DOUBLE_EQ(q[P::aic], 2 * 11 + 20.0);
  EXPECT_DOUBLE_EQ(q[P::bic], 11 * std::log(4.0) + 20.0);
}

TEST(Weighting, QprWeights) {
  std::vector<QualityProperties> props(3);
  using P = QualityProperty;
  props[0][P::covar_sum_prod] = 2.0;
  props[1][P::covar_sum_prod] = -4.0;
  props[2][P::covar_sum_prod] = 0.0;
  props[0][P::aic] = 10;
  props[1][P::aic] = -5;
  props[2][P::aic] = 30;
  const auto w = qpr_weights(props, P::covar_sum_prod);
  EXPECT_DOUBLE_EQ(w[0], 1 / (2.0 + kQprEpsilon));
  EXPECT_DOUBLE_EQ(w[1], 1 / (4.0 + kQprEpsilon));
  EXPECT_DOUBLE_EQ(w[2], 1 / kQprEpsilon);
  const auto a = qpr_weights(props, P::aic);
  EXPECT_EQ(a, (std::vector<double>{20, 35, 0}));
}

TEST(Weighting, InverseErrorAndNormalization) {
  EXPECT_DOUBLE_EQ(weight_inverse_error(9, 2), 1.0 / 100);
  EXPECT_DOUBLE_EQ(weight_inverse_error(4, 0.5, 0), 0.5);
  EXPECT_TRUE(std::isfinite(weight_inverse_error(0, 10)));
  const std::vector<double> raw{1, 3, 0};
  EXPECT_EQ(normalize_weights(raw), (std::vector<double>{0.25, 0.75, 0}));
  EXPECT_EQ(normalize_weights(std::vector<double>{0, 0}), (std::vector<double>{0.5, 0.5}));
  EXPECT_TRUE(normalize_weights(std::vector<double>{}).empty());
}

TEST(Weighting, TrainingErrors) {
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  const std::vector<Gmm2D> models{Gmm2D({{1.0, Vector2(0, 0), I}}), Gmm2D({{1.0, Vector2(10, 0), I}})};
  const std::vector<std::vector<std::uint32_t>> msgs{{0, 1}, {1}, {}};
  const std::vector<GeoPoint> origins{{0, 0}, {10, 1}, {5, 5}};
  const auto t = training_errors(models, msgs, origins);
  const double deg = geodesic_distance({0, 0}, {1, 0});
  EXPECT_EQ(t.count, (std::vector<std::size_t>{1, 2}));
  EXPECT_NEAR(t.messages[0].error[0], 0, 1e-9);
  EXPECT_NEAR(t.messages[0].error[1], geodesic_distance({10, 0}, {0, 0}), 1e-9);
  EXPECT_NEAR(t.messages[1].error[0], deg, 1e-6);
  EXPECT_NEAR(t.mean_error[1], (geodesic_distance({10, 0}, {0, 0}) + deg) / 2, 1e-6);
  EXPECT_TRUE(t.messages[2].ngram.empty());
}

TEST(Weighting, Features) {
  std::vector<QualityProperties> props(3);
  for (std::size_t j = 0; j < 3; ++j) props[j][QualityProperty::n_points] = static_cast<double>(j);
  const auto id = build_features(props, FeatureMode::id);
  EXPECT_EQ(id.dimension, 3u);
  EXPECT_EQ(id.per_ngram[2].entries, (std::vector<std::pair<std::uint32_t, double>>{{2, 1.0}}));
  const auto attr = build_features(props, FeatureMode::attr);
  EXPECT_EQ(attr.dimension, kQualityPropertyCount);
  EXPECT_NEAR(attr.per_ngram[0].entries[0].second, -std::sqrt(1.5), 1e-12);
  EXPECT_EQ(attr.per_ngram[0].entries[1].second, 0.0);  // constant property
  const auto both = build_features(props, FeatureMode::both);
  EXPECT_EQ(both.dimension, kQualityPropertyCount + 3);
  EXPECT_EQ(both.per_ngram[1].entries.back().first, kQualityPropertyCount + 1);
}

TEST(Weighting, ObjectiveMatchesDefinition) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto toy = random_toy(rng, static_cast<FeatureMode>(trial % 3));
    Eigen::VectorXd theta(static_cast<Eigen::Index>(toy.features.dimension));
    for (auto& v : theta) v = n(rng);
    EXPECT_NEAR(objective(theta, toy.table, toy.features, 0.7), reference_objective(theta, toy, 0.7),
                1e-9 * std::abs(reference_objective(theta, toy, 0.7)));
  }
}

TEST(Weighting, ZeroThetaGivesMeanErrors) {
  // with every delta equal, each message contributes its plain mean error
  std::mt19937_64 rng(5);
  const auto toy = random_toy(rng, FeatureMode::id);
  double expected = 0;
  for (const auto& row : toy.table.messages) {
    double s = 0;
    for (double e : row.error) s += e;
    expected += s / static_cast<double>(row.error.size());
  }
  EXPECT_NEAR(objective(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(toy.features.dimension)), toy.table,
                        toy.features),
              expected, 1e-9 * expected);
}

TEST(Weighting, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto toy = random_toy(rng, static_cast<FeatureMode>(trial % 3));
    Eigen::VectorXd theta(static_cast<Eigen::Index>(toy.features.dimension));
    for (auto& v : theta) v = n(rng);
    const Eigen::VectorXd g = gradient(theta, toy.table, toy.features, 1.0);
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double h = 1e-5;
      Eigen::VectorXd up = theta, down = theta;
      up[k] += h;
      down[k] -= h;
      const double fd = (objective(up, toy.table, toy.features) - objective(down, toy.table, toy.features)) / (2 * h);
      EXPECT_LT(std::abs(g[k] - fd) / (std::abs(g[k]) + 1e-9), 1e-4) << "trial " << trial << " k " << k;
    }
  }
}

TEST(Weighting, OptimizationDecreasesObjectiveAndFavorsAccurateNgrams) {
  // n-gram 0 is always accurate, n-gram 1 always wrong; they co-occur
  ErrorTable t;
  t.mean_error = {10, 2000};
  t.count = {50, 50};
  for (int i = 0; i < 50; ++i) t.messages.push_back({{0, 1}, {10, 2000}});
  std::vector<QualityProperties> props(2);
  const auto fs = build_features(props, FeatureMode::id);
  const auto r = optimize_theta(t, fs, {});
  ASSERT_GE(r.objective_trace.size(), 2u);
  EXPECT_LT(r.objective_trace.back(), r.objective_trace.front());
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1]);
  EXPECT_GT(delta_logistic(fs.per_ngram[0], r.theta), delta_logistic(fs.per_ngram[1], r.theta));
  EXPECT_EQ(r.skipped_messages, 0u);
}

TEST(Weighting, SkippedMessagesCounted) {
  ErrorTable t;
  t.mean_error = {1};
  t.count = {1};
  t.messages = {{{0}, {1}}, {{}, {}}};
  std::vector<QualityProperties> props(1);
  const auto r = optimize_theta(t, build_features(props, FeatureMode::id), {});
  EXPECT_EQ(r.skipped_messages, 1u);
}

TEST(Lbfgs, Rosenbrock) {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  LbfgsOptions o;
  o.max_iterations = 2000;
  const auto r = minimize_lbfgs<double>(f, Eigen::Vector2d(-1.2, 1.0), o);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
  EXPECT_TRUE(r.converged);
}

TEST(Lbfgs, NonFiniteObjectiveThrows) {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Ones(x.size());
    return std::nan("");
  };
  EXPECT_THROW(minimize_lbfgs<double>(f, Eigen::VectorXd::Zero(2)), NumericalError);
}
