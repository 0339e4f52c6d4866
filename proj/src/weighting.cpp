#include "geoloc/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoloc/geo.hpp"

namespace geoloc {

namespace {

constexpr std::array<std::string_view, kQualityPropertyCount> kPropertyNames = {
    "n-points",
    "spatial-variance",
    "n-components",
    "covar-sum",
    "covar-sum-prod",
    "variance-per-point",
    "components-per-point",
    "covar-sum-per-point",
    "covar-sum-prod-per-point",
    "points-per-component",
    "variance-per-component",
    "covar-sum-per-component",
    "covar-sum-prod-per-component",
    "aic",
    "bic",
};

bool is_information_criterion(QualityProperty p) {
  return p == QualityProperty::aic || p == QualityProperty::bic;
}

}  // namespace

std::string_view property_name(QualityProperty p) { return kPropertyNames[static_cast<std::size_t>(p)]; }

std::optional<QualityProperty> parse_property(std::string_view name) {
  for (std::size_t i = 0; i < kPropertyNames.size(); ++i)
    if (kPropertyNames[i] == name) return static_cast<QualityProperty>(i);
  return std::nullopt;
}

QualityProperties quality_properties(const Gmm2D& g, std::span<const Vector2> points) {
  using P = QualityProperty;
  QualityProperties q;
  const double n = static_cast<double>(points.size());
  const double r = static_cast<double>(g.size());

  double variance = 0.0;
  if (!points.empty()) {
    Vector2 mean = Vector2::Zero();
    for (const auto& p : points) mean += p;
    mean /= n;
    for (const auto& p : points) variance += (p - mean).squaredNorm();
    variance /= n;
  }

  double covar_sum = 0.0, covar_sum_prod = 0.0;
  for (const auto& c : g.components()) {
    covar_sum += c.cov.sum();
    covar_sum_prod += c.cov.prod();
  }

  q[P::n_points] = n;
  q[P::spatial_variance] = variance;
  q[P::n_components] = r;
  q[P::covar_sum] = covar_sum;
  q[P::covar_sum_prod] = covar_sum_prod;
  q[P::variance_per_point] = variance / n;
  q[P::components_per_point] = r / n;
  q[P::covar_sum_per_point] = covar_sum / n;
  q[P::covar_sum_prod_per_point] = covar_sum_prod / n;
  q[P::points_per_component] = n / r;
  q[P::variance_per_component] = variance / r;
  q[P::covar_sum_per_component] = covar_sum / r;
  q[P::covar_sum_prod_per_component] = covar_sum_prod / r;
  const auto ic = information_criteria(g);
  q[P::aic] = ic.aic;
  q[P::bic] = ic.bic;
  return q;
}

double weight_qpr(const QualityProperties& props, QualityProperty scheme, double max_observed) {
  if (is_information_criterion(scheme)) return std::max(0.0, max_observed - props[scheme]);
  return 1.0 / (std::abs(props[scheme]) + kQprEpsilon);
}

std::vector<double> qpr_weights(std::span<const QualityProperties> props, QualityProperty scheme) {
  double max_observed = -std::numeric_limits<double>::infinity();
  for (const auto& p : props) max_observed = std::max(max_observed, p[scheme]);
  std::vector<double> out;
  out.reserve(props.size());
  for (const auto& p : props) out.push_back(weight_qpr(p, scheme, max_observed));
  return out;
}

double weight_inverse_error(double mean_error_km, double alpha, double epsilon_km) {
  return 1.0 / std::pow(mean_error_km + epsilon_km, alpha);
}

std::vector<double> normalize_weights(std::span<const double> raw) {
  std::vector<double> out(raw.begin(), raw.end());
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0) {
    for (double& w : out) w /= total;
  } else {
    std::fill(out.begin(), out.end(), out.empty() ? 0.0 : 1.0 / static_cast<double>(out.size()));
  }
  return out;
}

ErrorTable training_errors(std::span<const Gmm2D> ngram_models,
                           std::span<const std::vector<std::uint32_t>> message_ngrams,
                           std::span<const GeoPoint> origins) {
  ErrorTable table;
  const std::size_t V = ngram_models.size();
  std::vector<GeoPoint> estimates;
  estimates.reserve(V);
  for (const auto& g : ngram_models) estimates.push_back(wrap_to_globe(g.mean()));

  table.mean_error.assign(V, 0.0);
  table.count.assign(V, 0);
  table.messages.resize(message_ngrams.size());
  for (std::size_t i = 0; i < message_ngrams.size(); ++i) {
    auto& row = table.messages[i];
    row.ngram = message_ngrams[i];
    row.error.reserve(row.ngram.size());
    for (auto j : row.ngram) {
      const double e = geodesic_distance(estimates[j], origins[i]);
      row.error.push_back(e);
      table.mean_error[j] += e;
      ++table.count[j];
    }
  }
  for (std::size_t j = 0; j < V; ++j)
    if (table.count[j] > 0) table.mean_error[j] /= static_cast<double>(table.count[j]);
  return table;
}

FeatureSet build_features(std::span<const QualityProperties> props, FeatureMode mode) {
  FeatureSet fs;
  const std::size_t V = props.size();
  fs.per_ngram.resize(V);
  const bool use_attr = mode != FeatureMode::id;
  const bool use_id = mode != FeatureMode::attr;
  const std::size_t attr_dim = use_attr ? kQualityPropertyCount : 0;

  if (use_attr) {
    for (std::size_t k = 0; k < kQualityPropertyCount; ++k) {
      double mean = 0.0;
      for (const auto& p : props) mean += p.values[k];
      mean /= static_cast<double>(std::max<std::size_t>(V, 1));
      double var = 0.0;
      for (const auto& p : props) var += (p.values[k] - mean) * (p.values[k] - mean);
      var /= static_cast<double>(std::max<std::size_t>(V, 1));
      const double sd = std::sqrt(var);
      for (std::size_t j = 0; j < V; ++j) {
        const double z = sd > 0 && std::isfinite(sd) ? (props[j].values[k] - mean) / sd : 0.0;
        fs.per_ngram[j].entries.emplace_back(static_cast<std::uint32_t>(k), z);
      }
    }
  }
  if (use_id)
    for (std::size_t j = 0; j < V; ++j)
      fs.per_ngram[j].entries.emplace_back(static_cast<std::uint32_t>(attr_dim + j), 1.0);
  fs.dimension = attr_dim + (use_id ? V : 0);
  return fs;
}

double delta_logistic(const FeatureVector& phi, const Eigen::VectorXd& theta) {
  double z = 0.0;
  for (const auto& [k, v] : phi.entries)
    if (static_cast<Eigen::Index>(k) < theta.size()) z += v * theta[k];
  return 1.0 / (1.0 + std::exp(-z));
}

double objective_and_gradient(const Eigen::VectorXd& theta, const ErrorTable& table,
                              const FeatureSet& features, double lambda, Eigen::VectorXd& grad) {
  const std::size_t V = features.per_ngram.size();
  std::vector<double> delta(V);
  for (std::size_t j = 0; j < V; ++j) delta[j] = delta_logistic(features.per_ngram[j], theta);

  // dPhi/d delta_j accumulated over messages, then chained through the logistic.
  std::vector<double> d_delta(V, 0.0);
  double value = 0.0;
  for (const auto& row : table.messages) {
    if (row.ngram.empty()) continue;
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < row.ngram.size(); ++t) {
      num += row.error[t] * delta[row.ngram[t]];
      den += delta[row.ngram[t]];
    }
    value += num / den;
    const double den2 = den * den;
    for (std::size_t t = 0; t < row.ngram.size(); ++t)
      d_delta[row.ngram[t]] += (row.error[t] * den - num) / den2;
  }

  grad = lambda * theta;
  for (std::size_t j = 0; j < V; ++j) {
    if (d_delta[j] == 0.0) continue;
    const double chain = d_delta[j] * delta[j] * (1.0 - delta[j]);
    for (const auto& [k, v] : features.per_ngram[j].entries) grad[k] += chain * v;
  }
  return value + 0.5 * lambda * theta.squaredNorm();
}

double objective(const Eigen::VectorXd& theta, const ErrorTable& table, const FeatureSet& features,
                 double lambda, std::size_t* skipped) {
  const std::size_t V = features.per_ngram.size();
  std::vector<double> delta(V);
  for (std::size_t j = 0; j < V; ++j) delta[j] = delta_logistic(features.per_ngram[j], theta);
  double value = 0.0;
  std::size_t skip = 0;
  for (const auto& row : table.messages) {
    if (row.ngram.empty()) {
      ++skip;
      continue;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < row.ngram.size(); ++t) {
      num += row.error[t] * delta[row.ngram[t]];
      den += delta[row.ngram[t]];
    }
    value += num / den;
  }
  if (skipped) *skipped = skip;
  return value + 0.5 * lambda * theta.squaredNorm();
}

Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const ErrorTable& table, const FeatureSet& features,
                         double lambda) {
  Eigen::VectorXd g;
  objective_and_gradient(theta, table, features, lambda, g);
  return g;
}

OptimizeResult optimize_theta(const ErrorTable& table, const FeatureSet& features,
                              const OptimizeOptions& options) {
  OptimizeResult out;
  objective(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.dimension)), table, features,
            options.lambda, &out.skipped_messages);
  auto f = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return objective_and_gradient(theta, table, features, options.lambda, grad);
  };
  auto res = minimize_lbfgs<double>(f, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.dimension)),
                                    options.lbfgs);
  out.theta = std::move(res.x);
  out.objective_trace = std::move(res.trace);
  out.iterations = res.iterations;
  out.converged = res.converged;
  return out;
}

}  // namespace geoloc
