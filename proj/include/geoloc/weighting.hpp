#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geoloc/gmm.hpp"
#include "geoloc/lbfgs.hpp"
#include "geoloc/types.hpp"

namespace geoloc {

/// The fifteen per-n-gram quality properties, in their conventional order.
enum class QualityProperty : std::uint8_t {
  n_points,
  spatial_variance,
  n_components,
  covar_sum,
  covar_sum_prod,
  variance_per_point,
  components_per_point,
  covar_sum_per_point,
  covar_sum_prod_per_point,
  points_per_component,
  variance_per_component,
  covar_sum_per_component,
  covar_sum_prod_per_component,
  aic,
  bic,
};

inline constexpr std::size_t kQualityPropertyCount = 15;

std::string_view property_name(QualityProperty p);
std::optional<QualityProperty> parse_property(std::string_view name);

struct QualityProperties {
  std::array<double, kQualityPropertyCount> values{};

  double operator[](QualityProperty p) const { return values[static_cast<std::size_t>(p)]; }
  double& operator[](QualityProperty p) { return values[static_cast<std::size_t>(p)]; }
  friend bool operator==(const QualityProperties&, const QualityProperties&) = default;
};

/// spatial_variance is the trace of the (population) covariance of the
/// points; covar_sum adds every entry of every component covariance;
/// covar_sum_prod adds, per component, the product of its four entries.
QualityProperties quality_properties(const Gmm2D& g, std::span<const Vector2> points);

inline constexpr double kQprEpsilon = 1e-12;

/// Raw weight of one n-gram. Properties 1-13 are inverted,
/// 1 / (|p| + kQprEpsilon); AIC and BIC are subtracted from `max_observed`,
/// the largest value over the model.
double weight_qpr(const QualityProperties& props, QualityProperty scheme, double max_observed = 0);

/// weight_qpr over a whole model, computing the maximum where needed.
std::vector<double> qpr_weights(std::span<const QualityProperties> props, QualityProperty scheme);

// Guards zero-error n-grams in the inverse-error weights, in km.
inline constexpr double kErrorEpsilonKm = 1.0;

/// 1 / (e + epsilon)^alpha.
double weight_inverse_error(double mean_error_km, double alpha, double epsilon_km = kErrorEpsilonKm);

/// Divides by the sum. An all-zero input yields equal shares.
std::vector<double> normalize_weights(std::span<const double> raw);

/// Per-n-gram and per-(message, n-gram) training errors, in km.
struct ErrorTable {
  struct Row {
    std::vector<std::uint32_t> ngram;
    std::vector<double> error;
  };
  std::vector<double> mean_error;   // e_j
  std::vector<std::size_t> count;   // N_j
  std::vector<Row> messages;        // e_ij for each training message
};

/// e_ij is the distance from n-gram j's point estimate (the weighted mean of
/// its components) to the origin of message i. Messages list the indices of
/// the model n-grams they contain.
ErrorTable training_errors(std::span<const Gmm2D> ngram_models,
                           std::span<const std::vector<std::uint32_t>> message_ngrams,
                           std::span<const GeoPoint> origins);

/// Sparse feature vector: (feature id, value) pairs.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
};

enum class FeatureMode { id, attr, both };

struct FeatureSet {
  std::vector<FeatureVector> per_ngram;
  std::size_t dimension = 0;
};

/// Identity features get one id per n-gram. Attribute features are the
/// quality properties standardized to zero mean and unit variance over the
/// model; a constant property becomes all zeros.
FeatureSet build_features(std::span<const QualityProperties> props, FeatureMode mode);

double delta_logistic(const FeatureVector& phi, const Eigen::VectorXd& theta);

/// Sum over messages of the delta-weighted mean error plus (lambda/2)|theta|^2.
/// Messages without n-grams are skipped; `skipped` receives their count.
double objective(const Eigen::VectorXd& theta, const ErrorTable& table, const FeatureSet& features,
                 double lambda = 1.0, std::size_t* skipped = nullptr);

Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const ErrorTable& table, const FeatureSet& features,
                         double lambda = 1.0);

/// Objective and gradient in one pass.
double objective_and_gradient(const Eigen::VectorXd& theta, const ErrorTable& table,
                              const FeatureSet& features, double lambda, Eigen::VectorXd& grad);

struct OptimizeOptions {
  double lambda = 1.0;
  LbfgsOptions lbfgs{};
};

struct OptimizeResult {
  Eigen::VectorXd theta;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  std::size_t skipped_messages = 0;
};

/// L-BFGS from theta = 0.
OptimizeResult optimize_theta(const ErrorTable& table, const FeatureSet& features,
                              const OptimizeOptions& options = {});

}  // namespace geoloc
