#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "geoloc/geo.hpp"
#include "geoloc/gmm.hpp"
#include "geoloc/model.hpp"

namespace geoloc {

/// The Monte-Carlo sample S shared by CAE, PRA and the region rank of one
/// estimate: points drawn from the density, their log densities, and the
/// most probable component of each.
struct MetricSample {
  std::vector<Vector2> points;  // plate carree, possibly off the globe
  std::vector<double> log_density;
  std::vector<std::uint32_t> component;
};

MetricSample draw_metric_sample(const Gmm2D& density, std::size_t n, std::uint64_t seed);

/// Mean geodesic distance from the origin to the sample points.
double cae(const MetricSample& s, const GeoPoint& origin);
double cae(const Gmm2D& density, const GeoPoint& origin, std::size_t n = 1000, std::uint64_t seed = 0);

/// Distance from the point estimate to the origin.
double sae(const MessageDensity& md, const GeoPoint& origin);

struct PredictionRegion {
  std::vector<GeoPolygon> hulls;  // one per cluster with >= 3 distinct points
  double area_km2 = 0.0;
};

/// Top ceil(n beta) samples by density (ties by sample index), clustered by
/// most probable component, one convex hull per cluster. Clusters with fewer
/// than three points contribute no area.
PredictionRegion prediction_region(const MetricSample& s, double beta);
PredictionRegion prediction_region(const Gmm2D& density, double beta, std::size_t n = 1000, std::uint64_t seed = 0);

/// Fraction of samples whose density is below the density at the origin.
double region_rank(const MetricSample& s, const Gmm2D& density, const GeoPoint& origin);
double region_rank(const Gmm2D& density, const GeoPoint& origin, std::size_t n = 1000, std::uint64_t seed = 0);

/// Fraction of origins inside their beta prediction region. The origin is in
/// the region when its rank exceeds 1 - beta.
double observed_coverage(std::span<const double> ranks, double beta);

struct EvalOptions {
  std::size_t samples = 1000;
  std::vector<double> coverages = {0.5, 0.9};
};

struct EstimateEvaluation {
  double cae = 0.0;
  double sae = 0.0;
  std::map<double, double> pra;  // coverage -> km^2
  double region_rank = 0.0;
  std::size_t sample_size = 0;
};

EstimateEvaluation evaluate_estimate(const MessageDensity& md, const GeoPoint& origin, const EvalOptions& options,
                                     std::uint64_t seed);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for fewer than two values
  double median = 0.0;
};

Summary summarize(std::span<const double> values);

struct AggregateReport {
  Summary cae;
  Summary sae;
  std::map<double, Summary> pra;
  std::map<double, double> oc;
  double success_rate = 0.0;
  std::size_t n_tests = 0;  // located plus unlocated
  std::size_t n_unlocated = 0;
};

/// Means over located messages; success rate counts the unlocated ones too.
AggregateReport aggregate(std::span<const EstimateEvaluation> evals, std::size_t no_estimate_count,
                          std::span<const double> coverages = std::vector<double>{0.5, 0.9});

}  // namespace geoloc
