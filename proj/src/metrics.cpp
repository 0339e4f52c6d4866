#include "geoloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geoloc {

MetricSample draw_metric_sample(const Gmm2D& density, std::size_t n, std::uint64_t seed) {
  MetricSample s;
  s.points = sample(density, n, seed);
  s.log_density.reserve(n);
  s.component.reserve(n);
  for (const auto& p : s.points) {
    s.log_density.push_back(density.log_density(p));
    s.component.push_back(static_cast<std::uint32_t>(density.most_probable_component(p)));
  }
  return s;
}

double cae(const MetricSample& s, const GeoPoint& origin) {
  if (s.points.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : s.points) total += geodesic_distance(wrap_to_globe(p), origin);
  return total / static_cast<double>(s.points.size());
}

double cae(const Gmm2D& density, const GeoPoint& origin, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += geodesic_distance(wrap_to_globe(density.draw(rng)), origin);
  return n ? total / static_cast<double>(n) : 0.0;
}

double sae(const MessageDensity& md, const GeoPoint& origin) {
  return geodesic_distance(md.point_estimate, origin);
}

PredictionRegion prediction_region(const MetricSample& s, double beta) {
  PredictionRegion region;
  const std::size_t n = s.points.size();
  const auto top = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * beta - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.log_density[a] != s.log_density[b]) return s.log_density[a] > s.log_density[b];
    return a < b;
  });
  order.resize(std::min(top, n));

  std::map<std::uint32_t, std::vector<Vector2>> clusters;
  for (auto i : order) clusters[s.component[i]].push_back(s.points[i]);
  for (const auto& [k, pts] : clusters) {
    if (pts.size() < 3) continue;
    const Polygon hull = convex_hull(pts);
    if (hull.size() < 3) continue;
    GeoPolygon gp;
    for (const auto& v : hull) gp.ring.push_back(GeoPoint::from(v));
    region.area_km2 += geo_polygon_area(gp);
    region.hulls.push_back(std::move(gp));
  }
  return region;
}

PredictionRegion prediction_region(const Gmm2D& density, double beta, std::size_t n, std::uint64_t seed) {
  return prediction_region(draw_metric_sample(density, n, seed), beta);
}

double region_rank(const MetricSample& s, const Gmm2D& density, const GeoPoint& origin) {
  if (s.log_density.empty()) return 0.0;
  const double at_origin = density.log_density(origin.vec());
  std::size_t below = 0;
  for (double v : s.log_density) below += v < at_origin;
  return static_cast<double>(below) / static_cast<double>(s.log_density.size());
}

double region_rank(const Gmm2D& density, const GeoPoint& origin, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const double at_origin = density.log_density(origin.vec());
  std::size_t below = 0;
  for (std::size_t i = 0; i < n; ++i) below += density.log_density(density.draw(rng)) < at_origin;
  return n ? static_cast<double>(below) / static_cast<double>(n) : 0.0;
}

double observed_coverage(std::span<const double> ranks, double beta) {
  if (ranks.empty()) return 0.0;
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [&](double r) { return r > 1.0 - beta; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

EstimateEvaluation evaluate_estimate(const MessageDensity& md, const GeoPoint& origin, const EvalOptions& options,
                                     std::uint64_t seed) {
  const MetricSample s = draw_metric_sample(md.gmm, options.samples, seed);
  EstimateEvaluation e;
  e.cae = cae(s, origin);
  e.sae = sae(md, origin);
  for (double beta : options.coverages) e.pra[beta] = prediction_region(s, beta).area_km2;
  e.region_rank = region_rank(s, md.gmm, origin);
  e.sample_size = options.samples;
  return e;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

AggregateReport aggregate(std::span<const EstimateEvaluation> evals, std::size_t no_estimate_count,
                          std::span<const double> coverages) {
  AggregateReport r;
  const std::size_t total = evals.size() + no_estimate_count;
  r.n_tests = total;
  r.n_unlocated = no_estimate_count;
  r.success_rate = total ? static_cast<double>(evals.size()) / static_cast<double>(total) : 0.0;
  if (evals.empty()) return r;

  std::vector<double> caes, saes, ranks;
  for (const auto& e : evals) {
    caes.push_back(e.cae);
    saes.push_back(e.sae);
    ranks.push_back(e.region_rank);
  }
  r.cae = summarize(caes);
  r.sae = summarize(saes);
  for (double beta : coverages) {
    std::vector<double> areas;
    for (const auto& e : evals) {
      auto it = e.pra.find(beta);
      if (it != e.pra.end()) areas.push_back(it->second);
    }
    if (!areas.empty()) r.pra[beta] = summarize(areas);
    r.oc[beta] = observed_coverage(ranks, beta);
  }
  return r;
}

}  // namespace geoloc
