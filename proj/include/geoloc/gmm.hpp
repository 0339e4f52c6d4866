#pragma once

// Two-dimensional gaussian mixture models over plate carree (lon, lat) degrees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "geoloc/random.hpp"

namespace geoloc {

template <typename Scalar>
struct GaussComponent {
  using Vec = Eigen::Matrix<Scalar, 2, 1>;
  using Mat = Eigen::Matrix<Scalar, 2, 2>;

  Scalar weight = 1;
  Vec mean = Vec::Zero();
  Mat cov = Mat::Identity();
};

/// Log of the bivariate normal pdf. `cov` must be positive definite.
template <typename Scalar>
Scalar log_normal_pdf(const Eigen::Matrix<Scalar, 2, 1>& y, const Eigen::Matrix<Scalar, 2, 1>& mean,
                      const Eigen::Matrix<Scalar, 2, 2>& cov) {
  const Scalar a = cov(0, 0), b = cov(0, 1), c = cov(1, 1);
  const Scalar det = a * c - b * b;
  const Scalar dx = y.x() - mean.x(), dy = y.y() - mean.y();
  const Scalar quad = (c * dx * dx - 2 * b * dx * dy + a * dy * dy) / det;
  return -std::log(2 * std::numbers::pi_v<Scalar>) - Scalar(0.5) * std::log(det) - Scalar(0.5) * quad;
}

/// An immutable mixture. Construction checks the invariants (non-empty,
/// weights in (0, 1] summing to 1, positive-definite covariances) and caches
/// what density evaluation and sampling need.
template <typename Scalar>
class Gmm2 {
 public:
  using Vec = Eigen::Matrix<Scalar, 2, 1>;
  using Mat = Eigen::Matrix<Scalar, 2, 2>;
  using Component = GaussComponent<Scalar>;

  Gmm2() = default;

  explicit Gmm2(std::vector<Component> components, std::size_t n_points = 0, Scalar log_likelihood = 0)
      : components_(std::move(components)), n_points_(n_points), log_likelihood_(log_likelihood) {
    if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
    Scalar total = 0;
    cache_.reserve(components_.size());
    for (const auto& c : components_) {
      if (!(c.weight > 0 && c.weight <= 1 + Scalar(1e-12)))
        throw std::invalid_argument("mixture weight outside (0, 1]");
      const Scalar a = c.cov(0, 0), b = c.cov(0, 1), d = c.cov(1, 1);
      const Scalar det = a * d - b * b;
      if (!(a > 0 && det > 0) || !c.mean.allFinite())
        throw std::invalid_argument("covariance is not positive definite");
      total += c.weight;
      Cache k;
      k.log_weight = std::log(c.weight);
      k.l00 = std::sqrt(a);
      k.l10 = b / k.l00;
      k.l11 = std::sqrt(det / a);
      cache_.push_back(k);
    }
    if (std::abs(total - 1) > Scalar(1e-9) + 64 * std::numeric_limits<Scalar>::epsilon()) throw std::invalid_argument("mixture weights do not sum to 1");
  }

  const std::vector<Component>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  bool empty() const { return components_.empty(); }
  std::size_t n_points() const { return n_points_; }
  Scalar log_likelihood() const { return log_likelihood_; }

  /// log pi_k + log N(y | mu_k, S_k)
  Scalar component_log_density(std::size_t k, const Vec& y) const {
    return cache_[k].log_weight + log_normal_pdf<Scalar>(y, components_[k].mean, components_[k].cov);
  }

  Scalar log_density(const Vec& y) const {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    thread_local std::vector<Scalar> terms;
    terms.resize(size());
    for (std::size_t k = 0; k < size(); ++k) {
      terms[k] = component_log_density(k, y);
      best = std::max(best, terms[k]);
    }
    if (!std::isfinite(best)) return best;
    Scalar sum = 0;
    for (Scalar t : terms) sum += std::exp(t - best);
    return best + std::log(sum);
  }

  /// Probability density per square degree.
  Scalar density(const Vec& y) const { return std::exp(log_density(y)); }

  std::size_t most_probable_component(const Vec& y) const {
    std::size_t arg = 0;
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t k = 0; k < size(); ++k) {
      const Scalar v = component_log_density(k, y);
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    return arg;
  }

  /// Weighted average of the component means.
  Vec mean() const {
    Vec m = Vec::Zero();
    for (const auto& c : components_) m += c.weight * c.mean;
    return m;
  }

  /// Draws one point: component by weight, then L z with L the Cholesky
  /// factor of its covariance.
  template <typename Engine>
  Vec draw(Engine& rng) const {
    std::uniform_real_distribution<Scalar> unit(0, 1);
    Scalar u = unit(rng);
    std::size_t k = 0;
    for (; k + 1 < size(); ++k) {
      u -= components_[k].weight;
      if (u < 0) break;
    }
    std::normal_distribution<Scalar> normal(0, 1);
    const Scalar z0 = normal(rng), z1 = normal(rng);
    const auto& ch = cache_[k];
    const Vec& mu = components_[k].mean;
    return {mu.x() + ch.l00 * z0, mu.y() + ch.l10 * z0 + ch.l11 * z1};
  }

 private:
  struct Cache {
    Scalar log_weight;
    Scalar l00, l10, l11;
  };

  std::vector<Component> components_;
  std::vector<Cache> cache_;
  std::size_t n_points_ = 0;
  Scalar log_likelihood_ = 0;
};

using Gmm2D = Gmm2<double>;
using GaussComponent2D = GaussComponent<double>;

/// r = max(1, floor(min(cap, ln(n) / 2)))
inline int choose_components(std::size_t n, int cap = 20) {
  if (n < 1) throw std::invalid_argument("choose_components needs n >= 1");
  const double r = std::min(static_cast<double>(cap), std::log(static_cast<double>(n)) / 2.0);
  return std::max(1, static_cast<int>(std::floor(r)));
}

template <typename Scalar>
std::vector<Eigen::Matrix<Scalar, 2, 1>> sample(const Gmm2<Scalar>& g, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::Matrix<Scalar, 2, 1>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(g.draw(rng));
  return out;
}

struct EmOptions {
  double tolerance = 1e-4;  // absolute log-likelihood improvement
  int max_iterations = 200;
  double cov_floor = 1e-6;  // degree^2 added to each covariance diagonal
  double prune_weight = 1e-6;
};

template <typename Scalar>
struct EmFit {
  Gmm2<Scalar> model;
  std::vector<Scalar> log_likelihood_trace;  // one entry per E-step, non-decreasing
  int iterations = 0;
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> scatter(std::span<const Eigen::Matrix<Scalar, 2, 1>> points,
                                    const Eigen::Matrix<Scalar, 2, 1>& center) {
  Eigen::Matrix<Scalar, 2, 2> s = Eigen::Matrix<Scalar, 2, 2>::Zero();
  for (const auto& p : points) {
    const auto d = p - center;
    s += d * d.transpose();
  }
  return s / static_cast<Scalar>(points.size());
}

}  // namespace detail

/// Expectation maximization with k-means++ seeding, uniform initial weights
/// and the pooled data covariance as every initial covariance. Components
/// whose weight collapses below prune_weight are dropped. Stops when the
/// improvement falls under the tolerance; a step that would lower the
/// likelihood is rejected and the previous parameters returned.
template <typename Scalar>
EmFit<Scalar> fit_em(std::span<const Eigen::Matrix<Scalar, 2, 1>> points, int r, std::uint64_t seed,
                     const EmOptions& options = {}) {
  using Vec = Eigen::Matrix<Scalar, 2, 1>;
  using Mat = Eigen::Matrix<Scalar, 2, 2>;
  using Component = GaussComponent<Scalar>;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("fit_em needs at least one point");
  if (r < 1) throw std::invalid_argument("fit_em needs r >= 1");

  const Mat floor = Scalar(options.cov_floor) * Mat::Identity();
  Vec centroid = Vec::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<Scalar>(n);
  const Mat pooled = detail::scatter<Scalar>(points, centroid) + floor;

  // k-means++ seeding; stops early when every point coincides with a center.
  Rng rng(seed);
  std::vector<Vec> centers;
  centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<Scalar> d2(n);
  for (int k = 1; k < r; ++k) {
    Scalar total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (const auto& c : centers) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (!(total > 0)) break;
    Scalar u = std::uniform_real_distribution<Scalar>(0, total)(rng);
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= d2[i];
      if (u < 0 && d2[i] > 0) {
        pick = i;
        break;
      }
    }
    if (!(d2[pick] > 0)) break;
    centers.push_back(points[pick]);
  }

  std::vector<Component> comps;
  for (const auto& c : centers)
    comps.push_back({Scalar(1) / static_cast<Scalar>(centers.size()), c, pooled});

  EmFit<Scalar> fit;
  std::vector<Component> previous;
  Scalar previous_ll = -std::numeric_limits<Scalar>::infinity();
  Array logp;

  for (int iter = 0;; ++iter) {
    // E-step
    const auto K = static_cast<Eigen::Index>(comps.size());
    logp.resize(static_cast<Eigen::Index>(n), K);
    for (Eigen::Index k = 0; k < K; ++k) {
      const Scalar lw = std::log(comps[k].weight);
      for (std::size_t i = 0; i < n; ++i)
        logp(static_cast<Eigen::Index>(i), k) = lw + log_normal_pdf<Scalar>(points[i], comps[k].mean, comps[k].cov);
    }
    Scalar ll = 0;
    for (Eigen::Index i = 0; i < logp.rows(); ++i) {
      const Scalar m = logp.row(i).maxCoeff();
      const Scalar lse = m + std::log((logp.row(i) - m).exp().sum());
      logp.row(i) = (logp.row(i) - lse).exp();  // now responsibilities
      ll += lse;
    }

    if (iter > 0 && ll < previous_ll) {
      comps = std::move(previous);
      ll = previous_ll;
      fit.iterations = iter;
      break;
    }
    fit.log_likelihood_trace.push_back(ll);
    const bool converged = iter > 0 && ll - previous_ll < Scalar(options.tolerance);
    if (converged || iter >= options.max_iterations) {
      fit.iterations = iter;
      previous_ll = ll;
      break;
    }
    previous = comps;
    previous_ll = ll;

    // M-step
    std::vector<Component> next;
    for (Eigen::Index k = 0; k < K; ++k) {
      const Scalar nk = logp.col(k).sum();
      if (!(nk / static_cast<Scalar>(n) >= Scalar(options.prune_weight))) continue;
      Vec mu = Vec::Zero();
      for (std::size_t i = 0; i < n; ++i) mu += logp(static_cast<Eigen::Index>(i), k) * points[i];
      mu /= nk;
      Mat cov = Mat::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const Vec d = points[i] - mu;
        cov += logp(static_cast<Eigen::Index>(i), k) * (d * d.transpose());
      }
      cov = cov / nk + floor;
      cov(1, 0) = cov(0, 1);
      next.push_back({nk / static_cast<Scalar>(n), mu, cov});
    }
    Scalar total = 0;
    for (const auto& c : next) total += c.weight;
    for (auto& c : next) c.weight /= total;
    comps = std::move(next);
  }

  Scalar total = 0;
  for (const auto& c : comps) total += c.weight;
  for (auto& c : comps) c.weight /= total;
  fit.model = Gmm2<Scalar>(std::move(comps), n, previous_ll);
  return fit;
}

template <typename Scalar>
struct InformationCriteria {
  Scalar aic;
  Scalar bic;
};

/// Free parameters of an r-component 2D mixture: (r-1) weights, 2r means,
/// 3r covariance entries.
inline int parameter_count(std::size_t r) { return 6 * static_cast<int>(r) - 1; }

template <typename Scalar>
InformationCriteria<Scalar> information_criteria(const Gmm2<Scalar>& g) {
  if (g.n_points() == 0) throw std::invalid_argument("information criteria need a fitted mixture");
  const Scalar k = static_cast<Scalar>(parameter_count(g.size()));
  const Scalar ll = g.log_likelihood();
  return {2 * k - 2 * ll, k * std::log(static_cast<Scalar>(g.n_points())) - 2 * ll};
}

}  // namespace geoloc
