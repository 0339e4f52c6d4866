#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geoloc/errors.hpp"

namespace geoloc {

struct LbfgsOptions {
  int history = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-5;  // on the infinity norm
  // Stop once the relative objective decrease of an iteration falls below this.
  double relative_decrease_tolerance = 1e-12;
  int max_line_search_steps = 40;
};

template <typename Scalar>
struct LbfgsResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar value = 0;
  std::vector<Scalar> trace;  // objective at x0 and every accepted iterate
  int iterations = 0;
  bool converged = false;
};

/// Minimizes f with limited-memory BFGS and a backtracking Armijo line
/// search. `f(x, grad)` returns the objective and writes the gradient.
/// Throws NumericalError if the objective or gradient is ever non-finite.
template <typename Scalar, typename Objective>
LbfgsResult<Scalar> minimize_lbfgs(Objective&& f, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x,
                                   const LbfgsOptions& options = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  LbfgsResult<Scalar> result;
  Vec g(x.size());
  Scalar fx = f(x, g);
  if (!std::isfinite(fx) || !g.allFinite())
    throw NumericalError("objective is not finite at the starting point");
  result.trace.push_back(fx);

  std::deque<Vec> s_hist, y_hist;
  std::deque<Scalar> rho_hist;
  Vec x_new(x.size()), g_new(x.size()), d(x.size());
  std::vector<Scalar> alpha(static_cast<std::size_t>(options.history));

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (x.size() == 0 || g.template lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    // Two-loop recursion.
    d = -g;
    const std::size_t m = s_hist.size();
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    if (m > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const Scalar beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }
    Scalar slope = g.dot(d);
    if (!(slope < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = -g.squaredNorm();
    }

    Scalar step = 1;
    if (m == 0) step = std::min<Scalar>(1, 1 / g.template lpNorm<Eigen::Infinity>());
    Scalar f_new = 0;
    bool accepted = false;
    for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
      x_new = x + step * d;
      f_new = f(x_new, g_new);
      if (!std::isfinite(f_new) || !g_new.allFinite())
        throw NumericalError("non-finite objective in line search (iteration " + std::to_string(iter) +
                             ", step " + std::to_string(static_cast<double>(step)) + ")");
      if (f_new <= fx + Scalar(1e-4) * step * slope) {
        accepted = true;
        break;
      }
      step *= Scalar(0.5);
    }
    if (!accepted) break;

    Vec s = x_new - x;
    Vec y = g_new - g;
    const Scalar sy = s.dot(y);
    if (sy > std::numeric_limits<Scalar>::epsilon() * y.squaredNorm()) {
      if (s_hist.size() == static_cast<std::size_t>(options.history)) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1 / sy);
    }
    const Scalar decrease = fx - f_new;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    result.trace.push_back(fx);
    result.iterations = iter + 1;
    if (decrease <= options.relative_decrease_tolerance * std::max<Scalar>(1, std::abs(fx))) {
      result.converged = g.template lpNorm<Eigen::Infinity>() < options.gradient_tolerance;
      break;
    }
  }
  result.x = std::move(x);
  result.value = fx;
  return result;
}

}  // namespace geoloc
