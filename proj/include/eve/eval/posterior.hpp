#pragma once

#include "eve/core/types.hpp"

#include <boost/math/distributions/beta.hpp>

#include <cmath>
#include <utility>
#include <vector>

namespace eve::eval {

struct BetaPosterior {
  double alpha = 1.0;
  double beta = 1.0;
  long successes = 0;
  long trials = 0;

  double a() const { return alpha + static_cast<double>(successes); }
  double b() const { return beta + static_cast<double>(trials - successes); }
  double mean() const { return a() / (alpha + beta + static_cast<double>(trials)); }

  double density(double p) const {
    if (p < 0.0 || p > 1.0) return 0.0;
    const boost::math::beta_distribution<double> d(a(), b());
    // Boost rejects the endpoints when the density diverges there.
    if ((p == 0.0 && a() < 1.0) || (p == 1.0 && b() < 1.0)) return INFINITY;
    return boost::math::pdf(d, p);
  }

  double quantile(double q) const {
    return boost::math::quantile(boost::math::beta_distribution<double>(a(), b()), q);
  }

  // Equal-tailed credible interval.
  std::pair<double, double> credible_interval(double mass = 0.95) const {
    const double tail = 0.5 * (1.0 - mass);
    return {quantile(tail), quantile(1.0 - tail)};
  }
};

inline BetaPosterior posterior(long k, long n, double alpha = 1.0, double beta = 1.0) {
  if (k < 0 || n < 0) throw Error("posterior: counts must be nonnegative");
  if (k > n) throw Error("posterior: successes " + std::to_string(k) + " exceed trials " + std::to_string(n));
  if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("posterior: prior parameters must be positive");
  return {alpha, beta, k, n};
}

struct DensityGrid {
  std::vector<double> x;
  std::vector<double> density;

  // Composite Simpson's rule over the grid (odd point count).
  double integral() const {
    const std::size_t n = x.size();
    if (n < 3 || n % 2 == 0) throw Error("DensityGrid: Simpson's rule needs an odd number of points >= 3");
    const double h = (x.back() - x.front()) / static_cast<double>(n - 1);
    double s = density.front() + density.back();
    for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * density[i];
    return s * h / 3.0;
  }
};

// Uniform grid for violin-style plots, spanning the central 1 - 2e-12 of
// the posterior mass so that sharply peaked posteriors stay resolved.
inline DensityGrid density_grid(const BetaPosterior& post, int points = 2001, double tail = 1e-12) {
  if (points < 3 || points % 2 == 0) throw Error("density_grid: points must be odd and >= 3");
  const double lo = tail > 0.0 ? post.quantile(tail) : 0.0;
  const double hi = tail > 0.0 ? post.quantile(1.0 - tail) : 1.0;
  DensityGrid g;
  g.x.resize(points);
  g.density.resize(points);
  for (int i = 0; i < points; ++i) {
    g.x[i] = i == points - 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    g.density[i] = post.density(g.x[i]);
  }
  return g;
}

// Normal-approximation standard error sqrt(p (1 - p) / N).
inline double standard_error(long k, long n) {
  if (n <= 0) return 0.0;
  const double p = static_cast<double>(k) / static_cast<double>(n);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace eve::eval
