#ifndef ADFS_VERIFY_ORACLES_HPP
#define ADFS_VERIFY_ORACLES_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "../error.hpp"
#include "../graph.hpp"
#include "../problem.hpp"
#include "../rng.hpp"

namespace adfs::verify {

/// Least-squares slope of y against x.
inline double fit_slope(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "slope fit needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) {
    mx += x[q];
    my += y[q];
  }
  mx /= double(x.size());
  my /= double(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) {
    sxy += (x[q] - mx) * (y[q] - my);
    sxx += (x[q] - mx) * (x[q] - mx);
  }
  return sxy / sxx;
}

/// Root of an increasing function on [lo, hi] by plain bisection.
template <class F>
double bisect_increasing(F &&f, double lo, double hi, int iters = 400) {
  for (int it = 0; it < iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

/// theta(v) with ell'(theta) = v, found by bisection on a widening bracket.
inline double conjugate_argmax(const ScalarLoss &loss, double v) {
  double lo = -1.0, hi = 1.0;
  auto g = [&](double s) { return loss.deriv(s) - v; };
  while (g(lo) > 0.0 && lo > -1e6) lo *= 2.0;
  while (g(hi) < 0.0 && hi < 1e6) hi *= 2.0;
  return bisect_increasing(g, lo, hi);
}

/// prox of f~*(v) = ell*(v) - v^2 / (2L) with step eta at z, by direct 1-D
/// minimization. The objective derivative theta(v) - v/L + (v - z)/eta is
/// increasing; for the logistic loss v is restricted to the open interval
/// between 0 and -label.
inline double brute_conjugate_prox(const ScalarLoss &loss, double eta, double L, double z) {
  auto dphi = [&](double v) { return conjugate_argmax(loss, v) - v / L + (v - z) / eta; };
  double lo, hi;
  if (loss.kind == Loss::logistic) {
    lo = loss.c > 0 ? -1.0 : 0.0;
    hi = loss.c > 0 ? 0.0 : 1.0;
    const double pad = 1e-15;
    lo += pad;
    hi -= pad;
  } else {
    lo = -1.0;
    hi = 1.0;
    while (dphi(lo) > 0.0) lo *= 2.0;
    while (dphi(hi) < 0.0) hi *= 2.0;
  }
  return bisect_increasing(dphi, lo, hi);
}

/// Random connected graph: a random spanning tree plus extra edges.
inline CommGraph random_connected_graph(Pcg64 &rng, std::size_t n, double extra = 0.3) {
  std::vector<Edge> edges;
  std::vector<std::vector<bool>> has(n, std::vector<bool>(n, false));
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t l = std::size_t(rng.below(k));
    edges.push_back({l, k, 0.2 + 1.8 * rng.uniform()});
    has[l][k] = true;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = k + 1; l < n; ++l)
      if (!has[k][l] && rng.uniform() < extra) edges.push_back({k, l, 0.2 + 1.8 * rng.uniform()});
  return CommGraph::from_edges(n, std::move(edges));
}

}  // namespace adfs::verify

#endif
