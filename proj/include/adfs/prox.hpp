#ifndef ADFS_PROX_HPP
#define ADFS_PROX_HPP

#include <cmath>
#include <cstddef>
#include <utility>

#include <Eigen/Dense>

#include "error.hpp"
#include "problem.hpp"

namespace adfs {

struct ProxOptions {
  double tol = 1e-12;     // on |v - x + eta ell'(v)|
  int newton_budget = 20;
};

/// argmin_v (1/2 eta)(v - x)^2 + ell(v) for a scalar loss.
///
/// Newton from `warm`, kept inside a sign bracket of the optimality
/// condition; steps that leave the bracket are replaced by bisection, and
/// plain bisection finishes the job once the Newton budget is spent.
inline double prox_loss_1d(const ScalarLoss &loss, double eta, double x, double warm = 0.0,
                           const ProxOptions &opt = {}) {
  if (!std::isfinite(eta) || !std::isfinite(x) || !std::isfinite(warm))
    throw ValidationError("prox: non-finite input");
  if (eta < 0.0) throw ValidationError("prox: negative step");
  if (eta == 0.0) return x;
  if (loss.kind == Loss::quadratic) return (x + eta * loss.c) / (1.0 + eta);

  // |ell'| <= 1 for the logistic, so the root lies in [x - eta, x + eta].
  double lo = x - eta, hi = x + eta;
  auto g = [&](double v) { return v - x + eta * loss.deriv(v); };
  double v = (warm > lo && warm < hi) ? warm : x;
  for (int it = 0; it < opt.newton_budget; ++it) {
    const double gv = g(v);
    if (std::abs(gv) <= opt.tol) return v;
    if (gv > 0) hi = v;
    else lo = v;
    double next = v - gv / (1.0 + eta * loss.second(v));
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    v = next;
  }
  for (int it = 0; it < 200; ++it) {
    const double gv = g(v);
    if (std::abs(gv) <= opt.tol) return v;
    if (gv > 0) hi = v;
    else lo = v;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return v;
    v = mid;
  }
  return v;
}

/// prox_{eta f} for f(theta) = ell(a^T theta): only the projection on a moves.
/// `s_out` receives the 1-D solution, reusable as the next warm start.
inline Eigen::VectorXd prox_sample(const ScalarLoss &loss, const Eigen::VectorXd &a, double eta,
                                   const Eigen::VectorXd &w, double warm, double *s_out = nullptr,
                                   const ProxOptions &opt = {}) {
  const double s = prox_loss_1d(loss, eta * a.squaredNorm(), a.dot(w), warm, opt);
  if (s_out) *s_out = s;
  return w - eta * loss.deriv(s) * a;
}

struct ConjugateProx {
  Eigen::VectorXd value;     // prox_{eta f~*}(z)
  Eigen::VectorXd consumed;  // z - value, handed back to the center node
  double s = 0.0;            // 1-D solution along the feature direction
};

/// prox of f~*(v) = f*(v) - |v|^2/(2L) with step eta, computed through the
/// primal prox of f(theta) = ell(a^T theta):
///   (1 - eta/L) prox_{eta f~*}(z) = z - eta prox_{(1/eta - 1/L) f}(z/eta)
/// which collapses to ell'(s) a with s the 1-D prox along a.
inline ConjugateProx prox_conjugate_tilde(const ScalarLoss &loss, const Eigen::VectorXd &a,
                                          double eta, double L, const Eigen::VectorXd &z,
                                          double warm = 0.0, const ProxOptions &opt = {}) {
  if (!std::isfinite(eta) || !std::isfinite(L) || !z.allFinite())
    throw ValidationError("conjugate prox: non-finite input");
  if (eta < 0.0 || L <= 0.0) throw ValidationError("conjugate prox: need eta >= 0 and L > 0");
  ConjugateProx out;
  if (eta == 0.0) {
    out.value = z;
    out.consumed = Eigen::VectorXd::Zero(z.size());
    out.s = warm;
    return out;
  }
  if (eta / L >= 1.0)
    throw StepTooLarge("conjugate prox: step too large (eta/L = " + std::to_string(eta / L) + ")");
  const double h = 1.0 / eta - 1.0 / L;
  out.s = prox_loss_1d(loss, h * a.squaredNorm(), a.dot(z) / eta, warm, opt);
  out.value = loss.deriv(out.s) * a;
  out.consumed = z - out.value;
  return out;
}

/// Scalar version with unit feature.
inline double prox_conjugate_tilde(const ScalarLoss &loss, double eta, double L, double z,
                                   double warm = 0.0, const ProxOptions &opt = {}) {
  Eigen::VectorXd a(1), zz(1);
  a[0] = 1.0;
  zz[0] = z;
  return prox_conjugate_tilde(loss, a, eta, L, zz, warm, opt).value[0];
}

}  // namespace adfs

#endif
