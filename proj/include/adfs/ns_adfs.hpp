#ifndef ADFS_NS_ADFS_HPP
#define ADFS_NS_ADFS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "apcg.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "schedule.hpp"

namespace adfs {

/// Non-smooth samples f_ij(theta) = c_ij |theta - b_ij|_1 plus (sigma_i/2)|theta|^2.
/// The conjugate is f*(u) = b^T u on the box |u|_inf <= c, so
/// prox_{s f*}(z) = clip(z - s b, -c, c).
struct NonsmoothProblem {
  std::size_t n = 0, m = 0;
  Eigen::MatrixXd b;      // n*m x d
  std::vector<double> c;  // n*m
  std::vector<double> sigma;

  std::size_t d() const { return std::size_t(b.cols()); }

  void validate() const {
    detail::require(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
    detail::require(std::size_t(b.rows()) == n * m && c.size() == n * m, "need n*m samples");
    detail::require(sigma.size() == n, "need one sigma per node");
    for (double x : c) detail::require(x > 0.0, "l1 weights must be positive");
    for (double s : sigma) detail::require(s > 0.0, "sigma must be positive");
  }

  double primal_value(const Eigen::VectorXd &theta) const {
    double acc = 0.0;
    for (std::size_t q = 0; q < n * m; ++q)
      acc += c[q] * (theta.transpose() - b.row(Eigen::Index(q))).lpNorm<1>();
    double s = 0.0;
    for (double x : sigma) s += x;
    return acc + 0.5 * s * theta.squaredNorm();
  }

  /// Exact minimizer: the objective separates over coordinates, and each 1-D
  /// piece sum_q c_q |t - b_q| + (s/2) t^2 is minimized by scanning breakpoints.
  Eigen::VectorXd primal_optimum() const {
    double s = 0.0;
    for (double x : sigma) s += x;
    Eigen::VectorXd th(static_cast<Eigen::Index>(d()));
    for (Eigen::Index k = 0; k < th.size(); ++k) {
      std::vector<std::pair<double, double>> pts;
      double total = 0.0;
      for (std::size_t q = 0; q < n * m; ++q) {
        pts.emplace_back(b(Eigen::Index(q), k), c[q]);
        total += c[q];
      }
      std::sort(pts.begin(), pts.end());
      // subgradient at t in an open interval: s t + (weight below) - (weight above)
      double below = 0.0;
      double answer = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t r = 0; r <= pts.size(); ++r) {
        const double lo = r == 0 ? -std::numeric_limits<double>::infinity() : pts[r - 1].first;
        const double hi = r == pts.size() ? std::numeric_limits<double>::infinity() : pts[r].first;
        const double t = -(below - (total - below)) / s;
        if (t >= lo && t <= hi) {
          answer = t;
          break;
        }
        if (r < pts.size()) {
          // kink at pts[r]: 0 in [s t + below - above - w, s t + below - above + w]
          const double tk = pts[r].first, w = pts[r].second;
          const double g = s * tk + below - (total - below - w);
          if (g - w <= 0.0 && g + w >= 0.0) {
            answer = tk;
            break;
          }
          below += w;
        }
      }
      th[k] = answer;
    }
    return th;
  }

  /// Dual objective in node variables; +inf outside the conjugate domains.
  double dual_value(const Eigen::MatrixXd &x, double slack = 1e-9) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x.row(Eigen::Index(i)).squaredNorm() / (2.0 * sigma[i]);
    for (std::size_t q = 0; q < n * m; ++q) {
      const auto row = x.row(Eigen::Index(n + q));
      if (row.lpNorm<Eigen::Infinity>() > c[q] * (1.0 + slack))
        return std::numeric_limits<double>::infinity();
      acc += row.dot(b.row(Eigen::Index(q)));
    }
    return acc;
  }
};

struct NsPlan {
  double p_comm = 0.0;
  std::vector<double> p, M, R, eta;  // eta = mu^2 / p
  double S = 0.0, p_R = 0.0, A0 = 0.0;
};

/// p_comm* = 1 / (1 + sqrt(gamma~ m^2 / (2 (1 + m)))), uniform within each kind.
inline NsPlan make_ns_plan(const AugmentedGraph &aug, const SpectralData &sp,
                           std::optional<double> p_comm = std::nullopt) {
  const std::size_t n = aug.n(), m = aug.m(), E = aug.comm_edge_count();
  NsPlan plan;
  if (E == 0) plan.p_comm = 0.0;
  else if (p_comm) {
    detail::require(*p_comm > 0.0 && *p_comm < 1.0, "p_comm must lie in (0, 1)");
    plan.p_comm = *p_comm;
  } else {
    const double md = double(m);
    plan.p_comm = 1.0 / (1.0 + std::sqrt(sp.gamma_tilde * md * md / (2.0 * (1.0 + md))));
  }
  plan.p.resize(aug.edge_count());
  plan.M.resize(aug.edge_count());
  plan.eta.resize(aug.edge_count());
  for (std::size_t e = 0; e < aug.edge_count(); ++e) {
    const Edge &ed = aug.edge(e);
    plan.p[e] = e < E ? plan.p_comm / double(E) : (1.0 - plan.p_comm) / double(n * m);
    plan.M[e] = ed.weight * (aug.sigma_inv(ed.k) + aug.sigma_inv(ed.l));
    plan.eta[e] = ed.weight / plan.p[e];
  }
  plan.R = sp.R;
  plan.S = sampling_smoothness(plan.M, plan.p, plan.R);
  plan.p_R = projected_min_probability(plan.p, plan.R);
  plan.A0 = 3.0 / (plan.S * plan.S * plan.p_R * plan.p_R);
  return plan;
}

struct NsTrajectory {
  std::vector<std::size_t> iteration;
  std::vector<double> dual;  // F*(x_t)
  std::vector<double> gap;   // F*(x_t) + P*
  std::vector<double> A;
};

struct NsResult {
  Eigen::MatrixXd x, v;
  NsTrajectory trajectory;
};

/// Non-smooth variant: convex-mode coefficients, B0 = 1,
///   y = (1 - alpha) x + alpha v
///   z = v - a eta W Sigma^{-1} y, conjugate prox on virtual edges
///   x+ = y + (alpha R / p)(v+ - v).
/// Records at t = 0 and at every t listed in `record_at` (sorted).
inline NsResult run_ns_adfs(const NonsmoothProblem &prob, const AugmentedGraph &aug,
                            const NsPlan &plan, const Schedule &schedule,
                            const std::vector<std::size_t> &record_at) {
  prob.validate();
  detail::require(prob.n == aug.n() && prob.m == aug.m(), "problem does not match graph");
  const std::size_t N = aug.node_count(), d = prob.d();
  NsResult res;
  res.x = Eigen::MatrixXd::Zero(Eigen::Index(N), Eigen::Index(d));
  res.v = res.x;
  auto sched = CoefficientSchedule::convex(plan.S, plan.p_R, 1.0);
  const double p_star = prob.primal_value(prob.primal_optimum());
  std::size_t next_rec = 0;
  auto rec = [&](std::size_t t) {
    const double dv = prob.dual_value(res.x);
    res.trajectory.iteration.push_back(t);
    res.trajectory.dual.push_back(dv);
    res.trajectory.gap.push_back(dv + p_star);
    res.trajectory.A.push_back(sched.A());
  };
  rec(0);
  while (next_rec < record_at.size() && record_at[next_rec] == 0) ++next_rec;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    const std::size_t e = schedule.edges[t];
    const StepCoefficients co = sched.next();  // alpha = a/A+, step = a
    const double alpha = co.alpha, a = co.step;
    const Eigen::MatrixXd y = (1.0 - alpha) * res.x + alpha * res.v;
    const Edge &ed = aug.edge(e);
    Eigen::MatrixXd vn = res.v;
    const Eigen::RowVectorXd delta =
        a * plan.eta[e] * (aug.sigma_inv(ed.k) * y.row(Eigen::Index(ed.k)) -
                           aug.sigma_inv(ed.l) * y.row(Eigen::Index(ed.l)));
    vn.row(Eigen::Index(ed.k)) -= delta;
    vn.row(Eigen::Index(ed.l)) += delta;
    if (aug.is_virtual_edge(e)) {
      const auto [i, j] = aug.sample_of_edge(e);
      const std::size_t q = i * aug.m() + j;
      const double s = a * plan.eta[e];
      const Eigen::RowVectorXd z = vn.row(Eigen::Index(ed.l));
      const Eigen::RowVectorXd pr =
          (z - s * prob.b.row(Eigen::Index(q))).cwiseMax(-prob.c[q]).cwiseMin(prob.c[q]);
      vn.row(Eigen::Index(i)) += z - pr;
      vn.row(Eigen::Index(ed.l)) = pr;
    }
    res.x = y + (alpha * plan.R[e] / plan.p[e]) * (vn - res.v);
    res.v = std::move(vn);
    while (next_rec < record_at.size() && record_at[next_rec] == t + 1) {
      rec(t + 1);
      ++next_rec;
    }
  }
  return res;
}

}  // namespace adfs

#endif
