#ifndef ADFS_ADFS_HPP
#define ADFS_ADFS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "graph.hpp"
#include "problem.hpp"
#include "prox.hpp"
#include "schedule.hpp"

namespace adfs {

struct PlanOverrides {
  std::optional<double> p_comm;
  bool clamp = true;
};

/// Edge sampling distribution, rate and step sizes of a run.
struct SamplingPlan {
  double p_comm = 0.0;
  double p_comp = 1.0;
  std::vector<double> p;    // per augmented edge, communication edges first
  double rho = 0.0;
  double rho_rate = 0.0;    // before clamping
  std::vector<double> eta;  // rho mu^2 / (sigma_A p)
  std::vector<double> R;
  double sigma_A = 0.0;
  double gamma_tilde = 0.0;
  double S_comp = 0.0;
  double kappa_s = 0.0;
  double delta_p = 1.0;
  double c_tau = 0.0;
  double p_comm_max = 0.0;
  double tau = 0.0;
  bool throughput_hypothesis = true;
  bool clamped = false;
  std::vector<std::string> clamp_log;
};

/// Largest rho with rho^2 <= sigma_A p_e^2 / ((Sigma_k^-1 + Sigma_l^-1) mu_e^2 R_e) on every edge.
inline double rate_bound(const AugmentedGraph &aug, const SpectralData &sp,
                         const std::vector<double> &p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < aug.edge_count(); ++e) {
    const Edge &ed = aug.edge(e);
    const double denom = (aug.sigma_inv(ed.k) + aug.sigma_inv(ed.l)) * ed.weight * sp.R[e];
    if (denom > 0.0) best = std::min(best, sp.sigma_A * p[e] * p[e] / denom);
  }
  return std::sqrt(best);
}

/// Fills rho-dependent fields (clamps, steps, diagnostics) given plan.p.
inline void finalize_plan(SamplingPlan &plan, const AugmentedGraph &aug, const SpectralData &sp,
                          const SmoothnessSummary &sum, bool clamp) {
  if (sp.degenerate) throw NumericalError("sigma_A is numerically zero");
  plan.sigma_A = sp.sigma_A;
  plan.R = sp.R;
  plan.rho_rate = rate_bound(aug, sp, plan.p);
  plan.rho = plan.rho_rate;
  plan.clamp_log.clear();
  plan.clamped = false;
  auto limit = [&](double cap, const std::string &why) {
    if (cap < plan.rho) {
      plan.clamp_log.push_back(why + ": rho " + std::to_string(plan.rho) + " -> " +
                               std::to_string(cap));
      plan.rho = cap;
      plan.clamped = true;
    }
  };
  if (clamp) {
    const std::size_t E = aug.comm_edge_count();
    double heuristic = std::numeric_limits<double>::infinity();
    double exact = std::numeric_limits<double>::infinity();
    double apcg = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < aug.edge_count(); ++e)
      if (sp.R[e] > 0.0) apcg = std::min(apcg, plan.p[e] / sp.R[e]);
    for (std::size_t e = E; e < aug.edge_count(); ++e) {
      const std::size_t i = aug.edge(e).k;
      heuristic = std::min(heuristic, sum.kappa[i] / (2.0 * sum.kappa_s) * plan.p[e]);
      // eta~ / L < 1 with a small margin
      const double L = aug.sigma()[Eigen::Index(aug.edge(e).l)];
      exact = std::min(exact, (1.0 - 1e-9) * L * sp.sigma_A * plan.p[e] / aug.edge(e).weight);
    }
    limit(apcg, "rho R/p <= 1");
    limit(heuristic, "virtual-edge prox validity (kappa_i / 2 kappa_s) p_ij");
    limit(exact, "virtual-edge prox validity eta/L < 1");
  }
  plan.eta.resize(aug.edge_count());
  for (std::size_t e = 0; e < aug.edge_count(); ++e)
    plan.eta[e] = plan.rho * aug.edge(e).weight / (sp.sigma_A * plan.p[e]);

  const std::size_t E = aug.comm_edge_count();
  plan.p_comm_max = max_comm_probability(aug, plan.p);
  if (E > 0 && plan.p_comm > 0.0) {
    double pmin = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < E; ++e) pmin = std::min(pmin, plan.p[e]);
    plan.delta_p = pmin * double(E) / plan.p_comm;
    plan.c_tau = plan.p_comm_max / plan.p_comm;
  } else {
    plan.delta_p = 1.0;
    plan.c_tau = 0.0;
  }
  plan.throughput_hypothesis = plan.p_comp > plan.p_comm_max || plan.tau > 1.0;
}

/// Parameter choice: communication edges get p_comm / E with
///   p_comm = min(1/2, 1 / (1 + S_comp sqrt(gamma~ / kappa_s))),
/// virtual edges get p_comp sqrt(1 + L_ij / sigma_i) / (n S_comp).
inline SamplingPlan select_parameters(const AugmentedGraph &aug, const SpectralData &sp,
                                      const SmoothnessSummary &sum, double tau,
                                      const PlanOverrides &ov = {}) {
  const std::size_t n = aug.n(), m = aug.m(), E = aug.comm_edge_count();
  detail::require(tau >= 0.0, "tau must be nonnegative");
  detail::require(sum.kappa.size() == n, "smoothness summary does not match the graph");
  SamplingPlan plan;
  plan.tau = tau;
  plan.S_comp = sum.S_comp;
  plan.kappa_s = sum.kappa_s;
  plan.gamma_tilde = sp.gamma_tilde;
  if (E == 0) {
    if (ov.p_comm && *ov.p_comm != 0.0)
      throw ValidationError("p_comm must be 0 without communication edges");
    plan.p_comm = 0.0;
  } else if (ov.p_comm) {
    if (!(*ov.p_comm > 0.0 && *ov.p_comm < 1.0))
      throw ValidationError("p_comm override must lie in (0, 1)");
    plan.p_comm = *ov.p_comm;
  } else {
    plan.p_comm =
        std::min(0.5, 1.0 / (1.0 + sum.S_comp * std::sqrt(sp.gamma_tilde / sum.kappa_s)));
  }
  plan.p_comp = 1.0 - plan.p_comm;

  plan.p.assign(aug.edge_count(), 0.0);
  for (std::size_t e = 0; e < E; ++e) plan.p[e] = plan.p_comm / double(E);
  const Eigen::VectorXd &sig = aug.sigma();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double L = sig[Eigen::Index(aug.virtual_node(i, j))];
      plan.p[aug.virtual_edge(i, j)] =
          plan.p_comp * std::sqrt(1.0 + L / sig[Eigen::Index(i)]) / (double(n) * sum.S_comp);
    }
  finalize_plan(plan, aug, sp, sum, ov.clamp);
  return plan;
}

/// Smoothness summary read from an augmented graph's Sigma.
inline SmoothnessSummary summarize(const AugmentedGraph &aug) {
  const std::size_t n = aug.n(), m = aug.m();
  std::vector<double> L(n * m), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = aug.sigma()[Eigen::Index(i)];
    for (std::size_t j = 0; j < m; ++j) L[i * m + j] = aug.sigma()[Eigen::Index(aug.virtual_node(i, j))];
  }
  return summarize(L, s, m);
}

/// Dense iterate: one row per augmented node.
struct AdfsDenseState {
  Eigen::MatrixXd x, v;
  std::vector<double> warm;  // 1-D prox warm start per virtual node
  std::size_t t = 0;

  static AdfsDenseState zeros(const AugmentedGraph &aug, std::size_t d) {
    AdfsDenseState s;
    s.x = Eigen::MatrixXd::Zero(Eigen::Index(aug.node_count()), Eigen::Index(d));
    s.v = s.x;
    s.warm.assign(aug.n() * aug.m(), 0.0);
    return s;
  }

  Eigen::MatrixXd y(double rho) const { return (x + rho * v) / (1.0 + rho); }
};

/// One ADFS iteration on edge e, all rows updated.
inline void adfs_step_dense(AdfsDenseState &s, std::size_t e, const SamplingPlan &plan,
                            const AugmentedGraph &aug, const ProblemSpec &prob,
                            const ProxOptions &opt = {}) {
  const double rho = plan.rho;
  const Edge &ed = aug.edge(e);
  const Eigen::MatrixXd y = s.y(rho);
  // z = (1 - rho) v + rho y - eta W Sigma^{-1} y
  Eigen::MatrixXd z = (1.0 - rho) * s.v + rho * y;
  const Eigen::RowVectorXd delta =
      plan.eta[e] * (aug.sigma_inv(ed.k) * y.row(Eigen::Index(ed.k)) -
                     aug.sigma_inv(ed.l) * y.row(Eigen::Index(ed.l)));
  z.row(Eigen::Index(ed.k)) -= delta;
  z.row(Eigen::Index(ed.l)) += delta;
  Eigen::MatrixXd vn = z;
  if (aug.is_virtual_edge(e)) {
    const auto [i, j] = aug.sample_of_edge(e);
    const std::size_t q = prob.index(i, j);
    const Eigen::VectorXd a = prob.feature(q).transpose();
    const auto cp = prox_conjugate_tilde(prob.scalar_loss(q), a, plan.eta[e],
                                         aug.sigma()[Eigen::Index(ed.l)],
                                         z.row(Eigen::Index(ed.l)).transpose(), s.warm[q], opt);
    s.warm[q] = cp.s;
    vn.row(Eigen::Index(ed.l)) = cp.value.transpose();
    vn.row(Eigen::Index(i)) = z.row(Eigen::Index(i)) + cp.consumed.transpose();
  }
  const double c = rho * plan.R[e] / plan.p[e];
  s.x = y + c * (vn - (1.0 - rho) * s.v - rho * y);
  s.v = std::move(vn);
  ++s.t;
}

/// Sparse iterate for linear-model losses. Centers store d-vectors, virtual
/// nodes store scalar coefficients along their feature X_ij. Each node keeps
/// the iteration count its values are valid for; the convex combinations it
/// missed are applied in closed form when it is next touched.
struct AdfsSparseState {
  Eigen::MatrixXd xc, vc;         // n x d
  std::vector<double> xs, vs;     // n*m coefficients
  std::vector<double> warm;       // n*m
  std::vector<std::size_t> last;  // n(1+m)
  std::size_t t = 0;

  static AdfsSparseState zeros(const AugmentedGraph &aug, std::size_t d) {
    AdfsSparseState s;
    s.xc = Eigen::MatrixXd::Zero(Eigen::Index(aug.n()), Eigen::Index(d));
    s.vc = s.xc;
    s.xs.assign(aug.n() * aug.m(), 0.0);
    s.vs = s.xs;
    s.warm = s.xs;
    s.last.assign(aug.node_count(), 0);
    return s;
  }
};

namespace detail {

/// Coefficients (same, cross) of M^c with M = [[1, rho], [rho, 1]] / (1 + rho),
/// the map (x, v) -> (x+, v+) of an untouched node.
inline std::pair<double, double> lazy_power(double rho, std::size_t c) {
  if (c == 0) return {1.0, 0.0};
  const double q = std::pow((1.0 - rho) / (1.0 + rho), double(c));
  return {0.5 * (1.0 + q), 0.5 * (1.0 - q)};
}

inline void catch_up_center(AdfsSparseState &s, std::size_t i, double rho) {
  const auto [a, b] = lazy_power(rho, s.t - s.last[i]);
  if (b != 0.0) {
    const Eigen::RowVectorXd x = s.xc.row(Eigen::Index(i)), v = s.vc.row(Eigen::Index(i));
    s.xc.row(Eigen::Index(i)) = a * x + b * v;
    s.vc.row(Eigen::Index(i)) = b * x + a * v;
  }
  s.last[i] = s.t;
}

inline void catch_up_virtual(AdfsSparseState &s, std::size_t node, std::size_t q, double rho) {
  const auto [a, b] = lazy_power(rho, s.t - s.last[node]);
  if (b != 0.0) {
    const double x = s.xs[q], v = s.vs[q];
    s.xs[q] = a * x + b * v;
    s.vs[q] = b * x + a * v;
  }
  s.last[node] = s.t;
}

}  // namespace detail

/// One ADFS iteration touching only the two endpoints of e.
inline void adfs_step_sparse(AdfsSparseState &s, std::size_t e, const SamplingPlan &plan,
                             const AugmentedGraph &aug, const ProblemSpec &prob,
                             const ProxOptions &opt = {}) {
  const double rho = plan.rho;
  const double c = rho * plan.R[e] / plan.p[e];
  const double eta = plan.eta[e];
  const Edge &ed = aug.edge(e);
  if (!aug.is_virtual_edge(e)) {
    const std::size_t k = ed.k, l = ed.l;
    detail::catch_up_center(s, k, rho);
    detail::catch_up_center(s, l, rho);
    const Eigen::RowVectorXd yk = (s.xc.row(Eigen::Index(k)) + rho * s.vc.row(Eigen::Index(k))) / (1.0 + rho);
    const Eigen::RowVectorXd yl = (s.xc.row(Eigen::Index(l)) + rho * s.vc.row(Eigen::Index(l))) / (1.0 + rho);
    const Eigen::RowVectorXd delta = eta * (aug.sigma_inv(k) * yk - aug.sigma_inv(l) * yl);
    s.vc.row(Eigen::Index(k)) = (1.0 - rho) * s.vc.row(Eigen::Index(k)) + rho * yk - delta;
    s.vc.row(Eigen::Index(l)) = (1.0 - rho) * s.vc.row(Eigen::Index(l)) + rho * yl + delta;
    s.xc.row(Eigen::Index(k)) = yk - c * delta;
    s.xc.row(Eigen::Index(l)) = yl + c * delta;
  } else {
    const auto [i, j] = aug.sample_of_edge(e);
    const std::size_t q = prob.index(i, j);
    const std::size_t node = ed.l;
    detail::catch_up_center(s, i, rho);
    detail::catch_up_virtual(s, node, q, rho);
    const auto a = prob.feature(q);
    const double a2 = a.squaredNorm();
    const double L = aug.sigma()[Eigen::Index(node)];
    if (eta / L >= 1.0) throw StepTooLarge("conjugate prox: step too large");
    const Eigen::RowVectorXd yi = (s.xc.row(Eigen::Index(i)) + rho * s.vc.row(Eigen::Index(i))) / (1.0 + rho);
    const double ys = (s.xs[q] + rho * s.vs[q]) / (1.0 + rho);
    const double base = (1.0 - rho) * s.vs[q] + rho * ys;  // z^(ij) before the W term, along a
    // a^T z^(ij) = base |a|^2 + eta (a^T y_i / sigma_i - ys |a|^2 / L)
    const double az = base * a2 + eta * (a.dot(yi) * aug.sigma_inv(i) - ys * a2 / L);
    const double h = 1.0 / eta - 1.0 / L;
    const ScalarLoss loss = prob.scalar_loss(q);
    const double sol = prox_loss_1d(loss, h * a2, az / eta, s.warm[q], opt);
    s.warm[q] = sol;
    const double vs_new = loss.deriv(sol);
    const double moved = base - vs_new;  // consumed mass along a
    s.vc.row(Eigen::Index(i)) = (1.0 - rho) * s.vc.row(Eigen::Index(i)) + rho * yi + moved * a;
    s.xc.row(Eigen::Index(i)) = yi + (c * moved) * a;
    s.xs[q] = ys + c * (vs_new - base);
    s.vs[q] = vs_new;
  }
  ++s.t;
  s.last[ed.k] = s.t;
  s.last[ed.l] = s.t;
}

/// Dense (x, v) of a sparse state at its current iteration, without mutating it.
inline AdfsDenseState materialize(const AdfsSparseState &s, const AugmentedGraph &aug,
                                  const ProblemSpec &prob, double rho) {
  AdfsDenseState d = AdfsDenseState::zeros(aug, prob.d());
  d.t = s.t;
  d.warm = s.warm;
  for (std::size_t i = 0; i < aug.n(); ++i) {
    const auto [a, b] = detail::lazy_power(rho, s.t - s.last[i]);
    d.x.row(Eigen::Index(i)) = a * s.xc.row(Eigen::Index(i)) + b * s.vc.row(Eigen::Index(i));
    d.v.row(Eigen::Index(i)) = b * s.xc.row(Eigen::Index(i)) + a * s.vc.row(Eigen::Index(i));
  }
  for (std::size_t i = 0; i < aug.n(); ++i)
    for (std::size_t j = 0; j < aug.m(); ++j) {
      const std::size_t node = aug.virtual_node(i, j), q = prob.index(i, j);
      const auto [a, b] = detail::lazy_power(rho, s.t - s.last[node]);
      const auto f = prob.feature(q);
      d.x.row(Eigen::Index(node)) = (a * s.xs[q] + b * s.vs[q]) * f;
      d.v.row(Eigen::Index(node)) = (b * s.xs[q] + a * s.vs[q]) * f;
    }
  return d;
}

/// Center rows of Sigma^{-1} y at the current iteration of a sparse state.
inline Eigen::MatrixXd center_parameters_y(const AdfsSparseState &s, const AugmentedGraph &aug,
                                           double rho) {
  Eigen::MatrixXd th(s.xc.rows(), s.xc.cols());
  for (std::size_t i = 0; i < aug.n(); ++i) {
    const auto [a, b] = detail::lazy_power(rho, s.t - s.last[i]);
    const Eigen::RowVectorXd x = a * s.xc.row(Eigen::Index(i)) + b * s.vc.row(Eigen::Index(i));
    const Eigen::RowVectorXd v = b * s.xc.row(Eigen::Index(i)) + a * s.vc.row(Eigen::Index(i));
    th.row(Eigen::Index(i)) = (x + rho * v) / ((1.0 + rho) * aug.sigma()[Eigen::Index(i)]);
  }
  return th;
}

inline Eigen::MatrixXd center_parameters_v(const AdfsSparseState &s, const AugmentedGraph &aug,
                                           double rho) {
  Eigen::MatrixXd th(s.xc.rows(), s.xc.cols());
  for (std::size_t i = 0; i < aug.n(); ++i) {
    const auto [a, b] = detail::lazy_power(rho, s.t - s.last[i]);
    th.row(Eigen::Index(i)) = (b * s.xc.row(Eigen::Index(i)) + a * s.vc.row(Eigen::Index(i))) /
                              aug.sigma()[Eigen::Index(i)];
  }
  return th;
}

struct AdfsTrajectory {
  std::vector<std::size_t> iteration;
  std::vector<double> gap_y, gap_v;    // mean over centers of F(theta_i) - F*
  std::vector<double> dist_y, dist_v;  // mean over centers of |theta_i - theta*|^2
};

struct AdfsOptions {
  std::size_t record_every = 1;
  bool sparse = true;
  ProxOptions prox;
};

struct AdfsResult {
  Eigen::MatrixXd theta;  // Sigma^{-1} v at the centers after the last step
  AdfsTrajectory trajectory;
};

/// Primal error summaries of center parameters against theta*.
inline void record_errors(AdfsTrajectory &tr, std::size_t t, const Eigen::MatrixXd &th_y,
                          const Eigen::MatrixXd &th_v, const ProblemSpec &prob,
                          const Eigen::VectorXd &theta_star, double f_star) {
  const auto n = th_y.rows();
  double gy = 0, gv = 0, dy = 0, dv = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd a = th_y.row(i).transpose(), b = th_v.row(i).transpose();
    gy += primal_value(a, prob) - f_star;
    gv += primal_value(b, prob) - f_star;
    dy += (a - theta_star).squaredNorm();
    dv += (b - theta_star).squaredNorm();
  }
  tr.iteration.push_back(t);
  tr.gap_y.push_back(gy / double(n));
  tr.gap_v.push_back(gv / double(n));
  tr.dist_y.push_back(dy / double(n));
  tr.dist_v.push_back(dv / double(n));
}

/// Runs ADFS along a given schedule and records primal errors at iteration 0,
/// every `record_every` steps and at the end.
inline AdfsResult run_adfs(const ProblemSpec &prob, const AugmentedGraph &aug,
                           const SamplingPlan &plan, const Schedule &schedule,
                           const Eigen::VectorXd &theta_star, const AdfsOptions &opt = {}) {
  detail::require(prob.n() == aug.n() && prob.m() == aug.m(), "problem does not match graph");
  detail::require(opt.record_every >= 1, "record_every must be positive");
  const double f_star = primal_value(theta_star, prob);
  const double rho = plan.rho;
  const std::size_t K = schedule.size();
  AdfsResult res;
  auto centers = [&](const Eigen::MatrixXd &rows) {
    Eigen::MatrixXd th = rows.topRows(Eigen::Index(aug.n()));
    for (std::size_t i = 0; i < aug.n(); ++i) th.row(Eigen::Index(i)) *= aug.sigma_inv(i);
    return th;
  };
  if (opt.sparse) {
    AdfsSparseState s = AdfsSparseState::zeros(aug, prob.d());
    auto rec = [&] {
      record_errors(res.trajectory, s.t, center_parameters_y(s, aug, rho),
                    center_parameters_v(s, aug, rho), prob, theta_star, f_star);
    };
    rec();
    for (std::size_t t = 0; t < K; ++t) {
      adfs_step_sparse(s, schedule.edges[t], plan, aug, prob, opt.prox);
      if ((t + 1) % opt.record_every == 0 || t + 1 == K) rec();
    }
    res.theta = center_parameters_v(s, aug, rho);
  } else {
    AdfsDenseState s = AdfsDenseState::zeros(aug, prob.d());
    auto rec = [&] {
      record_errors(res.trajectory, s.t, centers(s.y(rho)), centers(s.v), prob, theta_star, f_star);
    };
    rec();
    for (std::size_t t = 0; t < K; ++t) {
      adfs_step_dense(s, schedule.edges[t], plan, aug, prob, opt.prox);
      if ((t + 1) % opt.record_every == 0 || t + 1 == K) rec();
    }
    res.theta = centers(s.v);
  }
  return res;
}

inline AdfsResult run_adfs(const ProblemSpec &prob, const AugmentedGraph &aug,
                           const SamplingPlan &plan, std::size_t K, std::uint64_t seed,
                           const Eigen::VectorXd &theta_star, const AdfsOptions &opt = {}) {
  return run_adfs(prob, aug, plan, sample_schedule(plan.p, K, seed), theta_star, opt);
}

/// Dual optimum in node variables: sigma_i theta* at centers, grad f_ij(theta*)
/// at virtual nodes.
inline Eigen::MatrixXd dual_optimum(const ProblemSpec &prob, const AugmentedGraph &aug,
                                    const Eigen::VectorXd &theta_star) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(aug.node_count()), static_cast<Eigen::Index>(prob.d()));
  for (std::size_t i = 0; i < aug.n(); ++i)
    v.row(Eigen::Index(i)) = prob.sigma()[i] * theta_star.transpose();
  for (std::size_t i = 0; i < aug.n(); ++i)
    for (std::size_t j = 0; j < aug.m(); ++j) {
      const std::size_t q = prob.index(i, j);
      const auto a = prob.feature(q);
      v.row(Eigen::Index(aug.virtual_node(i, j))) =
          prob.scalar_loss(q).deriv(a.dot(theta_star)) * a;
    }
  return v;
}

/// C0 = lambda_max(A^T Sigma^-2 A) [ |A^+ A lambda*|^2 + 2 (F*_A(0) - F*_A(lambda*)) / sigma_A ].
/// With v* = A lambda*, |A^+ A lambda*|^2 = v*^T (A A^T)^+ v*; F*_A(0) = 0 for
/// losses whose infimum is 0, and the dual optimum is -F(theta*).
inline double rate_constant(const ProblemSpec &prob, const AugmentedGraph &aug,
                            const SpectralData &sp, const Eigen::VectorXd &theta_star) {
  const Eigen::MatrixXd vs = dual_optimum(prob, aug, theta_star);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(aug.laplacian());
  const double top = es.eigenvalues().maxCoeff();
  double proj = 0.0;
  for (Eigen::Index q = 0; q < es.eigenvalues().size(); ++q) {
    const double lam = es.eigenvalues()[q];
    if (lam > detail::kKernelTolerance * top)
      proj += (es.eigenvectors().col(q).transpose() * vs).squaredNorm() / lam;
  }
  return sp.lambda_max_A2 * (proj + 2.0 * primal_value(theta_star, prob) / sp.sigma_A);
}

/// The ADFS dual as a composite problem for generalized APCG: one coordinate
/// per augmented edge (rows of width d),
///   q_A(lambda) = Tr(lambda^T A^T Sigma^-1 A lambda) / 2,
///   psi_e(lambda) = f~*(-mu lambda) on virtual edges, 0 otherwise,
/// so prox_{eta psi}(u) = -(1/mu) prox_{eta mu^2 f~*}(-mu u).
struct AdfsDualComposite {
  const AugmentedGraph *aug = nullptr;
  const ProblemSpec *prob = nullptr;
  std::vector<double> Rv;
  std::vector<double> warm;
  ProxOptions opt;

  AdfsDualComposite(const AugmentedGraph &g, const ProblemSpec &p, const SpectralData &sp)
      : aug(&g), prob(&p), Rv(sp.R), warm(p.n() * p.m(), 0.0) {}

  /// A lambda (node variables).
  Eigen::MatrixXd lift(const Eigen::MatrixXd &lambda) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(Eigen::Index(aug->node_count()), lambda.cols());
    for (std::size_t e = 0; e < aug->edge_count(); ++e) {
      const Edge &ed = aug->edge(e);
      const double mu = std::sqrt(ed.weight);
      out.row(Eigen::Index(ed.k)) += mu * lambda.row(Eigen::Index(e));
      out.row(Eigen::Index(ed.l)) -= mu * lambda.row(Eigen::Index(e));
    }
    return out;
  }

  std::vector<double> M() const {
    std::vector<double> m(aug->edge_count());
    for (std::size_t e = 0; e < m.size(); ++e) {
      const Edge &ed = aug->edge(e);
      m[e] = ed.weight * (aug->sigma_inv(ed.k) + aug->sigma_inv(ed.l));
    }
    return m;
  }

  Eigen::RowVectorXd gradient(const Eigen::MatrixXd &lambda, std::size_t e) const {
    const Eigen::MatrixXd node = lift(lambda);
    const Edge &ed = aug->edge(e);
    return std::sqrt(ed.weight) * (aug->sigma_inv(ed.k) * node.row(Eigen::Index(ed.k)) -
                                   aug->sigma_inv(ed.l) * node.row(Eigen::Index(ed.l)));
  }
  bool has_prox(std::size_t e) const { return aug->is_virtual_edge(e); }
  Eigen::RowVectorXd prox(std::size_t e, double eta, const Eigen::RowVectorXd &u) {
    const Edge &ed = aug->edge(e);
    const double mu = std::sqrt(ed.weight);
    const auto [i, j] = aug->sample_of_edge(e);
    const std::size_t q = prob->index(i, j);
    const auto cp = prox_conjugate_tilde(prob->scalar_loss(q), prob->feature(q).transpose(),
                                         eta * ed.weight, aug->sigma()[Eigen::Index(ed.l)],
                                         (-mu * u).transpose(), warm[q], opt);
    warm[q] = cp.s;
    return (-cp.value / mu).transpose();
  }
  double R(std::size_t e) const { return Rv[e]; }
};

}  // namespace adfs

#endif
