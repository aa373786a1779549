#ifndef ADFS_VERIFY_CRITERIA_HPP
#define ADFS_VERIFY_CRITERIA_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "../adfs.hpp"
#include "../apcg.hpp"
#include "../graph.hpp"
#include "../ns_adfs.hpp"
#include "../problem.hpp"
#include "../prox.hpp"
#include "../schedule.hpp"
#include "oracles.hpp"

namespace adfs::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct Instance {
  ProblemSpec prob;
  AugmentedGraph aug;
  SpectralData sp;
  SmoothnessSummary sum;
  SamplingPlan plan;
};

inline Instance make_instance(ProblemSpec prob, const CommGraph &g, double tau,
                              const PlanOverrides &ov = {}) {
  Instance in;
  in.prob = std::move(prob);
  in.aug = augment(g, in.prob.m(), in.prob.smoothness(), in.prob.sigma());
  in.sp = spectral_quantities(in.aug);
  in.sum = summarize(in.prob);
  in.plan = select_parameters(in.aug, in.sp, in.sum, tau, ov);
  return in;
}

inline double rel_diff(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
  return (a - b).norm() / std::max(a.norm(), 1e-300);
}

}  // namespace detail

/// 1. Dense and sparse ADFS agree on random small configurations.
inline CriterionResult dense_sparse_equivalence(std::size_t configs = 20, std::size_t steps = 500,
                                                std::uint64_t seed = 101) {
  CriterionResult r{1, "dense/sparse ADFS equivalence"};
  r.threshold = 1e-9;
  Pcg64 rng(seed, 7);
  const std::array<GridShape, 4> grids{{{2, 2}, {2, 3}, {3, 3}, {2, 4}}};
  double worst = 0.0;
  for (std::size_t c = 0; c < configs; ++c) {
    CommGraph g;
    if (rng.below(2) == 0) {
      g = build_topology(Topology::complete, 2 + std::size_t(rng.below(8)));
    } else {
      const GridShape s = grids[rng.below(grids.size())];
      g = build_topology(Topology::grid2d, s.rows * s.cols, 0.5, {}, s);
    }
    const std::size_t m = 1 + std::size_t(rng.below(50)), d = 1 + std::size_t(rng.below(10));
    const double sigma = 0.1 + 1.9 * rng.uniform();
    const bool logistic = rng.below(2) == 0;
    ProblemSpec prob = logistic ? synth_classification(seed + c, g.n(), m, d, 2.0, sigma)
                                : synth_regression(seed + c, g.n(), m, d, 0.1, sigma);
    const auto in = detail::make_instance(std::move(prob), g, 1.0);
    const Schedule sched = sample_schedule(in.plan.p, steps, seed + 1000 + c);
    AdfsDenseState dense = AdfsDenseState::zeros(in.aug, in.prob.d());
    AdfsSparseState sparse = AdfsSparseState::zeros(in.aug, in.prob.d());
    for (std::size_t t = 0; t < steps; ++t) {
      adfs_step_dense(dense, sched.edges[t], in.plan, in.aug, in.prob);
      adfs_step_sparse(sparse, sched.edges[t], in.plan, in.aug, in.prob);
      if ((t + 1) % 25 == 0 || t + 1 == steps) {
        const AdfsDenseState mat = materialize(sparse, in.aug, in.prob, in.plan.rho);
        worst = std::max({worst, detail::rel_diff(dense.x, mat.x), detail::rel_diff(dense.v, mat.v)});
      }
    }
  }
  r.measured = worst;
  r.passed = worst <= r.threshold;
  r.detail = std::to_string(configs) + " configs x " + std::to_string(steps) + " steps";
  return r;
}

/// 2. On a single node, ADFS is generalized APCG on the dual composite.
inline CriterionResult single_node_reduction(std::size_t steps = 1000, std::uint64_t seed = 202) {
  CriterionResult r{2, "n=1 ADFS equals generalized APCG"};
  r.threshold = 1e-10;
  const CommGraph g = CommGraph::from_edges(1, {});
  const auto in = detail::make_instance(synth_classification(seed, 1, 12, 4, 2.0, 0.5), g, 1.0);
  AdfsDualComposite comp(in.aug, in.prob, in.sp);
  auto sched = make_schedule_sc(in.sp.sigma_A, comp.M(), in.plan.p, in.sp.R,
                                std::sqrt(in.sp.sigma_A) / in.plan.rho);
  const Schedule edges = sample_schedule(in.plan.p, steps, seed);
  AdfsDenseState s = AdfsDenseState::zeros(in.aug, in.prob.d());
  ApcgState a = ApcgState::zeros(in.aug.edge_count(), in.prob.d());
  double worst = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t e = edges.edges[t];
    adfs_step_dense(s, e, in.plan, in.aug, in.prob);
    apcg_step(comp, sched.next(), in.plan.p, a, e);
    worst = std::max({worst, detail::rel_diff(s.x, comp.lift(a.x)), detail::rel_diff(s.v, comp.lift(a.v))});
  }
  r.measured = worst;
  r.passed = worst <= r.threshold;
  r.detail = "m=12, d=4, logistic, " + std::to_string(steps) + " steps";
  return r;
}

/// 3. Averaged squared distance on a 2x2 grid decays at least at the rate rho.
inline CriterionResult linear_rate(std::size_t seeds = 50, std::uint64_t seed = 303) {
  CriterionResult r{3, "linear rate on 2x2 grid"};
  const CommGraph g = build_topology(Topology::grid2d, 4);
  const auto in = detail::make_instance(synth_regression(seed, 4, 20, 5, 0.1), g, 1.0);
  const Eigen::VectorXd theta_star = solve_reference(in.prob);
  const double rho = in.plan.rho;
  const std::size_t K = std::size_t(std::ceil(8.0 / rho));
  AdfsOptions opt;
  opt.record_every = std::max<std::size_t>(1, K / 200);
  std::vector<double> mean;
  std::vector<std::size_t> its;
  for (std::size_t q = 0; q < seeds; ++q) {
    const AdfsResult res = run_adfs(in.prob, in.aug, in.plan, K, seed + q, theta_star, opt);
    if (mean.empty()) {
      mean.assign(res.trajectory.dist_y.size(), 0.0);
      its = res.trajectory.iteration;
    }
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += res.trajectory.dist_y[k] / double(seeds);
  }
  std::vector<double> x, y;
  for (std::size_t k = 0; k < its.size(); ++k)
    if (double(its[k]) >= 0.2 * double(K) && mean[k] > 0.0) {
      x.push_back(double(its[k]));
      y.push_back(std::log(mean[k]));
    }
  r.measured = fit_slope(x, y);
  r.threshold = std::log1p(-rho) + 0.05;
  r.passed = r.measured <= r.threshold;
  r.detail = "rho=" + detail::num(rho) + ", K=" + std::to_string(K) + ", " + std::to_string(seeds) +
             " seeds, final mean |theta-theta*|^2=" + detail::num(mean.back());
  return r;
}

/// 4. Conjugate prox through the primal prox agrees with direct minimization.
inline CriterionResult conjugate_prox_identity(std::size_t cases = 200, std::uint64_t seed = 404) {
  CriterionResult r{4, "conjugate prox vs brute force"};
  r.threshold = 1e-7;
  Pcg64 rng(seed, 4);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    ScalarLoss loss;
    if (rng.below(2) == 0) {
      loss.kind = Loss::logistic;
      loss.c = rng.below(2) == 0 ? 1.0 : -1.0;
    } else {
      loss.kind = Loss::quadratic;
      loss.c = 2.0 * rng.normal();
    }
    const double L = loss.curvature_bound() * (1.0 + 2.0 * rng.uniform());
    const double eta = L * (0.01 + 0.97 * rng.uniform());
    const double z = 3.0 * rng.normal();
    const double fast = prox_conjugate_tilde(loss, eta, L, z);
    const double slow = brute_conjugate_prox(loss, eta, L, z);
    worst = std::max(worst, std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
  }
  r.measured = worst;
  r.passed = worst <= r.threshold;
  r.detail = std::to_string(cases) + " logistic/quadratic cases";
  return r;
}

/// 5. Virtual edges have unit resistance, and the augmented Laplacian keeps
/// a spectral gap of at least lambda_min^+(L) / (2 sigma kappa).
inline CriterionResult augmented_graph_properties(std::size_t graphs = 50, std::uint64_t seed = 505) {
  CriterionResult r{5, "virtual-edge resistance and augmented gap"};
  r.threshold = 1e-10;
  Pcg64 rng(seed, 5);
  double worst_R = 0.0, worst_ratio = std::numeric_limits<double>::infinity();
  bool gap_ok = true;
  for (std::size_t c = 0; c < graphs; ++c) {
    const std::size_t n = 2 + std::size_t(rng.below(7)), m = 1 + std::size_t(rng.below(6));
    const CommGraph g = random_connected_graph(rng, n);
    std::vector<double> L(n * m), s(n);
    for (double &x : L) x = std::exp(rng.normal());
    for (double &x : s) x = std::pow(10.0, -2.0 + 3.0 * rng.uniform());
    const AugmentedGraph aug = augment(g, m, L, s);
    const SpectralData sp = spectral_quantities(aug);
    for (std::size_t e = aug.comm_edge_count(); e < aug.edge_count(); ++e)
      worst_R = std::max(worst_R, std::abs(sp.R[e] - 1.0));
    const GapBoundReport gb = check_augmented_gap_bound(aug);
    gap_ok = gap_ok && gb.holds;
    worst_ratio = std::min(worst_ratio, gb.lhs / gb.rhs);
  }
  r.measured = worst_R;
  r.passed = worst_R <= r.threshold && gap_ok;
  r.detail = "max |R-1| over virtual edges; gap bound " + std::string(gap_ok ? "holds" : "FAILS") +
             " (min lhs/rhs=" + detail::num(worst_ratio) + ")";
  return r;
}

/// 6. The four-node schedule A-C, B-D, A-B, D, C-D with tau = 2.
inline CriterionResult timing_ground_truth() {
  CriterionResult r{6, "timing simulator ground truth"};
  r.threshold = 0.0;
  enum { A, B, C, D };
  const std::vector<TimedEvent> ev{{true, A, C}, {true, B, D}, {true, A, B}, {false, D, D}, {true, C, D}};
  const TimingTrace tr = simulate_time(ev, 4, 2.0);
  const std::array<double, 5> expect{2, 2, 4, 3, 5};
  double worst = std::abs(tr.total() - 5.0);
  for (std::size_t q = 0; q < expect.size(); ++q) worst = std::max(worst, std::abs(tr.finish[q] - expect[q]));
  r.measured = worst;
  r.passed = worst == 0.0;
  std::string fin;
  for (double f : tr.finish) fin += (fin.empty() ? "" : ",") + detail::num(f);
  r.detail = "finishes (" + fin + "), T_max=" + detail::num(tr.total());
  return r;
}

/// 7. Throughput constant on grids of 4, 16 and 64 nodes.
inline CriterionResult throughput_envelope(std::size_t t = 10000, std::size_t trials = 10,
                                           std::uint64_t seed = 707) {
  CriterionResult r{7, "throughput envelope on grids"};
  r.threshold = 24.0;
  const std::array<std::size_t, 3> sizes{4, 16, 64};
  std::array<double, 3> per{};
  double worst_C = 0.0;
  std::string info;
  for (std::size_t q = 0; q < sizes.size(); ++q) {
    const std::size_t n = sizes[q];
    const CommGraph g = build_topology(Topology::grid2d, n);
    const auto in = detail::make_instance(synth_classification(seed + n, n, 30, 5, 2.0), g, 5.0);
    const ThroughputReport rep = estimate_throughput(in.plan.p, in.aug, 5.0, t, trials, seed);
    per[q] = rep.mean_time_per_iter;
    worst_C = std::max(worst_C, rep.C);
    info += "n=" + std::to_string(n) + ": C=" + detail::num(rep.C) + " T/t=" + detail::num(per[q]) + "; ";
  }
  const double shrink = std::min(per[0] / per[1], per[1] / per[2]);
  r.measured = worst_C;
  r.passed = worst_C < r.threshold && shrink >= 1.5;
  r.detail = info + "min shrink per 4x n=" + detail::num(shrink) + " (need >= 1.5)";
  return r;
}

/// 8. Convex-mode APCG stays below its sublinear bound on a flat quadratic.
inline CriterionResult apcg_sublinear_bound(std::size_t seeds = 100, std::size_t T = 10000,
                                            std::uint64_t seed = 808) {
  CriterionResult r{8, "convex APCG sublinear bound"};
  r.threshold = 1.0;
  // Q = U diag(2, 0.5, 0) U^T with a fixed rotation.
  Pcg64 rng(seed, 8);
  Eigen::MatrixXd G(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) G(i / 3, i % 3) = rng.normal();
  const Eigen::MatrixXd U = G.householderQr().householderQ();
  const Eigen::MatrixXd Q = U * Eigen::Vector3d(2.0, 0.5, 0.0).asDiagonal() * U.transpose();
  const Eigen::VectorXd b = Q * Eigen::Vector3d(1.0, -2.0, 0.5);
  QuadraticComposite prob = QuadraticComposite::make(Q, b);
  const std::vector<double> p{0.5, 0.3, 0.2};
  const double S = sampling_smoothness(prob.M, p, prob.Rv);
  const double p_R = projected_min_probability(p, prob.Rv);
  const Eigen::VectorXd theta_star = prob.minimizer();
  std::vector<double> gap(T + 1, 0.0), dist(T + 1, 0.0);
  for (std::size_t q = 0; q < seeds; ++q) {
    const auto tr = run_apcg(prob, make_schedule_cvx(S, p_R, 1.0), p, T, seed + q, theta_star,
                             prob.projector, 1);
    for (std::size_t k = 0; k <= T; ++k) {
      gap[k] += tr.gap[k] / double(seeds);
      dist[k] += tr.dist_proj[k] / double(seeds);
    }
  }
  const double F0 = gap[0];
  double worst = 0.0;
  for (std::size_t t = 10; t <= T; ++t) {
    const double rt2 = dist[0] - dist[t];
    const double bound = 2.0 / (double(t) * double(t)) * (S * S * rt2 + 6.0 * F0 / (p_R * p_R));
    worst = std::max(worst, gap[t] / bound);
  }
  r.measured = worst;
  r.passed = worst <= r.threshold;
  r.detail = "max gap/bound over t in [10, " + std::to_string(T) + "], " + std::to_string(seeds) +
             " seeds, S=" + detail::num(S) + ", p_R=" + detail::num(p_R);
  return r;
}

/// 9. NS-ADFS dual gap decays like 1/t^2 on a two-node toy.
inline CriterionResult nonsmooth_trend(std::size_t seeds = 20, std::uint64_t seed = 909) {
  CriterionResult r{9, "NS-ADFS dual gap exponent"};
  r.threshold = -1.8;
  const std::size_t m = 2, d = 2, T = 10000;
  const CommGraph g = build_topology(Topology::complete, 2);
  NonsmoothProblem prob;
  prob.n = 2;
  prob.m = m;
  prob.sigma = {1.0, 1.0};
  Pcg64 rng(seed, 9);
  prob.b = Eigen::MatrixXd(2 * m, d);
  for (Eigen::Index q = 0; q < prob.b.size(); ++q) prob.b(q / Eigen::Index(d), q % Eigen::Index(d)) = rng.normal();
  for (std::size_t q = 0; q < 2 * m; ++q) prob.c.push_back(0.5 + rng.uniform());
  const AugmentedGraph aug = augment_nonsmooth(g, m, prob.sigma);
  const SpectralData sp = spectral_quantities(aug);
  const NsPlan plan = make_ns_plan(aug, sp);
  std::vector<std::size_t> at;
  for (int k = 0; k <= 20; ++k) at.push_back(std::size_t(std::llround(100.0 * std::pow(100.0, k / 20.0))));
  std::vector<double> mean(at.size() + 1, 0.0);
  for (std::size_t q = 0; q < seeds; ++q) {
    const NsResult res = run_ns_adfs(prob, aug, plan, sample_schedule(plan.p, T, seed + q), at);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += res.trajectory.gap[k] / double(seeds);
  }
  std::vector<double> x, y;
  for (std::size_t k = 0; k < at.size(); ++k) {
    x.push_back(std::log(double(at[k])));
    y.push_back(std::log(std::max(mean[k + 1], 1e-300)));
  }
  r.measured = fit_slope(x, y);
  r.passed = r.measured <= r.threshold;
  r.detail = "log-log fit over t in [100, 10000], " + std::to_string(seeds) + " seeds, gap(100)=" +
             detail::num(mean[1]) + ", gap(10000)=" + detail::num(mean.back());
  return r;
}

/// Idealized time at which the averaged primal error first reaches `target`.
inline double time_to_target(const detail::Instance &in, const Eigen::VectorXd &theta_star,
                             double tau, double target, std::size_t K, std::size_t record_every,
                             std::uint64_t seed) {
  const Schedule sched = sample_schedule(in.plan.p, K, seed);
  const TimingTrace tr = simulate_time(sched, in.aug, tau);
  AdfsOptions opt;
  opt.record_every = record_every;
  const AdfsResult res = run_adfs(in.prob, in.aug, in.plan, sched, theta_star, opt);
  const auto &tj = res.trajectory;
  for (std::size_t k = 0; k < tj.iteration.size(); ++k)
    if (tj.gap_y[k] <= target) return tj.iteration[k] == 0 ? 0.0 : tr.t_max[tj.iteration[k] - 1];
  return std::numeric_limits<double>::infinity();
}

/// 10. The prescribed p_comm beats 4x larger and 4x smaller choices in time.
inline CriterionResult parameter_optimality(std::size_t seeds = 3, std::uint64_t seed = 1010) {
  CriterionResult r{10, "p_comm* beats 4x and 1/4x in idealized time"};
  const double tau = 5.0;
  const CommGraph g = build_topology(Topology::grid2d, 16);
  const ProblemSpec prob = synth_classification(seed, 16, 100, 10, 2.0);
  const auto base = detail::make_instance(prob, g, tau);
  const Eigen::VectorXd theta_star = solve_reference(base.prob);
  const double target = 1e-6 * primal_value(Eigen::VectorXd::Zero(Eigen::Index(prob.d())), prob);
  const double p_star = base.plan.p_comm;
  const std::array<double, 3> choices{p_star, std::min(4.0 * p_star, 0.99), p_star / 4.0};
  std::array<double, 3> mean{};
  for (std::size_t q = 0; q < choices.size(); ++q) {
    PlanOverrides ov;
    ov.p_comm = choices[q];
    const auto in = q == 0 ? base : detail::make_instance(prob, g, tau, ov);
    const std::size_t K = std::size_t(std::ceil(40.0 / in.plan.rho));
    for (std::size_t s = 0; s < seeds; ++s)
      mean[q] += time_to_target(in, theta_star, tau, target, K, std::max<std::size_t>(1, K / 2000),
                                seed + s) / double(seeds);
  }
  r.measured = mean[0];
  r.threshold = std::min(mean[1], mean[2]);
  r.passed = mean[0] < r.threshold;
  r.detail = "time to 1e-6 F(0): p*=" + detail::num(p_star) + " -> " + detail::num(mean[0]) +
             ", 4p* -> " + detail::num(mean[1]) + ", p*/4 -> " + detail::num(mean[2]);
  return r;
}

struct SuiteReport {
  std::string suite;
  std::vector<CriterionResult> results;
  std::vector<std::string> warnings;

  bool passed() const {
    return std::all_of(results.begin(), results.end(), [](const auto &r) { return r.passed; });
  }
};

inline const std::vector<std::string> &suite_names() {
  static const std::vector<std::string> names{"spectral", "prox", "apcg", "adfs", "timing", "all"};
  return names;
}

/// Throughput hypothesis check with p_comm forced to 0.9 and tau = 0.01.
inline std::string forced_hypothesis_warning() {
  const CommGraph g = build_topology(Topology::grid2d, 4);
  PlanOverrides ov;
  ov.p_comm = 0.9;
  const auto in = detail::make_instance(synth_classification(1, 4, 10, 5, 2.0), g, 0.01, ov);
  if (in.plan.throughput_hypothesis) return {};
  return "throughput hypothesis violated (p_comm=0.9, tau=0.01): p_comp=" +
         detail::num(in.plan.p_comp) + " <= p_comm^max=" + detail::num(in.plan.p_comm_max) +
         " and tau <= 1; the C < 24 bound is not claimed";
}

inline std::vector<std::function<CriterionResult()>> criteria_of(const std::string &suite) {
  using F = std::function<CriterionResult()>;
  const F c1 = [] { return dense_sparse_equivalence(); };
  const F c2 = [] { return single_node_reduction(); };
  const F c3 = [] { return linear_rate(); };
  const F c4 = [] { return conjugate_prox_identity(); };
  const F c5 = [] { return augmented_graph_properties(); };
  const F c6 = [] { return timing_ground_truth(); };
  const F c7 = [] { return throughput_envelope(); };
  const F c8 = [] { return apcg_sublinear_bound(); };
  const F c9 = [] { return nonsmooth_trend(); };
  const F c10 = [] { return parameter_optimality(); };
  if (suite == "spectral") return {c5};
  if (suite == "prox") return {c4};
  if (suite == "apcg") return {c2, c8};
  if (suite == "adfs") return {c1, c3, c9, c10};
  if (suite == "timing") return {c6, c7};
  if (suite == "all") return {c1, c2, c3, c4, c5, c6, c7, c8, c9, c10};
  throw ValidationError("unknown suite '" + suite + "' (expected spectral, prox, apcg, adfs, timing or all)");
}

inline CriterionResult timed(const std::function<CriterionResult()> &f) {
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r = f();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Runs a suite; `on_result` sees each criterion as it finishes.
inline SuiteReport run_suite(const std::string &suite,
                             const std::function<void(const CriterionResult &)> &on_result = {}) {
  SuiteReport rep;
  rep.suite = suite;
  for (const auto &f : criteria_of(suite)) {
    rep.results.push_back(timed(f));
    if (on_result) on_result(rep.results.back());
  }
  if (suite == "timing" || suite == "all") {
    const std::string w = forced_hypothesis_warning();
    if (!w.empty()) rep.warnings.push_back(w);
  }
  return rep;
}

inline std::string format_result(const CriterionResult &r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "[%s] criterion %2d  %-44s measured=%-12.6g threshold=%-12.6g (%.1fs)",
                r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.measured, r.threshold, r.seconds);
  return std::string(buf) + "\n       " + r.detail;
}

inline void print_report(std::ostream &out, const SuiteReport &rep) {
  for (const auto &w : rep.warnings) out << "WARNING: " << w << '\n';
  std::size_t ok = 0;
  for (const auto &r : rep.results) ok += r.passed;
  out << "suite " << rep.suite << ": " << ok << "/" << rep.results.size() << " passed\n";
}

}  // namespace adfs::verify

#endif
