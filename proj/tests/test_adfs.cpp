#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include <adfs/adfs.hpp>
#include <adfs/ns_adfs.hpp>
#include <adfs/verify/oracles.hpp>

using namespace adfs;

namespace {

struct Fixture {
  ProblemSpec prob;
  AugmentedGraph aug;
  SpectralData sp;
  SmoothnessSummary sum;
  SamplingPlan plan;
};

Fixture make_setup(ProblemSpec prob, const CommGraph &g, double tau = 1.0, PlanOverrides ov = {}) {
  Fixture s;
  s.prob = std::move(prob);
  s.aug = augment(g, s.prob.m(), s.prob.smoothness(), s.prob.sigma());
  s.sp = spectral_quantities(s.aug);
  s.sum = summarize(s.prob);
  s.plan = select_parameters(s.aug, s.sp, s.sum, tau, ov);
  return s;
}

double rel(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
  return (a - b).norm() / std::max(a.norm(), 1e-300);
}

}  // namespace

TEST(Plan, CompleteThreeNodeExample) {
  const CommGraph g = build_topology(Topology::complete, 3);
  const AugmentedGraph aug = augment(g, 1, {1, 1, 1}, {1, 1, 1});
  const SpectralData sp = spectral_quantities(aug);
  const SmoothnessSummary sum = summarize(aug);
  EXPECT_DOUBLE_EQ(sum.kappa_s, 2.0);
  EXPECT_NEAR(sum.S_comp, std::sqrt(2.0), 1e-15);
  const SamplingPlan plan = select_parameters(aug, sp, sum, 5.0);
  EXPECT_NEAR(plan.p_comm, 1.0 / (1.0 + 1.5 * std::sqrt(2.0)), 1e-10);
  EXPECT_NEAR(plan.p_comm, 0.3204, 1e-4);
  EXPECT_NEAR(std::accumulate(plan.p.begin(), plan.p.end(), 0.0), 1.0, 1e-14);
  EXPECT_NEAR(plan.p_comm + plan.p_comp, 1.0, 1e-15);
  EXPECT_NEAR(plan.delta_p, 1.0, 1e-14);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_DOUBLE_EQ(plan.p[e], plan.p_comm / 3.0);
}

TEST(Plan, Invariants) {
  const Fixture s = make_setup(synth_classification(4, 9, 15, 4, 2.0), build_topology(Topology::grid2d, 9));
  const auto &plan = s.plan;
  EXPECT_NEAR(std::accumulate(plan.p.begin(), plan.p.end(), 0.0), 1.0, 1e-12);
  EXPECT_LE(plan.rho, plan.rho_rate * (1 + 1e-15));
  EXPECT_LE(plan.rho * plan.rho, rate_bound(s.aug, s.sp, plan.p) * rate_bound(s.aug, s.sp, plan.p) * (1 + 1e-12));
  for (std::size_t e = s.aug.comm_edge_count(); e < s.aug.edge_count(); ++e) {
    const std::size_t i = s.aug.edge(e).k;
    EXPECT_LE(plan.rho, s.sum.kappa[i] / (2 * s.sum.kappa_s) * plan.p[e] * (1 + 1e-12));
    EXPECT_LT(plan.eta[e] / s.aug.sigma()[Eigen::Index(s.aug.edge(e).l)], 1.0);
    EXPECT_NEAR(plan.eta[e], plan.rho * s.aug.edge(e).weight / (s.sp.sigma_A * plan.p[e]), 1e-15 * plan.eta[e]);
  }
  for (std::size_t e = 0; e < s.aug.edge_count(); ++e) EXPECT_LE(plan.rho * plan.R[e], plan.p[e] * (1 + 1e-12));
}

TEST(Plan, SingleNodeHasNoCommunication) {
  const Fixture s = make_setup(synth_regression(1, 1, 4, 2, 0.1), CommGraph::from_edges(1, {}));
  EXPECT_EQ(s.plan.p_comm, 0.0);
  const auto &L = s.prob.smoothness();
  const double sig = s.prob.sigma()[0];
  for (std::size_t j = 1; j < 4; ++j)
    EXPECT_NEAR(s.plan.p[j] / s.plan.p[0], std::sqrt(1 + L[j] / sig) / std::sqrt(1 + L[0] / sig), 1e-12);
}

TEST(Plan, Overrides) {
  const ProblemSpec prob = synth_classification(2, 4, 5, 3, 2.0);
  const CommGraph g = build_topology(Topology::ring, 4);
  for (double bad : {0.0, 1.0, -0.5, 1.5}) {
    PlanOverrides ov;
    ov.p_comm = bad;
    EXPECT_THROW(make_setup(prob, g, 1.0, ov), ValidationError);
  }
  PlanOverrides ov;
  ov.p_comm = 0.9;
  const Fixture s = make_setup(prob, g, 0.01, ov);
  EXPECT_DOUBLE_EQ(s.plan.p_comm, 0.9);
  EXPECT_FALSE(s.plan.throughput_hypothesis);
}

TEST(DenseStep, ZeroStateStaysZero) {
  const Fixture s = make_setup(synth_classification(1, 4, 3, 2, 2.0), build_topology(Topology::ring, 4));
  AdfsDenseState st = AdfsDenseState::zeros(s.aug, 2);
  for (std::size_t e = 0; e < s.aug.comm_edge_count(); ++e) adfs_step_dense(st, e, s.plan, s.aug, s.prob);
  EXPECT_EQ(st.x.norm(), 0.0);
  EXPECT_EQ(st.v.norm(), 0.0);
}

TEST(DenseStep, CommunicationTouchesOnlyItsEndpoints) {
  const Fixture s = make_setup(synth_regression(2, 4, 3, 2, 0.1), build_topology(Topology::ring, 4));
  AdfsDenseState st = AdfsDenseState::zeros(s.aug, 2);
  const Schedule warm = sample_schedule(s.plan.p, 200, 3);
  for (auto e : warm.edges) adfs_step_dense(st, e, s.plan, s.aug, s.prob);
  const double rho = s.plan.rho;
  const Eigen::MatrixXd y = st.y(rho), v0 = st.v;
  const Edge ed = s.aug.edge(1);
  adfs_step_dense(st, 1, s.plan, s.aug, s.prob);
  const Eigen::MatrixXd base = (1 - rho) * v0 + rho * y;
  for (std::size_t h = 0; h < s.aug.node_count(); ++h) {
    if (h == ed.k || h == ed.l) continue;
    EXPECT_LT((st.v.row(Eigen::Index(h)) - base.row(Eigen::Index(h))).norm(), 1e-15);
  }
  // the W term moves mass between k and l without creating any
  const Eigen::RowVectorXd dk = st.v.row(Eigen::Index(ed.k)) - base.row(Eigen::Index(ed.k));
  const Eigen::RowVectorXd dl = st.v.row(Eigen::Index(ed.l)) - base.row(Eigen::Index(ed.l));
  EXPECT_LT((dk + dl).norm(), 1e-12 * std::max(1.0, dk.norm()));
}

TEST(DenseStep, VirtualEdgeUpdate) {
  const Fixture s = make_setup(synth_classification(6, 2, 3, 2, 2.0), build_topology(Topology::complete, 2));
  AdfsDenseState st = AdfsDenseState::zeros(s.aug, 2);
  for (auto e : sample_schedule(s.plan.p, 100, 2).edges) adfs_step_dense(st, e, s.plan, s.aug, s.prob);
  const double rho = s.plan.rho;
  const std::size_t e = s.aug.virtual_edge(1, 2);
  const Edge ed = s.aug.edge(e);
  const auto k = Eigen::Index(ed.k), l = Eigen::Index(ed.l);
  const Eigen::MatrixXd y = st.y(rho), v0 = st.v;
  const Eigen::RowVectorXd delta =
      s.plan.eta[e] * (s.aug.sigma_inv(ed.k) * y.row(k) - s.aug.sigma_inv(ed.l) * y.row(l));
  const Eigen::RowVectorXd zk = (1 - rho) * v0.row(k) + rho * y.row(k) - delta;
  const Eigen::RowVectorXd zl = (1 - rho) * v0.row(l) + rho * y.row(l) + delta;
  adfs_step_dense(st, e, s.plan, s.aug, s.prob);
  // the prox only moves mass from the virtual node to its center
  EXPECT_LT((st.v.row(k) + st.v.row(l) - zk - zl).norm(), 1e-13);
  const Eigen::RowVectorXd a = s.prob.feature(s.prob.index(1, 2));
  EXPECT_LT((st.v.row(l) - st.v.row(l).dot(a) / a.squaredNorm() * a).norm(), 1e-13);
  const double c = rho * s.plan.R[e] / s.plan.p[e];
  const Eigen::MatrixXd xe = y + c * (st.v - (1 - rho) * v0 - rho * y);
  EXPECT_LT((st.x - xe).norm(), 1e-13);
}

TEST(DenseStep, ColumnSumsStayZero) {
  const Fixture s = make_setup(synth_classification(3, 6, 8, 3, 2.0),
                             build_topology(Topology::grid2d, 6, 0.5, {}, GridShape{2, 3}));
  AdfsDenseState st = AdfsDenseState::zeros(s.aug, 3);
  const Schedule sched = sample_schedule(s.plan.p, 3000, 5);
  for (std::size_t t = 0; t < sched.size(); ++t) {
    adfs_step_dense(st, sched.edges[t], s.plan, s.aug, s.prob);
    if (t % 500 == 499) {
      EXPECT_LT(st.v.colwise().sum().norm(), 1e-8 * std::max(1.0, st.v.norm()));
      EXPECT_LT(st.x.colwise().sum().norm(), 1e-8 * std::max(1.0, st.x.norm()));
    }
  }
}

TEST(SparseStep, MatchesDense) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const bool logistic = seed % 2 == 0;
    const ProblemSpec prob = logistic ? synth_classification(seed, 4, 7, 3, 2.0, 0.3)
                                      : synth_regression(seed, 4, 7, 3, 0.2, 0.3);
    const Fixture s = make_setup(prob, build_topology(Topology::complete, 4));
    const Schedule sched = sample_schedule(s.plan.p, 500, seed + 10);
    AdfsDenseState dense = AdfsDenseState::zeros(s.aug, 3);
    AdfsSparseState sparse = AdfsSparseState::zeros(s.aug, 3);
    for (auto e : sched.edges) {
      adfs_step_dense(dense, e, s.plan, s.aug, s.prob);
      adfs_step_sparse(sparse, e, s.plan, s.aug, s.prob);
    }
    const AdfsDenseState mat = materialize(sparse, s.aug, s.prob, s.plan.rho);
    EXPECT_LT(rel(dense.x, mat.x), 1e-10);
    EXPECT_LT(rel(dense.v, mat.v), 1e-10);
  }
}

TEST(SparseStep, LazyNodesAreNotTouched) {
  const Fixture s = make_setup(synth_regression(1, 3, 4, 2, 0.1), build_topology(Topology::complete, 3));
  AdfsSparseState st = AdfsSparseState::zeros(s.aug, 2);
  EXPECT_EQ(st.xs.size(), 12u);
  EXPECT_EQ(st.vs.size(), 12u);
  EXPECT_EQ(st.xc.rows(), 3);
  // warm up on node 0's samples only, then fire the edge (0, 1)
  for (int rep = 0; rep < 5; ++rep)
    for (std::size_t j = 0; j < 4; ++j) adfs_step_sparse(st, s.aug.virtual_edge(0, j), s.plan, s.aug, s.prob);
  adfs_step_sparse(st, 0, s.plan, s.aug, s.prob);
  const Eigen::RowVectorXd before = st.xc.row(2);
  const std::size_t last = st.last[2];
  for (std::size_t j = 0; j < 4; ++j) adfs_step_sparse(st, s.aug.virtual_edge(1, j), s.plan, s.aug, s.prob);
  EXPECT_EQ((st.xc.row(2) - before).norm(), 0.0);
  EXPECT_EQ(st.last[2], last);
  EXPECT_EQ(st.t, 25u);
}

TEST(Run, ZeroIterationsGivesZero) {
  const Fixture s = make_setup(synth_classification(1, 4, 5, 3, 2.0), build_topology(Topology::ring, 4));
  const Eigen::VectorXd th = solve_reference(s.prob);
  const AdfsResult r = run_adfs(s.prob, s.aug, s.plan, 0, 1, th);
  EXPECT_EQ(r.theta.norm(), 0.0);
  ASSERT_EQ(r.trajectory.iteration.size(), 1u);
  EXPECT_NEAR(r.trajectory.gap_y[0], primal_value(Eigen::VectorXd::Zero(3), s.prob) - primal_value(th, s.prob),
              1e-12);
}

TEST(Run, DenseAndSparseRecordTheSame) {
  const Fixture s = make_setup(synth_classification(7, 4, 6, 3, 2.0), build_topology(Topology::grid2d, 4));
  const Eigen::VectorXd th = solve_reference(s.prob);
  AdfsOptions a, b;
  a.record_every = b.record_every = 50;
  b.sparse = false;
  const AdfsResult ra = run_adfs(s.prob, s.aug, s.plan, 400, 3, th, a);
  const AdfsResult rb = run_adfs(s.prob, s.aug, s.plan, 400, 3, th, b);
  ASSERT_EQ(ra.trajectory.iteration, rb.trajectory.iteration);
  for (std::size_t k = 0; k < ra.trajectory.gap_y.size(); ++k)
    EXPECT_NEAR(ra.trajectory.gap_y[k], rb.trajectory.gap_y[k], 1e-9 * std::max(1.0, rb.trajectory.gap_y[k]));
  EXPECT_LT(rel(rb.theta, ra.theta), 1e-10);
}

TEST(Run, ConvergesToDualOptimum) {
  const Fixture s = make_setup(synth_classification(9, 2, 3, 2, 1.0), build_topology(Topology::complete, 2));
  const Eigen::VectorXd th = solve_reference(s.prob);
  const Eigen::MatrixXd vstar = dual_optimum(s.prob, s.aug, th);
  EXPECT_LT(vstar.colwise().sum().norm(), 1e-9);  // optimality: sum of node duals vanishes
  AdfsDenseState st = AdfsDenseState::zeros(s.aug, 2);
  const Schedule sched = sample_schedule(s.plan.p, std::size_t(60.0 / s.plan.rho), 1);
  for (auto e : sched.edges) adfs_step_dense(st, e, s.plan, s.aug, s.prob);
  EXPECT_LT(rel(vstar, st.v), 1e-6);
}

TEST(Run, ExpectedDistanceEnvelope) {
  const Fixture s = make_setup(synth_regression(3, 2, 4, 2, 0.2), build_topology(Topology::complete, 2));
  const Eigen::VectorXd th = solve_reference(s.prob);
  const double C0 = rate_constant(s.prob, s.aug, s.sp, th);
  const Eigen::MatrixXd vstar = dual_optimum(s.prob, s.aug, th);
  Eigen::VectorXd sinv(Eigen::Index(s.aug.node_count()));
  for (std::size_t q = 0; q < s.aug.node_count(); ++q) sinv[Eigen::Index(q)] = s.aug.sigma_inv(q);
  const std::size_t K = std::size_t(10.0 / s.plan.rho), every = K / 50, seeds = 30;
  std::vector<double> mean(K / every + 1, 0.0);
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    AdfsDenseState st = AdfsDenseState::zeros(s.aug, 2);
    const Schedule sched = sample_schedule(s.plan.p, K, seed);
    mean[0] += (sinv.asDiagonal() * (st.v - vstar)).squaredNorm() / double(seeds);
    for (std::size_t t = 0; t < K; ++t) {
      adfs_step_dense(st, sched.edges[t], s.plan, s.aug, s.prob);
      if ((t + 1) % every == 0 && (t + 1) / every < mean.size())
        mean[(t + 1) / every] += (sinv.asDiagonal() * (st.v - vstar)).squaredNorm() / double(seeds);
    }
  }
  for (std::size_t k = 0; k < mean.size(); ++k)
    EXPECT_LE(mean[k], 1.2 * C0 * std::pow(1.0 - s.plan.rho, double(k * every))) << k;
}

TEST(DualComposite, GradientMatchesFiniteDifferences) {
  const Fixture s = make_setup(synth_regression(2, 3, 2, 2, 0.1), build_topology(Topology::ring, 3));
  const AdfsDualComposite comp(s.aug, s.prob, s.sp);
  Pcg64 rng(2);
  Eigen::MatrixXd lam(Eigen::Index(s.aug.edge_count()), 2);
  for (Eigen::Index q = 0; q < lam.size(); ++q) lam(q % lam.rows(), q / lam.rows()) = rng.normal();
  Eigen::VectorXd sinv(Eigen::Index(s.aug.node_count()));
  for (std::size_t q = 0; q < s.aug.node_count(); ++q) sinv[Eigen::Index(q)] = s.aug.sigma_inv(q);
  auto qa = [&](const Eigen::MatrixXd &l) {
    const Eigen::MatrixXd node = comp.lift(l);
    return 0.5 * (node.transpose() * sinv.asDiagonal() * node).trace();
  };
  for (std::size_t e = 0; e < s.aug.edge_count(); ++e)
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double h = 1e-5;
      Eigen::MatrixXd up = lam, dn = lam;
      up(Eigen::Index(e), c) += h;
      dn(Eigen::Index(e), c) -= h;
      const double fd = (qa(up) - qa(dn)) / (2 * h);
      EXPECT_NEAR(comp.gradient(lam, e)[c], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(Nonsmooth, PrimalOptimumIsExact) {
  NonsmoothProblem p;
  p.n = 2;
  p.m = 2;
  p.sigma = {0.5, 1.0};
  p.b = Eigen::MatrixXd(4, 1);
  p.b << -1.0, 0.2, 0.7, 3.0;
  p.c = {0.3, 1.0, 0.4, 0.2};
  const double t = p.primal_optimum()[0];
  for (double dt : {-1e-3, 1e-3, -0.1, 0.1}) {
    Eigen::VectorXd a(1);
    a[0] = t + dt;
    EXPECT_LT(p.primal_value(p.primal_optimum()), p.primal_value(a));
  }
  // at the optimum primal and dual values coincide for the matching dual point
  EXPECT_TRUE(std::isfinite(p.primal_value(p.primal_optimum())));
}

TEST(Nonsmooth, RecursionAndStart) {
  const CommGraph g = build_topology(Topology::complete, 2);
  const AugmentedGraph aug = augment_nonsmooth(g, 2, {1.0, 1.0});
  EXPECT_NEAR(aug.edge(aug.virtual_edge(0, 0)).weight, laplacian_min_positive(g) / 3.0, 1e-15);
  const NsPlan plan = make_ns_plan(aug, spectral_quantities(aug));
  auto sched = make_schedule_cvx(plan.S, plan.p_R, 1.0);
  EXPECT_NEAR(sched.A0(), plan.A0, 1e-12 * plan.A0);
  for (int t = 0; t < 100; ++t) {
    const double A = sched.A();
    sched.next();
    const double S2 = plan.S * plan.S;
    EXPECT_NEAR(sched.A() - A, (1.0 / (2 * S2)) * (1 + std::sqrt(1 + 4 * S2 * A)), 1e-12 * sched.A());
  }
  NonsmoothProblem prob;
  prob.n = 2;
  prob.m = 2;
  prob.sigma = {1.0, 1.0};
  prob.b = Eigen::MatrixXd::Ones(4, 2);
  prob.c = {1, 1, 1, 1};
  const NsResult r = run_ns_adfs(prob, aug, plan, Schedule{}, {});
  EXPECT_EQ(r.x.norm(), 0.0);
  EXPECT_EQ(r.v.norm(), 0.0);
  ASSERT_EQ(r.trajectory.dual.size(), 1u);
  EXPECT_EQ(r.trajectory.dual[0], 0.0);
}

TEST(Nonsmooth, GapShrinks) {
  const CommGraph g = build_topology(Topology::complete, 2);
  const AugmentedGraph aug = augment_nonsmooth(g, 3, {1.0, 1.0});
  const NsPlan plan = make_ns_plan(aug, spectral_quantities(aug));
  NonsmoothProblem prob;
  prob.n = 2;
  prob.m = 3;
  prob.sigma = {1.0, 1.0};
  prob.b = Eigen::MatrixXd(6, 1);
  prob.b << -2, -1, 0.5, 1, 1.5, 3;
  prob.c = {0.5, 0.7, 1.0, 0.3, 0.9, 0.4};
  const NsResult r = run_ns_adfs(prob, aug, plan, sample_schedule(plan.p, 5000, 4), {100, 5000});
  ASSERT_EQ(r.trajectory.gap.size(), 3u);
  EXPECT_GT(r.trajectory.gap[0], r.trajectory.gap[2]);
  EXPECT_GE(r.trajectory.gap[2], -1e-9);
  EXPECT_LT(r.trajectory.gap[2], 1e-2 * r.trajectory.gap[0]);
}
