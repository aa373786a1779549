#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <adfs/adfs.hpp>
#include <adfs/schedule.hpp>

using namespace adfs;

namespace {

struct Inst {
  AugmentedGraph aug;
  SamplingPlan plan;
};

Inst grid_instance(std::size_t n, std::size_t m, double tau, std::uint64_t seed = 1) {
  const ProblemSpec prob = synth_classification(seed, n, m, 3, 2.0);
  Inst in;
  in.aug = augment(build_topology(Topology::grid2d, n), m, prob.smoothness(), prob.sigma());
  in.plan = select_parameters(in.aug, spectral_quantities(in.aug), summarize(prob), tau);
  return in;
}

}  // namespace

TEST(Sampling, Deterministic) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_EQ(sample_schedule(p, 1000, 4).edges, sample_schedule(p, 1000, 4).edges);
  EXPECT_NE(sample_schedule(p, 1000, 4).edges, sample_schedule(p, 1000, 5).edges);
  EXPECT_EQ(sample_schedule(p, 0, 4).size(), 0u);
}

TEST(Sampling, FrequenciesMatch) {
  const std::vector<double> p{0.05, 0.15, 0.3, 0.5};
  const std::size_t t = 100000;
  const Schedule s = sample_schedule(p, t, 9);
  std::vector<double> count(p.size(), 0.0);
  for (auto e : s.edges) count[e] += 1.0;
  for (std::size_t e = 0; e < p.size(); ++e) {
    const double se = std::sqrt(p[e] * (1 - p[e]) / double(t));
    EXPECT_LT(std::abs(count[e] / double(t) - p[e]), 4 * se) << e;
  }
}

TEST(Timing, ReferenceSchedule) {
  enum { A, B, C, D };
  const std::vector<TimedEvent> ev{{true, A, C}, {true, B, D}, {true, A, B}, {false, D, D}, {true, C, D}};
  const TimingTrace tr = simulate_time(ev, 4, 2.0);
  const std::vector<double> finish{2, 2, 4, 3, 5};
  EXPECT_EQ(tr.finish, finish);
  EXPECT_EQ(tr.total(), 5.0);
  const std::vector<double> tmax{2, 2, 4, 4, 5};
  EXPECT_EQ(tr.t_max, tmax);
}

TEST(Timing, LocalOnlyOnOneNode) {
  std::vector<TimedEvent> ev(7, TimedEvent{false, 0, 0});
  EXPECT_EQ(simulate_time(ev, 1, 3.0).total(), 7.0);
  EXPECT_EQ(simulate_time(std::vector<TimedEvent>{}, 3, 3.0).total(), 0.0);
  EXPECT_THROW(simulate_time(std::vector<TimedEvent>{{true, 0, 4}}, 3, 1.0), ValidationError);
  EXPECT_THROW(simulate_time(ev, 1, -1.0), ValidationError);
}

TEST(Timing, MonotoneCausalAndBounded) {
  const Inst in = grid_instance(9, 5, 2.0);
  const Schedule s = sample_schedule(in.plan.p, 5000, 3);
  const auto ev = to_events(s, in.aug);
  const TimingTrace tr = simulate_time(ev, 9, 2.0);
  for (std::size_t q = 1; q < tr.t_max.size(); ++q) EXPECT_GE(tr.t_max[q], tr.t_max[q - 1]);
  EXPECT_LE(tr.total(), double(s.size()) * (2.0 + 1.0));
  // an event cannot start before earlier events sharing a node have finished
  std::vector<double> busy(9, 0.0);
  for (std::size_t q = 0; q < ev.size(); ++q) {
    EXPECT_GE(tr.start[q], busy[ev[q].k]);
    if (ev[q].communication) EXPECT_GE(tr.start[q], busy[ev[q].l]);
    busy[ev[q].k] = tr.finish[q];
    if (ev[q].communication) busy[ev[q].l] = tr.finish[q];
  }
}

TEST(Timing, DisjointEventsCommute) {
  enum { A, B, C, D };
  const std::vector<TimedEvent> one{{true, A, B}, {false, C, C}, {true, C, D}, {false, A, A}};
  const std::vector<TimedEvent> two{{false, C, C}, {true, A, B}, {false, A, A}, {true, C, D}};
  EXPECT_EQ(simulate_time(one, 4, 3.0).total(), simulate_time(two, 4, 3.0).total());
}

TEST(Timing, TraceCsv) {
  const std::vector<TimedEvent> ev{{true, 0, 1}, {false, 1, 1}};
  const TimingTrace tr = simulate_time(ev, 2, 2.5);
  std::ostringstream out;
  write_trace_csv(out, ev, tr);
  EXPECT_EQ(out.str(), "event_index,edge_kind,k,l,start,finish\n0,comm,0,1,0,2.5\n1,local,1,1,2.5,3.5\n");
}

TEST(Throughput, SingleNodeIsSequential) {
  const ProblemSpec prob = synth_regression(1, 1, 6, 2, 0.1);
  const AugmentedGraph aug = augment(CommGraph::from_edges(1, {}), 6, prob.smoothness(), prob.sigma());
  const SamplingPlan plan = select_parameters(aug, spectral_quantities(aug), summarize(prob), 5.0);
  const ThroughputReport rep = estimate_throughput(plan.p, aug, 5.0, 1000, 3, 1);
  EXPECT_DOUBLE_EQ(rep.mean_time_per_iter, 1.0);
  EXPECT_DOUBLE_EQ(rep.C, 1.0);
}

TEST(Throughput, GridBelowEnvelope) {
  const Inst in = grid_instance(16, 20, 5.0);
  EXPECT_TRUE(in.plan.throughput_hypothesis);
  const ThroughputReport rep = estimate_throughput(in.plan.p, in.aug, 5.0, 20000, 5, 2);
  EXPECT_TRUE(rep.below_24);
  EXPECT_LT(rep.C, 24.0);
  EXPECT_GT(rep.mean_time_per_iter, 0.0);
  EXPECT_NEAR(max_comm_probability(in.aug, in.plan.p), in.plan.p_comm_max, 1e-12);
}

TEST(Throughput, HubGraphOutsideHypothesis) {
  // a star with cheap communication and p_comm forced high: every comm event
  // waits for the hub, so the measured time blows past the envelope's premise
  std::vector<Edge> edges;
  for (std::size_t k = 1; k < 16; ++k) edges.push_back({0, k, 0.5});
  const CommGraph star = CommGraph::from_edges(16, edges);
  const ProblemSpec prob = synth_classification(3, 16, 4, 3, 2.0);
  const AugmentedGraph aug = augment(star, 4, prob.smoothness(), prob.sigma());
  PlanOverrides ov;
  ov.p_comm = 0.9;
  const SamplingPlan plan = select_parameters(aug, spectral_quantities(aug), summarize(prob), 0.5, ov);
  EXPECT_FALSE(plan.throughput_hypothesis);
  const ThroughputReport rep = estimate_throughput(plan.p, aug, 0.5, 20000, 3, 4);
  EXPECT_FALSE(rep.hypothesis_holds);
  // hub serializes comm events: at least 0.9 * tau per iteration
  EXPECT_GT(rep.mean_time_per_iter, 0.9 * 0.5 * 0.95);
}
