#ifndef ADFS_SCHEDULE_HPP
#define ADFS_SCHEDULE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace adfs {

/// Shared schedule: the edge sequence every node replays from the same seed.
struct Schedule {
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> edges;

  std::size_t size() const { return edges.size(); }
};

/// i.i.d. edge draws from `p` (inverse CDF on PCG64, stream 0).
inline Schedule sample_schedule(std::span<const double> p, std::size_t t, std::uint64_t seed) {
  Schedule s;
  s.seed = seed;
  s.edges.reserve(t);
  if (t == 0) return s;
  DiscreteSampler sampler(p);
  Pcg64 rng(seed);
  for (std::size_t q = 0; q < t; ++q) s.edges.push_back(static_cast<std::uint32_t>(sampler(rng)));
  return s;
}

/// Event of the timing model: a communication between two nodes (cost tau)
/// or a local prox at one node (cost 1).
struct TimedEvent {
  bool communication = false;
  std::size_t k = 0;
  std::size_t l = 0;  // unused for local events
};

/// Maps an augmented-graph schedule to timing events on the base nodes.
inline std::vector<TimedEvent> to_events(const Schedule &s, const AugmentedGraph &aug) {
  std::vector<TimedEvent> ev;
  ev.reserve(s.size());
  for (std::uint32_t e : s.edges) {
    const Edge &ed = aug.edge(e);
    if (aug.is_virtual_edge(e)) ev.push_back({false, ed.k, ed.k});
    else ev.push_back({true, ed.k, ed.l});
  }
  return ev;
}

struct TimingTrace {
  std::vector<double> start;
  std::vector<double> finish;
  std::vector<double> t_max;     // T_max after each prefix
  std::vector<double> available; // final per-node availability
  double tau = 0.0;

  double total() const { return t_max.empty() ? 0.0 : t_max.back(); }
};

/// Local-synchrony clock: an event starts once all its participants are free.
/// Communications take tau and release both nodes together; local updates
/// take 1. Lazy convex combinations cost nothing.
inline TimingTrace simulate_time(std::span<const TimedEvent> events, std::size_t nodes, double tau) {
  detail::require(tau >= 0.0 && std::isfinite(tau), "tau must be nonnegative");
  TimingTrace tr;
  tr.tau = tau;
  tr.available.assign(nodes, 0.0);
  tr.start.reserve(events.size());
  tr.finish.reserve(events.size());
  tr.t_max.reserve(events.size());
  double running = 0.0;
  for (const TimedEvent &e : events) {
    detail::require(e.k < nodes && (!e.communication || e.l < nodes), "event node out of range");
    double s, f;
    if (e.communication) {
      s = std::max(tr.available[e.k], tr.available[e.l]);
      f = s + tau;
      tr.available[e.k] = tr.available[e.l] = f;
    } else {
      s = tr.available[e.k];
      f = s + 1.0;
      tr.available[e.k] = f;
    }
    running = std::max(running, f);
    tr.start.push_back(s);
    tr.finish.push_back(f);
    tr.t_max.push_back(running);
  }
  return tr;
}

inline TimingTrace simulate_time(const Schedule &s, const AugmentedGraph &aug, double tau) {
  const auto ev = to_events(s, aug);
  return simulate_time(ev, aug.n(), tau);
}

/// CSV: event_index,edge_kind,k,l,start,finish
inline void write_trace_csv(std::ostream &out, std::span<const TimedEvent> events,
                            const TimingTrace &tr) {
  out << "event_index,edge_kind,k,l,start,finish\n";
  char buf[128];
  for (std::size_t q = 0; q < events.size(); ++q) {
    const TimedEvent &e = events[q];
    std::snprintf(buf, sizeof buf, "%zu,%s,%zu,%zu,%.17g,%.17g\n", q,
                  e.communication ? "comm" : "local", e.k, e.communication ? e.l : e.k,
                  tr.start[q], tr.finish[q]);
    out << buf;
  }
}

struct ThroughputReport {
  double mean_time_per_iter = 0.0;  // mean T(t)/t
  double stderr_time_per_iter = 0.0;
  double C = 0.0;                   // n mean(T/t) / (p_comp + 2 tau p_comm^max)
  bool below_24 = false;
  bool hypothesis_holds = false;    // p_comp > p_comm^max or tau > 1
};

/// p_comm^max = n max_k sum_{l in N(k)} p_kl / 2, over communication edges.
inline double max_comm_probability(const AugmentedGraph &aug, std::span<const double> p) {
  std::vector<double> load(aug.n(), 0.0);
  for (std::size_t e = 0; e < aug.comm_edge_count(); ++e) {
    load[aug.edge(e).k] += p[e];
    load[aug.edge(e).l] += p[e];
  }
  const double top = load.empty() ? 0.0 : *std::max_element(load.begin(), load.end());
  return double(aug.n()) * top / 2.0;
}

inline ThroughputReport estimate_throughput(std::span<const double> p, const AugmentedGraph &aug,
                                            double tau, std::size_t t, std::size_t trials,
                                            std::uint64_t seed) {
  detail::require(t >= 1 && trials >= 1, "throughput needs t >= 1 and trials >= 1");
  double p_comm = 0.0;
  for (std::size_t e = 0; e < aug.comm_edge_count(); ++e) p_comm += p[e];
  const double p_comp = 1.0 - p_comm;
  const double pmax = max_comm_probability(aug, p);

  std::vector<double> ratio(trials);
  for (std::size_t r = 0; r < trials; ++r) {
    const Schedule s = sample_schedule(p, t, seed + r);
    ratio[r] = simulate_time(s, aug, tau).total() / double(t);
  }
  ThroughputReport rep;
  double mean = 0.0;
  for (double x : ratio) mean += x;
  mean /= double(trials);
  double var = 0.0;
  for (double x : ratio) var += (x - mean) * (x - mean);
  rep.mean_time_per_iter = mean;
  rep.stderr_time_per_iter = trials > 1 ? std::sqrt(var / double(trials - 1) / double(trials)) : 0.0;
  rep.C = double(aug.n()) * mean / (p_comp + 2.0 * tau * pmax);
  rep.below_24 = rep.C < 24.0;
  rep.hypothesis_holds = p_comp > pmax || tau > 1.0;
  return rep;
}

}  // namespace adfs

#endif
