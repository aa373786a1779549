#ifndef ADFS_EXPERIMENT_HPP
#define ADFS_EXPERIMENT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adfs.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "problem.hpp"
#include "schedule.hpp"

namespace adfs {

/// Flat key=value experiment description. See README for the key list.
struct ExperimentConfig {
  Topology topology = Topology::grid2d;
  std::size_t nodes = 16;
  std::size_t grid_rows = 0, grid_cols = 0;  // 0: square grid
  std::string graph_file;                    // custom topology
  std::size_t samples_per_node = 100;
  std::size_t dim = 10;
  Loss loss = Loss::logistic;
  double sigma = 1.0;
  double tau = 5.0;
  std::optional<double> p_comm;
  std::size_t iterations = 10000;
  std::vector<std::uint64_t> seeds{1};
  std::string dataset = "synthetic";  // or a LibSVM path
  double separability = 2.0;
  double noise = 0.1;
  std::uint64_t data_seed = 0;
  std::size_t record_every = 100;
  std::string output_dir = "out";
  double mu_comm = 0.5;
  bool overlap = false;
  bool oracle = true;
  std::size_t threads = 1;
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct ConfigReader {
  std::map<std::string, std::string> kv;

  [[noreturn]] static void fail(const std::string &key, const std::string &msg) {
    throw ValidationError("config: key '" + key + "': " + msg);
  }
  std::optional<std::string> get(const std::string &key) const {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  }
  std::size_t count(const std::string &key, std::size_t def, bool positive = true) const {
    auto s = get(key);
    if (!s) return def;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(*s, &used);
      if (used != s->size() || v < 0 || (positive && v == 0)) throw std::invalid_argument(*s);
      return std::size_t(v);
    } catch (const std::exception &) {
      fail(key, positive ? "must be a positive integer" : "must be a nonnegative integer");
    }
  }
  double real(const std::string &key, double def, bool positive, bool allow_zero = false) const {
    auto s = get(key);
    if (!s) return def;
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(*s, &used);
      if (used != s->size()) throw std::invalid_argument(*s);
    } catch (const std::exception &) {
      fail(key, "must be a number");
    }
    if (!std::isfinite(v)) fail(key, "must be finite");
    if (positive && !(v > 0.0 || (allow_zero && v == 0.0)))
      fail(key, allow_zero ? "must be nonnegative" : "must be positive");
    return v;
  }
  bool flag(const std::string &key, bool def) const {
    auto s = get(key);
    if (!s) return def;
    if (*s == "true" || *s == "1" || *s == "yes") return true;
    if (*s == "false" || *s == "0" || *s == "no") return false;
    fail(key, "must be true or false");
  }
};

}  // namespace detail

inline const std::vector<std::string> &config_keys() {
  static const std::vector<std::string> keys{
      "topology", "nodes",     "grid_rows",    "grid_cols",  "graph_file", "samples_per_node",
      "dim",      "loss",      "sigma",        "tau",        "p_comm",     "iterations",
      "seeds",    "dataset",   "separability", "noise",      "data_seed",  "record_every",
      "output_dir", "mu_comm", "overlap",      "oracle",     "threads"};
  return keys;
}

inline ExperimentConfig parse_config(std::istream &in) {
  detail::ConfigReader r;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    const auto &keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (r.kv.count(key))
      throw ValidationError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    r.kv[key] = val;
  }

  ExperimentConfig c;
  if (auto t = r.get("topology")) {
    if (*t == "complete") c.topology = Topology::complete;
    else if (*t == "ring") c.topology = Topology::ring;
    else if (*t == "grid2d") c.topology = Topology::grid2d;
    else if (*t == "custom") c.topology = Topology::custom;
    else r.fail("topology", "must be complete, ring, grid2d or custom");
  }
  c.nodes = r.count("nodes", c.nodes);
  c.grid_rows = r.count("grid_rows", 0, false);
  c.grid_cols = r.count("grid_cols", 0, false);
  if ((c.grid_rows == 0) != (c.grid_cols == 0))
    r.fail("grid_rows", "grid_rows and grid_cols must be given together");
  c.graph_file = r.get("graph_file").value_or("");
  if (c.topology == Topology::custom && c.graph_file.empty())
    r.fail("graph_file", "required for topology = custom");
  c.samples_per_node = r.count("samples_per_node", c.samples_per_node);
  c.dim = r.count("dim", c.dim);
  if (auto l = r.get("loss")) {
    if (*l == "logistic") c.loss = Loss::logistic;
    else if (*l == "quadratic") c.loss = Loss::quadratic;
    else r.fail("loss", "must be logistic or quadratic");
  }
  c.sigma = r.real("sigma", c.sigma, true);
  c.tau = r.real("tau", c.tau, true, true);
  if (r.get("p_comm")) {
    const double p = r.real("p_comm", 0.0, false);
    if (!(p > 0.0 && p < 1.0)) r.fail("p_comm", "must lie in (0, 1)");
    c.p_comm = p;
  }
  c.iterations = r.count("iterations", c.iterations, false);
  if (auto s = r.get("seeds")) {
    c.seeds.clear();
    std::stringstream ss(*s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = detail::trim(tok);
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(tok, &used);
        if (used != tok.size() || tok.empty() || tok[0] == '-') throw std::invalid_argument(tok);
        c.seeds.push_back(v);
      } catch (const std::exception &) {
        r.fail("seeds", "must be a comma-separated list of nonnegative integers");
      }
    }
    if (c.seeds.empty()) r.fail("seeds", "must not be empty");
    auto sorted = c.seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      r.fail("seeds", "must not repeat");
  }
  c.dataset = r.get("dataset").value_or(c.dataset);
  if (c.dataset.empty()) r.fail("dataset", "must be 'synthetic' or a file path");
  c.separability = r.real("separability", c.separability, true, true);
  c.noise = r.real("noise", c.noise, true, true);
  c.data_seed = r.count("data_seed", 0, false);
  c.record_every = r.count("record_every", c.record_every);
  c.output_dir = r.get("output_dir").value_or(c.output_dir);
  if (c.output_dir.empty()) r.fail("output_dir", "must not be empty");
  c.mu_comm = r.real("mu_comm", c.mu_comm, true);
  c.overlap = r.flag("overlap", c.overlap);
  c.oracle = r.flag("oracle", c.oracle);
  c.threads = r.count("threads", c.threads);
  if (c.topology != Topology::custom && c.nodes < 2)
    r.fail("nodes", "must be at least 2 for built-in topologies");
  if (c.topology == Topology::grid2d && c.grid_rows != 0 && c.grid_rows * c.grid_cols != c.nodes)
    r.fail("grid_rows", "grid_rows * grid_cols must equal nodes");
  return c;
}

inline ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path + "'");
  return parse_config(in);
}

/// Everything derived from a config before any seed runs.
struct ExperimentSetup {
  ProblemSpec problem;
  CommGraph graph;
  AugmentedGraph aug;
  SpectralData spectra;
  SmoothnessSummary summary;
  SamplingPlan plan;
  Eigen::VectorXd theta_star;
  double f_star = 0.0;
};

inline ExperimentSetup prepare_experiment(const ExperimentConfig &c) {
  ExperimentSetup s;
  if (c.topology == Topology::custom) {
    std::ifstream in(c.graph_file);
    if (!in) throw ValidationError("config: key 'graph_file': cannot open '" + c.graph_file + "'");
    s.graph = read_edge_list(in);
  } else {
    std::optional<GridShape> shape;
    if (c.grid_rows) shape = GridShape{c.grid_rows, c.grid_cols};
    s.graph = build_topology(c.topology, c.nodes, c.mu_comm, {}, shape);
  }
  const std::size_t n = s.graph.n(), m = c.samples_per_node;
  if (c.dataset == "synthetic") {
    s.problem = c.loss == Loss::logistic
                    ? synth_classification(c.data_seed, n, m, c.dim, c.separability, c.sigma)
                    : synth_regression(c.data_seed, n, m, c.dim, c.noise, c.sigma);
  } else {
    const Dataset ds = load_libsvm(c.dataset, c.dim);
    Dataset mapped = ds;
    if (c.loss == Loss::logistic)
      for (Eigen::Index q = 0; q < mapped.y.size(); ++q) mapped.y[q] = mapped.y[q] > 0 ? 1.0 : -1.0;
    s.problem = distribute(mapped, n, m, c.loss, c.sigma, c.data_seed, c.overlap);
  }
  s.aug = augment(s.graph, m, s.problem.smoothness(), s.problem.sigma());
  s.spectra = spectral_quantities(s.aug);
  s.summary = summarize(s.problem);
  PlanOverrides ov;
  ov.p_comm = c.p_comm;
  s.plan = select_parameters(s.aug, s.spectra, s.summary, c.tau, ov);
  if (c.oracle) {
    s.theta_star = solve_reference(s.problem);
    s.f_star = primal_value(s.theta_star, s.problem);
  } else {
    s.theta_star = Eigen::VectorXd::Zero(Eigen::Index(s.problem.d()));
    s.f_star = 0.0;
  }
  return s;
}

struct SeedRun {
  std::vector<std::size_t> iteration;
  std::vector<double> time, err_y, err_v;
};

/// One seed: schedule, idealized clock and primal errors. With the oracle
/// disabled the error columns hold F(theta) itself (F* taken as 0).
inline SeedRun run_seed(const ExperimentSetup &s, const ExperimentConfig &c, std::uint64_t seed) {
  const Schedule sched = sample_schedule(s.plan.p, c.iterations, seed);
  const TimingTrace tr = simulate_time(sched, s.aug, c.tau);
  AdfsOptions opt;
  opt.record_every = c.record_every;
  Eigen::VectorXd ref = s.theta_star;
  const AdfsResult r = run_adfs(s.problem, s.aug, s.plan, sched, ref, opt);
  SeedRun out;
  const auto &tj = r.trajectory;
  const double shift = c.oracle ? 0.0 : s.f_star - primal_value(ref, s.problem);
  for (std::size_t q = 0; q < tj.iteration.size(); ++q) {
    const std::size_t t = tj.iteration[q];
    out.iteration.push_back(t);
    out.time.push_back(t == 0 ? 0.0 : tr.t_max[t - 1]);
    out.err_y.push_back(tj.gap_y[q] - shift);
    out.err_v.push_back(tj.gap_v[q] - shift);
  }
  return out;
}

inline void write_manifest(std::ostream &o, const ExperimentSetup &s) {
  using detail::fmt17;
  o << "rho=" << fmt17(s.plan.rho) << '\n';
  o << "p_comm=" << fmt17(s.plan.p_comm) << '\n';
  o << "gamma_tilde=" << fmt17(s.plan.gamma_tilde) << '\n';
  o << "sigma_A=" << fmt17(s.plan.sigma_A) << '\n';
  o << "S_comp=" << fmt17(s.plan.S_comp) << '\n';
  o << "rho_rate=" << fmt17(s.plan.rho_rate) << '\n';
  o << "kappa_s=" << fmt17(s.plan.kappa_s) << '\n';
  o << "p_comm_max=" << fmt17(s.plan.p_comm_max) << '\n';
  o << "delta_p=" << fmt17(s.plan.delta_p) << '\n';
  o << "c_tau=" << fmt17(s.plan.c_tau) << '\n';
  o << "throughput_hypothesis=" << (s.plan.throughput_hypothesis ? "true" : "false") << '\n';
  o << "clamped=" << (s.plan.clamped ? "true" : "false") << '\n';
  for (const auto &msg : s.plan.clamp_log) o << "# clamp: " << msg << '\n';
  o << "f_star=" << fmt17(s.f_star) << '\n';
}

/// Runs every seed and writes run_<seed>.csv, aggregate.csv and manifest.txt
/// into the output directory. Returns the output directory path.
inline std::filesystem::path run_experiment(const ExperimentConfig &c) {
  namespace fs = std::filesystem;
  const ExperimentSetup s = prepare_experiment(c);
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + c.output_dir + "'");

  std::vector<SeedRun> runs(c.seeds.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(c.threads, c.seeds.size()));
  for (std::size_t base = 0; base < c.seeds.size(); base += workers) {
    std::vector<std::future<SeedRun>> jobs;
    for (std::size_t q = base; q < std::min(base + workers, c.seeds.size()); ++q)
      jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                [&, q] { return run_seed(s, c, c.seeds[q]); }));
    for (std::size_t q = 0; q < jobs.size(); ++q) runs[base + q] = jobs[q].get();
  }

  using detail::fmt17;
  auto open = [&](const fs::path &p) {
    std::ofstream o(p);
    if (!o) throw std::runtime_error("cannot write '" + p.string() + "'");
    return o;
  };
  for (std::size_t q = 0; q < runs.size(); ++q) {
    auto o = open(dir / ("run_" + std::to_string(c.seeds[q]) + ".csv"));
    o << "iteration,idealized_time,primal_error_y,primal_error_v\n";
    const SeedRun &r = runs[q];
    for (std::size_t k = 0; k < r.iteration.size(); ++k)
      o << r.iteration[k] << ',' << fmt17(r.time[k]) << ',' << fmt17(r.err_y[k]) << ','
        << fmt17(r.err_v[k]) << '\n';
  }
  {
    auto o = open(dir / "aggregate.csv");
    o << "iteration,idealized_time_mean,idealized_time_stderr,primal_error_y_mean,"
         "primal_error_y_stderr,primal_error_v_mean,primal_error_v_stderr\n";
    const std::size_t S = runs.size();
    auto stats = [&](auto field, std::size_t k) {
      double mean = 0.0;
      for (const auto &r : runs) mean += field(r)[k];
      mean /= double(S);
      double var = 0.0;
      for (const auto &r : runs) var += (field(r)[k] - mean) * (field(r)[k] - mean);
      const double se = S > 1 ? std::sqrt(var / double(S - 1) / double(S)) : 0.0;
      return std::pair{mean, se};
    };
    for (std::size_t k = 0; k < runs.front().iteration.size(); ++k) {
      const auto [tm, ts] = stats([](const SeedRun &r) -> const auto & { return r.time; }, k);
      const auto [ym, ys] = stats([](const SeedRun &r) -> const auto & { return r.err_y; }, k);
      const auto [vm, vs] = stats([](const SeedRun &r) -> const auto & { return r.err_v; }, k);
      o << runs.front().iteration[k] << ',' << fmt17(tm) << ',' << fmt17(ts) << ',' << fmt17(ym)
        << ',' << fmt17(ys) << ',' << fmt17(vm) << ',' << fmt17(vs) << '\n';
    }
  }
  {
    auto o = open(dir / "manifest.txt");
    write_manifest(o, s);
  }
  return dir;
}

}  // namespace adfs

#endif
