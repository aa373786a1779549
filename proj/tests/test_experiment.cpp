#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <adfs/experiment.hpp>

using namespace adfs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("adfs_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path &p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

ExperimentConfig small_config(const fs::path &out) {
  std::istringstream in("topology = grid2d\nnodes = 4\nsamples_per_node = 6\ndim = 3\n"
                        "iterations = 400\nrecord_every = 50\nseeds = 1, 2, 3\ntau = 2\n"
                        "output_dir = " + out.string() + "\n");
  return parse_config(in);
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string(ADFS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Config, Defaults) {
  std::istringstream in("# nothing set\n\n");
  const ExperimentConfig c = parse_config(in);
  EXPECT_EQ(c.nodes, 16u);
  EXPECT_EQ(c.samples_per_node, 100u);
  EXPECT_EQ(c.loss, Loss::logistic);
  EXPECT_EQ(c.iterations, 10000u);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{1});
  EXPECT_EQ(config_keys().size(), 23u);
}

TEST(Config, Errors) {
  auto bad = [](const std::string &text, const std::string &needle) {
    std::istringstream in(text);
    try {
      parse_config(in);
    } catch (const ValidationError &e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  EXPECT_TRUE(bad("nodes = 4\nfoo = 1\n", "line 2"));
  EXPECT_TRUE(bad("foo = 1\n", "unknown key"));
  EXPECT_TRUE(bad("nodes 4\n", "key = value"));
  EXPECT_TRUE(bad("nodes = 4\nnodes = 5\n", "duplicate"));
  EXPECT_TRUE(bad("nodes = -3\n", "nodes"));
  EXPECT_TRUE(bad("tau = abc\n", "tau"));
  EXPECT_TRUE(bad("p_comm = 1\n", "p_comm"));
  EXPECT_TRUE(bad("seeds = 1,1\n", "seeds"));
  EXPECT_TRUE(bad("topology = torus\n", "topology"));
  EXPECT_TRUE(bad("topology = custom\n", "graph_file"));
  EXPECT_TRUE(bad("grid_rows = 2\n", "grid_rows"));
  EXPECT_TRUE(bad("loss = hinge\n", "loss"));
  EXPECT_TRUE(bad("oracle = maybe\n", "oracle"));
}

TEST(Experiment, RerunsAreByteIdentical) {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  run_experiment(small_config(a));
  run_experiment(small_config(b));
  for (const char *f : {"run_1.csv", "run_2.csv", "run_3.csv", "aggregate.csv", "manifest.txt"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  ExperimentConfig threaded = small_config(b);
  threaded.threads = 3;
  run_experiment(threaded);
  EXPECT_EQ(slurp(a / "aggregate.csv"), slurp(b / "aggregate.csv"));
}

TEST(Experiment, AggregateIsMeanOfSeeds) {
  const fs::path out = scratch("aggregate");
  run_experiment(small_config(out));
  const auto agg = read_csv(out / "aggregate.csv");
  std::vector<std::vector<std::vector<double>>> runs;
  for (int s = 1; s <= 3; ++s) runs.push_back(read_csv(out / ("run_" + std::to_string(s) + ".csv")));
  ASSERT_EQ(agg.size(), 9u);  // t = 0, 50, ..., 400
  for (std::size_t k = 0; k < agg.size(); ++k) {
    for (const auto &r : runs) EXPECT_EQ(r[k][0], agg[k][0]);
    for (std::size_t c = 1; c <= 3; ++c) {
      const double mean = (runs[0][k][c] + runs[1][k][c] + runs[2][k][c]) / 3.0;
      EXPECT_NEAR(agg[k][2 * c - 1], mean, 1e-12 * std::max(1.0, std::abs(mean)));
      EXPECT_GE(agg[k][2 * c], 0.0);
    }
  }
  EXPECT_EQ(agg[0][1], 0.0);
}

TEST(Experiment, ZeroIterations) {
  const fs::path out = scratch("zero");
  ExperimentConfig c = small_config(out);
  c.iterations = 0;
  c.seeds = {7};
  run_experiment(c);
  const auto rows = read_csv(out / "run_7.csv");
  ASSERT_EQ(rows.size(), 1u);
  const ExperimentSetup s = prepare_experiment(c);
  const double f0 = primal_value(Eigen::VectorXd::Zero(3), s.problem) - s.f_star;
  EXPECT_NEAR(rows[0][2], f0, 1e-12 * f0);
  EXPECT_NEAR(rows[0][3], f0, 1e-12 * f0);
}

TEST(Experiment, ManifestMatchesPlan) {
  const fs::path out = scratch("manifest");
  const ExperimentConfig c = small_config(out);
  run_experiment(c);
  std::map<std::string, std::string> kv;
  std::ifstream in(out / "manifest.txt");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char *k : {"rho", "p_comm", "gamma_tilde", "sigma_A", "S_comp", "rho_rate", "kappa_s",
                        "p_comm_max", "delta_p", "c_tau", "throughput_hypothesis", "clamped", "f_star"})
    EXPECT_TRUE(kv.count(k)) << k;
  const ExperimentSetup s = prepare_experiment(c);
  EXPECT_NEAR(std::stod(kv["rho"]), s.plan.rho, 1e-12 * s.plan.rho);
  EXPECT_NEAR(std::stod(kv["p_comm"]), s.plan.p_comm, 1e-12);
}

TEST(Experiment, WithoutOracleReportsObjective) {
  const fs::path out = scratch("nooracle");
  ExperimentConfig c = small_config(out);
  c.oracle = false;
  c.seeds = {1};
  run_experiment(c);
  const auto rows = read_csv(out / "run_1.csv");
  const ExperimentSetup s = prepare_experiment(c);
  EXPECT_NEAR(rows[0][2], primal_value(Eigen::VectorXd::Zero(3), s.problem), 1e-12);
}

TEST(Experiment, CustomGraphFile) {
  const fs::path dir = scratch("custom");
  {
    std::ofstream g(dir / "g.txt");
    g << "3 2\n0 1 0.5\n1 2 0.5\n";
  }
  std::istringstream in("topology = custom\ngraph_file = " + (dir / "g.txt").string() +
                        "\nsamples_per_node = 4\ndim = 2\niterations = 100\nrecord_every = 100\n"
                        "output_dir = " + (dir / "out").string() + "\n");
  const ExperimentConfig c = parse_config(in);
  run_experiment(c);
  EXPECT_EQ(read_csv(dir / "out" / "run_1.csv").size(), 2u);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  {
    std::ofstream bad(dir / "bad.cfg");
    bad << "nodes = many\n";
    std::ofstream g(dir / "g.txt");
    g << "4 4\n0 1 1\n1 2 1\n2 3 1\n3 0 1\n";
    std::ofstream blocker(dir / "blocker");
    blocker << "x";
    std::ofstream unwritable(dir / "unwritable.cfg");
    unwritable << "nodes = 4\nsamples_per_node = 3\ndim = 2\niterations = 10\nrecord_every = 5\n"
               << "output_dir = " << (dir / "blocker" / "sub").string() << "\n";
    std::ofstream good(dir / "good.cfg");
    good << "nodes = 4\nsamples_per_node = 3\ndim = 2\niterations = 10\nrecord_every = 5\n"
         << "output_dir = " << (dir / "good").string() << "\n";
  }
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("run --config " + (dir / "good.cfg").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "good" / "aggregate.csv"));
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.cfg").string()), 1);
  EXPECT_EQ(run_cli("run --config " + (dir / "missing.cfg").string()), 1);
  EXPECT_EQ(run_cli("run --config " + (dir / "unwritable.cfg").string()), 2);
  EXPECT_EQ(run_cli("verify --suite bogus"), 1);
  EXPECT_EQ(run_cli("verify --suite spectral"), 0);
  EXPECT_EQ(run_cli("spectra --graph " + (dir / "g.txt").string()), 0);
  EXPECT_EQ(run_cli("spectra --graph " + (dir / "none.txt").string()), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
}
