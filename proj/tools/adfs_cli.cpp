// adfs_cli: run experiments, verification suites and graph spectra.
// Exit codes: 0 ok, 1 validation error (or failed verification), 2 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <adfs/error.hpp>
#include <adfs/experiment.hpp>
#include <adfs/graph.hpp>
#include <adfs/verify/criteria.hpp>

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

int cmd_run(const std::string &path) {
  const adfs::ExperimentConfig c = adfs::load_config(path);
  const auto dir = adfs::run_experiment(c);
  std::cout << "wrote " << c.seeds.size() << " run(s) to " << dir.string() << '\n';
  std::ifstream manifest(dir / "manifest.txt");
  std::cout << manifest.rdbuf();
  return kOk;
}

int cmd_verify(const std::string &suite) {
  (void)adfs::verify::criteria_of(suite);  // rejects unknown names before any work
  const auto rep = adfs::verify::run_suite(suite, [](const adfs::verify::CriterionResult &r) {
    std::cout << adfs::verify::format_result(r) << std::endl;
  });
  adfs::verify::print_report(std::cout, rep);
  return rep.passed() ? kOk : kValidation;
}

int cmd_spectra(const std::string &path, std::size_t m, double L, double sigma) {
  std::ifstream in(path);
  if (!in) throw adfs::ValidationError("cannot open graph file '" + path + "'");
  const adfs::CommGraph g = adfs::read_edge_list(in);
  const adfs::AugmentedGraph aug = adfs::augment(g, m, std::vector<double>(g.n() * m, L),
                                                 std::vector<double>(g.n(), sigma));
  const adfs::SpectralData sp = adfs::spectral_quantities(aug);
  std::printf("nodes=%zu\nedges=%zu\n", g.n(), g.edge_count());
  std::printf("lambda_min_L=%.17g\nlambda_max_L=%.17g\ngamma=%.17g\ngamma_tilde=%.17g\n",
              sp.lambda_min_L, sp.lambda_max_L, sp.gamma, sp.gamma_tilde);
  std::printf("augmented: m=%zu L=%.17g sigma=%.17g\n", m, L, sigma);
  std::printf("sigma_A=%.17g\nlambda_max_A2=%.17g\ndegenerate=%s\n", sp.sigma_A, sp.lambda_max_A2,
              sp.degenerate ? "true" : "false");
  std::printf("edge,k,l,mu2,R\n");
  for (std::size_t e = 0; e < aug.comm_edge_count(); ++e) {
    const adfs::Edge &ed = aug.edge(e);
    std::printf("%zu,%zu,%zu,%.17g,%.17g\n", e, ed.k, ed.l, ed.weight, sp.R[e]);
  }
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Accelerated decentralized finite-sum optimization laboratory"};
  app.require_subcommand(1);

  std::string config;
  auto *run = app.add_subcommand("run", "run an experiment from a key=value config file");
  run->add_option("--config", config, "config file")->required();

  std::string suite;
  auto *verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("--suite", suite, "spectral, prox, apcg, adfs, timing or all")->required();

  std::string graph;
  std::size_t m = 1;
  double L = 1.0, sigma = 1.0;
  auto *spectra = app.add_subcommand("spectra", "spectral quantities of an edge-list graph");
  spectra->add_option("--graph", graph, "edge-list file (first line: n E)")->required();
  spectra->add_option("--samples", m, "samples per node of the augmented graph")
      ->check(CLI::PositiveNumber);
  spectra->add_option("--smoothness", L, "per-sample smoothness")->check(CLI::PositiveNumber);
  spectra->add_option("--sigma", sigma, "per-node regularization")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(config);
    if (*verify) return cmd_verify(suite);
    if (*spectra) return cmd_spectra(graph, m, L, sigma);
  } catch (const adfs::ValidationError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception &e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
