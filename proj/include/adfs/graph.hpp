#ifndef ADFS_GRAPH_HPP
#define ADFS_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace adfs {

/// Weighted edge; `weight` is the squared incidence coefficient mu^2.
struct Edge {
  std::size_t k = 0;
  std::size_t l = 0;
  double weight = 0.0;

  bool operator==(const Edge &) const = default;
};

enum class Topology { complete, ring, grid2d, custom };

/// Connected undirected communication network with canonical (k < l) edges.
class CommGraph {
 public:
  CommGraph() = default;

  /// Validates and canonicalizes an edge list. A single node with no edges is
  /// accepted (the single-machine case).
  static CommGraph from_edges(std::size_t n, std::vector<Edge> edges) {
    detail::require(n >= 1, "graph needs at least one node");
    for (Edge &e : edges) {
      detail::require(e.k < n && e.l < n, "edge endpoint out of range");
      detail::require(e.k != e.l, "self-loops are not allowed");
      detail::require(std::isfinite(e.weight) && e.weight > 0.0,
                      "edge weights must be positive");
      if (e.k > e.l) std::swap(e.k, e.l);
    }
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    keys.reserve(edges.size());
    for (const Edge &e : edges) keys.emplace_back(e.k, e.l);
    std::sort(keys.begin(), keys.end());
    detail::require(std::adjacent_find(keys.begin(), keys.end()) == keys.end(),
                    "duplicate edge in graph");

    CommGraph g;
    g.n_ = n;
    g.edges_ = std::move(edges);
    g.adjacency_.assign(n, {});
    for (std::size_t e = 0; e < g.edges_.size(); ++e) {
      g.adjacency_[g.edges_[e].k].push_back(g.edges_[e].l);
      g.adjacency_[g.edges_[e].l].push_back(g.edges_[e].k);
    }
    detail::require(g.connected(), "graph is not connected");
    return g;
  }

  std::size_t n() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge> &edges() const { return edges_; }
  const std::vector<std::vector<std::size_t>> &adjacency() const { return adjacency_; }
  std::size_t degree(std::size_t k) const { return adjacency_[k].size(); }

  /// Weighted Laplacian A_comm A_comm^T.
  Eigen::MatrixXd laplacian() const {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n_, n_);
    for (const Edge &e : edges_) {
      lap(e.k, e.k) += e.weight;
      lap(e.l, e.l) += e.weight;
      lap(e.k, e.l) -= e.weight;
      lap(e.l, e.k) -= e.weight;
    }
    return lap;
  }

 private:
  bool connected() const {
    std::vector<char> seen(n_, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t w : adjacency_[u]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n_;
  }

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Builds one of the standard topologies with uniform weight `mu2`.
inline CommGraph build_topology(Topology kind, std::size_t n, double mu2 = 0.5,
                                const std::vector<Edge> &custom_edges = {},
                                std::optional<GridShape> shape = std::nullopt) {
  detail::require(n >= 2, "topology needs n >= 2");
  std::vector<Edge> edges;
  switch (kind) {
    case Topology::complete:
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l) edges.push_back({k, l, mu2});
      break;
    case Topology::ring:
      for (std::size_t k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1, mu2});
      if (n > 2) edges.push_back({0, n - 1, mu2});
      break;
    case Topology::grid2d: {
      GridShape s;
      if (shape) {
        s = *shape;
        detail::require(s.rows * s.cols == n, "grid shape does not match n");
      } else {
        const auto side = static_cast<std::size_t>(std::llround(std::sqrt(double(n))));
        detail::require(side * side == n,
                        "grid2d needs a perfect square n or explicit rows/cols");
        s = {side, side};
      }
      for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) {
          const std::size_t id = r * s.cols + c;
          if (c + 1 < s.cols) edges.push_back({id, id + 1, mu2});
          if (r + 1 < s.rows) edges.push_back({id, id + s.cols, mu2});
        }
      }
      break;
    }
    case Topology::custom:
      edges = custom_edges;
      break;
  }
  return CommGraph::from_edges(n, std::move(edges));
}

/// Edge-list text format: first line "n E", then "k l mu2" per line (0-indexed).
inline CommGraph read_edge_list(std::istream &in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&](std::string &out) {
    while (std::getline(in, out)) {
      ++lineno;
      if (out.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line(line)) throw ValidationError("edge list: empty input");
  std::size_t n = 0, count = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> n >> count))
      throw ValidationError("edge list line " + std::to_string(lineno) + ": expected \"n E\"");
  }
  std::vector<Edge> edges;
  edges.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    if (!next_line(line))
      throw ValidationError("edge list: expected " + std::to_string(count) + " edges, got " +
                            std::to_string(e));
    std::istringstream es(line);
    long long k = -1, l = -1;
    double w = 0.0;
    std::string extra;
    if (!(es >> k >> l >> w) || (es >> extra) || k < 0 || l < 0)
      throw ValidationError("edge list line " + std::to_string(lineno) +
                            ": expected \"k l mu2\"");
    edges.push_back({std::size_t(k), std::size_t(l), w});
  }
  if (next_line(line))
    throw ValidationError("edge list line " + std::to_string(lineno) + ": trailing content");
  return CommGraph::from_edges(n, std::move(edges));
}

inline void write_edge_list(std::ostream &out, const CommGraph &g) {
  out << g.n() << ' ' << g.edge_count() << '\n';
  char buf[64];
  for (const Edge &e : g.edges()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.weight);
    out << e.k << ' ' << e.l << ' ' << buf << '\n';
  }
}

namespace detail {

/// Eigenvalues below this fraction of the largest are treated as zero.
inline constexpr double kKernelTolerance = 1e-10;

inline double min_positive(const Eigen::VectorXd &eig) {
  const double top = eig.size() ? eig.maxCoeff() : 0.0;
  if (!(top > 0.0)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index q = 0; q < eig.size(); ++q)
    if (eig[q] > kKernelTolerance * top) best = std::min(best, eig[q]);
  return best;
}

inline Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd &m) {
  if (m.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return es.eigenvalues();
}

}  // namespace detail

/// lambda_min^+ of the communication Laplacian. A single node has no
/// Laplacian spectrum; the value 1 is used so that the virtual-edge weight
/// rule stays well defined (it only fixes an overall scale there).
inline double laplacian_min_positive(const CommGraph &g) {
  if (g.n() == 1) return 1.0;
  return detail::min_positive(detail::sym_eigenvalues(g.laplacian()));
}

enum class MuRule { standard, explicit_weights };

/// Communication graph with each node replaced by a star of m sample nodes.
///
/// Node ids: centers are 0..n-1, virtual node (i,j) is n + i*m + j.
/// Edge ids: communication edges 0..E-1 in base order, virtual edge (i,j) is
/// E + i*m + j with k = center, l = virtual node. Edge id is also the column
/// of the incidence matrix A, whose column e is mu_e (e^(k) - e^(l)).
class AugmentedGraph {
 public:
  AugmentedGraph() = default;

  AugmentedGraph(CommGraph base, std::size_t m, std::vector<double> virtual_mu2,
                 Eigen::VectorXd sigma)
      : base_(std::move(base)), m_(m), sigma_(std::move(sigma)) {
    const std::size_t n = base_.n();
    detail::require(virtual_mu2.size() == n * m, "virtual weight count must be n*m");
    detail::require(static_cast<std::size_t>(sigma_.size()) == n * (1 + m),
                    "Sigma must have n(1+m) entries");
    for (Eigen::Index q = 0; q < sigma_.size(); ++q)
      detail::require(sigma_[q] > 0.0, "Sigma entries must be positive");
    edges_ = base_.edges();
    edges_.reserve(edge_count());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double w = virtual_mu2[i * m + j];
        detail::require(std::isfinite(w) && w > 0.0, "virtual edge weights must be positive");
        edges_.push_back({i, virtual_node(i, j), w});
      }
  }

  const CommGraph &base() const { return base_; }
  std::size_t n() const { return base_.n(); }
  std::size_t m() const { return m_; }
  std::size_t node_count() const { return base_.n() * (1 + m_); }
  std::size_t comm_edge_count() const { return base_.edge_count(); }
  std::size_t edge_count() const { return base_.edge_count() + base_.n() * m_; }

  std::size_t virtual_node(std::size_t i, std::size_t j) const { return base_.n() + i * m_ + j; }
  std::size_t virtual_edge(std::size_t i, std::size_t j) const {
    return base_.edge_count() + i * m_ + j;
  }
  bool is_virtual_edge(std::size_t e) const { return e >= base_.edge_count(); }
  bool is_center(std::size_t node) const { return node < base_.n(); }
  /// (i, j) of a virtual edge id.
  std::pair<std::size_t, std::size_t> sample_of_edge(std::size_t e) const {
    const std::size_t s = e - base_.edge_count();
    return {s / m_, s % m_};
  }

  const std::vector<Edge> &edges() const { return edges_; }
  const Edge &edge(std::size_t e) const { return edges_[e]; }
  std::size_t column_index(std::size_t e) const { return e; }

  /// Diagonal of Sigma: sigma_i at centers, L_ij at virtual nodes. Entries may
  /// be +inf (non-smooth samples), which makes the matching Sigma^{-1} zero.
  const Eigen::VectorXd &sigma() const { return sigma_; }
  double sigma_inv(std::size_t node) const { return 1.0 / sigma_[node]; }

  /// Dense incidence matrix A (node_count x edge_count).
  Eigen::MatrixXd incidence() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(node_count(), edge_count());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const double mu = std::sqrt(edges_[e].weight);
      a(edges_[e].k, e) = mu;
      a(edges_[e].l, e) = -mu;
    }
    return a;
  }

  /// A A^T, the weighted Laplacian of the augmented graph.
  Eigen::MatrixXd laplacian() const {
    const std::size_t nn = node_count();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(nn, nn);
    for (const Edge &e : edges_) {
      lap(e.k, e.k) += e.weight;
      lap(e.l, e.l) += e.weight;
      lap(e.k, e.l) -= e.weight;
      lap(e.l, e.k) -= e.weight;
    }
    return lap;
  }

 private:
  CommGraph base_;
  std::size_t m_ = 0;
  Eigen::VectorXd sigma_;
  std::vector<Edge> edges_;
};

/// Builds the augmented graph of a smooth problem.
///
/// `smoothness` holds L_ij (row-major, n*m), `reg` holds sigma_i. With
/// MuRule::standard the virtual weights are
///   mu_ij^2 = lambda_min^+(L) L_ij / (sigma kappa_i),
/// sigma = max_i sigma_i and kappa_i = 1 + sum_j L_ij / sigma_i.
inline AugmentedGraph augment(const CommGraph &graph, std::size_t m,
                              const std::vector<double> &smoothness,
                              const std::vector<double> &reg,
                              MuRule rule = MuRule::standard,
                              const std::vector<double> &explicit_mu2 = {}) {
  const std::size_t n = graph.n();
  detail::require(m >= 1, "need at least one sample per node");
  detail::require(smoothness.size() == n * m, "need n*m smoothness constants");
  detail::require(reg.size() == n, "need one regularization per node");
  for (double l : smoothness)
    detail::require(std::isfinite(l) && l > 0.0, "smoothness constants must be positive");
  for (double s : reg) detail::require(std::isfinite(s) && s > 0.0, "regularization must be positive");

  Eigen::VectorXd sigma(n * (1 + m));
  for (std::size_t i = 0; i < n; ++i) sigma[i] = reg[i];
  for (std::size_t q = 0; q < n * m; ++q) sigma[n + q] = smoothness[q];

  std::vector<double> mu2;
  if (rule == MuRule::explicit_weights) {
    detail::require(explicit_mu2.size() == n * m, "explicit rule needs n*m virtual weights");
    mu2 = explicit_mu2;
  } else {
    const double lam = laplacian_min_positive(graph);
    const double sig = *std::max_element(reg.begin(), reg.end());
    mu2.resize(n * m);
    for (std::size_t i = 0; i < n; ++i) {
      double sum_l = 0.0;
      for (std::size_t j = 0; j < m; ++j) sum_l += smoothness[i * m + j];
      const double kappa = 1.0 + sum_l / reg[i];
      for (std::size_t j = 0; j < m; ++j)
        mu2[i * m + j] = lam * smoothness[i * m + j] / (sig * kappa);
    }
  }
  return AugmentedGraph(graph, m, std::move(mu2), std::move(sigma));
}

/// Augmented graph for non-smooth samples: Sigma is +inf at virtual nodes and
/// mu_ij^2 = lambda_min^+(L) / (1 + m).
inline AugmentedGraph augment_nonsmooth(const CommGraph &graph, std::size_t m,
                                        const std::vector<double> &reg) {
  const std::size_t n = graph.n();
  detail::require(m >= 1, "need at least one sample per node");
  detail::require(reg.size() == n, "need one regularization per node");
  Eigen::VectorXd sigma(n * (1 + m));
  for (std::size_t i = 0; i < n; ++i) {
    detail::require(reg[i] > 0.0, "regularization must be positive");
    sigma[i] = reg[i];
  }
  for (std::size_t q = 0; q < n * m; ++q) sigma[n + q] = std::numeric_limits<double>::infinity();
  const double lam = laplacian_min_positive(graph);
  std::vector<double> mu2(n * m, lam / double(1 + m));
  return AugmentedGraph(graph, m, std::move(mu2), std::move(sigma));
}

struct SpectralData {
  double sigma_A = 0.0;        ///< lambda_min^+(A^T Sigma^{-1} A)
  double lambda_max_A2 = 0.0;  ///< lambda_max(A^T Sigma^{-2} A)
  std::vector<double> R;       ///< e^T A^+ A e per edge
  double lambda_min_L = 0.0;   ///< lambda_min^+ of the communication Laplacian
  double lambda_max_L = 0.0;
  double gamma = 1.0;          ///< lambda_min^+(L) / lambda_max(L)
  double gamma_tilde = std::numeric_limits<double>::infinity();
  bool degenerate = false;     ///< sigma_A numerically zero
};

/// Dense spectral analysis of an augmented graph.
///
/// sigma_A is computed on the node side, lambda_min^+(Sigma^{-1/2} A A^T
/// Sigma^{-1/2}), which shares its nonzero spectrum with A^T Sigma^{-1} A.
/// Effective resistances use A^+ A = A^T (A A^T)^+ A.
inline SpectralData spectral_quantities(const AugmentedGraph &aug) {
  SpectralData out;
  const std::size_t nn = aug.node_count();
  const Eigen::MatrixXd lap = aug.laplacian();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXd &lam = es.eigenvalues();
  const Eigen::MatrixXd &vec = es.eigenvectors();
  const double top = lam.maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
  for (Eigen::Index q = 0; q < lam.size(); ++q)
    if (lam[q] > detail::kKernelTolerance * top) inv[q] = 1.0 / lam[q];
  out.R.resize(aug.edge_count());
  for (std::size_t e = 0; e < aug.edge_count(); ++e) {
    const Edge &ed = aug.edge(e);
    const Eigen::VectorXd diff = (vec.row(ed.k) - vec.row(ed.l)).transpose();
    out.R[e] = ed.weight * diff.cwiseAbs2().dot(inv);
  }

  Eigen::VectorXd s_half(nn), s_inv(nn);
  for (std::size_t q = 0; q < nn; ++q) {
    s_inv[q] = aug.sigma_inv(q);
    s_half[q] = std::sqrt(s_inv[q]);
  }
  const Eigen::MatrixXd scaled = s_half.asDiagonal() * lap * s_half.asDiagonal();
  const Eigen::VectorXd eig_scaled = detail::sym_eigenvalues(scaled);
  out.sigma_A = detail::min_positive(eig_scaled);
  const double scaled_top = eig_scaled.size() ? eig_scaled.maxCoeff() : 0.0;
  out.degenerate = !(out.sigma_A > 1e-12 * scaled_top) || !std::isfinite(out.sigma_A);
  if (!std::isfinite(out.sigma_A)) out.sigma_A = 0.0;

  const Eigen::MatrixXd scaled2 = s_inv.asDiagonal() * lap * s_inv.asDiagonal();
  const Eigen::VectorXd eig2 = detail::sym_eigenvalues(scaled2);
  out.lambda_max_A2 = eig2.size() ? eig2.maxCoeff() : 0.0;

  const CommGraph &g = aug.base();
  if (g.n() >= 2) {
    const Eigen::VectorXd eig_l = detail::sym_eigenvalues(g.laplacian());
    out.lambda_max_L = eig_l.maxCoeff();
    out.lambda_min_L = detail::min_positive(eig_l);
    out.gamma = out.lambda_min_L / out.lambda_max_L;
    const double nd = double(g.n());
    const double ed = double(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const double val = out.lambda_min_L * nd * nd / (g.edges()[e].weight * out.R[e] * ed * ed);
      out.gamma_tilde = std::min(out.gamma_tilde, val);
    }
  } else {
    out.lambda_min_L = laplacian_min_positive(g);
    out.lambda_max_L = 0.0;
    out.gamma = 1.0;
  }
  return out;
}

/// lambda_min^+(A^T Sigma^{-1} A) computed on the edge side.
inline double dual_strong_convexity_edge_side(const AugmentedGraph &aug) {
  const Eigen::MatrixXd a = aug.incidence();
  Eigen::VectorXd s_inv(aug.node_count());
  for (std::size_t q = 0; q < aug.node_count(); ++q) s_inv[q] = aug.sigma_inv(q);
  const Eigen::MatrixXd gram = a.transpose() * s_inv.asDiagonal() * a;
  const double v = detail::min_positive(detail::sym_eigenvalues(gram));
  return std::isfinite(v) ? v : 0.0;
}

struct GapBoundReport {
  double lhs = 0.0;  ///< lambda_min^+(Sigma^{-1/2} A A^T Sigma^{-1/2})
  double rhs = 0.0;  ///< lambda_min^+(L) / (2 sigma kappa)
  bool holds = false;
};

/// Checks lambda_min^+(L~) >= lambda_min^+(L) / (2 sigma kappa) with
/// sigma = max_i sigma_i and kappa = max_i kappa_i read from Sigma.
inline GapBoundReport check_augmented_gap_bound(const AugmentedGraph &aug) {
  const std::size_t n = aug.n(), m = aug.m();
  const Eigen::VectorXd &s = aug.sigma();
  double sig = 0.0, kappa = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum_l = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum_l += s[aug.virtual_node(i, j)];
    sig = std::max(sig, s[i]);
    kappa = std::max(kappa, 1.0 + sum_l / s[i]);
  }
  GapBoundReport r;
  const std::size_t nn = aug.node_count();
  Eigen::VectorXd s_half(nn);
  for (std::size_t q = 0; q < nn; ++q) s_half[q] = std::sqrt(aug.sigma_inv(q));
  const Eigen::MatrixXd scaled = s_half.asDiagonal() * aug.laplacian() * s_half.asDiagonal();
  r.lhs = detail::min_positive(detail::sym_eigenvalues(scaled));
  r.rhs = laplacian_min_positive(aug.base()) / (2.0 * sig * kappa);
  r.holds = r.lhs >= r.rhs * (1.0 - 1e-12);
  return r;
}

}  // namespace adfs

#endif
