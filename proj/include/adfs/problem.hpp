#ifndef ADFS_PROBLEM_HPP
#define ADFS_PROBLEM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"

namespace adfs {

enum class Loss { quadratic, logistic };

/// Scalar loss along a sample direction: f(theta) = ell(x^T theta).
/// logistic: ell(s) = log(1 + exp(-c s)), c the label in {-1, +1}
/// quadratic: ell(s) = (s - c)^2 / 2, c the target
struct ScalarLoss {
  Loss kind = Loss::quadratic;
  double c = 0.0;

  double value(double s) const {
    if (kind == Loss::quadratic) return 0.5 * (s - c) * (s - c);
    const double t = -c * s;
    return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  }
  double deriv(double s) const {
    if (kind == Loss::quadratic) return s - c;
    // -c / (1 + exp(c s))
    const double t = c * s;
    return t > 0 ? -c * std::exp(-t) / (1.0 + std::exp(-t)) : -c / (1.0 + std::exp(t));
  }
  double second(double s) const {
    if (kind == Loss::quadratic) return 1.0;
    const double e = std::exp(-std::abs(s));
    return e / ((1.0 + e) * (1.0 + e));
  }
  /// sup ell''.
  double curvature_bound() const { return kind == Loss::quadratic ? 1.0 : 0.25; }
};

/// Labelled samples with dense features, one row per sample.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
};

/// Parses LibSVM text: "label idx:val idx:val ...", 1-based indices.
inline Dataset parse_libsvm(std::istream &in, std::size_t d) {
  detail::require(d >= 1, "libsvm: dimension must be positive");
  std::vector<double> labels;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "libsvm line " + std::to_string(lineno) + ": ";
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    double label = 0.0;
    try {
      std::size_t used = 0;
      label = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception &) {
      throw ValidationError(where + "bad label '" + tok + "'");
    }
    std::vector<std::pair<std::size_t, double>> feats;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        throw ValidationError(where + "expected idx:val, got '" + tok + "'");
      long long idx = 0;
      double val = 0.0;
      try {
        std::size_t u1 = 0, u2 = 0;
        const std::string is = tok.substr(0, colon), vs = tok.substr(colon + 1);
        idx = std::stoll(is, &u1);
        val = std::stod(vs, &u2);
        if (u1 != is.size() || u2 != vs.size()) throw std::invalid_argument(tok);
      } catch (const std::exception &) {
        throw ValidationError(where + "malformed feature '" + tok + "'");
      }
      if (idx < 1) throw ValidationError(where + "feature index must be >= 1");
      if (std::size_t(idx) > d)
        throw ValidationError(where + "index out of range (" + std::to_string(idx) + " > " +
                              std::to_string(d) + ")");
      if (!std::isfinite(val)) throw ValidationError(where + "non-finite feature value");
      feats.emplace_back(std::size_t(idx) - 1, val);
    }
    labels.push_back(label);
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) throw ValidationError("libsvm: empty file");
  Dataset ds;
  ds.X = Eigen::MatrixXd::Zero(Eigen::Index(rows.size()), Eigen::Index(d));
  ds.y.resize(Eigen::Index(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ds.y[Eigen::Index(r)] = labels[r];
    for (auto [c, v] : rows[r]) ds.X(Eigen::Index(r), Eigen::Index(c)) = v;
  }
  return ds;
}

inline Dataset load_libsvm(const std::string &path, std::size_t d) {
  std::ifstream in(path);
  if (!in) throw ValidationError("libsvm: cannot open '" + path + "'");
  return parse_libsvm(in, d);
}

/// Regularized finite sum: node i holds m samples plus (sigma_i/2)|theta|^2.
class ProblemSpec {
 public:
  ProblemSpec() = default;

  /// Rows of X are samples, sample (i, j) at row i*m + j.
  ProblemSpec(std::size_t n, std::size_t m, Loss loss, Eigen::MatrixXd X, Eigen::VectorXd y,
              std::vector<double> sigma)
      : n_(n), m_(m), loss_(loss), X_(std::move(X)), y_(std::move(y)), sigma_(std::move(sigma)) {
    detail::require(n >= 1 && m >= 1, "problem needs n >= 1 and m >= 1");
    detail::require(std::size_t(X_.rows()) == n * m, "feature rows must equal n*m");
    detail::require(X_.cols() >= 1, "dimension must be positive");
    detail::require(std::size_t(y_.size()) == n * m, "need one label per sample");
    detail::require(sigma_.size() == n, "need one regularization per node");
    for (double s : sigma_) detail::require(std::isfinite(s) && s > 0.0, "sigma_i must be positive");
    if (loss == Loss::logistic)
      for (Eigen::Index q = 0; q < y_.size(); ++q)
        detail::require(y_[q] == 1.0 || y_[q] == -1.0, "logistic labels must be -1 or +1");
    L_.resize(n * m);
    const double scale = loss == Loss::logistic ? 0.25 : 1.0;
    for (std::size_t q = 0; q < n * m; ++q) {
      const double sq = X_.row(Eigen::Index(q)).squaredNorm();
      detail::require(std::isfinite(sq), "non-finite feature");
      detail::require(sq > 0.0, "sample " + std::to_string(q) + " has a zero feature vector");
      L_[q] = scale * sq;
    }
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t d() const { return std::size_t(X_.cols()); }
  Loss loss() const { return loss_; }
  const Eigen::MatrixXd &X() const { return X_; }
  const Eigen::VectorXd &y() const { return y_; }
  const std::vector<double> &sigma() const { return sigma_; }
  const std::vector<double> &smoothness() const { return L_; }

  std::size_t index(std::size_t i, std::size_t j) const { return i * m_ + j; }
  auto feature(std::size_t q) const { return X_.row(Eigen::Index(q)); }
  ScalarLoss scalar_loss(std::size_t q) const { return {loss_, y_[Eigen::Index(q)]}; }
  double sigma_total() const { return std::accumulate(sigma_.begin(), sigma_.end(), 0.0); }
  double sigma_min() const { return *std::min_element(sigma_.begin(), sigma_.end()); }

 private:
  std::size_t n_ = 0, m_ = 0;
  Loss loss_ = Loss::quadratic;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  std::vector<double> sigma_;
  std::vector<double> L_;
};

/// Splits a dataset over n nodes with m samples each. Samples are shuffled
/// with `seed`; disjoint mode takes contiguous blocks, overlap mode draws each
/// node's samples independently.
inline ProblemSpec distribute(const Dataset &ds, std::size_t n, std::size_t m, Loss loss,
                              double sigma, std::uint64_t seed, bool overlap = false) {
  detail::require(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
  const std::size_t total = ds.size();
  detail::require(total >= 1, "dataset is empty");
  if (!overlap)
    detail::require(n * m <= total, "dataset has " + std::to_string(total) +
                                        " samples, need n*m = " + std::to_string(n * m));
  else
    detail::require(m <= total, "dataset smaller than m");
  Pcg64 rng(seed, 7);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n * m), ds.X.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(n * m));
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto shuffle = [&] {
    for (std::size_t q = total; q > 1; --q) std::swap(perm[q - 1], perm[rng.below(q)]);
  };
  shuffle();
  for (std::size_t i = 0; i < n; ++i) {
    if (overlap) shuffle();
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t src = overlap ? perm[j] : perm[i * m + j];
      X.row(Eigen::Index(i * m + j)) = ds.X.row(Eigen::Index(src));
      y[Eigen::Index(i * m + j)] = ds.y[Eigen::Index(src)];
    }
  }
  return ProblemSpec(n, m, loss, std::move(X), std::move(y), std::vector<double>(n, sigma));
}

namespace detail {

/// Gaussian features rescaled so that the median per-sample smoothness is 1.
inline Eigen::MatrixXd gaussian_features(Pcg64 &rng, std::size_t rows, std::size_t d,
                                         double smooth_factor) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = rng.normal();
  std::vector<double> sq(rows);
  for (std::size_t r = 0; r < rows; ++r) sq[r] = smooth_factor * X.row(Eigen::Index(r)).squaredNorm();
  std::sort(sq.begin(), sq.end());
  const double med = rows % 2 ? sq[rows / 2] : 0.5 * (sq[rows / 2 - 1] + sq[rows / 2]);
  if (med > 0.0) X /= std::sqrt(med);
  return X;
}

inline Eigen::VectorXd unit_direction(Pcg64 &rng, std::size_t d) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < w.size(); ++c) w[c] = rng.normal();
  return w / w.norm();
}

}  // namespace detail

/// Synthetic logistic problem: labels drawn with P(+1) = sigmoid(s * w^T x)
/// for a random unit w, then flipped with probability `flip`.
inline ProblemSpec synth_classification(std::uint64_t seed, std::size_t n, std::size_t m,
                                        std::size_t d, double separability, double sigma = 1.0,
                                        double flip = 0.0) {
  detail::require(n >= 1 && m >= 1 && d >= 1, "synthetic problem needs positive counts");
  Pcg64 rng(seed, 1);
  Eigen::MatrixXd X = detail::gaussian_features(rng, n * m, d, 0.25);
  const Eigen::VectorXd w = detail::unit_direction(rng, d);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n * m));
  for (Eigen::Index q = 0; q < y.size(); ++q) {
    const double p = 1.0 / (1.0 + std::exp(-separability * X.row(q).dot(w)));
    const double u = rng.uniform(), uf = rng.uniform();
    double lab = u < p ? 1.0 : -1.0;
    if (uf < flip) lab = -lab;
    y[q] = lab;
  }
  return ProblemSpec(n, m, Loss::logistic, std::move(X), std::move(y), std::vector<double>(n, sigma));
}

/// Synthetic least-squares problem: b = w^T x + noise * N(0, 1).
inline ProblemSpec synth_regression(std::uint64_t seed, std::size_t n, std::size_t m, std::size_t d,
                                    double noise, double sigma = 1.0) {
  detail::require(n >= 1 && m >= 1 && d >= 1, "synthetic problem needs positive counts");
  Pcg64 rng(seed, 2);
  Eigen::MatrixXd X = detail::gaussian_features(rng, n * m, d, 1.0);
  const Eigen::VectorXd w = detail::unit_direction(rng, d);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n * m));
  for (Eigen::Index q = 0; q < y.size(); ++q) y[q] = X.row(q).dot(w) + noise * rng.normal();
  return ProblemSpec(n, m, Loss::quadratic, std::move(X), std::move(y), std::vector<double>(n, sigma));
}

struct SmoothnessSummary {
  std::vector<double> kappa;
  double kappa_s = 0.0;
  double r_kappa = 0.0;
  double S_comp = 0.0;
};

inline SmoothnessSummary summarize(const std::vector<double> &L, const std::vector<double> &sigma,
                                   std::size_t m) {
  const std::size_t n = sigma.size();
  detail::require(L.size() == n * m, "need n*m smoothness constants");
  SmoothnessSummary s;
  s.kappa.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum_l = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      sum_l += L[i * m + j];
      total += std::sqrt(1.0 + L[i * m + j] / sigma[i]);
    }
    s.kappa[i] = 1.0 + sum_l / sigma[i];
  }
  s.kappa_s = *std::max_element(s.kappa.begin(), s.kappa.end());
  s.r_kappa = *std::min_element(s.kappa.begin(), s.kappa.end()) / s.kappa_s;
  s.S_comp = total / double(n);
  return s;
}

inline SmoothnessSummary summarize(const ProblemSpec &p) {
  return summarize(p.smoothness(), p.sigma(), p.m());
}

/// F(theta) = sum_ij f_ij(theta) + sum_i sigma_i/2 |theta|^2.
inline double primal_value(const Eigen::VectorXd &theta, const ProblemSpec &p) {
  const Eigen::VectorXd s = p.X() * theta;
  double acc = 0.0;
  for (std::size_t q = 0; q < p.n() * p.m(); ++q) acc += p.scalar_loss(q).value(s[Eigen::Index(q)]);
  return acc + 0.5 * p.sigma_total() * theta.squaredNorm();
}

inline Eigen::VectorXd primal_gradient(const Eigen::VectorXd &theta, const ProblemSpec &p) {
  const Eigen::VectorXd s = p.X() * theta;
  Eigen::VectorXd g(s.size());
  for (Eigen::Index q = 0; q < s.size(); ++q) g[q] = p.scalar_loss(std::size_t(q)).deriv(s[q]);
  return p.X().transpose() * g + p.sigma_total() * theta;
}

inline Eigen::MatrixXd primal_hessian(const Eigen::VectorXd &theta, const ProblemSpec &p) {
  const Eigen::VectorXd s = p.X() * theta;
  Eigen::VectorXd h(s.size());
  for (Eigen::Index q = 0; q < s.size(); ++q) h[q] = p.scalar_loss(std::size_t(q)).second(s[q]);
  Eigen::MatrixXd H = p.X().transpose() * h.asDiagonal() * p.X();
  H.diagonal().array() += p.sigma_total();
  return H;
}

/// Minimizer of F by accelerated full-gradient descent, stopped once
/// |grad F| <= tol * sigma_min. A few Newton steps then polish the result to
/// machine precision (small d only).
inline Eigen::VectorXd solve_reference(const ProblemSpec &p, double tol = 1e-10,
                                       std::size_t max_iter = 1000000) {
  detail::require(tol > 0.0, "tolerance must be positive");
  const double mu = p.sigma_total();
  double lip = mu;
  for (double l : p.smoothness()) lip += l;
  const double q = std::sqrt(mu / lip);
  const double momentum = (1.0 - q) / (1.0 + q);
  const double target = tol * p.sigma_min();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(Eigen::Index(p.d()));
  Eigen::VectorXd prev = x, yk = x;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd g = primal_gradient(yk, p);
    if (primal_gradient(x, p).norm() <= target) break;
    prev = x;
    x = yk - g / lip;
    yk = x + momentum * (x - prev);
  }
  if (it == max_iter) throw NumericalError("reference solver: iteration cap exceeded");

  if (p.d() <= 500) {
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd g = primal_gradient(x, p);
      const Eigen::VectorXd step = primal_hessian(x, p).ldlt().solve(g);
      const Eigen::VectorXd cand = x - step;
      if (primal_gradient(cand, p).norm() < g.norm()) x = cand;
      else break;
    }
  }
  return x;
}

}  // namespace adfs

#endif
