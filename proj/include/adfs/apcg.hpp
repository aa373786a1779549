#ifndef ADFS_APCG_HPP
#define ADFS_APCG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "rng.hpp"

namespace adfs {

/// Coefficients of one generalized APCG iteration.
/// The coordinate step is eta_i = step / p_i with step = a_{t+1} / B_{t+1}.
struct StepCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double step = 0.0;
};

/// Coefficient sequences of generalized APCG, generated lazily.
///
/// Strongly convex mode: alpha = beta = rho = sqrt(sigma_A) / S,
/// A_t = (1 - rho)^{-t}, B_t = sigma_A A_t, so step = rho / sigma_A.
/// Convex mode: beta = 0, B_t = B0, A_0 = 3 B0 / (S^2 p_R^2) and
/// A_{t+1} = A_t + (B0 / 2S^2)(1 + sqrt(1 + 4 S^2 A_t / B0)).
class CoefficientSchedule {
 public:
  enum class Mode { strongly_convex, convex };

  static CoefficientSchedule strongly_convex(double sigma_A, double S) {
    if (!(sigma_A > 0.0))
      throw ValidationError("strongly convex schedule needs sigma_A > 0; use the convex mode");
    detail::require(S > 0.0, "S must be positive");
    CoefficientSchedule c;
    c.mode_ = Mode::strongly_convex;
    c.sigma_A_ = sigma_A;
    c.S_ = S;
    c.rho_ = std::sqrt(sigma_A) / S;
    detail::require(c.rho_ < 1.0, "rho = sqrt(sigma_A)/S must be below 1");
    return c;
  }

  static CoefficientSchedule convex(double S, double p_R, double B0 = 1.0) {
    detail::require(S > 0.0, "S must be positive");
    detail::require(p_R > 0.0 && p_R <= 1.0, "p_R must lie in (0, 1]");
    detail::require(B0 > 0.0, "B0 must be positive");
    CoefficientSchedule c;
    c.mode_ = Mode::convex;
    c.S_ = S;
    c.p_R_ = p_R;
    c.B0_ = B0;
    c.A0_ = 3.0 * B0 / (S * S * p_R * p_R);
    c.A_ = c.A0_;
    return c;
  }

  Mode mode() const { return mode_; }
  double S() const { return S_; }
  double rho() const { return rho_; }
  double sigma_A() const { return sigma_A_; }
  double p_R() const { return p_R_; }
  double B0() const { return B0_; }
  double A0() const { return A0_; }
  /// A_t for the current t (convex mode).
  double A() const { return A_; }
  std::size_t t() const { return t_; }

  /// Coefficients for iteration t, then advance to t + 1.
  StepCoefficients next() {
    StepCoefficients c;
    if (mode_ == Mode::strongly_convex) {
      c.alpha = c.beta = rho_;
      c.step = rho_ / sigma_A_;
    } else {
      const double s2 = S_ * S_;
      const double a = (B0_ / (2.0 * s2)) * (1.0 + std::sqrt(1.0 + 4.0 * s2 * A_ / B0_));
      const double A_next = A_ + a;
      c.alpha = a / A_next;
      c.beta = 0.0;
      c.step = a / B0_;
      A_ = A_next;
    }
    ++t_;
    return c;
  }

 private:
  Mode mode_ = Mode::strongly_convex;
  double sigma_A_ = 0.0, S_ = 1.0, rho_ = 0.0;
  double p_R_ = 1.0, B0_ = 1.0, A0_ = 0.0, A_ = 0.0;
  std::size_t t_ = 0;
};

/// S = max_i sqrt(M_i R_i) / p_i.
inline double sampling_smoothness(std::span<const double> M, std::span<const double> p,
                                  std::span<const double> R) {
  detail::require(M.size() == p.size() && p.size() == R.size(), "M, p, R sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    detail::require(p[i] > 0.0, "every coordinate needs positive probability");
    s = std::max(s, std::sqrt(M[i] * R[i]) / p[i]);
  }
  return s;
}

/// p_R = min_i p_i / R_i.
inline double projected_min_probability(std::span<const double> p, std::span<const double> R) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (R[i] > 0.0) best = std::min(best, p[i] / R[i]);
  return std::min(best, 1.0);
}

inline CoefficientSchedule make_schedule_sc(double sigma_A, std::span<const double> M,
                                            std::span<const double> p, std::span<const double> R,
                                            std::optional<double> S_override = std::nullopt) {
  double S = sampling_smoothness(M, p, R);
  if (S_override) {
    detail::require(*S_override >= S * (1.0 - 1e-12), "S override below max sqrt(M R)/p");
    S = *S_override;
  }
  auto sched = CoefficientSchedule::strongly_convex(sigma_A, S);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (sched.rho() * R[i] > p[i] * (1.0 + 1e-12))
      throw NumericalError("rho R_i <= p_i violated at coordinate " + std::to_string(i));
  return sched;
}

inline CoefficientSchedule make_schedule_cvx(double S, double p_R, double B0 = 1.0) {
  return CoefficientSchedule::convex(S, p_R, B0);
}

/// Iterate of generalized APCG. Coordinates are rows; each row is a block of
/// `width` scalars (width 1 for plain coordinate descent).
struct ApcgState {
  Eigen::MatrixXd x;
  Eigen::MatrixXd v;

  static ApcgState zeros(std::size_t dim, std::size_t width) {
    return {Eigen::MatrixXd::Zero(Eigen::Index(dim), Eigen::Index(width)),
            Eigen::MatrixXd::Zero(Eigen::Index(dim), Eigen::Index(width))};
  }
};

/// Tracks the convex-combination weights x_t^(i) = sum_l delta_t^(i)(l) v_l^(i)
/// for coordinates carrying a prox term.
class DeltaTracker {
 public:
  DeltaTracker() = default;
  explicit DeltaTracker(std::vector<std::size_t> coords) : coords_(std::move(coords)) {
    weights_.assign(coords_.size(), std::vector<double>{1.0});
    history_.assign(coords_.size(), {});
  }

  const std::vector<std::size_t> &coords() const { return coords_; }
  const std::vector<double> &weights(std::size_t slot) const { return weights_[slot]; }

  void record_initial(const ApcgState &s) {
    for (std::size_t c = 0; c < coords_.size(); ++c)
      history_[c].assign(1, s.v.row(Eigen::Index(coords_[c])));
  }

  /// Updates weights after an iteration with coefficients `co` and the new v.
  void update(const StepCoefficients &co, std::span<const double> p, const ApcgState &after) {
    const double a = co.alpha, b = co.beta;
    const double cdecay = (1.0 - a) / (1.0 - a * b);
    for (std::size_t c = 0; c < coords_.size(); ++c) {
      const double pi = p[coords_[c]];
      auto &w = weights_[c];
      const double keep = (1.0 - a * b / pi) * cdecay;
      for (double &x : w) x *= keep;
      w.back() += a * (1.0 - b) / (1.0 - a * b) * (1.0 - 1.0 / pi);
      w.push_back(a / pi);
      history_[c].push_back(after.v.row(Eigen::Index(coords_[c])));
    }
  }

  struct Check {
    double max_residual = 0.0;
    double min_weight = 0.0;
    double max_sum_error = 0.0;
  };

  Check check(const ApcgState &s) const {
    Check r;
    r.min_weight = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < coords_.size(); ++c) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(s.x.cols());
      double sum = 0.0;
      for (std::size_t l = 0; l < weights_[c].size(); ++l) {
        acc += weights_[c][l] * history_[c][l];
        sum += weights_[c][l];
        r.min_weight = std::min(r.min_weight, weights_[c][l]);
      }
      const double scale = std::max(1.0, s.x.row(Eigen::Index(coords_[c])).norm());
      r.max_residual =
          std::max(r.max_residual, (acc - s.x.row(Eigen::Index(coords_[c]))).norm() / scale);
      r.max_sum_error = std::max(r.max_sum_error, std::abs(sum - 1.0));
    }
    return r;
  }

 private:
  std::vector<std::size_t> coords_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<Eigen::RowVectorXd>> history_;
};

/// One iteration of generalized APCG on coordinate i (sampled by the caller
/// with probability p[i]).
///
/// Problem requirements:
///   Eigen::RowVectorXd gradient(const Eigen::MatrixXd &y, std::size_t i) const
///   bool has_prox(std::size_t i) const
///   Eigen::RowVectorXd prox(std::size_t i, double eta, const Eigen::RowVectorXd &z)
///   double R(std::size_t i) const
template <class Problem>
void apcg_step(Problem &problem, const StepCoefficients &co, std::span<const double> p,
               ApcgState &s, std::size_t i) {
  const double a = co.alpha, b = co.beta;
  const Eigen::MatrixXd y = ((1.0 - a) * s.x + a * (1.0 - b) * s.v) / (1.0 - a * b);
  const double eta = co.step / p[i];
  // w = (1 - beta) v + beta y is what v_{t+1} equals off coordinate i.
  Eigen::MatrixXd w = (1.0 - b) * s.v + b * y;
  Eigen::RowVectorXd zi = w.row(Eigen::Index(i)) - eta * problem.gradient(y, i);
  const Eigen::RowVectorXd vi = problem.has_prox(i) ? problem.prox(i, eta, zi) : zi;
  // x_{t+1} = y + (alpha R_i / p_i)(v_{t+1} - w); only row i of v_{t+1} - w is nonzero.
  s.x = y;
  s.x.row(Eigen::Index(i)) += (a * problem.R(i) / p[i]) * (vi - w.row(Eigen::Index(i)));
  w.row(Eigen::Index(i)) = vi;
  s.v = std::move(w);
}

/// Composite quadratic: f_A(x) = x^T Q x / 2 - b^T x (width 1), optional
/// separable quadratic prox terms psi_i(x) = w_i (x - c_i)^2 / 2.
struct QuadraticComposite {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;
  Eigen::VectorXd psi_weight;  // zero entries mean psi_i = 0
  Eigen::VectorXd psi_center;
  Eigen::MatrixXd projector;   // A^+ A, the projector on range(Q)
  std::vector<double> M, Rv;
  double sigma_A = 0.0;

  static QuadraticComposite make(Eigen::MatrixXd Q, Eigen::VectorXd b,
                                 Eigen::VectorXd psi_weight = {}, Eigen::VectorXd psi_center = {}) {
    const Eigen::Index n = Q.rows();
    detail::require(Q.cols() == n && b.size() == n, "Q must be square and match b");
    QuadraticComposite c;
    c.Q = std::move(Q);
    c.b = std::move(b);
    c.psi_weight = psi_weight.size() ? std::move(psi_weight) : Eigen::VectorXd::Zero(n);
    c.psi_center = psi_center.size() ? std::move(psi_center) : Eigen::VectorXd::Zero(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.Q);
    const double top = es.eigenvalues().maxCoeff();
    c.projector = Eigen::MatrixXd::Zero(n, n);
    c.sigma_A = std::numeric_limits<double>::infinity();
    for (Eigen::Index q = 0; q < n; ++q) {
      const double lam = es.eigenvalues()[q];
      if (lam > 1e-10 * top) {
        c.projector += es.eigenvectors().col(q) * es.eigenvectors().col(q).transpose();
        c.sigma_A = std::min(c.sigma_A, lam);
      }
    }
    if (!std::isfinite(c.sigma_A)) c.sigma_A = 0.0;
    c.M.resize(std::size_t(n));
    c.Rv.resize(std::size_t(n));
    for (Eigen::Index q = 0; q < n; ++q) {
      c.M[std::size_t(q)] = c.Q(q, q);
      c.Rv[std::size_t(q)] = c.projector(q, q);
      if (c.psi_weight[q] != 0.0)
        detail::require(std::abs(c.Rv[std::size_t(q)] - 1.0) < 1e-10,
                        "prox coordinates need R_i = 1");
    }
    return c;
  }

  Eigen::RowVectorXd gradient(const Eigen::MatrixXd &y, std::size_t i) const {
    Eigen::RowVectorXd g(1);
    g[0] = Q.row(Eigen::Index(i)).dot(y.col(0)) - b[Eigen::Index(i)];
    return g;
  }
  bool has_prox(std::size_t i) const { return psi_weight[Eigen::Index(i)] != 0.0; }
  Eigen::RowVectorXd prox(std::size_t i, double eta, const Eigen::RowVectorXd &z) const {
    const double w = psi_weight[Eigen::Index(i)], c = psi_center[Eigen::Index(i)];
    return (z.array() + eta * w * c).matrix() / (1.0 + eta * w);
  }
  double R(std::size_t i) const { return Rv[i]; }

  double value(const Eigen::VectorXd &x) const {
    double psi = 0.0;
    for (Eigen::Index q = 0; q < x.size(); ++q)
      psi += 0.5 * psi_weight[q] * (x[q] - psi_center[q]) * (x[q] - psi_center[q]);
    return 0.5 * x.dot(Q * x) - b.dot(x) + psi;
  }

  /// A minimizer (least-norm for the smooth part when singular).
  Eigen::VectorXd minimizer() const {
    Eigen::MatrixXd H = Q;
    H.diagonal() += psi_weight;
    const Eigen::VectorXd rhs = b + psi_weight.cwiseProduct(psi_center);
    return H.completeOrthogonalDecomposition().solve(rhs);
  }
};

struct ApcgTrajectory {
  std::vector<std::size_t> t;
  std::vector<double> gap;        // F(x_t) - F*
  std::vector<double> dist_proj;  // |v_t - theta*|^2 in the A^+A seminorm
  std::vector<double> A, B;       // Lyapunov weights at t
};

/// Runs T iterations with i.i.d. coordinates drawn from p, recording every
/// `record_every` steps. Requires Problem::value and a projector for the
/// distance (identity if empty).
template <class Problem>
ApcgTrajectory run_apcg(Problem &problem, CoefficientSchedule schedule, std::span<const double> p,
                        std::size_t T, std::uint64_t seed, const Eigen::VectorXd &theta_star,
                        const Eigen::MatrixXd &projector, std::size_t record_every = 1,
                        ApcgState *final_state = nullptr) {
  detail::require(T >= 1, "run_apcg needs T >= 1");
  const std::size_t dim = p.size();
  ApcgState s = ApcgState::zeros(dim, 1);
  DiscreteSampler sampler(p);
  Pcg64 rng(seed, 3);
  const double f_star = problem.value(theta_star);
  ApcgTrajectory tr;
  auto record = [&](std::size_t t) {
    const Eigen::VectorXd diff = s.v.col(0) - theta_star;
    tr.t.push_back(t);
    tr.gap.push_back(problem.value(s.x.col(0)) - f_star);
    tr.dist_proj.push_back(projector.size() ? diff.dot(projector * diff) : diff.squaredNorm());
    if (schedule.mode() == CoefficientSchedule::Mode::convex) {
      tr.A.push_back(schedule.A());
      tr.B.push_back(schedule.B0());
    } else {
      const double A = std::pow(1.0 - schedule.rho(), -double(t));
      tr.A.push_back(A);
      tr.B.push_back(schedule.sigma_A() * A);
    }
  };
  record(0);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t i = sampler(rng);
    const StepCoefficients co = schedule.next();
    apcg_step(problem, co, p, s, i);
    if ((t + 1) % record_every == 0 || t + 1 == T) record(t + 1);
  }
  if (final_state) *final_state = s;
  return tr;
}

}  // namespace adfs

#endif
