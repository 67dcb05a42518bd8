#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "omnijump/common.hpp"

namespace omnijump {

/// min 1/2 x^T H x + g^T x  s.t.  c_l <= G x <= c_u
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd G;
  Eigen::VectorXd c_l;
  Eigen::VectorXd c_u;

  int num_vars() const { return static_cast<int>(g.size()); }
  int num_rows() const { return static_cast<int>(G.rows()); }
};

/// Bounds beyond this magnitude are treated as absent.
inline constexpr double kQpInfinity = 1e19;

enum class QpStatus { Optimal, Infeasible, MaxIterations };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::MaxIterations: return "MaxIterations";
  }
  return "Unknown";
}

enum class BoundSide { Lower, Upper, Equal };

struct ActiveConstraint {
  int row;
  BoundSide side;
  bool operator==(const ActiveConstraint&) const = default;
};

struct QpSolution {
  Eigen::VectorXd x;
  /// Signed multiplier per constraint row: H x + g = G^T multipliers.
  /// Positive on an active lower bound, negative on an active upper bound.
  Eigen::VectorXd multipliers;
  std::vector<ActiveConstraint> active_set;
  QpStatus status = QpStatus::Infeasible;
  int iterations = 0;
  double objective = std::numeric_limits<double>::infinity();
};

/// Max-norm of stationarity and complementarity residuals.
inline double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& multipliers) {
  double res = 0.0;
  if (problem.num_vars() > 0) {
    Eigen::VectorXd grad = problem.H * x + problem.g;
    if (problem.num_rows() > 0) grad -= problem.G.transpose() * multipliers;
    res = grad.cwiseAbs().maxCoeff();
  }
  for (int i = 0; i < problem.num_rows(); ++i) {
    const double lam = multipliers[i];
    const double gx = problem.G.row(i).dot(x);
    const double lo = problem.c_l[i], hi = problem.c_u[i];
    if (lo == hi) continue;
    if (lam > 0.0) {
      res = std::max(res, lo > -kQpInfinity ? lam * std::abs(gx - lo) : lam);
    } else if (lam < 0.0) {
      res = std::max(res, hi < kQpInfinity ? -lam * std::abs(hi - gx) : -lam);
    }
  }
  return res;
}

inline double max_bound_violation(const QpProblem& problem, const Eigen::VectorXd& x) {
  double viol = 0.0;
  for (int i = 0; i < problem.num_rows(); ++i) {
    const double gx = problem.G.row(i).dot(x);
    if (problem.c_l[i] > -kQpInfinity) viol = std::max(viol, problem.c_l[i] - gx);
    if (problem.c_u[i] < kQpInfinity) viol = std::max(viol, gx - problem.c_u[i]);
  }
  return viol;
}

/// Dual active-set solver for strictly convex QPs (Goldfarb-Idnani).
///
/// Each double-bounded row expands into up to two one-sided constraints
/// n^T x >= b; rows with c_l == c_u become equalities. The solver keeps
/// J = L^-T Q and the upper-triangular R with J^T N_active = [R; 0], updating
/// both with Givens rotations as constraints enter and leave.
///
/// One instance owns its workspace and must not be shared across threads.
template <typename Scalar = double>
class BasicQpSolver {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  QpSolution solve(const QpProblem& problem) {
    const int n = problem.num_vars();
    const int m = problem.num_rows();
    if (problem.H.rows() != n || problem.H.cols() != n || (m > 0 && problem.G.cols() != n) ||
        problem.c_l.size() != m || problem.c_u.size() != m)
      throw std::invalid_argument("QpProblem dimensions disagree");

    expand(problem);
    QpSolution sol;
    sol.multipliers = Eigen::VectorXd::Zero(m);
    if (n == 0) {
      sol.x.resize(0);
      sol.status = QpStatus::Optimal;
      sol.objective = 0.0;
      return sol;
    }
    factorize(problem.H.template cast<Scalar>());

    const Vector g = problem.g.template cast<Scalar>();
    x_ = -(J_ * (J_.transpose() * g));
    active_.clear();
    u_.setZero(n);
    R_.setZero(n, n);
    const int max_changes = 10 * (n + m);
    int changes = 0;

    // Equalities first; they never leave the active set.
    for (int k = 0; k < num_eq_; ++k) {
      d_.noalias() = J_.transpose() * N_.col(k);
      const int q = active_count();
      update_directions(q);
      Scalar t2 = 0;
      if (z_.squaredNorm() > eps_) t2 = (b_[k] - N_.col(k).dot(x_)) / z_.dot(N_.col(k));
      x_ += t2 * z_;
      if (q > 0) u_.head(q) -= t2 * r_.head(q);
      u_[q] = t2;
      if (!add_constraint(k)) {
        // Linearly dependent equality: consistent only if already satisfied.
        if (std::abs(N_.col(k).dot(x_) - b_[k]) > feas_tol(k)) return finish(problem, sol, QpStatus::Infeasible, changes);
        u_[q] = 0;
      }
      ++changes;
    }

    while (true) {
      // Most violated inactive inequality; ties resolve to the lowest index.
      int p = -1;
      Scalar worst = 0;
      for (int k = num_eq_; k < num_cons_; ++k) {
        if (is_active(k)) continue;
        const Scalar s = N_.col(k).dot(x_) - b_[k];
        if (s < -feas_tol(k) && (p < 0 || s < worst)) {
          worst = s;
          p = k;
        }
      }
      if (p < 0) return finish(problem, sol, QpStatus::Optimal, changes);

      Scalar u_plus = 0;
      while (true) {
        if (changes >= max_changes) return finish(problem, sol, QpStatus::MaxIterations, changes);
        const int q = active_count();
        d_.noalias() = J_.transpose() * N_.col(p);
        update_directions(q);

        // Dual (partial) step: first active inequality whose multiplier hits zero.
        Scalar t1 = std::numeric_limits<Scalar>::infinity();
        int drop = -1;
        for (int i = 0; i < q; ++i) {
          if (active_[i] < num_eq_) continue;
          if (r_[i] > eps_ && u_[i] / r_[i] < t1) {
            t1 = u_[i] / r_[i];
            drop = i;
          }
        }
        // Primal (full) step onto constraint p.
        Scalar t2 = std::numeric_limits<Scalar>::infinity();
        const Scalar zn = z_.dot(N_.col(p));
        if (z_.squaredNorm() > eps_ && zn > eps_) t2 = -(N_.col(p).dot(x_) - b_[p]) / zn;

        const Scalar t = std::min(t1, t2);
        if (!std::isfinite(static_cast<double>(t)))
          return finish(problem, sol, QpStatus::Infeasible, changes);

        if (!std::isfinite(static_cast<double>(t2))) {
          if (q > 0) u_.head(q) -= t * r_.head(q);
          u_plus += t;
          drop_constraint(drop);
          ++changes;
          continue;
        }

        x_ += t * z_;
        if (q > 0) u_.head(q) -= t * r_.head(q);
        u_plus += t;
        if (t2 <= t1) {
          u_[q] = u_plus;
          if (!add_constraint(p)) return finish(problem, sol, QpStatus::Infeasible, changes);
          ++changes;
          break;
        }
        drop_constraint(drop);
        ++changes;
      }
    }
  }

 private:
  int active_count() const { return static_cast<int>(active_.size()); }
  bool is_active(int k) const {
    return std::find(active_.begin(), active_.end(), k) != active_.end();
  }
  Scalar feas_tol(int k) const {
    return Scalar(1e-12) * std::max(Scalar(1), std::abs(b_[k]));
  }

  void expand(const QpProblem& problem) {
    const int n = problem.num_vars();
    const int m = problem.num_rows();
    origin_.clear();
    side_.clear();
    std::vector<int> eq_rows, ineq_rows;
    std::vector<BoundSide> ineq_sides;
    for (int i = 0; i < m; ++i) {
      const double lo = problem.c_l[i], hi = problem.c_u[i];
      if (lo > hi) throw std::invalid_argument("QpProblem has c_l > c_u");
      if (lo == hi && std::abs(lo) < kQpInfinity) {
        eq_rows.push_back(i);
        continue;
      }
      if (lo > -kQpInfinity) {
        ineq_rows.push_back(i);
        ineq_sides.push_back(BoundSide::Lower);
      }
      if (hi < kQpInfinity) {
        ineq_rows.push_back(i);
        ineq_sides.push_back(BoundSide::Upper);
      }
    }
    num_eq_ = static_cast<int>(eq_rows.size());
    num_cons_ = num_eq_ + static_cast<int>(ineq_rows.size());
    N_.resize(n, num_cons_);
    b_.resize(num_cons_);
    int k = 0;
    for (int row : eq_rows) {
      N_.col(k) = problem.G.row(row).transpose().template cast<Scalar>();
      b_[k] = static_cast<Scalar>(problem.c_l[row]);
      origin_.push_back(row);
      side_.push_back(BoundSide::Equal);
      ++k;
    }
    for (std::size_t i = 0; i < ineq_rows.size(); ++i, ++k) {
      const int row = ineq_rows[i];
      const Scalar sign = ineq_sides[i] == BoundSide::Lower ? Scalar(1) : Scalar(-1);
      N_.col(k) = sign * problem.G.row(row).transpose().template cast<Scalar>();
      b_[k] = sign * static_cast<Scalar>(ineq_sides[i] == BoundSide::Lower ? problem.c_l[row]
                                                                           : problem.c_u[row]);
      origin_.push_back(row);
      side_.push_back(ineq_sides[i]);
    }
  }

  void factorize(Matrix h) {
    const int n = static_cast<int>(h.rows());
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * std::max(Scalar(1), h.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("QpProblem Hessian is not symmetric");
    h = Scalar(0.5) * (h + h.transpose());
    Eigen::LLT<Matrix> llt(h);
    Scalar reg = Scalar(1e-10);
    while (llt.info() != Eigen::Success) {
      if (reg > Scalar(1e-2)) throw std::invalid_argument("QpProblem Hessian is not positive definite");
      log_warning("QP Hessian not positive definite; adding regularization");
      llt.compute(h + reg * Matrix::Identity(n, n));
      reg *= Scalar(10);
    }
    // J = L^-T
    Matrix lt = llt.matrixU();
    J_ = lt.template triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
    eps_ = std::numeric_limits<Scalar>::epsilon() * Scalar(100);
  }

  // z = J2 d2, r = R^-1 d1 for an active set of size q.
  void update_directions(int q) {
    const int n = static_cast<int>(J_.rows());
    z_.noalias() = J_.rightCols(n - q) * d_.tail(n - q);
    r_.setZero(n);
    if (q > 0)
      r_.head(q) = R_.topLeftCorner(q, q).template triangularView<Eigen::Upper>().solve(d_.head(q));
  }

  bool add_constraint(int k) {
    const int n = static_cast<int>(J_.rows());
    const int q = active_count();
    for (int j = n - 1; j > q; --j) {
      const Scalar a = d_[j - 1], b = d_[j];
      const Scalar h = std::hypot(a, b);
      if (h == Scalar(0)) continue;
      const Scalar c = a / h, s = b / h;
      d_[j - 1] = h;
      d_[j] = 0;
      for (int row = 0; row < n; ++row) {
        const Scalar t1 = J_(row, j - 1), t2 = J_(row, j);
        J_(row, j - 1) = c * t1 + s * t2;
        J_(row, j) = -s * t1 + c * t2;
      }
    }
    if (q >= n) return false;
    const Scalar scale = std::max(Scalar(1), N_.col(k).norm());
    if (std::abs(d_[q]) <= eps_ * scale) return false;
    R_.col(q).head(q + 1) = d_.head(q + 1);
    active_.push_back(k);
    return true;
  }

  void drop_constraint(int idx) {
    const int n = static_cast<int>(J_.rows());
    const int q = active_count();
    for (int i = idx; i < q - 1; ++i) {
      active_[i] = active_[i + 1];
      u_[i] = u_[i + 1];
      R_.col(i) = R_.col(i + 1);
    }
    active_.pop_back();
    u_[q - 1] = 0;
    R_.col(q - 1).setZero();
    const int qn = q - 1;
    // Restore triangular form; column i now has a subdiagonal entry at i+1.
    for (int j = idx; j < qn; ++j) {
      const Scalar a = R_(j, j), b = R_(j + 1, j);
      const Scalar h = std::hypot(a, b);
      if (h == Scalar(0)) continue;
      const Scalar c = a / h, s = b / h;
      for (int col = j; col < qn; ++col) {
        const Scalar t1 = R_(j, col), t2 = R_(j + 1, col);
        R_(j, col) = c * t1 + s * t2;
        R_(j + 1, col) = -s * t1 + c * t2;
      }
      R_(j + 1, j) = 0;
      for (int row = 0; row < n; ++row) {
        const Scalar t1 = J_(row, j), t2 = J_(row, j + 1);
        J_(row, j) = c * t1 + s * t2;
        J_(row, j + 1) = -s * t1 + c * t2;
      }
    }
  }

  QpSolution& finish(const QpProblem& problem, QpSolution& sol, QpStatus status, int changes) {
    sol.status = status;
    sol.iterations = changes;
    sol.x = x_.template cast<double>();
    sol.active_set.clear();
    for (int i = 0; i < active_count(); ++i) {
      const int k = active_[i];
      sol.multipliers[origin_[k]] += side_[k] == BoundSide::Upper ? -static_cast<double>(u_[i])
                                                                  : static_cast<double>(u_[i]);
      sol.active_set.push_back({origin_[k], side_[k]});
    }
    std::sort(sol.active_set.begin(), sol.active_set.end(),
              [](const ActiveConstraint& a, const ActiveConstraint& b) { return a.row < b.row; });
    sol.objective = 0.5 * sol.x.dot(problem.H * sol.x) + problem.g.dot(sol.x);
    return sol;
  }

  Matrix J_, R_, N_;
  Vector b_, x_, u_, d_, z_, r_;
  std::vector<int> active_, origin_;
  std::vector<BoundSide> side_;
  int num_eq_ = 0;
  int num_cons_ = 0;
  Scalar eps_ = 0;
};

using QpSolver = BasicQpSolver<double>;

inline QpSolution solve(const QpProblem& problem) {
  QpSolver solver;
  return solver.solve(problem);
}

// Plain-text fixture format:
//   qp <n> <m>
//   H  <n*n values, row major>
//   g  <n values>
//   G  <m*n values, row major>
//   cl <m values>
//   cu <m values>
// Infinite bounds are written as inf / -inf.

inline void write_qp(std::ostream& os, const QpProblem& p) {
  const auto flags = os.flags();
  os << std::setprecision(17);
  os << "qp " << p.num_vars() << ' ' << p.num_rows() << '\n';
  auto emit = [&os](const char* tag, const auto& mat) {
    os << tag;
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
      for (Eigen::Index j = 0; j < mat.cols(); ++j) os << ' ' << mat(i, j);
    os << '\n';
  };
  emit("H", p.H);
  emit("g", p.g);
  emit("G", p.G);
  emit("cl", p.c_l);
  emit("cu", p.c_u);
  os.flags(flags);
}

inline QpProblem read_qp(std::istream& is) {
  auto next = [&is]() {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("qp fixture truncated");
    return tok;
  };
  auto number = [&]() {
    const std::string tok = next();
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw std::runtime_error("qp fixture: bad number '" + tok + "'");
    return v;
  };
  auto expect = [&](const std::string& tag) {
    if (next() != tag) throw std::runtime_error("qp fixture: expected '" + tag + "'");
  };
  expect("qp");
  const int n = static_cast<int>(number());
  const int m = static_cast<int>(number());
  QpProblem p;
  p.H.resize(n, n);
  p.g.resize(n);
  p.G.resize(m, n);
  p.c_l.resize(m);
  p.c_u.resize(m);
  expect("H");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.H(i, j) = number();
  expect("g");
  for (int i = 0; i < n; ++i) p.g[i] = number();
  expect("G");
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p.G(i, j) = number();
  expect("cl");
  for (int i = 0; i < m; ++i) p.c_l[i] = number();
  expect("cu");
  for (int i = 0; i < m; ++i) p.c_u[i] = number();
  return p;
}

}  // namespace omnijump
