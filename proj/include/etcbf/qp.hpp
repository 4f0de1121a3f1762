#pragma once

/**
 * @file
 * @brief Small dense convex QP solver.
 *
 * Solves   min 1/2 v'Qv + c'v   s.t.   A v <= b
 *
 * with a primal active-set method. A simplex phase 1 supplies the feasible
 * starting point. When Q is singular the problem is first checked for a
 * recession direction (Qd = 0, Ad <= 0, c'd < 0), then solved with a fixed
 * 1e-9 diagonal regularization so the returned optimizer is unique.
 */

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "etcbf/errors.hpp"
#include "etcbf/lp.hpp"

namespace etcbf {

struct QuadraticProgram {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  Eigen::Index num_variables() const { return c.size(); }
  Eigen::Index num_constraints() const { return b.size(); }

  double objective(const Eigen::VectorXd& v) const { return 0.5 * v.dot(Q * v) + c.dot(v); }
};

enum class QpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal:
      return "Optimal";
    case QpStatus::Infeasible:
      return "Infeasible";
    case QpStatus::Unbounded:
      return "Unbounded";
  }
  return "?";
}

struct QpSolution {
  Eigen::VectorXd v_star;
  double objective = 0.0;
  std::vector<int> active_set;
  /// Multipliers indexed like the constraints; zero off the active set.
  Eigen::VectorXd multipliers;
  QpStatus status = QpStatus::Infeasible;
};

struct QpTolerances {
  double primal = 1e-8;
  double dual = 1e-8;
  double stationarity = 1e-7;
  double regularization = 1e-9;
};

namespace detail {

inline void validate(const QuadraticProgram& qp) {
  const Eigen::Index n = qp.c.size();
  require(n >= 1, "QP needs at least one variable");
  require(qp.Q.rows() == n && qp.Q.cols() == n, "QP: Q must be n_v x n_v");
  require(qp.A.rows() == qp.b.size(), "QP: A and b disagree on n_c");
  require(qp.A.rows() == 0 || qp.A.cols() == n, "QP: A must have n_v columns");
  require(qp.Q.allFinite() && qp.c.allFinite() && qp.A.allFinite() && qp.b.allFinite(),
          "QP: non-finite data");
  require(((qp.Q - qp.Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12), "QP: Q is not symmetric");
}

// Eigen-decomposition of Q; shared by the solver and the oracle so both agree
// on which problems count as degenerate.
struct Curvature {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  bool singular = false;
  double flat_threshold = 0.0;

  explicit Curvature(const Eigen::MatrixXd& Q, double regularization) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
    eigenvalues = eig.eigenvalues();
    eigenvectors = eig.eigenvectors();
    require(eigenvalues.minCoeff() >= -1e-10, "QP: Q is not positive semidefinite");
    flat_threshold = regularization * std::max(1.0, eigenvalues.cwiseAbs().maxCoeff());
    singular = eigenvalues.minCoeff() < flat_threshold;
  }

  Eigen::MatrixXd null_space() const {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
      if (eigenvalues(i) < flat_threshold) idx.push_back(i);
    Eigen::MatrixXd N(eigenvectors.rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) N.col(Eigen::Index(k)) = eigenvectors.col(idx[k]);
    return N;
  }
};

inline Eigen::MatrixXd effective_hessian(const QuadraticProgram& qp, const Curvature& curv, double reg) {
  Eigen::MatrixXd H = qp.Q;
  if (curv.singular) H.diagonal().array() += reg;
  return H;
}

inline double problem_scale(const QuadraticProgram& qp) {
  double s = 1.0;
  if (qp.b.size() > 0) s = std::max(s, qp.b.cwiseAbs().maxCoeff());
  return s;
}

}  // namespace detail

/// Solves the QP. Throws ContractViolation on malformed input and
/// NumericalFailure if the active-set iteration cap 100*(n_v+n_c) is hit.
inline QpSolution solve_qp(const QuadraticProgram& qp, const QpTolerances& tol = {}) {
  detail::validate(qp);
  const Eigen::Index n = qp.num_variables();
  const Eigen::Index m = qp.num_constraints();
  const double scale = detail::problem_scale(qp);

  QpSolution sol;
  sol.multipliers = Eigen::VectorXd::Zero(m);

  const detail::Curvature curv(qp.Q, tol.regularization);
  const Eigen::MatrixXd H = detail::effective_hessian(qp, curv, tol.regularization);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (m > 0 && (qp.A * x - qp.b).maxCoeff() > tol.primal * scale) {
    const LpResult phase1 = solve_lp(Eigen::VectorXd::Zero(n), qp.A, qp.b);
    if (phase1.status == LpStatus::Infeasible) {
      sol.status = QpStatus::Infeasible;
      return sol;
    }
    x = phase1.x;
  }

  if (curv.singular) {
    // recession direction in the null space of Q, searched over the unit box
    const Eigen::MatrixXd N = curv.null_space();
    const Eigen::Index k = N.cols();
    Eigen::MatrixXd R(m + 2 * k, k);
    Eigen::VectorXd r(m + 2 * k);
    if (m > 0) R.topRows(m) = qp.A * N;
    R.middleRows(m, k) = Eigen::MatrixXd::Identity(k, k);
    R.bottomRows(k) = -Eigen::MatrixXd::Identity(k, k);
    r.head(m).setZero();
    r.tail(2 * k).setOnes();
    const Eigen::VectorXd cost = N.transpose() * qp.c;
    const LpResult rec = solve_lp(cost, R, r);
    if (rec.status == LpStatus::Optimal && rec.objective < -1e-9 * std::max(1.0, qp.c.norm())) {
      sol.status = QpStatus::Unbounded;
      return sol;
    }
  }

  std::vector<int> working;
  Eigen::VectorXd lambda;
  const int cap = 100 * static_cast<int>(n + m);
  bool converged = false;
  bool at_subspace_minimum = false;  // set after a full unblocked step
  for (int iter = 0; iter < cap; ++iter) {
    const Eigen::Index w = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + w, n + w);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + w);
    K.topLeftCorner(n, n) = H;
    for (Eigen::Index j = 0; j < w; ++j) {
      K.block(0, n + j, n, 1) = qp.A.row(working[size_t(j)]).transpose();
      K.block(n + j, 0, 1, n) = qp.A.row(working[size_t(j)]);
    }
    rhs.head(n) = -(H * x + qp.c);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) throw NumericalFailure("solve_qp: singular working-set KKT system");
    const Eigen::VectorXd sol_kkt = lu.solve(rhs);
    const Eigen::VectorXd p = sol_kkt.head(n);
    lambda = sol_kkt.tail(w);

    if (at_subspace_minimum || p.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      at_subspace_minimum = false;
      Eigen::Index most_negative = -1;
      double min_lambda = -1e-12 * scale;
      for (Eigen::Index j = 0; j < w; ++j) {
        if (lambda(j) < min_lambda) {
          min_lambda = lambda(j);
          most_negative = j;
        }
      }
      if (most_negative < 0) {
        converged = true;
        break;
      }
      working.erase(working.begin() + most_negative);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), int(i)) != working.end()) continue;
      const double ap = qp.A.row(i).dot(p);
      if (ap <= 1e-14 * std::max(1.0, p.lpNorm<Eigen::Infinity>())) continue;
      const double step = std::max(0.0, (qp.b(i) - qp.A.row(i).dot(x)) / ap);
      if (step < alpha) {
        alpha = step;
        blocking = int(i);
      }
    }
    x += alpha * p;
    if (blocking >= 0)
      working.push_back(blocking);
    else
      at_subspace_minimum = true;
  }
  if (!converged) throw NumericalFailure("solve_qp: active-set iteration cap reached");

  // polish: solve the final working-set KKT system directly instead of
  // keeping the accumulated iterate
  {
    const Eigen::Index w = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + w, n + w);
    Eigen::VectorXd rhs(n + w);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -qp.c;
    for (Eigen::Index j = 0; j < w; ++j) {
      K.block(0, n + j, n, 1) = qp.A.row(working[size_t(j)]).transpose();
      K.block(n + j, 0, 1, n) = qp.A.row(working[size_t(j)]);
      rhs(n + j) = qp.b(working[size_t(j)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    Eigen::VectorXd z = lu.solve(rhs);
    z += lu.solve(rhs - K * z);
    const Eigen::VectorXd polished = z.head(n);
    if (polished.allFinite() && (m == 0 || (qp.A * polished - qp.b).maxCoeff() <= tol.primal * scale)) {
      x = polished;
      lambda = z.tail(w);
    }
  }

  sol.status = QpStatus::Optimal;
  sol.v_star = x;
  sol.objective = qp.objective(x);
  for (size_t j = 0; j < working.size(); ++j) sol.multipliers(working[j]) = std::max(0.0, lambda(Eigen::Index(j)));
  sol.active_set = working;
  std::sort(sol.active_set.begin(), sol.active_set.end());
  return sol;
}

/// Max-norm of Q v + c + A' lambda, the stationarity residual of a solution.
inline double stationarity_residual(const QuadraticProgram& qp, const QpSolution& sol) {
  Eigen::VectorXd r = qp.Q * sol.v_star + qp.c;
  if (qp.num_constraints() > 0) r += qp.A.transpose() * sol.multipliers;
  return r.lpNorm<Eigen::Infinity>();
}

inline double max_violation(const QuadraticProgram& qp, const Eigen::VectorXd& v) {
  if (qp.num_constraints() == 0) return 0.0;
  return std::max(0.0, (qp.A * v - qp.b).maxCoeff());
}

}  // namespace etcbf
