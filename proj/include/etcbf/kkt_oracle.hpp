#pragma once

// Brute-force reference for solve_qp: enumerate every active set.
//
// Shares only the problem definition with the active-set solver (same 1e-9
// regularization rule for singular Q). Each subset S is solved as an
// equality-constrained stationarity system; candidates must be primal and
// dual feasible. With the regularized Hessian positive definite, an empty
// candidate list means the feasible set is empty. Unboundedness of a singular
// problem is decided by enumerating the vertices of the recession polytope
// {z : A N z <= 0, |z_i| <= 1}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "etcbf/errors.hpp"
#include "etcbf/qp.hpp"

namespace etcbf {

namespace detail {

// min cost'z over {z : R z <= r}; the polytope is bounded, so enumerate vertices.
inline double enumerate_vertex_minimum(const Eigen::VectorXd& cost, const Eigen::MatrixXd& R,
                                       const Eigen::VectorXd& r) {
  const Eigen::Index k = cost.size();
  const Eigen::Index rows = R.rows();
  double best = std::numeric_limits<double>::infinity();
  // iterate k-combinations of rows
  std::vector<bool> mask(static_cast<size_t>(rows), false);
  std::fill(mask.begin(), mask.begin() + k, true);
  do {
    Eigen::MatrixXd S(k, k);
    Eigen::VectorXd s(k);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!mask[size_t(i)]) continue;
      S.row(row) = R.row(i);
      s(row) = r(i);
      ++row;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd z = lu.solve(s);
    if ((R * z - r).maxCoeff() > 1e-9) continue;
    best = std::min(best, cost.dot(z));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace detail

/// Exhaustive KKT enumeration; n_c <= 16.
inline QpSolution solve_kkt_oracle(const QuadraticProgram& qp, const QpTolerances& tol = {}) {
  detail::validate(qp);
  const Eigen::Index n = qp.num_variables();
  const Eigen::Index m = qp.num_constraints();
  detail::require(m <= 16, "solve_kkt_oracle: at most 16 constraints");
  const double scale = detail::problem_scale(qp);

  const detail::Curvature curv(qp.Q, tol.regularization);
  const Eigen::MatrixXd H = detail::effective_hessian(qp, curv, tol.regularization);

  QpSolution best;
  best.status = QpStatus::Infeasible;
  best.multipliers = Eigen::VectorXd::Zero(m);
  double best_reg_objective = std::numeric_limits<double>::infinity();

  for (unsigned subset = 0; subset < (1u << m); ++subset) {
    std::vector<int> active;
    for (int i = 0; i < int(m); ++i)
      if (subset & (1u << i)) active.push_back(i);
    const Eigen::Index w = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + w, n + w);
    Eigen::VectorXd rhs(n + w);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -qp.c;
    for (Eigen::Index j = 0; j < w; ++j) {
      K.block(0, n + j, n, 1) = qp.A.row(active[size_t(j)]).transpose();
      K.block(n + j, 0, 1, n) = qp.A.row(active[size_t(j)]);
      rhs(n + j) = qp.b(active[size_t(j)]);
    }
    const auto cod = K.completeOrthogonalDecomposition();
    Eigen::VectorXd z = cod.solve(rhs);
    z += cod.solve(rhs - K * z);
    if ((K * z - rhs).lpNorm<Eigen::Infinity>() > tol.stationarity * scale) continue;
    const Eigen::VectorXd v = z.head(n);
    const Eigen::VectorXd lambda = z.tail(w);
    if (m > 0 && (qp.A * v - qp.b).maxCoeff() > tol.primal * scale) continue;
    if (w > 0 && lambda.minCoeff() < -tol.dual * scale) continue;

    const double reg_objective = 0.5 * v.dot(H * v) + qp.c.dot(v);
    const bool better = reg_objective < best_reg_objective - 1e-9 ||
                        (reg_objective <= best_reg_objective + 1e-9 && best.status == QpStatus::Optimal &&
                         v.norm() < best.v_star.norm());
    if (!better) continue;
    best_reg_objective = std::min(best_reg_objective, reg_objective);
    best.status = QpStatus::Optimal;
    best.v_star = v;
    best.objective = qp.objective(v);
    best.multipliers.setZero();
    best.active_set.clear();
    for (Eigen::Index j = 0; j < w; ++j) {
      best.multipliers(active[size_t(j)]) = std::max(0.0, lambda(j));
      best.active_set.push_back(active[size_t(j)]);
    }
  }

  if (best.status == QpStatus::Optimal && curv.singular) {
    const Eigen::MatrixXd N = curv.null_space();
    const Eigen::Index k = N.cols();
    Eigen::MatrixXd R(m + 2 * k, k);
    Eigen::VectorXd r(m + 2 * k);
    if (m > 0) R.topRows(m) = qp.A * N;
    R.middleRows(m, k) = Eigen::MatrixXd::Identity(k, k);
    R.bottomRows(k) = -Eigen::MatrixXd::Identity(k, k);
    r.head(m).setZero();
    r.tail(2 * k).setOnes();
    const double descent = detail::enumerate_vertex_minimum(N.transpose() * qp.c, R, r);
    if (descent < -1e-9 * std::max(1.0, qp.c.norm())) {
      QpSolution unbounded;
      unbounded.status = QpStatus::Unbounded;
      unbounded.multipliers = Eigen::VectorXd::Zero(m);
      return unbounded;
    }
  }
  return best;
}

}  // namespace etcbf
