#pragma once

// Dense two-phase simplex for   min c'x  s.t.  A x <= b,  x free.
//
// Only used internally by the QP solver: phase 1 supplies the feasible start
// point, phase 2 answers the recession-direction question that decides
// unboundedness when the Hessian is singular. Bland's rule throughout, so the
// method terminates on degenerate vertices.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "etcbf/errors.hpp"

namespace etcbf {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

class SimplexTableau {
 public:
  SimplexTableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) : n_(A.cols()), m_(A.rows()) {
    num_artificial_ = 0;
    for (Eigen::Index i = 0; i < m_; ++i)
      if (b(i) < 0) ++num_artificial_;
    // columns: x+ (n), x- (n), slack (m), artificial, rhs
    cols_ = 2 * n_ + m_ + num_artificial_;
    table_ = Eigen::MatrixXd::Zero(m_, cols_ + 1);
    basis_.assign(static_cast<size_t>(m_), 0);
    Eigen::Index next_art = 2 * n_ + m_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double sign = b(i) < 0 ? -1.0 : 1.0;
      table_.row(i).segment(0, n_) = sign * A.row(i);
      table_.row(i).segment(n_, n_) = -sign * A.row(i);
      table_(i, 2 * n_ + i) = sign;
      table_(i, cols_) = sign * b(i);
      if (b(i) < 0) {
        table_(i, next_art) = 1.0;
        basis_[static_cast<size_t>(i)] = next_art++;
      } else {
        basis_[static_cast<size_t>(i)] = 2 * n_ + i;
      }
    }
    scale_ = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (m_ > 0) scale_ = std::max(scale_, A.cwiseAbs().maxCoeff());
  }

  Eigen::Index first_artificial() const { return 2 * n_ + m_; }
  Eigen::Index num_columns() const { return cols_; }
  double scale() const { return scale_; }

  // Returns false if the objective is unbounded below on the allowed columns.
  bool minimize(const Eigen::VectorXd& cost, Eigen::Index allowed_columns) {
    const double tol = 1e-11 * scale_;
    const int cap = 50 * static_cast<int>(cols_ + m_ + 10);
    for (int iter = 0; iter < cap; ++iter) {
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < allowed_columns; ++j) {
        double reduced = cost(j);
        for (Eigen::Index i = 0; i < m_; ++i) reduced -= cost(basis_[size_t(i)]) * table_(i, j);
        if (reduced < -tol) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return true;
      Eigen::Index leaving = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = table_(i, entering);
        if (a <= tol) continue;
        const double ratio = table_(i, cols_) / a;
        if (ratio < best - tol ||
            (std::abs(ratio - best) <= tol && leaving >= 0 && basis_[size_t(i)] < basis_[size_t(leaving)])) {
          best = ratio;
          leaving = i;
        }
      }
      if (leaving < 0) return false;
      pivot(leaving, entering);
    }
    throw NumericalFailure("simplex iteration cap reached");
  }

  double objective(const Eigen::VectorXd& cost) const {
    double value = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) value += cost(basis_[size_t(i)]) * table_(i, cols_);
    return value;
  }

  // Pivot basic artificials out where the row still has a structural entry.
  void expel_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[size_t(i)] < first_artificial()) continue;
      for (Eigen::Index j = 0; j < first_artificial(); ++j) {
        if (std::abs(table_(i, j)) > 1e-9 * scale_) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(cols_);
    for (Eigen::Index i = 0; i < m_; ++i) full(basis_[size_t(i)]) = table_(i, cols_);
    return full.segment(0, n_) - full.segment(n_, n_);
  }

 private:
  void pivot(Eigen::Index row, Eigen::Index col) {
    table_.row(row) /= table_(row, col);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double factor = table_(i, col);
      if (factor != 0.0) table_.row(i) -= factor * table_.row(row);
    }
    basis_[size_t(row)] = col;
  }

  Eigen::Index n_, m_, cols_ = 0, num_artificial_ = 0;
  Eigen::MatrixXd table_;
  std::vector<Eigen::Index> basis_;
  double scale_ = 1.0;
};

}  // namespace detail

/// Solves min c'x s.t. A x <= b with x unrestricted in sign.
inline LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  detail::require(A.cols() == c.size() && A.rows() == b.size(), "solve_lp: dimension mismatch");
  const Eigen::Index n = c.size();
  LpResult result;
  if (A.rows() == 0) {
    if (c.cwiseAbs().maxCoeff() > 0.0) {
      result.status = LpStatus::Unbounded;
      return result;
    }
    result.status = LpStatus::Optimal;
    result.x = Eigen::VectorXd::Zero(n);
    result.objective = 0.0;
    return result;
  }

  detail::SimplexTableau tableau(A, b);
  const Eigen::Index total = tableau.num_columns();
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total);
  phase1.tail(total - tableau.first_artificial()).setOnes();
  tableau.minimize(phase1, total);
  if (tableau.objective(phase1) > 1e-9 * tableau.scale()) {
    result.status = LpStatus::Infeasible;
    return result;
  }
  tableau.expel_artificials();

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(total);
  phase2.segment(0, n) = c;
  phase2.segment(n, n) = -c;
  if (!tableau.minimize(phase2, tableau.first_artificial())) {
    result.status = LpStatus::Unbounded;
    return result;
  }
  result.status = LpStatus::Optimal;
  result.x = tableau.primal();
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace etcbf
