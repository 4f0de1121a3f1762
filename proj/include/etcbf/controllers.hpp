#pragma once

// Controller optimization problems: the greedy slack-maximizing QP, the
// classic relaxed CLF-CBF QP, the margin-enforcing variant, its LP special
// case, and a plain linear state feedback.

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "etcbf/errors.hpp"
#include "etcbf/plant.hpp"
#include "etcbf/qp.hpp"

namespace etcbf {

/// Objective weights of the greedy QP: Q = blockdiag(w1, 0, 0), c = [0, -w2, -w3].
struct GreedyWeights {
  Mat w1 = Mat::Identity(1, 1);
  double w2 = 1.0;
  double w3 = 0.0;
  double eps_cbf = 0.1;

  void validate(int m) const {
    detail::require(w1.rows() == m && w1.cols() == m, "GreedyWeights: w1 must be m x m");
    detail::require((w1 - w1.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "GreedyWeights: w1 not symmetric");
    detail::require(Eigen::LLT<Mat>(w1).info() == Eigen::Success, "GreedyWeights: w1 not positive definite");
    detail::require(w2 >= 0.0 && w3 >= 0.0, "GreedyWeights: w2, w3 must be nonnegative");
    detail::require(eps_cbf > 0.0, "GreedyWeights: eps_cbf must be positive");
  }
};

struct ControlDecision {
  Vec u;  ///< empty when infeasible
  double rho1 = 0.0;
  double rho2 = 0.0;
  bool feasible = false;
  QpStatus solve_status = QpStatus::Infeasible;
  std::vector<int> active_set;
};

/// Decision vector [u, rho1, rho2]; rows CLF, CBF, rho2 floor.
inline QuadraticProgram build_greedy_qp(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x,
                                        const GreedyWeights& w) {
  w.validate(sys.m);
  const int m = sys.m;
  const auto lv = lie_derivatives(spec.V, sys, x);
  const auto lh = lie_derivatives(spec.h, sys, x);
  const double b_clf = -lv.Lf - spec.gamma(spec.V(x));
  const double b_cbf = lh.Lf + spec.alpha(spec.h(x));

  QuadraticProgram qp;
  qp.Q = Mat::Zero(m + 2, m + 2);
  qp.Q.topLeftCorner(m, m) = w.w1;
  qp.c = Vec::Zero(m + 2);
  qp.c(m) = -w.w2;
  qp.c(m + 1) = -w.w3;
  qp.A = Mat::Zero(3, m + 2);
  qp.A.block(0, 0, 1, m) = lv.Lg.transpose();
  qp.A(0, m) = 1.0;
  qp.A.block(1, 0, 1, m) = -lh.Lg.transpose();
  qp.A(1, m + 1) = 1.0;
  qp.A(2, m + 1) = -1.0;
  qp.b = Eigen::Vector3d(b_clf, b_cbf, -w.eps_cbf);
  return qp;
}

namespace detail {

inline ControlDecision decision_from(const QpSolution& sol, int m) {
  ControlDecision d;
  d.solve_status = sol.status;
  if (sol.status != QpStatus::Optimal) return d;
  d.feasible = true;
  d.u = sol.v_star.head(m);
  d.rho1 = sol.v_star(m);
  d.rho2 = sol.v_star(m + 1);
  d.active_set = sol.active_set;
  return d;
}

}  // namespace detail

/// Greedy control input u_k. Infeasibility is reported via feasible=false;
/// NumericalFailure propagates.
inline ControlDecision greedy_control(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x,
                                      const GreedyWeights& w) {
  return detail::decision_from(solve_qp(build_greedy_qp(spec, sys, x, w)), sys.m);
}

/// Greedy QP plus the floors rho1 >= eps1 and rho2 >= eps2.
inline ControlDecision guaranteed_qp_control(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x,
                                             const GreedyWeights& w, double eps1, double eps2) {
  detail::require(eps1 > 0.0 && eps2 > 0.0, "guaranteed_qp_control: margins must be positive");
  QuadraticProgram qp = build_greedy_qp(spec, sys, x, w);
  const int m = sys.m;
  qp.A.conservativeResize(4, Eigen::NoChange);
  qp.b.conservativeResize(4);
  // row 2 becomes the rho1 floor, row 3 the rho2 floor
  qp.A.row(2).setZero();
  qp.A(2, m) = -1.0;
  qp.b(2) = -eps1;
  qp.A.row(3).setZero();
  qp.A(3, m + 1) = -1.0;
  qp.b(3) = -eps2;
  return detail::decision_from(solve_qp(qp), m);
}

/// Relaxed CLF-CBF QP over [u, delta]: min 1/2 u'Hu + p delta^2,
/// L_gV u - delta <= b_clf, -L_gh u <= b_cbf.
inline Vec baseline_qp_control(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x, const Mat& H,
                               double p) {
  const int m = sys.m;
  detail::require(H.rows() == m && H.cols() == m, "baseline_qp_control: H must be m x m");
  detail::require(p > 0.0, "baseline_qp_control: p must be positive");
  const auto lv = lie_derivatives(spec.V, sys, x);
  const auto lh = lie_derivatives(spec.h, sys, x);

  QuadraticProgram qp;
  qp.Q = Mat::Zero(m + 1, m + 1);
  qp.Q.topLeftCorner(m, m) = H;
  qp.Q(m, m) = 2.0 * p;
  qp.c = Vec::Zero(m + 1);
  qp.A = Mat::Zero(2, m + 1);
  qp.A.block(0, 0, 1, m) = lv.Lg.transpose();
  qp.A(0, m) = -1.0;
  qp.A.block(1, 0, 1, m) = -lh.Lg.transpose();
  qp.b = Eigen::Vector2d(-lv.Lf - spec.gamma(spec.V(x)), lh.Lf + spec.alpha(spec.h(x)));
  const QpSolution sol = solve_qp(qp);
  if (sol.status != QpStatus::Optimal) throw MarginFailure("baseline CLF-CBF QP infeasible");
  return sol.v_star.head(m);
}

inline Vec baseline_qp_control(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x, double H,
                               double p) {
  return baseline_qp_control(spec, sys, x, Mat::Identity(sys.m, sys.m) * H, p);
}

/// Input-unpenalized special case: min (-w2 L_gV - w3 L_gh) u subject to the
/// CLF and CBF rows tightened by eps1, eps2.
inline Vec greedy_lp_control(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x, double w2,
                             double w3, double eps1, double eps2) {
  detail::require(w2 >= 0.0 && w3 >= 0.0, "greedy_lp_control: weights must be nonnegative");
  const int m = sys.m;
  const auto lv = lie_derivatives(spec.V, sys, x);
  const auto lh = lie_derivatives(spec.h, sys, x);
  QuadraticProgram qp;
  qp.Q = Mat::Zero(m, m);
  qp.c = -w2 * lv.Lg - w3 * lh.Lg;
  qp.A = Mat(2, m);
  qp.A.row(0) = lv.Lg.transpose();
  qp.A.row(1) = -lh.Lg.transpose();
  qp.b = Eigen::Vector2d(-lv.Lf - spec.gamma(spec.V(x)) - eps1, lh.Lf + spec.alpha(spec.h(x)) - eps2);
  const QpSolution sol = solve_qp(qp);
  if (sol.status == QpStatus::Unbounded) throw UnboundedObjective("greedy LP is unbounded below");
  if (sol.status == QpStatus::Infeasible) throw MarginFailure("greedy LP margins cannot be met");
  return sol.v_star;
}

inline Vec state_feedback_control(const Mat& K, const Vec& x) {
  detail::require(K.cols() == x.size(), "state_feedback_control: K has wrong column count");
  return K * x;
}

}  // namespace etcbf
