#include <random>

#include <gtest/gtest.h>

#include "etcbf/controllers.hpp"

using namespace etcbf;

namespace {

struct Benchmark : ::testing::Test {
  Benchmark() {
    auto [s, sp] = make_double_integrator();
    sys = std::move(s);
    spec = std::move(sp);
  }
  ControlAffineSystem sys;
  SafetySpec spec;
  GreedyWeights w;
};

// x' = A x + B u with V = |x|^2, h = |x - c|^2 - offset, on [-3,3]^2.
std::pair<ControlAffineSystem, SafetySpec> planar(const Mat& A, const Mat& B, const Vec& center, double offset) {
  const Box box(Eigen::Vector2d(-3, -3), Eigen::Vector2d(3, 3));
  return make_linear_quadratic(A, B, Mat::Identity(2, 2), Mat::Identity(2, 2), center, offset, box);
}

}  // namespace

TEST_F(Benchmark, GreedyQpRows) {
  const auto qp = build_greedy_qp(spec, sys, Eigen::Vector2d(1, 1), w);
  Mat A(3, 3);
  A << 3, 1, 0, -3, 0, 1, 0, 0, -1;
  EXPECT_LE((qp.A - A).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(qp.b(0), -6.0, 1e-12);
  EXPECT_NEAR(qp.b(1), 3.41, 1e-12);
  EXPECT_EQ(qp.b(2), -0.1);
  EXPECT_EQ(qp.Q, Mat(Eigen::Vector3d(1, 0, 0).asDiagonal()));
  EXPECT_EQ(qp.c, Vec(Eigen::Vector3d(0, -1, 0)));
}

TEST_F(Benchmark, GreedyQpFloorRowIsStructural) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> coord(-3, 3);
  for (int i = 0; i < 20; ++i) {
    const auto qp = build_greedy_qp(spec, sys, Eigen::Vector2d(coord(rng), coord(rng)), w);
    EXPECT_EQ(qp.A.row(2), Eigen::RowVector3d(0, 0, -1));
    EXPECT_EQ(qp.b(2), -w.eps_cbf);
  }
}

TEST(GreedyQpShape, TwoInputs) {
  auto [sys, spec] = planar(Mat::Zero(2, 2), Mat::Identity(2, 2), Eigen::Vector2d(0, 0), -1.0);
  GreedyWeights w;
  w.w1 = Mat::Identity(2, 2);
  const auto qp = build_greedy_qp(spec, sys, Eigen::Vector2d(1, 0.5), w);
  EXPECT_EQ(qp.num_variables(), 4);
  EXPECT_EQ(qp.Q.rows(), 4);
  EXPECT_EQ(qp.Q.bottomRightCorner(2, 2), Mat::Zero(2, 2));
}

TEST_F(Benchmark, GreedyControlAtBenchmarkPoint) {
  const auto d = greedy_control(spec, sys, Eigen::Vector2d(1, 1), w);
  ASSERT_TRUE(d.feasible);
  EXPECT_NEAR(d.u(0), -3.31 / 3, 1e-6);
  EXPECT_NEAR(d.rho1, -2.69, 1e-6);
  EXPECT_NEAR(d.rho2, 0.1, 1e-8);
}

// At [0,1]: b_clf = -2, L_gV = 2, b_cbf = 1.41, L_gh = 3. The CLF row gives
// rho1 = -2 - 2u and objective u^2/2 + 2u + 2, whose free minimum u = -2 breaks
// the CBF row; u stops at -1.31/3 with rho2 on its floor.
TEST_F(Benchmark, GreedyControlAtSecondPoint) {
  const auto d = greedy_control(spec, sys, Eigen::Vector2d(0, 1), w);
  ASSERT_TRUE(d.feasible);
  EXPECT_NEAR(d.u(0), -1.31 / 3, 1e-6);
  EXPECT_NEAR(d.rho1, -2 + 2 * 1.31 / 3, 1e-6);
  EXPECT_NEAR(d.rho2, 0.1, 1e-8);
}

// Without a reward on rho1 the input costs only effort; u = 0 keeps the CBF
// row satisfiable (b_cbf = 3.41 >= eps_cbf), so it is optimal.
TEST_F(Benchmark, GreedyWithoutSlackRewardChoosesZeroInput) {
  GreedyWeights lazy = w;
  lazy.w2 = 0.0;
  const auto d = greedy_control(spec, sys, Eigen::Vector2d(1, 1), lazy);
  ASSERT_TRUE(d.feasible);
  EXPECT_NEAR(d.u(0), 0.0, 1e-6);
}

TEST_F(Benchmark, GreedyInvariantsOverSampledStates) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> coord(-3, 3);
  int clf_active = 0;
  for (int i = 0; i < 300; ++i) {
    const Vec x = Eigen::Vector2d(coord(rng), coord(rng));
    const auto d = greedy_control(spec, sys, x, w);
    if (!d.feasible) continue;
    EXPECT_GE(safety_margin(spec, sys, x, d.u), w.eps_cbf - 1e-8);
    EXPECT_GE(d.rho2, w.eps_cbf - 1e-8);
    if (std::find(d.active_set.begin(), d.active_set.end(), 0) != d.active_set.end()) {
      ++clf_active;
      EXPECT_NEAR(stability_margin(spec, sys, x, d.u), d.rho1 + spec.gamma(spec.V(x)), 1e-8);
    }
  }
  EXPECT_GT(clf_active, 100);
}

TEST_F(Benchmark, TinyW3DoesNotMoveSolution) {
  GreedyWeights nudged = w;
  nudged.w3 = 1e-12;
  const Vec x = Eigen::Vector2d(1, 1);
  const auto a = greedy_control(spec, sys, x, w);
  const auto b = greedy_control(spec, sys, x, nudged);
  EXPECT_NEAR(a.u(0), b.u(0), 1e-9);
  EXPECT_NEAR(a.rho2, b.rho2, 1e-9);
}

TEST(GreedyWeightsValidation, RejectsBadWeights) {
  GreedyWeights w;
  w.w1 = Mat::Constant(1, 1, -1.0);
  EXPECT_THROW(w.validate(1), ContractViolation);
  w = GreedyWeights{};
  w.w2 = -1.0;
  EXPECT_THROW(w.validate(1), ContractViolation);
  w = GreedyWeights{};
  w.eps_cbf = 0.0;
  EXPECT_THROW(w.validate(1), ContractViolation);
  EXPECT_THROW(GreedyWeights{}.validate(2), ContractViolation);
}

// Greedy QP infeasible: L_gh = 0 and b_cbf < eps_cbf (h = x1^2 with no input effect).
TEST(GreedyInfeasible, ReportsWithoutThrowing) {
  const Box box(Eigen::Vector2d(-3, -3), Eigen::Vector2d(3, 3));
  Mat S = Mat::Zero(2, 2);
  S(0, 0) = 1.0;
  Mat B(2, 1);
  B << 0, 1;
  auto [sys, spec] = make_linear_quadratic(Mat::Zero(2, 2), B, Mat::Identity(2, 2), S, Eigen::Vector2d(0, 0), 0.0, box);
  const auto d = greedy_control(spec, sys, Eigen::Vector2d(0.2, 0.0), GreedyWeights{});
  EXPECT_FALSE(d.feasible);
  EXPECT_EQ(d.solve_status, QpStatus::Infeasible);
  EXPECT_EQ(d.u.size(), 0);
}

// Both rows tight: 3u - delta = -6 and -3u = 3.41 give u = -3.41/3.
TEST_F(Benchmark, BaselineAtBenchmarkPoint) {
  EXPECT_NEAR(baseline_qp_control(spec, sys, Eigen::Vector2d(1, 1), 2.0, 1.0)(0), -3.41 / 3, 1e-6);
}

TEST_F(Benchmark, BaselineZeroWhenBothBoundsNonnegative) {
  const Vec x = Eigen::Vector2d(0, 0);
  ASSERT_GE(clf_bound(spec, sys, x), 0.0);
  ASSERT_GE(cbf_bound(spec, sys, x), 0.0);
  EXPECT_NEAR(baseline_qp_control(spec, sys, x, 2.0, 1.0)(0), 0.0, 1e-9);
}

TEST_F(Benchmark, BaselineJointScalingInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> coord(-3, 3);
  for (int i = 0; i < 50; ++i) {
    const Vec x = Eigen::Vector2d(coord(rng), coord(rng));
    EXPECT_NEAR(baseline_qp_control(spec, sys, x, 2.0, 1.0)(0), baseline_qp_control(spec, sys, x, 8.0, 4.0)(0), 1e-7);
  }
}

// Margins 0.1: the CLF row needs u <= -6.1/3 while the CBF row needs u >= -3.31/3.
TEST_F(Benchmark, GuaranteedQpInfeasibleAtBenchmarkPoint) {
  const auto d = guaranteed_qp_control(spec, sys, Eigen::Vector2d(1, 1), w, 0.1, 0.1);
  EXPECT_FALSE(d.feasible);
  EXPECT_EQ(d.solve_status, QpStatus::Infeasible);
}

TEST_F(Benchmark, GuaranteedQpMatchesGreedyWhenFloorsInactive) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> coord(-3, 3);
  int compared = 0;
  for (int i = 0; i < 400; ++i) {
    const Vec x = Eigen::Vector2d(coord(rng), coord(rng));
    const auto g = greedy_control(spec, sys, x, w);
    if (!g.feasible || g.rho1 < 0.1 + 1e-6 || g.rho2 < 0.1) continue;
    const auto d = guaranteed_qp_control(spec, sys, x, w, 0.1, 0.1);
    ASSERT_TRUE(d.feasible);
    EXPECT_NEAR(d.u(0), g.u(0), 1e-7);
    EXPECT_NEAR(d.rho1, g.rho1, 1e-7);
    ++compared;
  }
  EXPECT_GT(compared, 10);
}

TEST_F(Benchmark, GuaranteedQpRejectsNonpositiveMargins) {
  EXPECT_THROW(guaranteed_qp_control(spec, sys, Eigen::Vector2d(1, 1), w, 0.0, 0.1), ContractViolation);
}

// f = 0, g = [0,1], V = |x|^2, h = |x|^2 + 1. At [0, 1.5]: L_gV = L_gh = 3,
// b_clf = -2.25, b_cbf = 3.25. The cost -6u pushes u up to the CLF bound (b_clf - 0.1)/3.
TEST(GreedyLp, RisesToClfBound) {
  Mat B(2, 1);
  B << 0, 1;
  auto [sys, spec] = planar(Mat::Zero(2, 2), B, Eigen::Vector2d(0, 0), -1.0);
  const Vec u = greedy_lp_control(spec, sys, Eigen::Vector2d(0, 1.5), 1.0, 1.0, 0.1, 0.1);
  EXPECT_NEAR(u(0), -2.35 / 3, 1e-7);
}

// Zero cost: the regularized solve returns the feasible u of least magnitude.
// At [0, -1.5] the rows read u >= 2.35/3 and u <= 3.15/3.
TEST(GreedyLp, ZeroCostGivesMinimumNorm) {
  Mat B(2, 1);
  B << 0, 1;
  auto [sys, spec] = planar(Mat::Zero(2, 2), B, Eigen::Vector2d(0, 0), -1.0);
  const Vec u = greedy_lp_control(spec, sys, Eigen::Vector2d(0, -1.5), 0.0, 0.0, 0.1, 0.1);
  EXPECT_NEAR(u(0), 2.35 / 3, 1e-7);
}

// f = -2x, g = [0,1], h = |x|^2 + 4 (center 0). At [1, 0] both normals vanish,
// b_clf = 3 and b_cbf = 1 exceed the margins, so u = 0.
TEST(GreedyLp, ZeroNormalsGiveZeroInput) {
  Mat B(2, 1);
  B << 0, 1;
  auto [sys, spec] = planar(-2.0 * Mat::Identity(2, 2), B, Eigen::Vector2d(0, 0), -4.0);
  const Vec u = greedy_lp_control(spec, sys, Eigen::Vector2d(1, 0), 1.0, 1.0, 0.1, 0.1);
  EXPECT_NEAR(u(0), 0.0, 1e-9);
}

// Same plant with h centered at [0,1]: L_gV = 0, L_gh = -2, and rewarding rho2
// alone leaves -L_gh u unbounded below.
TEST(GreedyLp, UnboundedAndInfeasibleOutcomes) {
  Mat B(2, 1);
  B << 0, 1;
  auto [sys, spec] = planar(-2.0 * Mat::Identity(2, 2), B, Eigen::Vector2d(0, 1), -4.0);
  EXPECT_THROW(greedy_lp_control(spec, sys, Eigen::Vector2d(1, 0), 0.0, 1.0, 0.1, 0.1), UnboundedObjective);

  auto [di, di_spec] = make_double_integrator();
  EXPECT_THROW(greedy_lp_control(di_spec, di, Eigen::Vector2d(1, 1), 1.0, 1.0, 0.1, 0.1), MarginFailure);
}

TEST(StateFeedback, Examples) {
  const Mat K = (Mat(1, 2) << -0.5, -1.0).finished();
  EXPECT_DOUBLE_EQ(state_feedback_control(K, Eigen::Vector2d(1, 1))(0), -1.5);
  EXPECT_EQ(state_feedback_control(K, Eigen::Vector2d(0, 0))(0), 0.0);
  EXPECT_DOUBLE_EQ(state_feedback_control(K, Eigen::Vector2d(2, 0))(0), -1.0);
  EXPECT_THROW(state_feedback_control(K, Eigen::Vector3d(1, 1, 1)), ContractViolation);
}
