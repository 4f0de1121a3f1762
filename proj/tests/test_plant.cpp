#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "etcbf/plant.hpp"

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
  Vec u(double v) const { return Vec::Constant(1, v); }
};

}  // namespace

// grad V = [2x1 + x2, x1 + 2x2] = [3, 3] at [1,1], f = [1, 0], g = [0, 1]
TEST_F(Benchmark, LieDerivativesOfV) {
  const auto l = lie_derivatives(spec.V, sys, Eigen::Vector2d(1, 1));
  EXPECT_DOUBLE_EQ(l.Lf, 3.0);
  EXPECT_DOUBLE_EQ(l.Lg(0), 3.0);
}

// grad h = [2(x1 - 0.5), 2(x2 + 0.5)] = [1, 3] at [1,1]
TEST_F(Benchmark, LieDerivativesOfH) {
  const auto l = lie_derivatives(spec.h, sys, Eigen::Vector2d(1, 1));
  EXPECT_DOUBLE_EQ(l.Lf, 1.0);
  EXPECT_DOUBLE_EQ(l.Lg(0), 3.0);
}

TEST_F(Benchmark, ZeroGradientAnnihilates) {
  const auto l = lie_derivatives(spec.V, sys, Eigen::Vector2d(0, 0));
  EXPECT_EQ(l.Lf, 0.0);
  EXPECT_EQ(l.Lg(0), 0.0);
}

TEST_F(Benchmark, OutsideDomainRaises) {
  EXPECT_THROW(lie_derivatives(spec.V, sys, Eigen::Vector2d(3.5, 0)), DomainViolation);
  EXPECT_THROW(clf_bound(spec, sys, Eigen::Vector2d(0, -4)), DomainViolation);
}

TEST_F(Benchmark, ClfBound) {
  EXPECT_NEAR(clf_bound(spec, sys, Eigen::Vector2d(1, 1)), -6.0, 1e-12);
  EXPECT_NEAR(clf_bound(spec, sys, Eigen::Vector2d(0, 1)), -2.0, 1e-12);
  EXPECT_EQ(clf_bound(spec, sys, Eigen::Vector2d(0, 0)), 0.0);
}

TEST_F(Benchmark, CbfBound) {
  EXPECT_NEAR(cbf_bound(spec, sys, Eigen::Vector2d(1, 1)), 3.41, 1e-12);
  EXPECT_NEAR(cbf_bound(spec, sys, Eigen::Vector2d(0.5, -0.2)), 0.0, 1e-12);
}

TEST_F(Benchmark, StabilityMargin) {
  EXPECT_NEAR(stability_margin(spec, sys, Eigen::Vector2d(1, 1), u(-3.31 / 3)), 0.31, 1e-12);
  EXPECT_EQ(stability_margin(spec, sys, Eigen::Vector2d(0, 0), u(0)), 0.0);
  EXPECT_NEAR(stability_margin(spec, sys, Eigen::Vector2d(1, 1), u(-1)), 0.0, 1e-12);
}

TEST_F(Benchmark, SafetyMargin) {
  const Vec x = Eigen::Vector2d(1, 1);
  EXPECT_NEAR(safety_margin(spec, sys, x, u(-3.31 / 3)), 0.1, 1e-12);
  EXPECT_EQ(safety_margin(spec, sys, x, u(0)), cbf_bound(spec, sys, x));
  EXPECT_NEAR(safety_margin(spec, sys, x, u(-2)), -2.59, 1e-12);
}

TEST_F(Benchmark, FieldValuesAndDynamics) {
  EXPECT_DOUBLE_EQ(spec.V(Eigen::Vector2d(1, 1)), 3.0);
  EXPECT_NEAR(spec.h(Eigen::Vector2d(0.5, -0.5)), -0.09, 1e-15);
  EXPECT_EQ(sys.f(Eigen::Vector2d(2, 0)), Vec(Eigen::Vector2d(0, 0)));
  EXPECT_EQ(sys.g(Eigen::Vector2d(-1, 2)), Mat(Eigen::Vector2d(0, 1)));
  EXPECT_EQ(sys.domain.lower, Vec(Eigen::Vector2d(-3, -3)));
  EXPECT_EQ(sys.domain.upper, Vec(Eigen::Vector2d(3, 3)));
}

TEST_F(Benchmark, GradientsPassFiniteDifferenceAuditAt1000Points) {
  EXPECT_LE(gradient_check_ratio(spec.V, sys.domain, 1000, 1), 1.0);
  EXPECT_LE(gradient_check_ratio(spec.h, sys.domain, 1000, 2), 1.0);
}

TEST_F(Benchmark, MarginsAreAffineInInput) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-3, 3), in(-5, 5), mix(0, 1);
  for (int i = 0; i < 500; ++i) {
    const Vec x = Eigen::Vector2d(coord(rng), coord(rng));
    const double u1 = in(rng), u2 = in(rng), a = mix(rng);
    const Vec um = u(a * u1 + (1 - a) * u2);
    EXPECT_NEAR(stability_margin(spec, sys, x, um),
                a * stability_margin(spec, sys, x, u(u1)) + (1 - a) * stability_margin(spec, sys, x, u(u2)), 1e-12);
    EXPECT_NEAR(safety_margin(spec, sys, x, um),
                a * safety_margin(spec, sys, x, u(u1)) + (1 - a) * safety_margin(spec, sys, x, u(u2)), 1e-12);
    const auto lh = lie_derivatives(spec.h, sys, x);
    EXPECT_NEAR(safety_margin(spec, sys, x, u(u1)) - cbf_bound(spec, sys, x), lh.Lg(0) * u1, 1e-12);
  }
}

TEST_F(Benchmark, LyapunovCandidateIsPositiveDefinite) {
  EXPECT_TRUE(check_positive_definite(spec.V, sys.domain, Eigen::Vector2d(0, 0)));
}

TEST(ScalarFieldCheck, WrongGradientIsRejected) {
  const Box box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1));
  auto value = [](const Vec& x) { return x.squaredNorm(); };
  EXPECT_NO_THROW(make_checked_field(value, [](const Vec& x) -> Vec { return 2 * x; }, box));
  EXPECT_THROW(make_checked_field(value, [](const Vec& x) -> Vec { return x; }, box), ContractViolation);
}

TEST(ClassKappaMaps, Validation) {
  EXPECT_EQ(ClassKappa::identity()(2.5), 2.5);
  EXPECT_EQ(ClassKappa::linear(3.0)(2.0), 6.0);
  EXPECT_THROW(ClassKappa::linear(0.0), ContractViolation);
  EXPECT_NO_THROW(ClassKappa::custom([](double r) { return r * r * r + r; }));
  EXPECT_THROW(ClassKappa::custom([](double r) { return std::sin(r); }), ContractViolation);
  EXPECT_THROW(ClassKappa::custom([](double r) { return r + 1.0; }), ContractViolation);
}

TEST(LinearQuadraticPlant, ReproducesDoubleIntegrator) {
  Mat A(2, 2), B(2, 1), P(2, 2);
  A << 0, 1, 0, 0;
  B << 0, 1;
  P << 1, 0.5, 0.5, 1;
  const Box box(Eigen::Vector2d(-3, -3), Eigen::Vector2d(3, 3));
  auto [sys, spec] = make_linear_quadratic(A, B, P, Mat::Identity(2, 2), Eigen::Vector2d(0.5, -0.5), 0.09, box);
  auto [ref_sys, ref_spec] = make_double_integrator();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> coord(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const Vec x = Eigen::Vector2d(coord(rng), coord(rng));
    const Vec u = Vec::Constant(1, coord(rng));
    EXPECT_NEAR(stability_margin(spec, sys, x, u), stability_margin(ref_spec, ref_sys, x, u), 1e-12);
    EXPECT_NEAR(safety_margin(spec, sys, x, u), safety_margin(ref_spec, ref_sys, x, u), 1e-12);
  }
}

TEST(BoxType, RejectsInvertedEdges) {
  EXPECT_THROW(Box(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), ContractViolation);
  const Box b(Eigen::Vector2d(-1, -2), Eigen::Vector2d(1, 2));
  EXPECT_TRUE(b.contains(Eigen::Vector2d(1, -2)));
  EXPECT_FALSE(b.contains(Eigen::Vector2d(1.0001, 0)));
}
