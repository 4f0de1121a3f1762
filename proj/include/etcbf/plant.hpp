#pragma once

/**
 * @file
 * @brief Control-affine plants, CLF/CBF scalar fields and the Lie-derivative
 * quantities every controller and trigger is built from.
 *
 * For a plant  xdot = f(x) + g(x) u  with CLF V and CBF h:
 *
 *   b_clf(x) = -L_fV(x) - gamma(V(x))
 *   b_cbf(x) =  L_fh(x) + alpha(h(x))
 *   p_k(x)   = -L_fV(x) - L_gV(x) u_k      (Vdot = -p_k under held u_k)
 *   q_k(x)   =  L_gh(x) u_k + b_cbf(x)
 */

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "etcbf/errors.hpp"

namespace etcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Axis-aligned box; must have finite edges.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    detail::require(lower.size() == upper.size(), "Box: edge vectors differ in length");
    detail::require(lower.allFinite() && upper.allFinite(), "Box: edges must be finite");
    detail::require((lower.array() <= upper.array()).all(), "Box: lower edge above upper edge");
  }

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Vec& x) const {
    return x.size() == dim() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
  Vec center() const { return 0.5 * (lower + upper); }
};

struct ControlAffineSystem {
  int n = 0;
  int m = 0;
  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> g;
  Box domain;

  Vec dynamics(const Vec& x, const Vec& u) const { return f(x) + g(x) * u; }

  void require_in_domain(const Vec& x) const {
    if (x.size() != n) throw ContractViolation("state has wrong dimension");
    if (!domain.contains(x)) throw DomainViolation("state outside the domain box");
  }
};

/// Scalar function with an analytic gradient (returned as a column vector).
struct ScalarField {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;

  double operator()(const Vec& x) const { return value(x); }
};

/// Largest violation of |grad - fd| <= max(abs_tol, rel_tol * |grad|) at
/// `count` uniformly random points of the box, normalized so that <= 1 passes.
inline double gradient_check_ratio(const ScalarField& field, const Box& box, int count, unsigned seed,
                                   double abs_tol = 1e-5, double rel_tol = 1e-4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  const Eigen::Index n = box.dim();
  for (int s = 0; s < count; ++s) {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = box.lower(i) + unit(rng) * (box.upper(i) - box.lower(i));
    const Vec grad = field.gradient(x);
    Vec fd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double step = 1e-6 * std::max(1.0, std::abs(x(i)));
      Vec hi = x, lo = x;
      hi(i) += step;
      lo(i) -= step;
      fd(i) = (field.value(hi) - field.value(lo)) / (2.0 * step);
    }
    const double allowed = std::max(abs_tol, rel_tol * grad.norm());
    worst = std::max(worst, (grad - fd).lpNorm<Eigen::Infinity>() / allowed);
  }
  return worst;
}

/// Builds a field and rejects it if the gradient disagrees with central
/// differences at 100 random domain points.
inline ScalarField make_checked_field(std::function<double(const Vec&)> value, std::function<Vec(const Vec&)> gradient,
                                      const Box& domain, unsigned seed = 7) {
  ScalarField field{std::move(value), std::move(gradient)};
  if (gradient_check_ratio(field, domain, 100, seed) > 1.0)
    throw ContractViolation("ScalarField: analytic gradient disagrees with finite differences");
  return field;
}

/// Class-K shaping map (gamma, alpha). Negative arguments (h < 0 outside the
/// safe set) are passed through the same formula.
class ClassKappa {
 public:
  enum class Kind { Identity, LinearGain, Custom };

  static ClassKappa identity() { return ClassKappa(Kind::Identity, 1.0, {}); }

  static ClassKappa linear(double gain) {
    detail::require(gain > 0.0, "ClassKappa: gain must be positive");
    return ClassKappa(Kind::LinearGain, gain, {});
  }

  /// Validated on a grid of [0, r_max]: must vanish at zero and strictly increase.
  static ClassKappa custom(std::function<double(double)> fn, double r_max = 100.0, int samples = 1001) {
    detail::require(static_cast<bool>(fn), "ClassKappa: empty function");
    detail::require(std::abs(fn(0.0)) <= 1e-12, "ClassKappa: apply(0) must be 0");
    double prev = fn(0.0);
    for (int i = 1; i < samples; ++i) {
      const double r = r_max * i / (samples - 1);
      const double cur = fn(r);
      detail::require(cur > prev, "ClassKappa: not strictly increasing");
      prev = cur;
    }
    return ClassKappa(Kind::Custom, 1.0, std::move(fn));
  }

  double operator()(double r) const {
    switch (kind_) {
      case Kind::Identity:
        return r;
      case Kind::LinearGain:
        return gain_ * r;
      case Kind::Custom:
        return fn_(r);
    }
    return r;
  }

  Kind kind() const { return kind_; }
  double gain() const { return gain_; }

 private:
  ClassKappa(Kind kind, double gain, std::function<double(double)> fn) : kind_(kind), gain_(gain), fn_(std::move(fn)) {}

  Kind kind_;
  double gain_;
  std::function<double(double)> fn_;
};

struct SafetySpec {
  ScalarField V;
  ScalarField h;
  ClassKappa gamma = ClassKappa::identity();
  ClassKappa alpha = ClassKappa::identity();
};

/// Checks V >= 0 on a grid of the domain with V near zero only close to the
/// equilibrium. Returns false on the first offending grid point.
inline bool check_positive_definite(const ScalarField& V, const Box& domain, const Vec& equilibrium,
                                    int per_axis = 41) {
  const Eigen::Index n = domain.dim();
  if (std::abs(V(equilibrium)) > 1e-12) return false;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  const double spacing = (domain.upper - domain.lower).maxCoeff() / (per_axis - 1);
  while (true) {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i)
      x(i) = domain.lower(i) + (domain.upper(i) - domain.lower(i)) * idx[size_t(i)] / (per_axis - 1);
    const double v = V(x);
    if (v < 0.0) return false;
    if (v <= 1e-14 && (x - equilibrium).norm() > 0.5 * spacing) return false;
    Eigen::Index d = 0;
    while (d < n && ++idx[size_t(d)] == per_axis) idx[size_t(d++)] = 0;
    if (d == n) break;
  }
  return true;
}

struct LieDerivatives {
  double Lf = 0.0;
  Vec Lg;
};

inline LieDerivatives lie_derivatives(const ScalarField& field, const ControlAffineSystem& sys, const Vec& x) {
  sys.require_in_domain(x);
  const Vec grad = field.gradient(x);
  return {grad.dot(sys.f(x)), (grad.transpose() * sys.g(x)).transpose()};
}

inline double clf_bound(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x) {
  const auto lie = lie_derivatives(spec.V, sys, x);
  return -lie.Lf - spec.gamma(spec.V(x));
}

inline double cbf_bound(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x) {
  const auto lie = lie_derivatives(spec.h, sys, x);
  return lie.Lf + spec.alpha(spec.h(x));
}

/// p_k(x); the CLF decays (Vdot = -p_k) while this stays positive.
inline double stability_margin(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x, const Vec& u) {
  detail::require(u.size() == sys.m, "stability_margin: input has wrong dimension");
  const auto lie = lie_derivatives(spec.V, sys, x);
  return -lie.Lf - lie.Lg.dot(u);
}

/// q_k(x); the CBF condition holds while this stays nonnegative.
inline double safety_margin(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x, const Vec& u) {
  detail::require(u.size() == sys.m, "safety_margin: input has wrong dimension");
  const auto lie = lie_derivatives(spec.h, sys, x);
  return lie.Lg.dot(u) + lie.Lf + spec.alpha(spec.h(x));
}

/// Plant xdot = A x + B u with quadratic CLF V = x'Px and ellipsoidal CBF
/// h = (x-c)'S(x-c) - r. P, S are taken symmetric.
inline std::pair<ControlAffineSystem, SafetySpec> make_linear_quadratic(const Mat& A, const Mat& B, const Mat& P,
                                                                        const Mat& S, const Vec& center,
                                                                        double offset, const Box& domain) {
  const int n = int(A.rows());
  detail::require(A.cols() == n && B.rows() == n && B.cols() >= 1, "linear plant: A must be n x n, B n x m");
  detail::require(P.rows() == n && P.cols() == n && S.rows() == n && S.cols() == n, "quadratic fields: n x n");
  detail::require(center.size() == n && domain.dim() == n, "linear plant: dimension mismatch");
  const Mat Ps = 0.5 * (P + P.transpose());
  const Mat Ss = 0.5 * (S + S.transpose());

  ControlAffineSystem sys;
  sys.n = n;
  sys.m = int(B.cols());
  sys.f = [A](const Vec& x) -> Vec { return A * x; };
  sys.g = [B](const Vec&) -> Mat { return B; };
  sys.domain = domain;

  SafetySpec spec;
  spec.V = make_checked_field([Ps](const Vec& x) { return x.dot(Ps * x); },
                              [Ps](const Vec& x) -> Vec { return 2.0 * Ps * x; }, domain);
  spec.h = make_checked_field(
      [Ss, center, offset](const Vec& x) {
        const Vec d = x - center;
        return d.dot(Ss * d) - offset;
      },
      [Ss, center](const Vec& x) -> Vec { return 2.0 * Ss * (x - center); }, domain);
  return {std::move(sys), std::move(spec)};
}

/// Benchmark plant: double integrator x1' = x2, x2' = u with
/// V = x1^2 + x1 x2 + x2^2, h = (x1-0.5)^2 + (x2+0.5)^2 - 0.3^2, identity class-K
/// maps and domain [-3,3]^2.
inline std::pair<ControlAffineSystem, SafetySpec> make_double_integrator() {
  ControlAffineSystem sys;
  sys.n = 2;
  sys.m = 1;
  sys.f = [](const Vec& x) -> Vec { return Eigen::Vector2d(x(1), 0.0); };
  sys.g = [](const Vec&) -> Mat { return Eigen::Vector2d(0.0, 1.0); };
  sys.domain = Box(Eigen::Vector2d(-3.0, -3.0), Eigen::Vector2d(3.0, 3.0));

  SafetySpec spec;
  spec.V = make_checked_field([](const Vec& x) { return x(0) * x(0) + x(0) * x(1) + x(1) * x(1); },
                              [](const Vec& x) -> Vec { return Eigen::Vector2d(2 * x(0) + x(1), x(0) + 2 * x(1)); },
                              sys.domain);
  spec.h = make_checked_field(
      [](const Vec& x) {
        const double a = x(0) - 0.5, b = x(1) + 0.5;
        return a * a + b * b - 0.09;
      },
      [](const Vec& x) -> Vec { return Eigen::Vector2d(2 * (x(0) - 0.5), 2 * (x(1) + 0.5)); }, sys.domain);
  return {std::move(sys), std::move(spec)};
}

}  // namespace etcbf
