#pragma once

/**
 * @file
 * @brief Execution rules for the greedy controller.
 *
 * Event-triggered: after computing u_k at x_k,
 *   - if p_k(x_k) >= eps_clf, fire when p_k(x) or q_k(x) reaches zero;
 *   - otherwise fire when q_k(x) reaches zero or tau_bd has elapsed.
 *
 * Self-triggered: the next execution time is fixed at t_k, either from
 * Lipschitz constants and the local speed bound M_k, or from a forward
 * prediction sampled every delta (digital map).
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "etcbf/errors.hpp"
#include "etcbf/integrate.hpp"
#include "etcbf/plant.hpp"

namespace etcbf {

struct TriggerParams {
  double eps_clf = 0.1;
  double eps_cbf = 0.1;
  double tau_bd = 0.5;
  double delta = 0.2;
  double tau_min = 0.0;
  double tau_max = 4.0;

  void validate() const {
    detail::require(eps_clf > 0 && eps_cbf > 0 && tau_bd > 0 && delta > 0 && tau_max > 0,
                    "TriggerParams: eps_clf, eps_cbf, tau_bd, delta, tau_max must be positive");
    detail::require(tau_min >= 0, "TriggerParams: tau_min must be nonnegative");
    detail::require(tau_min <= tau_max, "TriggerParams: tau_min exceeds tau_max");
    detail::require(delta <= tau_max, "TriggerParams: delta exceeds tau_max");
  }
};

/// Lipschitz constants of p and q over the domain, and the speed bound M.
struct LipschitzData {
  double L_clf = 0.0;
  double L_cbf = 0.0;
  double M = 0.0;

  void validate() const {
    detail::require(L_clf > 0 && L_cbf > 0 && M > 0, "LipschitzData: all constants must be positive");
  }
};

enum class TriggerEventKind { StabilityZero, SafetyZero, BudgetExpired, SelfScheduled };

inline const char* to_string(TriggerEventKind kind) {
  switch (kind) {
    case TriggerEventKind::StabilityZero:
      return "stability_zero";
    case TriggerEventKind::SafetyZero:
      return "safety_zero";
    case TriggerEventKind::BudgetExpired:
      return "budget_expired";
    case TriggerEventKind::SelfScheduled:
      return "self_scheduled";
  }
  return "?";
}

inline std::optional<TriggerEventKind> trigger_kind_from_string(const std::string& s) {
  for (auto k : {TriggerEventKind::StabilityZero, TriggerEventKind::SafetyZero, TriggerEventKind::BudgetExpired,
                 TriggerEventKind::SelfScheduled})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

enum class EtCase { Stabilizing, SafetyOnly };

inline EtCase et_case(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x_k, const Vec& u_k,
                      const TriggerParams& params) {
  return stability_margin(spec, sys, x_k, u_k) >= params.eps_clf ? EtCase::Stabilizing : EtCase::SafetyOnly;
}

/// Pointwise trigger test at (t, x). Safety is checked first, then stability,
/// then the violation budget.
inline std::optional<TriggerEventKind> et_should_fire(EtCase which, const SafetySpec& spec,
                                                      const ControlAffineSystem& sys, const Vec& x, const Vec& u_k,
                                                      double t, double t_k, const TriggerParams& params) {
  detail::require(t >= t_k, "et_should_fire: t precedes t_k");
  if (safety_margin(spec, sys, x, u_k) <= 0.0) return TriggerEventKind::SafetyZero;
  if (which == EtCase::Stabilizing) {
    if (stability_margin(spec, sys, x, u_k) <= 0.0) return TriggerEventKind::StabilityZero;
  } else if (t - t_k >= params.tau_bd - 1e-12) {
    return TriggerEventKind::BudgetExpired;
  }
  return std::nullopt;
}

/// Minimum inter-execution time guaranteed for the event-triggered loop.
inline double tau_star(const LipschitzData& lip, const TriggerParams& params) {
  lip.validate();
  params.validate();
  return std::min({params.eps_clf / (lip.M * lip.L_clf), params.eps_cbf / (lip.M * lip.L_cbf), params.tau_bd});
}

namespace detail {

inline double lipschitz_gamma(bool stabilizing, double L_clf, double L_cbf, double M, const TriggerParams& params) {
  const double safety = params.eps_cbf / (L_cbf * M);
  if (stabilizing) return std::min(params.eps_clf / (L_clf * M), safety);
  return std::min(safety, params.tau_bd);
}

// sup |f + g u| over the nominal flow on [0, horizon], sampled at the RK4
// step boundaries and stage points.
inline double speed_sup(const ControlAffineSystem& sys, const Vec& x0, const Vec& u, double horizon, double dt) {
  const double step = std::min(dt, horizon / 20.0);
  const auto path = integrate_zoh(sys, x0, u, 0.0, horizon, step);
  double sup = 0.0;
  for (size_t j = 0; j < path.size(); ++j) {
    sup = std::max(sup, sys.dynamics(path[j].x, u).norm());
    if (j + 1 < path.size()) {
      const Vec mid = rk4_step(sys, path[j].x, u, 0.5 * (path[j + 1].t - path[j].t));
      if (sys.domain.contains(mid)) sup = std::max(sup, sys.dynamics(mid, u).norm());
    }
  }
  return sup;
}

}  // namespace detail

/// Self-trigger interval from Lipschitz constants. M_k is resolved by a
/// monotone fixed point: M starts at |f(x_k)+g u_k|, each pass integrates the
/// nominal model over the current interval and raises M to 1.02 x the observed
/// sup. Stops when the interval moves less than 1e-6; after 50 passes (or if
/// the prediction leaves the domain) the uniform bound lip.M is used instead.
/// The interval is capped at tau_max.
inline double st_gamma_lipschitz(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x_k,
                                 const Vec& u_k, const LipschitzData& lip, const TriggerParams& params, double dt) {
  lip.validate();
  params.validate();
  const bool stabilizing = et_case(spec, sys, x_k, u_k, params) == EtCase::Stabilizing;
  auto gamma_of = [&](double M) {
    return std::min(params.tau_max, detail::lipschitz_gamma(stabilizing, lip.L_clf, lip.L_cbf, M, params));
  };
  const double fallback = gamma_of(lip.M);

  double M = std::max(sys.dynamics(x_k, u_k).norm(), 1e-12);
  double gamma = gamma_of(M);
  try {
    for (int iter = 0; iter < 50; ++iter) {
      const double sup = detail::speed_sup(sys, x_k, u_k, gamma, dt);
      M = std::max(M, 1.02 * sup);
      const double next = gamma_of(M);
      if (std::abs(next - gamma) < 1e-6) return std::min(next, gamma);
      gamma = next;
    }
  } catch (const DomainExit&) {
  }
  return fallback;
}

struct DigitalSchedule {
  double gamma = 0.0;  ///< max(tau_min, n delta), floored at delta
  int n = 0;           ///< longest prefix of nonnegative (p, q) samples
  int n_max = 0;
  double hold = 0.0;   ///< how long the loop actually holds u_k; see st_schedule_digital
};

/// Digital self-trigger map: predict x(t_k + m delta) under the held input,
/// take the longest prefix m = 1..n <= N_max with p and q both nonnegative,
/// and schedule gamma = max(tau_min, n delta), floored at delta.
///
/// hold equals gamma except when q is already negative at the first sample:
/// then u_k cannot be held for a whole delta without leaving the safety
/// margin, so the prediction is resampled at the integration step dt and hold
/// ends at the last dt-sample where q is still nonnegative (at least dt).
inline DigitalSchedule st_schedule_digital(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x_k,
                                           const Vec& u_k, const TriggerParams& params, double dt) {
  params.validate();
  DigitalSchedule out;
  out.n_max = static_cast<int>(std::floor(params.tau_max / params.delta + 1e-9));
  Vec x = x_k;
  bool safety_failed = false;
  for (int m = 1; m <= out.n_max; ++m) {
    try {
      x = integrate_zoh(sys, x, u_k, (m - 1) * params.delta, m * params.delta, dt).back().x;
    } catch (const DomainExit&) {
      break;
    }
    safety_failed = safety_margin(spec, sys, x, u_k) < 0.0;
    if (stability_margin(spec, sys, x, u_k) < 0.0 || safety_failed) break;
    out.n = m;
  }
  out.gamma = std::max({params.tau_min, out.n * params.delta, params.delta});
  out.hold = out.gamma;
  if (out.n == 0 && safety_failed && params.tau_min < params.delta) {
    const auto fine = integrate_zoh(sys, x_k, u_k, 0.0, params.delta, dt);
    size_t last_safe = 0;
    for (size_t j = 1; j + 1 < fine.size(); ++j) {
      if (safety_margin(spec, sys, fine[j].x, u_k) < 0.0) break;
      last_safe = j;
    }
    out.hold = std::max(params.tau_min, fine[std::max<size_t>(last_safe, 1)].t);
  }
  return out;
}

inline double st_gamma_digital(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x_k, const Vec& u_k,
                               const TriggerParams& params, double dt) {
  return st_schedule_digital(spec, sys, x_k, u_k, params, dt).gamma;
}

/// Factors of the combined trigger (L_gV u - b_clf)(L_gh u + b_cbf).
inline std::pair<double, double> tc3_factors(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x,
                                             const Vec& u) {
  const auto lv = lie_derivatives(spec.V, sys, x);
  return {lv.Lg.dot(u) + lv.Lf + spec.gamma(spec.V(x)), safety_margin(spec, sys, x, u)};
}

/// True once either factor has reached zero or changed sign relative to its
/// value at the execution state x_k.
inline bool tc3_should_fire(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& x_k, const Vec& x,
                            const Vec& u_k) {
  const auto [clf0, cbf0] = tc3_factors(spec, sys, x_k, u_k);
  const auto [clf, cbf] = tc3_factors(spec, sys, x, u_k);
  auto crossed = [](double before, double now) { return now == 0.0 || (before < 0.0) != (now < 0.0); };
  return crossed(clf0, clf) || crossed(cbf0, cbf);
}

namespace detail {

// Central difference, one-sided where the stencil would leave the domain.
inline Vec fd_gradient(const std::function<double(const Vec&)>& fn, const Vec& x, const Box& domain) {
  Vec grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    Vec hi = x, lo = x;
    hi(i) += h;
    lo(i) -= h;
    const bool hi_ok = hi(i) <= domain.upper(i);
    const bool lo_ok = lo(i) >= domain.lower(i);
    if (hi_ok && lo_ok)
      grad(i) = (fn(hi) - fn(lo)) / (2 * h);
    else if (hi_ok)
      grad(i) = (fn(hi) - fn(x)) / h;
    else
      grad(i) = (fn(x) - fn(lo)) / h;
  }
  return grad;
}

}  // namespace detail

/// Grid estimate of L_clf, L_cbf (max gradient norm of p and q) and M
/// (max |f + g u|) over `region` (defaults to the domain) with u at the
/// corners of [u_lower, u_upper]; each scaled by 1.05. The grid has 101 points
/// per axis in 2-D and proportionally fewer in higher dimension.
inline LipschitzData estimate_lipschitz(const SafetySpec& spec, const ControlAffineSystem& sys, const Vec& u_lower,
                                        const Vec& u_upper, std::optional<Box> region = std::nullopt) {
  detail::require(u_lower.size() == sys.m && u_upper.size() == sys.m, "estimate_lipschitz: input box dimension");
  detail::require((u_lower.array() <= u_upper.array()).all(), "estimate_lipschitz: empty input box");
  const Box box = region.value_or(sys.domain);
  detail::require(box.dim() == sys.n, "estimate_lipschitz: region dimension");
  detail::require((box.lower.array() >= sys.domain.lower.array()).all() &&
                      (box.upper.array() <= sys.domain.upper.array()).all(),
                  "estimate_lipschitz: region must lie inside the domain");

  const int n = sys.n;
  const int per_axis = std::max(3, static_cast<int>(std::floor(std::pow(10201.0, 1.0 / n) + 1e-9)));
  std::vector<Vec> corners;
  for (unsigned mask = 0; mask < (1u << sys.m); ++mask) {
    Vec u(sys.m);
    for (int j = 0; j < sys.m; ++j) u(j) = (mask & (1u << j)) ? u_upper(j) : u_lower(j);
    corners.push_back(u);
  }

  double max_p = 0.0, max_q = 0.0, max_speed = 0.0;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  while (true) {
    Vec x(n);
    for (int i = 0; i < n; ++i)
      x(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * idx[size_t(i)] / (per_axis - 1);
    for (const Vec& u : corners) {
      auto p = [&](const Vec& y) { return stability_margin(spec, sys, y, u); };
      auto q = [&](const Vec& y) { return safety_margin(spec, sys, y, u); };
      max_p = std::max(max_p, detail::fd_gradient(p, x, sys.domain).norm());
      max_q = std::max(max_q, detail::fd_gradient(q, x, sys.domain).norm());
      max_speed = std::max(max_speed, sys.dynamics(x, u).norm());
    }
    int d = 0;
    while (d < n && ++idx[size_t(d)] == per_axis) idx[size_t(d++)] = 0;
    if (d == n) break;
  }
  if (max_speed <= 0.0) throw DegenerateSystem("estimate_lipschitz: f + g u vanishes on the grid (M = 0)");
  if (max_p <= 0.0 || max_q <= 0.0) throw DegenerateSystem("estimate_lipschitz: p or q is constant on the grid");
  return {1.05 * max_p, 1.05 * max_q, 1.05 * max_speed};
}

}  // namespace etcbf
