#pragma once

// Fixed-step RK4 under a zero-order-hold input, and bisection event location.

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "etcbf/errors.hpp"
#include "etcbf/plant.hpp"

namespace etcbf {

struct TimedState {
  double t;
  Vec x;
};

inline Vec rk4_step(const ControlAffineSystem& sys, const Vec& x, const Vec& u, double h) {
  const Vec k1 = sys.dynamics(x, u);
  const Vec k2 = sys.dynamics(x + 0.5 * h * k1, u);
  const Vec k3 = sys.dynamics(x + 0.5 * h * k2, u);
  const Vec k4 = sys.dynamics(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Step boundaries of [t0, t1] with spacing dt; the last step is shortened so
/// the grid ends exactly at t1. Times are t0 + j*dt (no accumulated drift).
inline std::vector<double> step_grid(double t0, double t1, double dt) {
  detail::require(dt > 0.0, "step_grid: dt must be positive");
  std::vector<double> grid{t0};
  for (long j = 1;; ++j) {
    const double t = t0 + double(j) * dt;
    if (t >= t1 - 1e-12 * std::max(1.0, std::abs(t1))) break;
    grid.push_back(t);
  }
  if (t1 > t0) grid.push_back(t1);
  return grid;
}

/// Integrates xdot = f(x) + g(x)u with u held on [t0, t1]. Returns every step
/// boundary, ending exactly at t1. Throws DomainExit if a step leaves the domain.
inline std::vector<TimedState> integrate_zoh(const ControlAffineSystem& sys, const Vec& x0, const Vec& u, double t0,
                                             double t1, double dt) {
  detail::require(t1 > t0, "integrate_zoh: t1 must exceed t0");
  detail::require(u.size() == sys.m && x0.size() == sys.n, "integrate_zoh: dimension mismatch");
  const auto grid = step_grid(t0, t1, dt);
  std::vector<TimedState> out;
  out.reserve(grid.size());
  out.push_back({t0, x0});
  for (size_t j = 1; j < grid.size(); ++j) {
    const Vec next = rk4_step(sys, out.back().x, u, grid[j] - grid[j - 1]);
    if (!sys.domain.contains(next)) throw DomainExit(out.back().t, out.back().x);
    out.push_back({grid[j], next});
  }
  return out;
}

/// Bisection on a bracketed crossing signal(t_lo) > 0 >= signal(t_hi).
/// Returns the right end of the final bracket (condition met, within tol).
inline double locate_event(const std::function<double(double)>& signal, double t_lo, double t_hi, double tol) {
  detail::require(t_hi > t_lo && tol > 0.0, "locate_event: need t_hi > t_lo and tol > 0");
  detail::require(signal(t_lo) > 0.0 && signal(t_hi) <= 0.0, "locate_event: crossing is not bracketed");
  while (t_hi - t_lo > tol) {
    const double mid = 0.5 * (t_lo + t_hi);
    if (mid <= t_lo || mid >= t_hi) break;
    if (signal(mid) > 0.0)
      t_lo = mid;
    else
      t_hi = mid;
  }
  return t_hi;
}

}  // namespace etcbf
