#pragma once

/**
 * @file
 * @brief Closed-loop simulation under zero-order hold, with trigger events
 * localized by bisection, and a post-hoc auditor for the resulting traces.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "etcbf/controllers.hpp"
#include "etcbf/errors.hpp"
#include "etcbf/integrate.hpp"
#include "etcbf/plant.hpp"
#include "etcbf/triggers.hpp"

namespace etcbf {

struct SimConfig {
  double t_end = 15.0;
  double dt = 0.01;
  Vec x0 = Eigen::Vector2d(1.0, 1.0);
  double event_bisection_tol = 1e-9;
  int dense_check_factor = 4;

  void validate() const {
    detail::require(dt > 0.0, "SimConfig: dt must be positive");
    detail::require(t_end >= 0.0, "SimConfig: t_end must be nonnegative");
    detail::require(t_end == 0.0 || dt <= t_end, "SimConfig: dt exceeds t_end");
    detail::require(event_bisection_tol > 0.0 && event_bisection_tol < dt, "SimConfig: need 0 < bisection tol < dt");
    detail::require(dense_check_factor >= 1, "SimConfig: dense_check_factor must be >= 1");
  }
};

enum class ControllerKind { GreedyET, GreedyST, GreedyContinuous, BaselineQP, StateFeedback };

inline const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::GreedyET:
      return "greedy_et";
    case ControllerKind::GreedyST:
      return "greedy_st";
    case ControllerKind::GreedyContinuous:
      return "greedy";
    case ControllerKind::BaselineQP:
      return "clf_cbf_qp";
    case ControllerKind::StateFeedback:
      return "state_feedback";
  }
  return "?";
}

inline std::optional<ControllerKind> controller_from_string(const std::string& s) {
  for (auto k : {ControllerKind::GreedyET, ControllerKind::GreedyST, ControllerKind::GreedyContinuous,
                 ControllerKind::BaselineQP, ControllerKind::StateFeedback})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

enum class SelfTriggerMap { Digital, Lipschitz };

struct ControllerSpec {
  ControllerKind kind = ControllerKind::GreedyET;
  SelfTriggerMap st_map = SelfTriggerMap::Digital;
  LipschitzData lip;  ///< used by the Lipschitz self-trigger map only
  Mat K = (Mat(1, 2) << -0.5, -1.0).finished();
  Mat H = Mat::Constant(1, 1, 2.0);
  double p = 1.0;
};

struct Sample {
  double t = 0.0;
  Vec x;
  Vec u;
  double V = 0.0;
  double h = 0.0;
  double p = 0.0;
  double q = 0.0;
  bool is_execution = false;
};

struct Execution {
  double t = 0.0;
  Vec u;
  /// Empty for the first execution and for per-step re-solves.
  std::optional<TriggerEventKind> trigger;
  std::vector<int> active_set;
  bool feasible = true;
};

struct TraceSummary {
  int update_count = 0;
  double min_inter_execution = std::numeric_limits<double>::infinity();
  double min_h = std::numeric_limits<double>::infinity();
  double final_V = 0.0;
  Vec final_state;
};

struct Trace {
  Vec initial_state;
  std::vector<Sample> samples;
  std::vector<Execution> executions;

  /// Recomputed from samples and executions; falls back to the initial state
  /// for an empty trace.
  TraceSummary summary(const SafetySpec& spec) const {
    TraceSummary s;
    s.update_count = static_cast<int>(executions.size());
    for (size_t k = 1; k < executions.size(); ++k)
      s.min_inter_execution = std::min(s.min_inter_execution, executions[k].t - executions[k - 1].t);
    if (samples.empty()) {
      s.final_state = initial_state;
      s.min_h = spec.h(initial_state);
      s.final_V = spec.V(initial_state);
      return s;
    }
    for (const auto& smp : samples) s.min_h = std::min(s.min_h, smp.h);
    s.final_state = samples.back().x;
    s.final_V = samples.back().V;
    return s;
  }
};

/// DomainExit raised mid-run; carries everything recorded so far.
class SimulationDomainExit : public DomainExit {
 public:
  SimulationDomainExit(const DomainExit& cause, Trace trace)
      : DomainExit(cause.last_time, cause.last_state), partial(std::move(trace)) {}
  Trace partial;
};

namespace detail {

class LoopRecorder {
 public:
  LoopRecorder(const SafetySpec& spec, const ControlAffineSystem& sys) : spec_(spec), sys_(sys) {}

  void sample(double t, const Vec& x, const Vec& u, bool is_execution) {
    Sample s;
    s.t = t;
    s.x = x;
    s.u = u;
    s.V = spec_.V(x);
    s.h = spec_.h(x);
    s.p = stability_margin(spec_, sys_, x, u);
    s.q = safety_margin(spec_, sys_, x, u);
    s.is_execution = is_execution;
    trace.samples.push_back(std::move(s));
  }

  void execution(double t, const Vec& u, std::optional<TriggerEventKind> trigger, std::vector<int> active,
                 bool feasible) {
    trace.executions.push_back({t, u, trigger, std::move(active), feasible});
  }

  Trace trace;

 private:
  const SafetySpec& spec_;
  const ControlAffineSystem& sys_;
};

struct ComputedInput {
  Vec u;
  std::vector<int> active_set;
  bool feasible = true;
};

inline ComputedInput compute_input(const ControllerSpec& ctrl, const SafetySpec& spec, const ControlAffineSystem& sys,
                                   const Vec& x, const GreedyWeights& w, const Vec& previous) {
  switch (ctrl.kind) {
    case ControllerKind::StateFeedback:
      return {state_feedback_control(ctrl.K, x), {}, true};
    case ControllerKind::BaselineQP:
      try {
        return {baseline_qp_control(spec, sys, x, ctrl.H, ctrl.p), {}, true};
      } catch (const MarginFailure&) {
        return {previous, {}, false};
      }
    default: {
      const ControlDecision d = greedy_control(spec, sys, x, w);
      if (!d.feasible) return {previous, {}, false};
      return {d.u, d.active_set, true};
    }
  }
}

inline bool reached(double t, double t_end) { return t >= t_end - 1e-12 * std::max(1.0, std::abs(t_end)); }

}  // namespace detail

/// Simulates one controller over [0, t_end]. Infeasible QPs hold the previous
/// input and are flagged on the execution record. Leaving the domain throws
/// SimulationDomainExit with the partial trace.
inline Trace run_closed_loop(const ControllerSpec& ctrl, const SafetySpec& spec, const ControlAffineSystem& sys,
                             const SimConfig& cfg, const TriggerParams& params, const GreedyWeights& w) {
  cfg.validate();
  params.validate();
  w.validate(sys.m);
  detail::require(cfg.x0.size() == sys.n, "run_closed_loop: x0 has wrong dimension");
  sys.require_in_domain(cfg.x0);
  if (ctrl.kind == ControllerKind::StateFeedback)
    detail::require(ctrl.K.rows() == sys.m && ctrl.K.cols() == sys.n, "run_closed_loop: K must be m x n");
  if (ctrl.kind == ControllerKind::GreedyST && ctrl.st_map == SelfTriggerMap::Lipschitz) ctrl.lip.validate();

  detail::LoopRecorder rec(spec, sys);
  rec.trace.initial_state = cfg.x0;
  Vec x = cfg.x0;
  Vec u = Vec::Zero(sys.m);
  double t = 0.0;
  std::optional<TriggerEventKind> trigger;

  try {
    while (!detail::reached(t, cfg.t_end)) {
      const auto input = detail::compute_input(ctrl, spec, sys, x, w, u);
      u = input.u;
      rec.execution(t, u, trigger, input.active_set, input.feasible);
      rec.sample(t, x, u, true);

      // end of the hold interval, and the trigger that will close it
      double hold_end = cfg.t_end;
      std::optional<TriggerEventKind> scheduled;
      EtCase which = EtCase::SafetyOnly;
      switch (ctrl.kind) {
        case ControllerKind::GreedyET:
          which = input.feasible ? et_case(spec, sys, x, u, params) : EtCase::SafetyOnly;
          if (which == EtCase::SafetyOnly && t + params.tau_bd < cfg.t_end) {
            hold_end = t + params.tau_bd;
            scheduled = TriggerEventKind::BudgetExpired;
          }
          break;
        case ControllerKind::GreedyST: {
          const double hold = ctrl.st_map == SelfTriggerMap::Digital
                                   ? st_schedule_digital(spec, sys, x, u, params, cfg.dt).hold
                                   : st_gamma_lipschitz(spec, sys, x, u, ctrl.lip, params, cfg.dt);
          hold_end = std::min(cfg.t_end, t + hold);
          scheduled = TriggerEventKind::SelfScheduled;
          break;
        }
        default:
          hold_end = std::min(cfg.t_end, t + cfg.dt);
          scheduled = std::nullopt;
          break;
      }

      const auto grid = step_grid(t, hold_end, cfg.dt);
      Vec x_cur = x;
      double p_prev = stability_margin(spec, sys, x_cur, u);
      double q_prev = safety_margin(spec, sys, x_cur, u);
      bool fired = false;
      for (size_t j = 1; j < grid.size(); ++j) {
        const double t0 = grid[j - 1];
        const Vec x_new = rk4_step(sys, x_cur, u, grid[j] - t0);
        if (!sys.domain.contains(x_new)) throw DomainExit(t0, x_cur);

        if (ctrl.kind == ControllerKind::GreedyET) {
          const double p_new = stability_margin(spec, sys, x_new, u);
          const double q_new = safety_margin(spec, sys, x_new, u);
          double t_event = std::numeric_limits<double>::infinity();
          std::optional<TriggerEventKind> kind;
          if (q_prev > 0.0 && q_new <= 0.0) {
            t_event = locate_event(
                [&](double s) { return safety_margin(spec, sys, rk4_step(sys, x_cur, u, s - t0), u); }, t0, grid[j],
                cfg.event_bisection_tol);
            kind = TriggerEventKind::SafetyZero;
          }
          if (which == EtCase::Stabilizing && p_prev > 0.0 && p_new <= 0.0) {
            const double t_p = locate_event(
                [&](double s) { return stability_margin(spec, sys, rk4_step(sys, x_cur, u, s - t0), u); }, t0,
                grid[j], cfg.event_bisection_tol);
            if (t_p < t_event) {
              t_event = t_p;
              kind = TriggerEventKind::StabilityZero;
            }
          }
          if (kind) {
            const Vec x_event = rk4_step(sys, x_cur, u, t_event - t0);
            if (detail::reached(t_event, cfg.t_end)) {
              rec.sample(t_event, x_event, u, false);
            }
            t = t_event;
            x = x_event;
            trigger = kind;
            fired = true;
            break;
          }
          p_prev = p_new;
          q_prev = q_new;
        }

        x_cur = x_new;
        const bool last = j + 1 == grid.size();
        if (last && !detail::reached(grid[j], cfg.t_end)) break;  // the next execution records it
        rec.sample(grid[j], x_cur, u, false);
      }
      if (!fired) {
        t = grid.back();
        x = x_cur;
        trigger = detail::reached(t, cfg.t_end) ? std::nullopt : scheduled;
      }
    }
  } catch (const DomainExit& exit) {
    throw SimulationDomainExit(exit, std::move(rec.trace));
  }
  return std::move(rec.trace);
}

/// Structural checks on a trace: strictly increasing execution times, time
/// ordered samples, every sample holding the latest execution's input
/// bit-for-bit. Returns one message per violation.
inline std::vector<std::string> trace_invariant_violations(const Trace& trace) {
  std::vector<std::string> out;
  for (size_t k = 1; k < trace.executions.size(); ++k)
    if (!(trace.executions[k].t > trace.executions[k - 1].t))
      out.push_back("execution times not increasing at index " + std::to_string(k));
  size_t exec = 0;
  const Execution* current = nullptr;
  for (size_t i = 0; i < trace.samples.size(); ++i) {
    const Sample& s = trace.samples[i];
    if (i > 0 && s.t < trace.samples[i - 1].t) out.push_back("samples out of order at row " + std::to_string(i));
    if (s.is_execution) {
      if (exec >= trace.executions.size()) {
        out.push_back("execution row without a record at row " + std::to_string(i));
        continue;
      }
      current = &trace.executions[exec++];
      if (current->t != s.t) out.push_back("execution time mismatch at row " + std::to_string(i));
    }
    if (!current) {
      out.push_back("sample before the first execution at row " + std::to_string(i));
      continue;
    }
    if (s.u.size() != current->u.size() || (s.u.array() != current->u.array()).any())
      out.push_back("held input differs from execution input at row " + std::to_string(i));
  }
  if (exec != trace.executions.size()) out.push_back("execution records without rows");
  return out;
}

struct IntervalAudit {
  double t_start = 0.0;
  double t_end = 0.0;
  bool complete = false;    ///< closed by a later execution (not the horizon)
  bool stabilizing = false; ///< p_k(x_k) >= eps_clf at the execution
  double min_p = 0.0;
  double min_q = 0.0;
  std::optional<TriggerEventKind> closed_by;
};

struct VerifyReport {
  LipschitzData lip;
  double tau_star = 0.0;
  double min_inter_execution = std::numeric_limits<double>::infinity();
  double min_h = std::numeric_limits<double>::infinity();
  std::vector<IntervalAudit> intervals;

  bool inter_execution_ok = true;  ///< every complete interval >= tau_star - 1e-9
  bool stabilizing_ok = true;      ///< p, q >= -1e-6 where the rule promises both
  bool safety_margin_ok = true;    ///< q >= -1e-6 on every interval
  bool budget_ok = true;           ///< safety-only ET intervals last <= tau_bd + 1e-9

  bool ok() const { return inter_execution_ok && stabilizing_ok && safety_margin_ok && budget_ok; }
};

/// L_clf, L_cbf, M over the bounding box of the trace's states and inputs.
inline LipschitzData lipschitz_for_trace(const Trace& trace, const SafetySpec& spec, const ControlAffineSystem& sys) {
  detail::require(!trace.samples.empty(), "lipschitz_for_trace: empty trace");
  Vec lo = trace.samples.front().x, hi = lo;
  Vec ulo = trace.samples.front().u, uhi = ulo;
  for (const auto& s : trace.samples) {
    lo = lo.cwiseMin(s.x);
    hi = hi.cwiseMax(s.x);
    ulo = ulo.cwiseMin(s.u);
    uhi = uhi.cwiseMax(s.u);
  }
  return estimate_lipschitz(spec, sys, ulo, uhi, Box(lo, hi));
}

/// Re-simulates every hold interval at a finer step (dt / dense_check_factor,
/// at most delta / 20) and audits p_k, q_k against the guarantees of the
/// controller's execution rule.
inline VerifyReport verify_trace(const Trace& trace, const ControllerSpec& ctrl, const SafetySpec& spec,
                                 const ControlAffineSystem& sys, const SimConfig& cfg, const TriggerParams& params,
                                 std::optional<LipschitzData> lip = std::nullopt) {
  VerifyReport report;
  const auto summary = trace.summary(spec);
  report.min_h = summary.min_h;
  report.min_inter_execution = summary.min_inter_execution;
  if (trace.samples.empty()) return report;

  report.lip = lip ? *lip : lipschitz_for_trace(trace, spec, sys);
  report.tau_star = tau_star(report.lip, params);

  std::vector<size_t> exec_rows;
  for (size_t i = 0; i < trace.samples.size(); ++i)
    if (trace.samples[i].is_execution) exec_rows.push_back(i);
  detail::require(exec_rows.size() == trace.executions.size(), "verify_trace: execution rows disagree with records");

  const double step = std::min(cfg.dt / cfg.dense_check_factor, params.delta / 20.0);
  for (size_t k = 0; k < exec_rows.size(); ++k) {
    const Sample& start = trace.samples[exec_rows[k]];
    IntervalAudit audit;
    audit.t_start = start.t;
    audit.complete = k + 1 < exec_rows.size();
    audit.t_end = audit.complete ? trace.samples[exec_rows[k + 1]].t : trace.samples.back().t;
    if (audit.complete) audit.closed_by = trace.executions[k + 1].trigger;
    audit.stabilizing = start.p >= params.eps_clf;
    audit.min_p = start.p;
    audit.min_q = start.q;
    const double duration = audit.t_end - audit.t_start;
    if (duration > 0.0) {
      try {
        const auto dense = integrate_zoh(sys, start.x, start.u, audit.t_start, audit.t_end,
                                         std::min(step, duration / 4.0));
        for (const auto& ts : dense) {
          audit.min_p = std::min(audit.min_p, stability_margin(spec, sys, ts.x, start.u));
          audit.min_q = std::min(audit.min_q, safety_margin(spec, sys, ts.x, start.u));
        }
      } catch (const DomainExit&) {
      }
    }

    switch (ctrl.kind) {
      case ControllerKind::GreedyET:
        if (audit.complete && duration < report.tau_star - 1e-9) report.inter_execution_ok = false;
        if (audit.stabilizing && (audit.min_p < -1e-6 || audit.min_q < -1e-6)) report.stabilizing_ok = false;
        if (audit.min_q < -1e-6) report.safety_margin_ok = false;
        if (!audit.stabilizing && audit.complete && duration > params.tau_bd + 1e-9) report.budget_ok = false;
        break;
      case ControllerKind::GreedyST:
        if (audit.min_q < -1e-6) report.safety_margin_ok = false;
        if (ctrl.st_map == SelfTriggerMap::Lipschitz && audit.stabilizing && audit.min_p < -1e-6)
          report.stabilizing_ok = false;
        break;
      default:
        break;
    }
    report.intervals.push_back(audit);
  }
  return report;
}

}  // namespace etcbf
