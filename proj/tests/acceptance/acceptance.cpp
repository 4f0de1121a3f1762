// Benchmark acceptance: one PASS/FAIL line per criterion.
//
// usage: acceptance [--known-failure N]...
// Exits 0 only when the failing criteria are exactly the listed known
// failures; a listed criterion that starts passing also exits 1.

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "etcbf/etcbf.hpp"

using namespace etcbf;

namespace {

std::set<int> failed;
std::set<int> known;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << what << "  (" << detail << ")"
            << (!ok && known.count(id) ? "  [known failure]" : "") << '\n';
  if (!ok) failed.insert(id);
}

template <class F>
double seconds(F&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const Trace& trace_of(const BenchmarkResult& res, ControllerKind kind) {
  for (const auto& run : res.runs)
    if (run.kind == kind) return run.trace;
  throw std::runtime_error(std::string("no run for ") + to_string(kind));
}

const SummaryRow& row_of(const BenchmarkResult& res, ControllerKind kind) {
  return *res.table.find(to_string(kind));
}

bool lyapunov_rises_somewhere(const Trace& trace) {
  for (size_t i = 1; i < trace.samples.size(); ++i)
    if (trace.samples[i].V > trace.samples[i - 1].V) return true;
  return false;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-failure" && i + 1 < argc) {
      known.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--known-failure N]...\n";
      return 2;
    }
  }
  const ExperimentConfig cfg;
  const Plant plant = build_plant(cfg);
  const auto& sys = plant.sys;
  const auto& spec = plant.spec;

  {
    OracleComparison cmp;
    const double t = seconds([&] { cmp = compare_with_oracle(500, cfg.seed); });
    report(1, cmp.ok() && t < 5.0, "QP solver agrees with the KKT enumeration oracle on 500 random problems",
           std::to_string(cmp.mismatches) + " mismatches, max objective error " + fmt(cmp.max_objective_error) +
               ", max optimizer error " + fmt(cmp.max_optimizer_error) + ", " + fmt(t) + " s");
  }

  {
    const Vec x = Eigen::Vector2d(1, 1);
    const auto d = greedy_control(spec, sys, x, cfg.weights);
    const double ub = baseline_qp_control(spec, sys, x, cfg.H(0, 0), cfg.p)(0);
    const bool ok = d.feasible && std::abs(d.u(0) + 3.31 / 3) <= 1e-6 && std::abs(d.rho1 + 2.69) <= 1e-6 &&
                    std::abs(d.rho2 - 0.1) <= 1e-8 && std::abs(ub + 3.41 / 3) <= 1e-6;
    report(2, ok, "closed-form greedy and baseline inputs at [1,1]",
           "u " + fmt(d.u(0)) + ", rho1 " + fmt(d.rho1) + ", rho2 " + fmt(d.rho2) + ", baseline u " + fmt(ub));
  }

  BenchmarkResult res;
  const double bench_time = seconds([&] { res = run_benchmark(cfg, ""); });

  {
    bool ok = res.exit_code == 0 && bench_time < 10.0;
    std::string detail;
    for (auto kind : {ControllerKind::GreedyET, ControllerKind::GreedyST, ControllerKind::GreedyContinuous,
                      ControllerKind::BaselineQP}) {
      const double mh = row_of(res, kind).min_h;
      ok = ok && mh >= -1e-3;
      detail += std::string(to_string(kind)) + " " + fmt(mh) + ", ";
    }
    const double sf = row_of(res, ControllerKind::StateFeedback).min_h;
    ok = ok && sf < 0.0;
    report(3, ok, "greedy and baseline loops stay safe, state feedback does not",
           "min h: " + detail + "state_feedback " + fmt(sf) + "; " + fmt(bench_time) + " s");
  }

  const int n_et = row_of(res, ControllerKind::GreedyET).update_count;
  const int n_st = row_of(res, ControllerKind::GreedyST).update_count;
  const int n_ct = row_of(res, ControllerKind::GreedyContinuous).update_count;
  report(4,
         n_et >= 17 && n_et <= 31 && n_st >= 18 && n_st <= 34 && n_ct == 1500 && n_et <= 0.05 * n_ct &&
             n_st <= 0.05 * n_ct,
         "update counts of the event- and self-triggered loops",
         "event " + std::to_string(n_et) + ", self " + std::to_string(n_st) + ", continuous " + std::to_string(n_ct));

  ControllerSpec et = controller_spec(ControllerKind::GreedyET, cfg, plant);
  const Trace& et_trace = trace_of(res, ControllerKind::GreedyET);
  const VerifyReport et_rep = verify_trace(et_trace, et, spec, sys, cfg.sim, cfg.trigger);
  report(5, et_rep.inter_execution_ok, "every event-triggered inter-execution time exceeds tau*",
         "min " + fmt(et_rep.min_inter_execution) + " vs tau* " + fmt(et_rep.tau_star) + " (L_clf " +
             fmt(et_rep.lip.L_clf) + ", L_cbf " + fmt(et_rep.lip.L_cbf) + ", M " + fmt(et_rep.lip.M) + ")");

  {
    int stabilizing = 0, safety_only = 0;
    for (const auto& a : et_rep.intervals) (a.stabilizing ? stabilizing : safety_only)++;
    report(6, et_rep.stabilizing_ok && et_rep.budget_ok,
           "event-triggered margins hold until firing; safety-only intervals respect the budget",
           std::to_string(stabilizing) + " stabilizing and " + std::to_string(safety_only) + " safety-only intervals");
  }

  {
    const ControllerSpec st = controller_spec(ControllerKind::GreedyST, cfg, plant);
    const VerifyReport st_rep = verify_trace(trace_of(res, ControllerKind::GreedyST), st, spec, sys, cfg.sim, cfg.trigger);

    ExperimentConfig lcfg = cfg;
    lcfg.st_map = SelfTriggerMap::Lipschitz;
    const ControllerSpec lst = controller_spec(ControllerKind::GreedyST, lcfg, plant);
    const Trace lip_trace = run_closed_loop(lst, spec, sys, lcfg.sim, lcfg.trigger, lcfg.weights);
    const VerifyReport lip_rep = verify_trace(lip_trace, lst, spec, sys, lcfg.sim, lcfg.trigger, lst.lip);

    double min_q = std::numeric_limits<double>::infinity();
    for (const auto& a : st_rep.intervals) min_q = std::min(min_q, a.min_q);
    report(7, st_rep.safety_margin_ok && lip_rep.safety_margin_ok && lip_rep.stabilizing_ok,
           "self-triggered intervals keep the safety margin, and the stability margin under the Lipschitz map",
           "digital min q " + fmt(min_q) + " over " + std::to_string(st_rep.intervals.size()) +
               " intervals; Lipschitz map " + std::to_string(lip_trace.executions.size()) + " updates");
  }

  {
    const double b = row_of(res, ControllerKind::BaselineQP).final_state_norm;
    const double e = row_of(res, ControllerKind::GreedyET).final_state_norm;
    const double s = row_of(res, ControllerKind::GreedyST).final_state_norm;
    const double c = row_of(res, ControllerKind::GreedyContinuous).final_state_norm;
    report(8, e < b && s < b && c < b, "greedy loops end closer to the origin than the baseline",
           "|x(15)|: event " + fmt(e) + ", self " + fmt(s) + ", continuous " + fmt(c) + ", baseline " + fmt(b));
  }

  {
    const bool rise_et = lyapunov_rises_somewhere(et_trace);
    const bool rise_st = lyapunov_rises_somewhere(trace_of(res, ControllerKind::GreedyST));
    const double v_et = row_of(res, ControllerKind::GreedyET).final_V;
    const double v_st = row_of(res, ControllerKind::GreedyST).final_V;
    const double v_b = row_of(res, ControllerKind::BaselineQP).final_V;
    // V' = -p, so the smallest p seen between updates shows how close V came to rising
    const ControllerSpec st = controller_spec(ControllerKind::GreedyST, cfg, plant);
    const VerifyReport st_rep = verify_trace(trace_of(res, ControllerKind::GreedyST), st, spec, sys, cfg.sim, cfg.trigger);
    auto min_p = [](const VerifyReport& r) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& a : r.intervals) m = std::min(m, a.min_p);
      return m;
    };
    report(9, rise_et && rise_st && v_et < 0.05 && v_st < 0.05 && v_b > v_et && v_b > v_st,
           "V rises at times under both triggered loops yet ends small, below the baseline",
           std::string("rises: event ") + (rise_et ? "yes" : "no") + ", self " + (rise_st ? "yes" : "no") +
               "; min p between updates: event " + fmt(min_p(et_rep)) + ", self " + fmt(min_p(st_rep)) +
               "; V(15): event " + fmt(v_et) + ", self " + fmt(v_st) + ", baseline " + fmt(v_b));
  }

  {
    const double rv = gradient_check_ratio(spec.V, sys.domain, 1000, 1);
    const double rh = gradient_check_ratio(spec.h, sys.domain, 1000, 2);
    // analytic maxima over [-3,3]^2 with u in [-2,0], all at (-3,-3), u = -2
    const auto lip = estimate_lipschitz(spec, sys, Vec::Constant(1, -2.0), Vec::Zero(1));
    const double Lp = std::hypot(8.0, 16.0), Lq = std::hypot(13.0, 16.0), M = std::sqrt(13.0);
    auto within = [](double est, double exact) { return std::abs(est - exact) <= 0.1 * exact; };
    report(10, rv <= 1.0 && rh <= 1.0 && within(lip.L_clf, Lp) && within(lip.L_cbf, Lq) && within(lip.M, M),
           "gradient audit at 1000 points and Lipschitz estimates within 10%",
           "audit ratios " + fmt(rv) + ", " + fmt(rh) + "; estimate/exact " + fmt(lip.L_clf / Lp) + ", " +
               fmt(lip.L_cbf / Lq) + ", " + fmt(lip.M / M));
  }

  std::cout << 10 - failed.size() << " of 10 criteria passed\n";
  for (int id : known)
    if (!failed.count(id)) std::cout << "criterion " << id << " is listed as a known failure but passed\n";
  return failed == known ? 0 : 1;
}
