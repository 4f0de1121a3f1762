// etcbf: run the benchmark, render figures, audit a trace, self-test.
//
// Log verbosity follows SPDLOG_LEVEL (trace, debug, info, warn, error, off).
// Exit codes: 0 success, 1 runtime failure, 2 config or usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "etcbf/etcbf.hpp"

namespace {

using namespace etcbf;

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

std::vector<ControllerKind> parse_controller_list(const std::string& list) {
  std::vector<ControllerKind> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    const auto kind = controller_from_string(name);
    if (!kind) throw ConfigError("unknown controller '" + name + "'");
    out.push_back(*kind);
  }
  if (out.empty()) throw ConfigError("--controllers is empty");
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_opt, const std::string& controllers) {
  ExperimentConfig cfg = load_config(config_path);
  if (!controllers.empty()) cfg.controllers = parse_controller_list(controllers);
  const std::string out = out_opt.empty() ? cfg.output_dir : out_opt;
  spdlog::info("config hash {}", config_hash(cfg));
  spdlog::info("running {} controller(s), output to {}", cfg.controllers.size(), out);

  const BenchmarkResult result = run_benchmark(cfg, out);
  print_summary(std::cout, result.table);
  for (const auto& row : result.table.rows)
    if (row.status != "ok") spdlog::error("{}: {} ({})", row.controller, row.status, row.message);
  return result.exit_code;
}

int cmd_figures(const std::string& out) {
  for (const auto& path : render_figures(out)) spdlog::info("wrote {}", path);
  return kOk;
}

std::optional<ControllerKind> infer_controller(const std::string& path, const Trace& trace) {
  const std::string stem = std::filesystem::path(path).stem().string();
  if (stem.rfind("trace_", 0) == 0)
    if (auto kind = controller_from_string(stem.substr(6))) return kind;
  for (const auto& e : trace.executions) {
    if (!e.trigger) continue;
    if (*e.trigger == TriggerEventKind::SelfScheduled) return ControllerKind::GreedyST;
    return ControllerKind::GreedyET;
  }
  return std::nullopt;
}

int cmd_verify(const std::string& trace_path, const std::string& config_path, const std::string& controller) {
  const ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  const Plant plant = build_plant(cfg);
  const ParsedTrace parsed = read_trace_csv(trace_path);
  if (parsed.n != plant.sys.n || parsed.m != plant.sys.m)
    throw ConfigError("trace dimensions do not match the configured system");

  std::optional<ControllerKind> kind;
  if (!controller.empty()) {
    kind = controller_from_string(controller);
    if (!kind) throw ConfigError("unknown controller '" + controller + "'");
  } else {
    kind = infer_controller(trace_path, parsed.trace);
    if (!kind) throw ConfigError("cannot infer the controller; pass --controller");
  }
  const ControllerSpec ctrl = controller_spec(*kind, cfg, plant);

  const auto structural = trace_invariant_violations(parsed.trace);
  for (const auto& v : structural) spdlog::error("{}", v);

  const VerifyReport rep = verify_trace(parsed.trace, ctrl, plant.spec, plant.sys, cfg.sim, cfg.trigger);
  const TraceSummary sum = parsed.trace.summary(plant.spec);
  int failing = 0;
  for (const auto& a : rep.intervals)
    if (a.min_q < -1e-6) ++failing;

  std::cout << "controller            " << to_string(*kind) << '\n'
            << "executions            " << parsed.trace.executions.size() << '\n'
            << "L_clf, L_cbf, M       " << rep.lip.L_clf << ", " << rep.lip.L_cbf << ", " << rep.lip.M << '\n'
            << "tau_star              " << rep.tau_star << '\n'
            << "min inter-execution   " << rep.min_inter_execution << '\n'
            << "min h                 " << rep.min_h << '\n'
            << "final V               " << sum.final_V << '\n'
            << "intervals with q < 0  " << failing << " of " << rep.intervals.size() << '\n'
            << "inter-execution       " << (rep.inter_execution_ok ? "ok" : "FAIL") << '\n'
            << "stabilizing intervals " << (rep.stabilizing_ok ? "ok" : "FAIL") << '\n'
            << "safety margin         " << (rep.safety_margin_ok ? "ok" : "FAIL") << '\n'
            << "violation budget      " << (rep.budget_ok ? "ok" : "FAIL") << '\n'
            << "trace structure       " << (structural.empty() ? "ok" : "FAIL") << '\n';
  return rep.ok() && structural.empty() ? kOk : kRuntimeFailure;
}

int cmd_selftest(std::uint64_t seed, int count) {
  bool all = true;
  auto report = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "PASS " : "FAIL ") << what << '\n';
    all = all && ok;
  };

  const OracleComparison cmp = compare_with_oracle(count, seed);
  {
    std::ostringstream os;
    os << "qp oracle: " << cmp.cases << " random problems (" << cmp.optimal << " optimal, " << cmp.infeasible
       << " infeasible), max objective error " << cmp.max_objective_error << ", max optimizer error "
       << cmp.max_optimizer_error;
    if (!cmp.ok()) os << "; " << cmp.mismatches << " mismatches, first: " << cmp.first_mismatch;
    report(cmp.ok(), os.str());
  }

  const ExperimentConfig cfg;
  const Plant plant = build_plant(cfg);
  const BenchmarkResult first = run_benchmark(cfg, "");
  const BenchmarkResult second = run_benchmark(cfg, "");
  report(first.exit_code == 0, "benchmark runs complete inside the domain");
  for (size_t i = 0; i < first.runs.size(); ++i) {
    const auto& run = first.runs[i];
    const std::string name = to_string(run.kind);
    const auto violations = trace_invariant_violations(run.trace);
    report(violations.empty(), name + ": trace invariants" + (violations.empty() ? "" : " (" + violations[0] + ")"));
    report(traces_identical(run.trace, second.runs[i].trace), name + ": deterministic rerun");

    std::stringstream csv;
    write_trace_csv(csv, run.trace, plant.sys.n, plant.sys.m);
    const ParsedTrace back = read_trace_csv(csv);
    report(traces_identical(run.trace, back.trace), name + ": CSV round trip");
  }
  return all ? kOk : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("etcbf");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  spdlog::cfg::load_env_levels();

  CLI::App app{"Greedy CLF-CBF controllers with event- and self-triggered execution"};
  app.require_subcommand(1);

  std::string config, out, controllers, trace, controller;
  std::uint64_t seed = ExperimentConfig{}.seed;
  int count = 500;

  auto* run = app.add_subcommand("run", "run the benchmark and write traces and summary");
  run->add_option("--config", config, "JSON config file")->required();
  run->add_option("--out", out, "output directory (default: config output_dir)");
  run->add_option("--controllers", controllers, "comma-separated subset, e.g. greedy_et,greedy_st");

  auto* figures = app.add_subcommand("figures", "render SVG figures from a run directory");
  figures->add_option("--out", out, "run output directory")->required();

  auto* verify = app.add_subcommand("verify", "audit a trace CSV against the trigger guarantees");
  verify->add_option("--trace", trace, "trace CSV")->required();
  verify->add_option("--config", config, "config the trace was produced with (default: benchmark)");
  verify->add_option("--controller", controller, "controller name (default: inferred)");

  auto* selftest = app.add_subcommand("selftest", "QP oracle comparison and trace invariant checks");
  selftest->add_option("--seed", seed, "random seed");
  selftest->add_option("--count", count, "number of random QPs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, out, controllers);
    if (*figures) return cmd_figures(out);
    if (*verify) return cmd_verify(trace, config, controller);
    if (*selftest) return cmd_selftest(seed, count);
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  } catch (const MissingTraces& e) {
    spdlog::error("{}", e.what());
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeFailure;
  }
  return kOk;
}
