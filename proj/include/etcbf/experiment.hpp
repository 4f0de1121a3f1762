#pragma once

/**
 * @file
 * @brief Benchmark configuration, concurrent runs of the five controllers,
 * trace/summary output.
 *
 * Config documents are JSON with nested sections; every section is optional
 * and unknown keys are rejected. Omitted fields keep the benchmark values.
 */

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "etcbf/errors.hpp"
#include "etcbf/plant.hpp"
#include "etcbf/sim.hpp"
#include "etcbf/trace_io.hpp"
#include "etcbf/triggers.hpp"

namespace etcbf {

/// Invalid or unreadable experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x' = A x + B u, V = x'Px, h = (x-c)'S(x-c) - offset, linear class-K gains.
struct LinearQuadraticPlant {
  Mat A, B, P, S;
  Vec center;
  double offset = 0.0;
  double gamma_gain = 1.0;
  double alpha_gain = 1.0;
};

struct ExperimentConfig {
  std::optional<LinearQuadraticPlant> plant;  ///< empty: builtin double integrator
  std::optional<Box> domain;                  ///< overrides the plant's domain
  std::vector<ControllerKind> controllers{ControllerKind::GreedyET, ControllerKind::GreedyST,
                                          ControllerKind::GreedyContinuous, ControllerKind::BaselineQP,
                                          ControllerKind::StateFeedback};
  TriggerParams trigger;
  SelfTriggerMap st_map = SelfTriggerMap::Digital;
  Vec st_input_lower = Vec::Constant(1, -5.0);  ///< input box for the Lipschitz map's constants
  Vec st_input_upper = Vec::Constant(1, 5.0);
  GreedyWeights weights;
  Mat H = Mat::Constant(1, 1, 2.0);
  double p = 1.0;
  Mat K = (Mat(1, 2) << -0.5, -1.0).finished();
  SimConfig sim;
  std::string output_dir = "out";
  std::uint64_t seed = 20190101;
};

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& obj, const std::string& section, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError("'" + section + "' must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in '" + section + "'");
}

inline double read_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError("'" + what + "' must be a number");
  return j.get<double>();
}

inline Vec read_vector(const json& j, const std::string& what) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError("'" + what + "' must be a non-empty array of numbers");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(Eigen::Index(i)) = read_number(j[i], what);
  return v;
}

// number -> 1x1, flat array -> row, array of arrays -> rows
inline Mat read_matrix(const json& j, const std::string& what) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError("'" + what + "' must be a number or (nested) array");
  if (!j[0].is_array()) return read_vector(j, what).transpose();
  const size_t cols = j[0].size();
  Mat M(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("'" + what + "' has ragged rows");
    for (size_t c = 0; c < cols; ++c) M(Eigen::Index(r), Eigen::Index(c)) = read_number(j[r][c], what);
  }
  return M;
}

inline json matrix_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json vector_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline LinearQuadraticPlant read_plant(const json& j, const std::string& section) {
  allow_keys(j, section, {"A", "B", "P", "S", "center", "offset", "gamma_gain", "alpha_gain"});
  for (const char* k : {"A", "B", "P", "S", "center", "offset"})
    if (!j.contains(k)) throw ConfigError("'" + section + "' is missing '" + k + "'");
  LinearQuadraticPlant lq;
  lq.A = read_matrix(j["A"], "A");
  lq.B = read_matrix(j["B"], "B");
  if (lq.B.rows() == 1 && lq.A.rows() > 1) lq.B.transposeInPlace();  // [b1, b2] means a column
  lq.P = read_matrix(j["P"], "P");
  lq.S = read_matrix(j["S"], "S");
  lq.center = read_vector(j["center"], "center");
  lq.offset = read_number(j["offset"], "offset");
  if (j.contains("gamma_gain")) lq.gamma_gain = read_number(j["gamma_gain"], "gamma_gain");
  if (j.contains("alpha_gain")) lq.alpha_gain = read_number(j["alpha_gain"], "alpha_gain");
  return lq;
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace detail

/// Parses a config document. `base_dir` resolves a system "file" reference.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".") {
  using detail::read_number;
  using detail::read_vector;
  ExperimentConfig cfg;
  detail::allow_keys(j, "config", {"system", "domain", "controllers", "trigger", "self_trigger", "weights", "baseline",
                                   "state_feedback", "sim", "output_dir", "seed"});
  try {
    if (j.contains("system")) {
      const auto& s = j["system"];
      if (s.is_string()) {
        if (s.get<std::string>() != "double_integrator")
          throw ConfigError("unknown builtin system '" + s.get<std::string>() + "'");
      } else if (s.is_object() && s.contains("file")) {
        detail::allow_keys(s, "system", {"file"});
        const auto path = std::filesystem::path(base_dir) / s["file"].get<std::string>();
        cfg.plant = detail::read_plant(detail::read_json_file(path.string()), path.string());
      } else if (s.is_object() && s.contains("linear_quadratic")) {
        detail::allow_keys(s, "system", {"linear_quadratic"});
        cfg.plant = detail::read_plant(s["linear_quadratic"], "linear_quadratic");
      } else {
        throw ConfigError("'system' must be \"double_integrator\", {\"file\": ...} or {\"linear_quadratic\": ...}");
      }
    }
    if (j.contains("domain")) {
      const auto& d = j["domain"];
      detail::allow_keys(d, "domain", {"lower", "upper"});
      if (!d.contains("lower") || !d.contains("upper")) throw ConfigError("'domain' needs lower and upper");
      const Vec lo = read_vector(d["lower"], "domain.lower"), hi = read_vector(d["upper"], "domain.upper");
      if (lo.size() != hi.size() || (hi.array() <= lo.array()).any())
        throw ConfigError("'domain' bounds must have equal length and lower < upper");
      cfg.domain = Box(lo, hi);
    }
    if (j.contains("controllers")) {
      const auto& c = j["controllers"];
      if (!c.is_array() || c.empty()) throw ConfigError("'controllers' must be a non-empty array");
      cfg.controllers.clear();
      for (const auto& name : c) {
        const auto kind = controller_from_string(name.get<std::string>());
        if (!kind) throw ConfigError("unknown controller '" + name.get<std::string>() + "'");
        cfg.controllers.push_back(*kind);
      }
    }
    if (j.contains("trigger")) {
      const auto& t = j["trigger"];
      detail::allow_keys(t, "trigger", {"eps_clf", "eps_cbf", "tau_bd", "delta", "tau_min", "tau_max"});
      auto& p = cfg.trigger;
      if (t.contains("eps_clf")) p.eps_clf = read_number(t["eps_clf"], "eps_clf");
      if (t.contains("eps_cbf")) p.eps_cbf = read_number(t["eps_cbf"], "eps_cbf");
      if (t.contains("tau_bd")) p.tau_bd = read_number(t["tau_bd"], "tau_bd");
      if (t.contains("delta")) p.delta = read_number(t["delta"], "delta");
      if (t.contains("tau_min")) p.tau_min = read_number(t["tau_min"], "tau_min");
      if (t.contains("tau_max")) p.tau_max = read_number(t["tau_max"], "tau_max");
    }
    if (j.contains("self_trigger")) {
      const auto& s = j["self_trigger"];
      detail::allow_keys(s, "self_trigger", {"map", "input_lower", "input_upper"});
      if (s.contains("map")) {
        const auto m = s["map"].get<std::string>();
        if (m == "digital")
          cfg.st_map = SelfTriggerMap::Digital;
        else if (m == "lipschitz")
          cfg.st_map = SelfTriggerMap::Lipschitz;
        else
          throw ConfigError("self_trigger.map must be \"digital\" or \"lipschitz\"");
      }
      if (s.contains("input_lower")) cfg.st_input_lower = read_vector(s["input_lower"], "input_lower");
      if (s.contains("input_upper")) cfg.st_input_upper = read_vector(s["input_upper"], "input_upper");
    }
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      detail::allow_keys(w, "weights", {"w1", "w2", "w3"});
      if (w.contains("w1")) cfg.weights.w1 = detail::read_matrix(w["w1"], "w1");
      if (w.contains("w2")) cfg.weights.w2 = read_number(w["w2"], "w2");
      if (w.contains("w3")) cfg.weights.w3 = read_number(w["w3"], "w3");
    }
    if (j.contains("baseline")) {
      const auto& b = j["baseline"];
      detail::allow_keys(b, "baseline", {"H", "p"});
      if (b.contains("H")) cfg.H = detail::read_matrix(b["H"], "H");
      if (b.contains("p")) cfg.p = read_number(b["p"], "p");
    }
    if (j.contains("state_feedback")) {
      const auto& s = j["state_feedback"];
      detail::allow_keys(s, "state_feedback", {"K"});
      if (s.contains("K")) cfg.K = detail::read_matrix(s["K"], "K");
    }
    if (j.contains("sim")) {
      const auto& s = j["sim"];
      detail::allow_keys(s, "sim", {"t_end", "dt", "x0", "event_bisection_tol", "dense_check_factor"});
      if (s.contains("t_end")) cfg.sim.t_end = read_number(s["t_end"], "t_end");
      if (s.contains("dt")) cfg.sim.dt = read_number(s["dt"], "dt");
      if (s.contains("x0")) cfg.sim.x0 = read_vector(s["x0"], "x0");
      if (s.contains("event_bisection_tol"))
        cfg.sim.event_bisection_tol = read_number(s["event_bisection_tol"], "event_bisection_tol");
      if (s.contains("dense_check_factor")) {
        if (!s["dense_check_factor"].is_number_integer()) throw ConfigError("'dense_check_factor' must be an integer");
        cfg.sim.dense_check_factor = s["dense_check_factor"].get<int>();
      }
    }
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
      cfg.seed = j["seed"].get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  cfg.weights.eps_cbf = cfg.trigger.eps_cbf;
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config(detail::read_json_file(path), std::filesystem::path(path).parent_path().string());
}

/// Canonical JSON form (sorted keys, every field explicit).
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  using detail::json;
  json j;
  if (cfg.plant) {
    const auto& lq = *cfg.plant;
    j["system"]["linear_quadratic"] = {{"A", detail::matrix_json(lq.A)},         {"B", detail::matrix_json(lq.B)},
                                       {"P", detail::matrix_json(lq.P)},         {"S", detail::matrix_json(lq.S)},
                                       {"center", detail::vector_json(lq.center)}, {"offset", lq.offset},
                                       {"gamma_gain", lq.gamma_gain},            {"alpha_gain", lq.alpha_gain}};
  } else {
    j["system"] = "double_integrator";
  }
  if (cfg.domain) j["domain"] = {{"lower", detail::vector_json(cfg.domain->lower)},
                                 {"upper", detail::vector_json(cfg.domain->upper)}};
  j["controllers"] = json::array();
  for (auto k : cfg.controllers) j["controllers"].push_back(to_string(k));
  const auto& t = cfg.trigger;
  j["trigger"] = {{"eps_clf", t.eps_clf}, {"eps_cbf", t.eps_cbf}, {"tau_bd", t.tau_bd},
                  {"delta", t.delta},     {"tau_min", t.tau_min}, {"tau_max", t.tau_max}};
  j["self_trigger"] = {{"map", cfg.st_map == SelfTriggerMap::Digital ? "digital" : "lipschitz"},
                       {"input_lower", detail::vector_json(cfg.st_input_lower)},
                       {"input_upper", detail::vector_json(cfg.st_input_upper)}};
  j["weights"] = {{"w1", detail::matrix_json(cfg.weights.w1)}, {"w2", cfg.weights.w2}, {"w3", cfg.weights.w3}};
  j["baseline"] = {{"H", detail::matrix_json(cfg.H)}, {"p", cfg.p}};
  j["state_feedback"] = {{"K", detail::matrix_json(cfg.K)}};
  j["sim"] = {{"t_end", cfg.sim.t_end},
              {"dt", cfg.sim.dt},
              {"x0", detail::vector_json(cfg.sim.x0)},
              {"event_bisection_tol", cfg.sim.event_bisection_tol},
              {"dense_check_factor", cfg.sim.dense_check_factor}};
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  return j;
}

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_to_json(cfg).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Plant {
  ControlAffineSystem sys;
  SafetySpec spec;
};

/// Builds the plant and checks every dimension in the config against it.
inline Plant build_plant(const ExperimentConfig& cfg) {
  Plant plant;
  try {
    if (cfg.plant) {
      const auto& lq = *cfg.plant;
      const Box domain = cfg.domain ? *cfg.domain : Box(Vec::Constant(lq.A.rows(), -3.0), Vec::Constant(lq.A.rows(), 3.0));
      auto [sys, spec] = make_linear_quadratic(lq.A, lq.B, lq.P, lq.S, lq.center, lq.offset, domain);
      spec.gamma = lq.gamma_gain == 1.0 ? ClassKappa::identity() : ClassKappa::linear(lq.gamma_gain);
      spec.alpha = lq.alpha_gain == 1.0 ? ClassKappa::identity() : ClassKappa::linear(lq.alpha_gain);
      plant = {std::move(sys), std::move(spec)};
    } else {
      auto [sys, spec] = make_double_integrator();
      if (cfg.domain) {
        detail::require(cfg.domain->dim() == sys.n, "domain has wrong dimension");
        sys.domain = *cfg.domain;
      }
      plant = {std::move(sys), std::move(spec)};
    }
    const auto& sys = plant.sys;
    cfg.trigger.validate();
    cfg.sim.validate();
    cfg.weights.validate(sys.m);
    detail::require(cfg.sim.x0.size() == sys.n, "sim.x0 has wrong dimension");
    detail::require(sys.domain.contains(cfg.sim.x0), "sim.x0 lies outside the domain");
    detail::require(cfg.K.rows() == sys.m && cfg.K.cols() == sys.n, "state_feedback.K must be m x n");
    detail::require(cfg.H.rows() == sys.m && cfg.H.cols() == sys.m, "baseline.H must be m x m");
    detail::require(cfg.p > 0.0, "baseline.p must be positive");
    if (cfg.st_map == SelfTriggerMap::Lipschitz) {
      detail::require(cfg.st_input_lower.size() == sys.m && cfg.st_input_upper.size() == sys.m,
                      "self_trigger input bounds must have m entries");
      detail::require((cfg.st_input_lower.array() <= cfg.st_input_upper.array()).all(),
                      "self_trigger input_lower exceeds input_upper");
    }
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return plant;
}

inline ControllerSpec controller_spec(ControllerKind kind, const ExperimentConfig& cfg, const Plant& plant) {
  ControllerSpec c;
  c.kind = kind;
  c.st_map = cfg.st_map;
  c.K = cfg.K;
  c.H = cfg.H;
  c.p = cfg.p;
  if (kind == ControllerKind::GreedyST && cfg.st_map == SelfTriggerMap::Lipschitz)
    c.lip = estimate_lipschitz(plant.spec, plant.sys, cfg.st_input_lower, cfg.st_input_upper);
  return c;
}

struct SummaryRow {
  std::string controller;
  std::string status = "ok";  ///< ok, domain_exit or error
  int update_count = 0;
  double min_inter_execution = 0.0;
  double min_h = 0.0;
  double final_V = 0.0;
  double final_state_norm = 0.0;
  double wall_time = 0.0;
  std::string message;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;

  const SummaryRow* find(const std::string& controller) const {
    for (const auto& r : rows)
      if (r.controller == controller) return &r;
    return nullptr;
  }
};

inline SummaryRow summary_row(const std::string& controller, const TraceSummary& s) {
  SummaryRow r;
  r.controller = controller;
  r.update_count = s.update_count;
  r.min_inter_execution = s.min_inter_execution;
  r.min_h = s.min_h;
  r.final_V = s.final_V;
  r.final_state_norm = s.final_state.size() ? s.final_state.norm() : 0.0;
  return r;
}

inline const char* summary_csv_header() {
  return "controller,status,update_count,min_inter_execution,min_h,final_V,final_state_norm,wall_time";
}

inline void write_summary_csv(const std::string& path, const SummaryTable& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << summary_csv_header() << '\n';
  for (const auto& r : table.rows)
    os << r.controller << ',' << r.status << ',' << r.update_count << ',' << detail::fmt17(r.min_inter_execution) << ','
       << detail::fmt17(r.min_h) << ',' << detail::fmt17(r.final_V) << ',' << detail::fmt17(r.final_state_norm) << ','
       << detail::fmt17(r.wall_time) << '\n';
}

inline SummaryTable read_summary_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line) || line != summary_csv_header()) throw ContractViolation(path + ": unexpected header");
  SummaryTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 8) throw ContractViolation(path + ": row has wrong field count");
    SummaryRow r;
    r.controller = f[0];
    r.status = f[1];
    r.update_count = std::stoi(f[2]);
    r.min_inter_execution = detail::parse_double(f[3]);
    r.min_h = detail::parse_double(f[4]);
    r.final_V = detail::parse_double(f[5]);
    r.final_state_norm = detail::parse_double(f[6]);
    r.wall_time = detail::parse_double(f[7]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

inline void print_summary(std::ostream& os, const SummaryTable& table) {
  const char* cols[] = {"controller", "status", "updates", "min_inter", "min_h", "final_V", "|x(T)|", "wall_s"};
  os << std::left << std::setw(16) << cols[0] << std::setw(12) << cols[1] << std::right;
  for (int c = 2; c < 8; ++c) os << std::setw(12) << cols[c];
  os << '\n';
  for (const auto& r : table.rows) {
    os << std::left << std::setw(16) << r.controller << std::setw(12) << r.status << std::right << std::setw(12)
       << r.update_count << std::setprecision(5);
    for (double v : {r.min_inter_execution, r.min_h, r.final_V, r.final_state_norm, r.wall_time})
      os << std::setw(12) << v;
    os << '\n';
  }
}

inline std::string trace_file_name(ControllerKind kind) { return std::string("trace_") + to_string(kind) + ".csv"; }

struct BenchmarkRun {
  ControllerKind kind;
  Trace trace;
  SummaryRow row;
};

struct BenchmarkResult {
  SummaryTable table;
  std::vector<BenchmarkRun> runs;
  int exit_code = 0;
};

/// Runs every requested controller concurrently. With a nonempty out_dir,
/// writes trace_<controller>.csv per run, summary.csv and config.json.
/// exit_code is 1 if any run left the domain or failed numerically.
inline BenchmarkResult run_benchmark(const ExperimentConfig& cfg, const std::string& out_dir) {
  const Plant plant = build_plant(cfg);
  std::vector<ControllerSpec> ctrls;
  for (auto kind : cfg.controllers) ctrls.push_back(controller_spec(kind, cfg, plant));

  std::vector<std::future<BenchmarkRun>> jobs;
  for (const auto& ctrl : ctrls) {
    jobs.push_back(std::async(std::launch::async, [&cfg, &plant, ctrl] {
      BenchmarkRun run{ctrl.kind, {}, {}};
      const auto start = std::chrono::steady_clock::now();
      std::string status = "ok", message;
      try {
        run.trace = run_closed_loop(ctrl, plant.spec, plant.sys, cfg.sim, cfg.trigger, cfg.weights);
      } catch (const SimulationDomainExit& e) {
        run.trace = e.partial;
        status = "domain_exit";
        message = e.what();
      } catch (const std::exception& e) {
        run.trace.initial_state = cfg.sim.x0;
        status = "error";
        message = e.what();
      }
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      run.row = summary_row(to_string(ctrl.kind), run.trace.summary(plant.spec));
      run.row.status = status;
      run.row.message = message;
      run.row.wall_time = wall;
      return run;
    }));
  }

  BenchmarkResult result;
  for (auto& job : jobs) {
    result.runs.push_back(job.get());
    result.table.rows.push_back(result.runs.back().row);
    if (result.runs.back().row.status != "ok") result.exit_code = 1;
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    for (const auto& run : result.runs)
      write_trace_csv((dir / trace_file_name(run.kind)).string(), run.trace, plant.sys.n, plant.sys.m);
    write_summary_csv((dir / "summary.csv").string(), result.table);
    std::ofstream((dir / "config.json").string()) << config_to_json(cfg).dump(2) << '\n';
  }
  return result;
}

}  // namespace etcbf
