#pragma once

// Trace CSV: one row per sample,
//   t,x1..xn,u1..um,V,h,p,q,is_execution,event_kind,feasible,active_set
// Execution rows carry event_kind (initial, periodic or a trigger name),
// feasible (0/1) and the QP active set as ';'-separated indices. Floats use
// 17 significant digits so parsing reproduces the in-memory trace exactly.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "etcbf/errors.hpp"
#include "etcbf/sim.hpp"

namespace etcbf {

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ContractViolation("trace CSV: bad number '" + s + "'");
  }
}

}  // namespace detail

/// Bitwise equality of two traces (samples and execution records).
inline bool traces_identical(const Trace& a, const Trace& b) {
  auto same = [](const Vec& x, const Vec& y) { return x.size() == y.size() && (x.array() == y.array()).all(); };
  if (a.samples.size() != b.samples.size() || a.executions.size() != b.executions.size()) return false;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    const Sample &s = a.samples[i], &r = b.samples[i];
    if (s.t != r.t || !same(s.x, r.x) || !same(s.u, r.u) || s.V != r.V || s.h != r.h || s.p != r.p || s.q != r.q ||
        s.is_execution != r.is_execution)
      return false;
  }
  for (size_t k = 0; k < a.executions.size(); ++k) {
    const Execution &e = a.executions[k], &f = b.executions[k];
    if (e.t != f.t || !same(e.u, f.u) || e.trigger != f.trigger || e.active_set != f.active_set ||
        e.feasible != f.feasible)
      return false;
  }
  return true;
}

inline std::string trace_csv_header(int n, int m) {
  std::string h = "t";
  for (int i = 1; i <= n; ++i) h += ",x" + std::to_string(i);
  for (int j = 1; j <= m; ++j) h += ",u" + std::to_string(j);
  return h + ",V,h,p,q,is_execution,event_kind,feasible,active_set";
}

inline void write_trace_csv(std::ostream& os, const Trace& trace, int n, int m) {
  os << trace_csv_header(n, m) << '\n';
  size_t exec = 0;
  for (const auto& s : trace.samples) {
    os << detail::fmt17(s.t);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) os << ',' << detail::fmt17(s.x(i));
    for (Eigen::Index j = 0; j < s.u.size(); ++j) os << ',' << detail::fmt17(s.u(j));
    os << ',' << detail::fmt17(s.V) << ',' << detail::fmt17(s.h) << ',' << detail::fmt17(s.p) << ','
       << detail::fmt17(s.q) << ',' << (s.is_execution ? 1 : 0) << ',';
    if (s.is_execution) {
      detail::require(exec < trace.executions.size(), "write_trace_csv: more execution rows than records");
      const Execution& e = trace.executions[exec];
      if (e.trigger)
        os << to_string(*e.trigger);
      else
        os << (exec == 0 ? "initial" : "periodic");
      os << ',' << (e.feasible ? 1 : 0) << ',';
      for (size_t a = 0; a < e.active_set.size(); ++a) os << (a ? ";" : "") << e.active_set[a];
      ++exec;
    } else {
      os << ",,";
    }
    os << '\n';
  }
}

inline void write_trace_csv(const std::string& path, const Trace& trace, int n, int m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_trace_csv(os, trace, n, m);
}

struct ParsedTrace {
  Trace trace;
  int n = 0;
  int m = 0;
};

inline ParsedTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ContractViolation("trace CSV: missing header");
  const auto cols = detail::split(line, ',');
  ParsedTrace out;
  for (const auto& c : cols) {
    if (c.size() > 1 && c[0] == 'x' && std::isdigit(static_cast<unsigned char>(c[1]))) ++out.n;
    if (c.size() > 1 && c[0] == 'u' && std::isdigit(static_cast<unsigned char>(c[1]))) ++out.m;
  }
  if (line != trace_csv_header(out.n, out.m)) throw ContractViolation("trace CSV: unexpected header");
  const size_t width = cols.size();

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != width) throw ContractViolation("trace CSV: row has wrong field count");
    Sample s;
    size_t c = 0;
    s.t = detail::parse_double(f[c++]);
    s.x.resize(out.n);
    for (int i = 0; i < out.n; ++i) s.x(i) = detail::parse_double(f[c++]);
    s.u.resize(out.m);
    for (int j = 0; j < out.m; ++j) s.u(j) = detail::parse_double(f[c++]);
    s.V = detail::parse_double(f[c++]);
    s.h = detail::parse_double(f[c++]);
    s.p = detail::parse_double(f[c++]);
    s.q = detail::parse_double(f[c++]);
    s.is_execution = f[c++] == "1";
    if (s.is_execution) {
      Execution e;
      e.t = s.t;
      e.u = s.u;
      const std::string& kind = f[c++];
      if (kind != "initial" && kind != "periodic") {
        e.trigger = trigger_kind_from_string(kind);
        if (!e.trigger) throw ContractViolation("trace CSV: unknown event kind '" + kind + "'");
      }
      e.feasible = f[c++] == "1";
      for (const auto& a : detail::split(f[c++], ';'))
        if (!a.empty()) e.active_set.push_back(std::stoi(a));
      out.trace.executions.push_back(std::move(e));
    }
    out.trace.samples.push_back(std::move(s));
  }
  if (!out.trace.samples.empty()) out.trace.initial_state = out.trace.samples.front().x;
  return out;
}

inline ParsedTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_trace_csv(is);
}

}  // namespace etcbf
