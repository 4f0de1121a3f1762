#pragma once

// Seeded random QPs and a solver-vs-oracle comparison harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "etcbf/kkt_oracle.hpp"
#include "etcbf/qp.hpp"

namespace etcbf {

/// Q = M'M + 1e-3 I with every other entry (M, c, A, b) uniform in [-2, 2];
/// 1..max_vars variables and 0..max_cons constraints.
inline QuadraticProgram random_qp(std::mt19937_64& rng, int max_vars = 4, int max_cons = 8) {
  std::uniform_real_distribution<double> entry(-2.0, 2.0);
  const int n = std::uniform_int_distribution<int>(1, max_vars)(rng);
  const int m = std::uniform_int_distribution<int>(0, max_cons)(rng);
  auto fill = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) M(i, j) = entry(rng);
    return M;
  };
  const Eigen::MatrixXd M = fill(n, n);
  QuadraticProgram qp;
  qp.Q = M.transpose() * M + 1e-3 * Eigen::MatrixXd::Identity(n, n);
  qp.c = fill(n, 1);
  qp.A = fill(m, n);
  qp.b = fill(m, 1);
  return qp;
}

struct OracleComparison {
  int cases = 0;
  int mismatches = 0;
  int optimal = 0;
  int infeasible = 0;
  double max_objective_error = 0.0;
  double max_optimizer_error = 0.0;
  std::string first_mismatch;

  bool ok() const { return mismatches == 0; }
};

/// Status must agree; optimal cases must agree in objective within 1e-6 and
/// optimizer within 1e-5 (infinity norm).
inline OracleComparison compare_with_oracle(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OracleComparison out;
  for (int i = 0; i < count; ++i) {
    const QuadraticProgram qp = random_qp(rng);
    ++out.cases;
    const QpSolution a = solve_qp(qp);
    const QpSolution b = solve_kkt_oracle(qp);
    bool match = a.status == b.status;
    if (match && a.status == QpStatus::Optimal) {
      ++out.optimal;
      const double de = std::abs(a.objective - b.objective);
      const double dx = (a.v_star - b.v_star).cwiseAbs().maxCoeff();
      out.max_objective_error = std::max(out.max_objective_error, de);
      out.max_optimizer_error = std::max(out.max_optimizer_error, dx);
      match = de <= 1e-6 && dx <= 1e-5;
    } else if (match && a.status == QpStatus::Infeasible) {
      ++out.infeasible;
    }
    if (!match) {
      if (out.mismatches == 0) {
        std::ostringstream os;
        os << "case " << i << ": solver " << to_string(a.status) << " obj " << a.objective << ", oracle "
           << to_string(b.status) << " obj " << b.objective;
        out.first_mismatch = os.str();
      }
      ++out.mismatches;
    }
  }
  return out;
}

}  // namespace etcbf
