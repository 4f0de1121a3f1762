#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace etcbf {

/// Caller broke a documented precondition (dimension mismatch, bad parameters).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state was evaluated outside the system's domain box.
class DomainViolation : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The active-set iteration hit its cap or produced a singular working set.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnboundedObjective : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Margin constraints (eps1, eps2) cannot be met at the queried state.
class MarginFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration left the domain box. Carries the last in-domain sample.
class DomainExit : public std::runtime_error {
 public:
  DomainExit(double t, Eigen::VectorXd x)
      : std::runtime_error("trajectory left the domain at t=" + std::to_string(t)),
        last_time(t),
        last_state(std::move(x)) {}

  double last_time;
  Eigen::VectorXd last_state;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace detail
}  // namespace etcbf
