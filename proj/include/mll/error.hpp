#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mll {

/// Invalid input: malformed tables, inclusion violations, overlapping sets.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SolveFailure {
  NonConvergence,
  Divergence,
  SubSolver,
  InconsistentMargins,
  AllMethodsFailed,
};

const char* to_string(SolveFailure kind);

/// A numerical inversion did not reach its tolerance. Carries the residual
/// trace of the failing attempt(s) so callers can report it.
class SolveError : public std::runtime_error {
 public:
  SolveError(SolveFailure kind, const std::string& what,
             std::vector<double> trace = {})
      : std::runtime_error(what), kind_(kind), trace_(std::move(trace)) {}

  SolveFailure kind() const noexcept { return kind_; }
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  SolveFailure kind_;
  std::vector<double> trace_;
};

}  // namespace mll
