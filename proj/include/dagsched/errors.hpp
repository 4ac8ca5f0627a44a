#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagsched {

// Error categories map to CLI exit codes: Validation -> 2, Infeasible -> 3,
// Solver -> 4.
enum class ErrorKind { Validation, Infeasible, Solver };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg)
      : Error(ErrorKind::Validation, msg) {}
};

// Carries the node ids of one offending cycle.
class CycleError : public ValidationError {
 public:
  CycleError(const std::string& msg, std::vector<std::int64_t> cycle)
      : ValidationError(msg), cycle_(std::move(cycle)) {}
  const std::vector<std::int64_t>& cycle() const { return cycle_; }

 private:
  std::vector<std::int64_t> cycle_;
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& msg)
      : Error(ErrorKind::Infeasible, msg) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& msg)
      : Error(ErrorKind::Solver, msg) {}
};

}  // namespace dagsched
