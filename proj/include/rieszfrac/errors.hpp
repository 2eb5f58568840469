#pragma once

#include <stdexcept>
#include <string>

namespace rieszfrac {

// Exit codes used by the command-line harness. Library errors carry one of
// these so callers can map failures without string matching.
enum class ErrorKind : int {
  internal = 1,
  parse = 2,
  geometry = 3,
  dependence = 4,
  budget = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorKind::parse, what) {}
};

// Depth-1 cylinders overlap or touch, or a separation constant is violated.
struct SeparationError : Error {
  explicit SeparationError(const std::string& what)
      : Error(ErrorKind::geometry, what) {}
};

struct DependenceError : Error {
  explicit DependenceError(const std::string& what)
      : Error(ErrorKind::dependence, what) {}
};

struct BudgetError : Error {
  explicit BudgetError(const std::string& what) : Error(ErrorKind::budget, what) {}
};

// Two points of a configuration coincide, so the Riesz energy is infinite.
struct CoincidentPointsError : Error {
  explicit CoincidentPointsError(const std::string& what)
      : Error(ErrorKind::geometry, what) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& what)
      : Error(ErrorKind::internal, what) {}
};

}  // namespace rieszfrac
