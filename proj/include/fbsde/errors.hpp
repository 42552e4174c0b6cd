#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fbsde {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveKernel : Error {
  using Error::Error;
};
struct BadSimplex : Error {
  using Error::Error;
};
struct LimitExceeded : Error {
  using Error::Error;
};
struct MissingChild : Error {
  using Error::Error;
};
struct IndexOutOfRange : Error {
  using Error::Error;
};
struct LeafNode : Error {
  using Error::Error;
};
struct TimeOutOfRange : Error {
  using Error::Error;
};
struct NotCentered : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct ControlOutOfDomain : Error {
  using Error::Error;
};
struct MissingYZ : Error {
  using Error::Error;
};
struct InfeasibleDirection : Error {
  using Error::Error;
};
struct SingularJacobian : Error {
  using Error::Error;
};

// Carries the residual reached when the iteration budget ran out.
struct NoConvergence : Error {
  NoConvergence(const std::string& msg, double residual, int iterations)
      : Error(msg), last_residual(residual), iterations(iterations) {}
  double last_residual;
  int iterations;
};

// Carries the combination count that broke the enumeration budget.
struct BudgetExceeded : Error {
  BudgetExceeded(const std::string& msg, double required, double budget)
      : Error(msg), required(required), budget(budget) {}
  double required;
  double budget;
};

struct ParseError : Error {
  ParseError(int line, const std::string& message)
      : Error("parse error at line " + std::to_string(line) + ": " + message),
        line(line) {}
  int line;
};

struct NodeMismatch : Error {
  using Error::Error;
};

// parse_config collects every validation problem before giving up; each issue
// names the offending field.
struct ConfigIssue {
  std::string field;
  std::string reason;
};

struct ValidationError : Error {
  explicit ValidationError(std::vector<ConfigIssue> issues_)
      : Error(format(issues_)), issues(std::move(issues_)) {}
  std::vector<ConfigIssue> issues;

 private:
  static std::string format(const std::vector<ConfigIssue>& issues) {
    std::string s = "invalid config:";
    for (const auto& i : issues) s += "\n  " + i.field + ": " + i.reason;
    return s;
  }
};

}  // namespace fbsde
