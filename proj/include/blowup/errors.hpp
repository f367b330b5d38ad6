#pragma once

#include <stdexcept>
#include <string>

namespace blowup {

/// Categories map onto the CLI exit-code contract (see cli::exit_code_for).
enum class ErrorKind {
  Structural,  // inconsistent dimensions or malformed data
  Validation,  // an identity or invariant does not hold
  Domain,      // argument outside the admissible set
  Budget,      // tolerance or sample budget cannot be met
  Numeric,     // solver failure
  Io,          // file/parse failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& w) : Error(ErrorKind::Structural, w) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};

/// Thrown when a tolerance is unreachable; carries the best estimate so far.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& w, double best_estimate, double error_estimate)
      : Error(ErrorKind::Budget, w), best_(best_estimate), err_(error_estimate) {}
  double best_estimate() const noexcept { return best_; }
  double error_estimate() const noexcept { return err_; }

 private:
  double best_;
  double err_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

const char* to_string(ErrorKind kind);

}  // namespace blowup
