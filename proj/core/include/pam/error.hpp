#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pam {

// Exit-code family an error belongs to; the CLI maps these onto process
// exit codes (2, 3, 4).
enum class ErrorKind { config, numeric, inconclusive };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Invalid parameters, schema violations, malformed files.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what);
};

class ParseError : public ConfigError {
 public:
  explicit ParseError(const std::string& what);
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what);
};

// An operator was applied to a field that still contains -inf entries.
class SingularSiteError : public NumericError {
 public:
  SingularSiteError(std::size_t index, const std::string& point);
  std::size_t site_index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// H(t) = +inf for the requested t.
class DivergenceError : public NumericError {
 public:
  explicit DivergenceError(const std::string& what);
};

// Iterative method exhausted its budget; carries the residual history.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history);
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

// Box too small for the requested quantity (boundary mass above tolerance).
class BoxTooSmallError : public NumericError {
 public:
  BoxTooSmallError(const std::string& what, double boundary_mass);
  double boundary_mass() const noexcept { return boundary_mass_; }

 private:
  double boundary_mass_;
};

// Two independent numerical routes disagree beyond tolerance.
class MethodDisagreementError : public NumericError {
 public:
  MethodDisagreementError(const std::string& what, double first, double second);
  double first() const noexcept { return first_; }
  double second() const noexcept { return second_; }

 private:
  double first_;
  double second_;
};

// Parameters lie outside the regime in which a closed form applies.
class RegimeError : public ConfigError {
 public:
  explicit RegimeError(const std::string& what);
};

class InconclusiveError : public Error {
 public:
  explicit InconclusiveError(const std::string& what);
};

}  // namespace pam
