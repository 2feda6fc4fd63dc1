#include "pam/error.hpp"

#include <utility>

namespace pam {

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

ConfigError::ConfigError(const std::string& what)
    : Error(ErrorKind::config, what) {}

ParseError::ParseError(const std::string& what) : ConfigError(what) {}

NumericError::NumericError(const std::string& what)
    : Error(ErrorKind::numeric, what) {}

SingularSiteError::SingularSiteError(std::size_t index, const std::string& point)
    : NumericError("singular site (value -inf) at index " + std::to_string(index) +
                   ", point " + point),
      index_(index) {}

DivergenceError::DivergenceError(const std::string& what) : NumericError(what) {}

ConvergenceError::ConvergenceError(const std::string& what, std::vector<double> history)
    : NumericError(what), history_(std::move(history)) {}

BoxTooSmallError::BoxTooSmallError(const std::string& what, double boundary_mass)
    : NumericError(what + " (boundary mass " + std::to_string(boundary_mass) + ")"),
      boundary_mass_(boundary_mass) {}

MethodDisagreementError::MethodDisagreementError(const std::string& what, double first,
                                                 double second)
    : NumericError(what + ": " + std::to_string(first) + " vs " + std::to_string(second)),
      first_(first),
      second_(second) {}

RegimeError::RegimeError(const std::string& what) : ConfigError(what) {}

InconclusiveError::InconclusiveError(const std::string& what)
    : Error(ErrorKind::inconclusive, what) {}

}  // namespace pam
