#pragma once

// Principal eigenpair of kappa Delta + V on the domain {V > -inf} with the
// zero condition outside it.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "pam/lattice.hpp"

namespace pam {

enum class EigenMethod { automatic, krylov, power, dense };

std::string_view to_string(EigenMethod m);
EigenMethod parse_eigen_method(std::string_view text);

struct EigenOptions {
  EigenMethod method = EigenMethod::automatic;
  double tol = 1e-10;  // residual <= tol * (|lambda| + 1)
  std::size_t max_iterations = 100000;  // operator applications
  const Field* warm_start = nullptr;
};

struct SpectralResult {
  double lambda = kNegInf;
  Field eigenfunction;  // nonnegative, unit l2 norm; zero when the domain is empty
  double residual = 0.0;
  std::size_t iterations = 0;
  bool empty_domain = false;
  // Another connected component attains the same eigenvalue.
  bool degenerate = false;
  EigenMethod method = EigenMethod::automatic;
};

SpectralResult principal_eigen(const Field& V, double kappa, const EigenOptions& opts = {});

// <(kappa Delta + V) f, f>; f must have unit norm and vanish where V = -inf.
double rayleigh_quotient(const Field& V, double kappa, const Field& f);

// All eigenvalues of the restricted operator in ascending order (dense).
std::vector<double> dense_spectrum(const Field& V, double kappa);

}  // namespace pam
