#pragma once

#include <span>

#include "pam/lattice.hpp"

namespace pam {

// exp(tau * kappa * Delta) on a domain with the zero condition outside it.
// Every domain site has diagonal -2d, so the exponential factors as
// exp(-2d kappa tau) exp(tau kappa A) with A the nonnegative adjacency
// matrix; the Taylor series of the second factor has nonnegative terms only,
// which keeps the result nonnegative and free of cancellation.
class DiffusionPropagator {
 public:
  DiffusionPropagator(const Domain& domain, double kappa);

  void apply(std::span<double> x, double tau) const;

  const Domain& domain() const noexcept { return *domain_; }
  double kappa() const noexcept { return kappa_; }

 private:
  const Domain* domain_;
  double kappa_;
};

}  // namespace pam
