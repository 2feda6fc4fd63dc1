#pragma once

// The characteristic variational problems on a zero-Dirichlet box:
//   chi_d       = inf over probability measures mu of kappa S_d(mu) + rho I_d(mu)
//   chi_tilde_d = -sup { lambda(V) : V <= 0, sum exp(V/rho) <= 1 }
// with S_d(mu) = <-Delta sqrt(mu), sqrt(mu)> and I_d(mu) = -sum mu log mu.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pam/lattice.hpp"

namespace pam {

// Throws ConfigError unless mu >= 0 and sum mu = 1 within 1e-12.
void validate_measure(const Field& mu);

double donsker_varadhan(const Field& mu);
double entropy(const Field& mu);

struct VarOptions {
  std::size_t max_iterations = 20000;
  double grad_tol = 1e-10;
  double boundary_tol = 1e-8;
  bool check_boundary = true;
  bool polish = true;  // chi_tilde: Newton polish of the fixed point
};

struct VarSolution {
  double value = 0.0;
  int dim = 1;
  int radius = 0;
  // chi: minimizing measure; chi_tilde: maximizing potential V.
  Field profile;
  // chi_tilde: the normalized principal eigenfunction of kappa Delta + V.
  Field eigenfunction;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective along the iterations of the best start
  double boundary_mass = 0.0;
  std::optional<double> tensorized;  // d * chi_1 (chi only, d > 1)
  std::vector<double> local_optima;  // distinct values over the start family
  double feasibility = 0.0;          // chi_tilde: |I(V) - 1|
};

VarSolution chi_d(int d, double kappa, double rho, int R, const VarOptions& opts = {});

struct LogisticSolution {
  Field v;
  double residual = 0.0;  // sup norm of kappa Delta v + 2 rho v log v
  double norm = 0.0;      // l2 norm of v
  std::vector<double> candidate_norms;
};

// Positive solution of kappa Delta v + 2 rho v log v = 0 on [-R, R] with
// the zero condition outside and minimal l2 norm among the solutions found.
LogisticSolution logistic_equation_1d(double kappa, double rho, int R);

// sum exp(V/rho); the number of sites with V > -inf when rho = inf.
double rate_I(const Field& V, double rho);

VarSolution chi_tilde_d(int d, double kappa, double rho, int R, const VarOptions& opts = {});

struct ShapeResult {
  double chi_tilde = 0.0;
  Field V;  // maximum at the box center
  Field w;  // eigenfunction scaled so that w(0) = 1
  std::vector<double> eps;
  std::vector<int> r;  // r(eps), or -1 when no radius inside the box works
  bool multiple_maxima = false;
};

ShapeResult optimal_shapes(int d, double kappa, double rho, int R,
                           std::vector<double> eps = {0.5, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-4},
                           const VarOptions& opts = {});

// Shifts V and w so the maximum of V sits at the center; idempotent.
ShapeResult center_shapes(ShapeResult shapes);

// Smallest r with ||w||_2^2 sum_{x outside B_r} w(x) < eps, or -1.
int mass_radius(const Field& w, double eps);

struct IRResult {
  double value = 0.0;
  bool divergent = false;
  std::vector<double> refinements;
};

// Riemann sum of |phi|^{-gamma/(1-gamma)} with cell volume step^d. For
// gamma = 0 the measure of {phi > -inf}. phi = 0 with gamma > 0 gives +inf.
IRResult rate_IR_bounded(std::span<const double> phi, int d, double step, double gamma);

// Midpoint sums over (-R, R)^d with successively halved steps until the
// relative change drops below rel_tol; a non-settling sequence is divergent.
IRResult rate_IR_bounded(const std::function<double(std::span<const double>)>& phi, int d,
                         double R, double gamma, double rel_tol = 1e-6);

}  // namespace pam
