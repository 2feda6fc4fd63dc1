#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pam/potentials.hpp"

namespace pam {

// Auxiliary scale function eta together with its regular-variation data.
struct EtaFunction {
  std::function<double(double)> eta;
  double gamma = 1.0;     // index of regular variation
  double eta_star = 0.0;  // lim eta(t)/t, may be +inf
  std::string name;

  double operator()(double t) const { return eta(t); }

  static EtaFunction power(double gamma, double scale = 1.0);  // scale * t^gamma
  static EtaFunction t_log_t();                                 // t log t
  static EtaFunction t_over_log_t();                            // t / log t
  // "power:<g>", "linear:<c>", "tlogt", "t/logt", "double-exponential",
  // "bounded:<g>", "trap"
  static EtaFunction parse(std::string_view text);
};

EtaFunction eta_for(const PotentialSpec& spec);

struct ScalingProfile {
  double gamma = 1.0;
  double rho = 1.0;
  double eta_star = 0.0;
  int cls = 2;
};

double hhat(double y, const ScalingProfile& profile);

// 1: single sites, 2: double-exponential, 3: slowly growing islands,
// 4: rapidly growing islands.
int classify(double gamma, double eta_star);
ScalingProfile make_profile(double gamma, double rho, double eta_star);

// nu = (1 - gamma) / (d + 2 - d gamma) for gamma < 1, 0 otherwise.
double island_exponent(double gamma, int d);

struct ScaleRoot {
  double alpha = 0.0;
  double residual = 0.0;     // relative residual of the defining equation
  double t_alpha_d = 0.0;    // t alpha^{-d} for the annealed scale
  int iterations = 0;
};

// Root alpha of eta(t alpha^{-d}) / (t alpha^{-d}) = alpha^{-2}.
ScaleRoot alpha_annealed(const EtaFunction& eta, int d, double t);

// Root of a / alpha(a)^2 = d log t.
ScaleRoot alpha_quenched(const std::function<double(double)>& alpha, int d, double t);

struct Class3Check {
  int dim = 1;
  double step = 0.0;
  double R = 0.0;
  std::size_t points_per_axis = 0;
  double lambda = 0.0;           // top eigenvalue of kappa Delta - rho |x|^2
  double lambda_continuum = 0.0; // -d sqrt(kappa rho)
  double a_fit = 0.0;            // fitted exponent of e^{-a |x|^2}
  double a_continuum = 0.0;      // sqrt(rho / kappa) / 2
  double rel_l2_error = 0.0;
  double boundary_mass = 0.0;
  double symmetry_error = 0.0;
  double factorization_error = 0.0;  // d = 2 only
  std::vector<double> eigenfunction; // normalized, max = 1, row-major
};

// Ground state of the discretized kappa Delta - rho |x|^2 on [-R, R]^d
// with grid step h, and its best Gaussian fit.
Class3Check class3_check(double rho, double kappa, int d, double R, double step);

}  // namespace pam
