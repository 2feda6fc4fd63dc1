#pragma once

// Resolvent of the lattice Laplacian at the origin,
//   R_mu(0,0) = int_0^inf exp(-mu s) (exp(-2s) I_0(2s))^d ds,
// the Green function G_d(0) = R_0(0,0), and the top mu(r) of the spectrum
// of Delta + r delta_0.

#include <string_view>
#include <vector>

namespace pam {

// refinement splits every quadrature panel into 2^refinement pieces.
double resolvent_origin(double mu, int d, int refinement = 0);

struct GreenValue {
  double G = 0.0;            // +inf for d <= 2
  double r_threshold = 0.0;  // 1/G, zero for d <= 2
  bool recurrent = false;
};

GreenValue green_function_origin(int d, int refinement = 0);

enum class MuMethod { resolvent, box, both };

std::string_view to_string(MuMethod m);
MuMethod parse_mu_method(std::string_view text);

struct RankOneResult {
  double r = 0.0;
  int d = 1;
  double mu = 0.0;
  double residual = 0.0;  // |r R_mu(0,0) - 1| for the resolvent route
  MuMethod method = MuMethod::resolvent;
  // Box route: radii and top eigenvalues before extrapolation.
  std::vector<int> radii;
  std::vector<double> box_values;
  double extrapolated = 0.0;  // box route value before clamping at 0
};

struct MuOptions {
  MuMethod method = MuMethod::resolvent;
  std::vector<int> radii;      // box route; defaults depend on d
  double agreement_tol = 1e-4;  // for method both
};

RankOneResult mu_of_r(double r, int d, const MuOptions& opts = {});

// Top eigenvalue of Delta + r delta_0 on the zero-Dirichlet box [-R, R]^d,
// from the secular equation over the modes that do not vanish at 0.
double box_top_eigenvalue(double r, int d, int R);

}  // namespace pam
