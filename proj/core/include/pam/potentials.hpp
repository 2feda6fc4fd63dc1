#pragma once

// i.i.d. potential families and their tail descriptors
//   F(r) = P(xi <= r),  phi(r) = log 1/(1 - F(r)),
//   psi(s) = min{r : phi(r) >= s},  H(t) = log E exp(t xi).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pam/lattice.hpp"

namespace pam {

enum class Family { double_exponential, bernoulli_trap, bounded_tail, tabulated };

std::string_view to_string(Family f);

struct PotentialSpec {
  Family family = Family::double_exponential;
  double rho = 1.0;     // double_exponential
  double p_trap = 0.0;  // bernoulli_trap: P(xi = -inf)
  double D = 1.0;       // bounded_tail
  double gamma = 0.5;   // bounded_tail
  // tabulated: nondecreasing knots r with F values in [0, 1]; F is linear
  // between knots, a repeated knot is a jump. F = 0 left of the first knot
  // and 1 right of the last.
  std::vector<double> r;
  std::vector<double> F;

  static PotentialSpec double_exponential(double rho);
  static PotentialSpec bernoulli_trap(double p_trap);
  static PotentialSpec bounded_tail(double D, double gamma);
  static PotentialSpec tabulated(std::vector<double> r, std::vector<double> F);
  // Point mass at c, as a tabulated law.
  static PotentialSpec constant(double c);

  // Throws ConfigError naming the offending field.
  void validate() const;

  // {"family": ..., "params": {...}}; unknown keys are rejected.
  static PotentialSpec from_json(std::string_view text);
  std::string to_json() const;
};

// Inverse-transform draw for a uniform u in (0, 1).
double quantile(const PotentialSpec& spec, double u);

// One draw per site, keyed by the site's lattice coordinates, so the value
// at a point does not depend on the box it is sampled in.
Field sample_field(const PotentialSpec& spec, const Box& box, std::uint64_t seed);

class TailFunctions {
 public:
  explicit TailFunctions(PotentialSpec spec);

  const PotentialSpec& spec() const noexcept { return spec_; }
  double cdf(double r) const;
  double phi(double r) const;  // +inf once F(r) = 1
  double psi(double s) const;  // closed form where available
  // psi by monotone bisection on phi, valid for every family.
  double psi_bisection(double s) const;
  // Throws DivergenceError where E exp(t xi) = +inf.
  double H(double t) const;
  // H by numerical quadrature (independent of any closed form).
  double H_quadrature(double t) const;
  double ess_sup() const;

 private:
  PotentialSpec spec_;
};

struct HLimitEstimate {
  std::vector<double> t;
  std::vector<double> ratios;  // (H(ct) - c H(t)) / t
  double extrapolated = 0.0;
  bool converged = false;
  std::optional<double> limit;  // set only when converged
};

// Finite-t ratios and their extrapolation in the basis {1, log t / t, 1/t}.
HLimitEstimate assumption_H_limit(const PotentialSpec& spec, double c,
                                  std::span<const double> t_grid);

struct Height {
  double h = 0.0;
  std::vector<std::size_t> argmax;  // all maximizing sites
};

Height max_height(const Field& f);
// Same, restricted to the sites within sup-distance radius of the box center.
Height max_height(const Field& f, int radius);

// The two finite-t normalizations psi(d log t) and psi(log |B_t|).
struct HeightNormalization {
  double psi_d_log_t = 0.0;
  double psi_log_box = 0.0;
};
HeightNormalization height_normalization(const TailFunctions& tails, int d, double t);

// alpha^2 [f(floor(x alpha)) - shift] on the grid x_j = -R + j*step of
// [-R, R]^d (row-major, axis 0 slowest). Coordinates are relative to the
// box center.
struct ContinuumSample {
  int dim = 1;
  double step = 1.0;
  std::vector<double> axis;
  std::vector<double> values;
};

ContinuumSample rescale_shift(const Field& f, double shift, double alpha, double R,
                              std::optional<double> step = std::nullopt);

}  // namespace pam
