#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pam/lattice.hpp"
#include "pam/potentials.hpp"
#include "pam/solver.hpp"
#include "pam/stats.hpp"
#include "pam/variational.hpp"

namespace pam {

enum class Verdict { intermittent, not_intermittent, inconclusive };
std::string_view to_string(Verdict v);

// Exact Hoelder ordering of Lambda_p / p across the p column of a table.
bool holder_ordered(const MomentTable& table, double tol = 1e-10);

struct GapTrend {
  double p = 2.0;
  std::vector<double> t;
  std::vector<double> gap;       // Lambda_p/p - Lambda_{p-1}/(p-1)
  std::vector<double> gap_half;  // combined CI half widths
  stats::LineFit fit;
  bool increasing = false;
  Verdict verdict = Verdict::inconclusive;
};

GapTrend p_intermittency_test(const MomentTable& table, double p);

struct AnnealedRow {
  double t = 0.0;
  double lambda_over_t = 0.0;  // (1/t) Lambda_p(t)
  double ci_lo = 0.0;          // scaled by 1/t
  double ci_hi = 0.0;
  double prediction = 0.0;     // (H(pt) - chi p t) / t
  double difference = 0.0;
  double sandwich_lo = 0.0;    // (H(pt) - 2d kappa p t) / t
  double sandwich_hi = 0.0;    // H(pt) / t
  bool low_ess = false;
};

struct AnnealedCheck {
  double p = 1.0;
  double chi = 0.0;
  std::vector<AnnealedRow> rows;
  MomentTable table;
  bool trend_to_zero = false;  // |difference| decreasing along the t grid
};

struct AnnealedOptions {
  std::size_t realizations = 200;
  std::uint64_t seed = 0;
  int radius = 0;  // 0: default_radius at the largest t
  std::size_t bootstrap = 200;
  double dt_max = 0.01;
  int threads = 0;
};

AnnealedCheck annealed_check(const PotentialSpec& spec, int d, double kappa, double p,
                             std::vector<double> t_grid, double chi, const AnnealedOptions& opts);

struct QuenchedRow {
  double t = 0.0;
  int radius = 0;
  double h_t = 0.0;
  double log_U_over_t = 0.0;
  double gap = 0.0;          // h_t - (1/t) log U(t)
  double difference = 0.0;   // gap - chi_tilde
  double lower_bound = 0.0;  // explicit single-path bound on (1/t) log U(t)
  double boundary_fraction = 0.0;
  std::vector<std::size_t> argmax;
};

struct QuenchedCheck {
  double chi_tilde = 0.0;
  std::vector<QuenchedRow> rows;
  bool trend_to_zero = false;
};

struct QuenchedOptions {
  double dt_max = 0.01;
  double boundary_tol = 0.5;  // tolerated fraction of U(t) on the outer shell
};

// u0 = delta_0 evolved on B_t (radius ceil(t)) for every t in the grid.
QuenchedCheck quenched_check(const PotentialSpec& spec, int d, double kappa,
                             std::vector<double> t_grid, std::uint64_t seed, double chi_tilde,
                             const QuenchedOptions& opts = {});

// Largest lower bound on log U(t) from walks that run straight to the site
// z and stay there.
double single_path_lower_bound(const Field& xi, double kappa, double t, std::size_t z);

struct Island {
  Point center;
  double log_u = 0.0;          // log u(t, center)
  double captured = 0.0;       // fraction of U(t) in B_r(center)
  double potential_distance = 0.0;  // sup over B_R of |xi(y+.) - h_t - V*|
  double profile_distance = 0.0;    // sup over B_R of |u(y+.)/u(y) - w*|
};

struct IslandReport {
  std::vector<Island> islands;
  double captured_fraction = 0.0;
  int min_pairwise_distance = 0;  // 0 when fewer than two islands
  double log_count_over_log_t = 0.0;
  int capture_radius = 0;
  int shape_radius = 0;
  double delta_min = 0.0;
  bool target_reached = false;
};

struct IslandOptions {
  double t = 0.0;               // used for the default separation t^0.9
  double delta_min = -1.0;      // < 0: t^0.9 (or 1 when t <= 1)
  std::size_t k_max = 20;
  int capture_radius = -1;      // < 0: r(eps) from the shapes, else R
};

// u may carry any positive overall scale.
IslandReport extract_islands(const Field& xi, const Field& u, double h_t, const ShapeResult& shapes,
                             double eps, int R, const IslandOptions& opts = {});

struct CorrelationPoint {
  int x = 0;               // offset along the first axis
  double c = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double limit_rho = 0.0;   // autocorrelation of the chi minimizer at rho
  double limit_prho = 0.0;  // same at p rho with p = 2
};

struct CorrelationProfile {
  double t = 0.0;
  std::vector<CorrelationPoint> points;
  double ess = 0.0;
  bool inconclusive = false;
};

struct CorrelationOptions {
  std::size_t realizations = 200;
  std::uint64_t seed = 0;
  int radius = 0;  // 0: default_radius(t) + max |x|
  std::size_t bootstrap = 200;
  double dt_max = 0.01;
  int threads = 0;
  int limit_radius = 12;
};

// c(t,x) = <u(t,0) u(t,x)> / <u(t,0)^2> for u0 = 1; the limit columns need a
// double-exponential law and are NaN otherwise.
CorrelationProfile correlation_profile(const PotentialSpec& spec, int d, double kappa, double t,
                                       const std::vector<int>& x_list, const CorrelationOptions& opts);

// sum_z v(z) v(z + x e_1) / sum_z v(z)^2 with v = sqrt(mu).
double autocorrelation(const Field& mu, int x);

}  // namespace pam
