#pragma once

// Forward solver for du/dt = kappa Delta u + xi u on a finite box and the
// Feynman-Kac Monte Carlo estimator of the same quantities.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pam/lattice.hpp"
#include "pam/potentials.hpp"

namespace pam {

enum class Stepper { split_exponential, explicit_euler };

std::string_view to_string(Stepper s);
Stepper parse_stepper(std::string_view text);

struct EvolutionConfig {
  double kappa = 1.0;
  double t_end = 1.0;
  std::vector<double> snapshot_times;  // t_end is always added
  Stepper stepper = Stepper::split_exponential;
  double dt_max = 0.01;
};

// u = values * exp(log_scale).
struct ScaledField {
  double t = 0.0;
  Field values;
  double log_scale = 0.0;

  double log_at(std::size_t i) const;
  Field unscaled() const;
};

struct Evolution {
  std::vector<ScaledField> snapshots;
  double dt = 0.0;
  std::size_t steps = 0;
};

// Step size used by the split-exponential stepper.
double default_time_step(const Field& xi, double kappa, double dt_max);

// Sites where xi = -inf are absorbing (u = 0 there). The explicit stepper
// uses dt_max as given and rejects it when it exceeds the stability bound
// 1/(2d kappa + max xi_+).
Evolution evolve(const Field& xi, const Field& u0, const EvolutionConfig& cfg);

struct TotalMass {
  double U = 0.0;
  double log_U = 0.0;
};

TotalMass total_mass(const Field& u, double log_scale = 0.0);
TotalMass total_mass(const ScaledField& u);

// Radius 2d kappa t + 6 sqrt(2d kappa t), rounded up.
int default_radius(int d, double kappa, double t);

struct WalkConfig {
  double kappa = 1.0;
  std::size_t paths = 10000;
  std::uint64_t seed = 0;
  std::optional<Point> pinned;  // endpoint; free mode when empty
  int threads = 0;
};

struct MonteCarloEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double log_estimate = 0.0;
  std::size_t paths = 0;
  std::size_t survivors = 0;  // paths with nonzero weight
};

// Walks start at the box center, jump at rate 2d kappa to a uniform
// neighbour, die on -inf sites and on leaving a zero-Dirichlet box.
// Pinned: E[exp(int xi) 1{X_t = x}]; free: E[exp(int xi)].
MonteCarloEstimate feynman_kac(const Field& xi, double t, const WalkConfig& cfg);

struct MomentCell {
  double p = 0.0;
  double t = 0.0;
  double lambda = 0.0;  // log of the sample mean of u(t,0)^p
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double ess = 0.0;
  bool low_ess = false;  // effective sample size below 10
};

struct MomentTable {
  std::vector<double> p;
  std::vector<double> t;
  std::vector<MomentCell> cells;  // p-major
  // log u(t, 0) per snapshot time and realization.
  std::vector<std::vector<double>> log_u0;

  const MomentCell& at(std::size_t ip, std::size_t it) const { return cells[ip * t.size() + it]; }
};

struct EnsembleConfig {
  EvolutionConfig evolution;
  std::vector<double> p_list{1.0};
  std::size_t realizations = 100;
  std::uint64_t seed = 0;
  std::size_t bootstrap = 200;
  int threads = 0;
};

// Realization r uses the field sampled with seed realization_seed(seed, r)
// and the initial datum u0 = 1.
MomentTable moment_ensemble(const PotentialSpec& spec, const Box& box, const EnsembleConfig& cfg);
std::uint64_t realization_seed(std::uint64_t seed, std::size_t r);

// Lambda table from per-realization samples of log u(t, 0).
MomentTable moment_table(std::vector<double> p_list, std::vector<double> t_list,
                         std::vector<std::vector<double>> log_u0, std::size_t bootstrap,
                         std::uint64_t seed);

}  // namespace pam
