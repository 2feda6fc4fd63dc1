#pragma once

// Parabolic Anderson model in a catalytic medium: the potential is
// gamma times the occupation numbers of a Poisson field of independent
// random walks on a torus, centered by the death rate (default nu gamma).

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "pam/lattice.hpp"
#include "pam/rng.hpp"
#include "pam/solver.hpp"

namespace pam {

struct CatalystParams {
  int d = 1;
  int radius = 10;  // torus side 2 radius + 1
  double nu = 1.0;
  double rho = 1.0;  // catalyst diffusion constant
  double gamma = 1.0;
  std::optional<double> death_rate;  // defaults to nu gamma

  double delta() const { return death_rate ? *death_rate : nu * gamma; }
  Box torus() const;
  void validate() const;
};

// Exact event-driven simulation of the catalyst walkers.
class CatalystProcess {
 public:
  using JumpCallback = std::function<void(double time, std::size_t from, std::size_t to)>;

  CatalystProcess(const CatalystParams& params, std::uint64_t seed);

  const Box& torus() const noexcept { return torus_; }
  const std::vector<int>& counts() const noexcept { return counts_; }
  std::size_t walkers() const noexcept { return positions_.size(); }
  double time() const noexcept { return time_; }

  // Runs every jump with time <= t in order; on_jump sees counts before the jump.
  void advance_to(double t, const JumpCallback& on_jump = {});

 private:
  Box torus_;
  double rate_;
  std::vector<std::size_t> positions_;
  std::vector<int> counts_;
  CounterRng rng_;
  double time_ = 0.0;
  double next_ = 0.0;
};

struct CatalystTrajectory {
  std::vector<double> t;
  std::vector<std::vector<int>> counts;  // per time, per site
  std::size_t walkers = 0;
  std::size_t jumps = 0;
};

CatalystTrajectory simulate_catalysts(const CatalystParams& params, std::vector<double> t_grid,
                                      std::uint64_t seed);

struct CatalyticEvolutionConfig {
  double kappa = 1.0;
  std::vector<double> t_grid;
  double dt = 0.01;
};

// u(0) = 1. Diffusion uses Strang splitting with step dt around the exact
// time integral of the occupation field over the step; kappa = 0 is exact.
std::vector<ScaledField> evolve_catalytic(const CatalystParams& params,
                                          const CatalyticEvolutionConfig& cfg, std::uint64_t seed);

struct CatalyticMoments {
  std::vector<double> p;
  std::vector<double> t;
  std::vector<std::vector<double>> estimate;  // [p][t]
  std::vector<std::vector<double>> se;
  std::size_t samples = 0;
};

// Direct route: per catalyst realization the spatial mean of u(t,x)^p (an
// unbiased sample of <u(t,0)^p> by stationarity), averaged over realizations.
CatalyticMoments direct_moments(const CatalystParams& params, double kappa, std::vector<double> p_list,
                                std::vector<double> t_grid, std::size_t realizations,
                                std::uint64_t seed, double dt = 0.01, int threads = 0);

// Representation route: p independent kappa-walks from the origin drive
// dw/dt = rho Delta w + gamma sum_i delta_{X_i}(1 + w), w(0) = 0, and the
// moment is E exp(nu gamma int sum_i w(s, X_i(s)) ds).
CatalyticMoments fk_moment(const CatalystParams& params, double kappa, int p, std::vector<double> t_grid,
                           std::size_t paths, std::uint64_t seed, int threads = 0);

struct LambdaStar {
  double q = 0.0;  // p gamma / rho
  double mu = 0.0;
  double lambda_star = 0.0;
  bool strongly_catalytic = false;
};

LambdaStar lambda_star_probe(int d, double rho, double gamma, int p);

struct LambdaLimits {
  double small_kappa = 0.0;                // lim lambda_p(kappa) as kappa -> 0
  std::optional<double> large_kappa;       // lim kappa lambda_p(kappa) / p
  double r_d = 0.0;
  bool intermittent_small_kappa = true;
  std::optional<bool> intermittent_large_kappa;
};

// Weakly catalytic regime only (d >= 3, 0 < p gamma / rho < r_d). The d = 3
// large-kappa value needs the polaron constant.
LambdaLimits lambda_limits(int d, double nu, double gamma, double rho, int p,
                           std::optional<double> polaron = std::nullopt);

struct GrowthFit {
  double lambda = 0.0;     // slope of log moment over the latter half of the horizon
  double lambda_se = 0.0;
  std::optional<double> lambda_star;  // slope of log log moment where the moment exceeds e^e
};

// se (optional) holds standard errors of the moments and feeds lambda_se.
GrowthFit fit_growth(std::span<const double> t, std::span<const double> moment,
                     std::span<const double> se = {});

}  // namespace pam
