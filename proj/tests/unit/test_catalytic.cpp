#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "pam/catalytic.hpp"
#include "pam/error.hpp"
#include "pam/green.hpp"
#include "pam/stats.hpp"

using namespace pam;

namespace {

CatalystParams params(int radius, double nu = 1.0, double gamma = 1.0, double rho = 1.0) {
  CatalystParams p;
  p.d = 1;
  p.radius = radius;
  p.nu = nu;
  p.gamma = gamma;
  p.rho = rho;
  return p;
}

}  // namespace

TEST(Catalysts, EmptyFieldWithoutDensity) {
  const auto tr = simulate_catalysts(params(10, 0.0), {0.0, 1.0, 5.0}, 3);
  EXPECT_EQ(tr.walkers, 0u);
  for (const auto& c : tr.counts)
    for (int n : c) EXPECT_EQ(n, 0);
}

TEST(Catalysts, WalkerCountIsConserved) {
  const auto tr = simulate_catalysts(params(20, 2.0), {0.0, 0.5, 1.0, 3.0}, 8);
  EXPECT_GT(tr.jumps, 0u);
  for (const auto& c : tr.counts) {
    std::size_t total = 0;
    for (int n : c) total += static_cast<std::size_t>(n);
    EXPECT_EQ(total, tr.walkers);
  }
}

TEST(Catalysts, PoissonMarginalsAtEquilibrium) {
  const double nu = 2.0;
  const CatalystParams p = params(50, nu);
  std::map<int, double> hist;
  std::size_t cells = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const auto tr = simulate_catalysts(p, {5.0}, 1000 + rep);
    for (int n : tr.counts.back()) {
      hist[n] += 1.0;
      ++cells;
    }
  }
  const int top = hist.rbegin()->first;
  std::vector<double> obs, exp;
  double tail = 1.0;
  for (int k = 0; k <= top; ++k) {
    const double pk = std::exp(-nu + k * std::log(nu) - std::lgamma(k + 1.0));
    obs.push_back(hist.count(k) ? hist[k] : 0.0);
    exp.push_back(pk * static_cast<double>(cells));
    tail -= pk;
  }
  exp.back() += tail * static_cast<double>(cells);
  EXPECT_GT(stats::chi_square_gof(obs, exp).p_value, 1e-3);
}

TEST(Catalysts, SameSeedSameTrajectory) {
  const auto a = simulate_catalysts(params(10), {1.0, 2.0}, 5);
  const auto b = simulate_catalysts(params(10), {1.0, 2.0}, 5);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(EvolveCatalytic, NoCouplingKeepsUnity) {
  CatalyticEvolutionConfig cfg;
  cfg.t_grid = {0.5, 2.0};
  for (const auto& s : evolve_catalytic(params(10, 1.0, 0.0), cfg, 2)) {
    const Field u = s.unscaled();
    for (double v : u.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(EvolveCatalytic, FrozenReactantIsExact) {
  const CatalystParams p = params(8, 1.5, 0.7);
  const double t = 2.0;
  // Oracle: integrate the occupation numbers between jump events.
  CatalystProcess proc(p, 4);
  std::vector<double> integral(proc.counts().size(), 0.0);
  double last = 0.0;
  proc.advance_to(t, [&](double time, std::size_t, std::size_t) {
    for (std::size_t x = 0; x < integral.size(); ++x) integral[x] += proc.counts()[x] * (time - last);
    last = time;
  });
  for (std::size_t x = 0; x < integral.size(); ++x) integral[x] += proc.counts()[x] * (t - last);

  CatalyticEvolutionConfig cfg;
  cfg.kappa = 0.0;
  cfg.t_grid = {t};
  const auto snaps = evolve_catalytic(p, cfg, 4);
  for (std::size_t x = 0; x < integral.size(); ++x) {
    const double expected = p.gamma * integral[x] - p.nu * p.gamma * t;
    EXPECT_NEAR(snaps.back().log_at(x), expected, 1e-8);
  }
}

TEST(EvolveCatalytic, MeanIsAtLeastOne) {
  const auto m = direct_moments(params(30), 1.0, {1.0}, {1.0, 2.0}, 200, 6);
  for (std::size_t i = 0; i < m.t.size(); ++i) EXPECT_GE(m.estimate[0][i] + 3.0 * m.se[0][i], 1.0);
}

TEST(EvolveCatalytic, DeathRateShiftsGrowth) {
  CatalystParams p = params(20);
  const auto a = direct_moments(p, 1.0, {1.0}, {1.0, 2.0}, 20, 3);
  p.death_rate = 0.4;
  const auto b = direct_moments(p, 1.0, {1.0}, {1.0, 2.0}, 20, 3);
  for (std::size_t i = 0; i < a.t.size(); ++i)
    EXPECT_NEAR(std::log(b.estimate[0][i] / a.estimate[0][i]), (1.0 - 0.4) * a.t[i], 1e-9);
}

TEST(FkMoment, NoCouplingGivesOne) {
  const auto m = fk_moment(params(10, 1.0, 0.0), 1.0, 2, {0.5, 1.0}, 100, 1);
  for (double v : m.estimate[0]) EXPECT_EQ(v, 1.0);
}

TEST(FkMoment, NondecreasingInTime) {
  const auto m = fk_moment(params(30), 1.0, 1, {0.25, 0.5, 1.0, 1.5, 2.0}, 500, 2);
  for (std::size_t i = 1; i < m.t.size(); ++i) EXPECT_GE(m.estimate[0][i], m.estimate[0][i - 1]);
}

TEST(FkMoment, AgreesWithDirectRouteForFirstMoment) {
  const CatalystParams p = params(40);
  const std::vector<double> t{0.5, 1.0, 2.0};
  const auto direct = direct_moments(p, 1.0, {1.0}, t, 400, 11);
  const auto fk = fk_moment(p, 1.0, 1, t, 1500, 12);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double se = std::hypot(direct.se[0][i], fk.se[0][i]);
    EXPECT_NEAR(direct.estimate[0][i], fk.estimate[0][i], 3.0 * se) << "t = " << t[i];
  }
}

// With kappa = 0 every reactant sits at the origin and the moment is
// exp(nu sum_y w(t, y) - p nu gamma t) with w' = rho Delta w + q delta_0 (1 + w),
// q = p gamma, solved here by dense diagonalization.
TEST(FkMoment, FrozenReactantMatchesDenseOracle) {
  const CatalystParams p = params(20);
  const Box torus = p.torus();
  for (int k : {1, 2}) {
    const double q = k * p.gamma;
    Field V(torus, 0.0);
    V[torus.center_index()] = q;
    std::vector<std::size_t> sites;
    const Eigen::MatrixXd A = oracle::operator_matrix(V, p.rho, &sites);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(A.rows());
    e0(static_cast<Eigen::Index>(torus.center_index())) = q;
    const std::vector<double> t{0.5, 1.0, 1.5};
    const auto m = fk_moment(p, 0.0, k, t, 2, 1);
    for (std::size_t i = 0; i < t.size(); ++i) {
      Eigen::VectorXd g(A.rows());
      for (Eigen::Index j = 0; j < A.rows(); ++j) {
        const double l = es.eigenvalues()(j);
        g(j) = std::abs(l) < 1e-12 ? t[i] : std::expm1(l * t[i]) / l;
      }
      const Eigen::VectorXd w = es.eigenvectors() * (g.asDiagonal() * (es.eigenvectors().transpose() * e0));
      const double expected = std::exp(p.nu * w.sum() - k * p.nu * p.gamma * t[i]);
      EXPECT_NEAR(m.estimate[0][i] / expected, 1.0, 1e-6) << "p = " << k << ", t = " << t[i];
    }
  }
}

TEST(FkMoment, SeedDeterminesResult) {
  const auto a = fk_moment(params(10), 1.0, 2, {1.0}, 200, 9, 1);
  const auto b = fk_moment(params(10), 1.0, 2, {1.0}, 200, 9, 3);
  EXPECT_EQ(a.estimate, b.estimate);
}

TEST(LambdaStar, OneDimensionalClosedForm) {
  const auto ls = lambda_star_probe(1, 1.0, 1.0, 1);
  EXPECT_NEAR(ls.lambda_star, std::sqrt(5.0) - 2.0, 1e-9);
  EXPECT_TRUE(ls.strongly_catalytic);
}

TEST(LambdaStar, WeakBelowThreshold) {
  const auto ls = lambda_star_probe(3, 1.0, 2.0, 1);
  EXPECT_EQ(ls.lambda_star, 0.0);
  EXPECT_FALSE(ls.strongly_catalytic);
}

TEST(LambdaStar, MonotoneInParameters) {
  double prev = -1.0;
  for (double g : {0.5, 1.0, 2.0, 4.0}) {
    const double v = lambda_star_probe(1, 1.0, g, 1).lambda_star;
    EXPECT_GE(v, prev);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
  // Fixed p gamma / rho: lambda* scales with rho.
  EXPECT_LE(lambda_star_probe(1, 1.0, 1.0, 1).lambda_star, lambda_star_probe(1, 2.0, 2.0, 1).lambda_star);
}

TEST(LambdaLimits, ThreeDimensionalSmallKappa) {
  const auto lim = lambda_limits(3, 1.0, 1.0, 1.0, 1);
  const double r3 = green_function_origin(3).r_threshold;
  EXPECT_NEAR(lim.small_kappa, 1.0 / (r3 - 1.0), 1e-12);
  EXPECT_NEAR(lim.small_kappa, 0.338, 1e-3);
  EXPECT_FALSE(lim.large_kappa.has_value());
  const auto with_p = lambda_limits(3, 1.0, 1.0, 1.0, 1, 0.5);
  EXPECT_NEAR(*with_p.large_kappa, 1.0 / r3 + 0.5, 1e-12);
}

TEST(LambdaLimits, FourDimensionalLargeKappaIsIndependentOfP) {
  const double r4 = green_function_origin(4).r_threshold;
  for (int p : {1, 2, 3}) EXPECT_NEAR(*lambda_limits(4, 2.0, 0.5, 1.0, p).large_kappa, 2.0 * 0.25 / r4, 1e-12);
}

TEST(LambdaLimits, OutsideTheWeakRegime) {
  EXPECT_THROW(lambda_limits(1, 1.0, 1.0, 1.0, 1), RegimeError);
  EXPECT_THROW(lambda_limits(3, 1.0, 4.0, 1.0, 1), RegimeError);
}

TEST(FitGrowth, ExponentialSeries) {
  std::vector<double> t, m;
  for (int i = 1; i <= 10; ++i) {
    t.push_back(0.5 * i);
    m.push_back(3.0 * std::exp(2.0 * t.back()));
  }
  const auto g = fit_growth(t, m);
  EXPECT_NEAR(g.lambda, 2.0, 1e-12);
  ASSERT_TRUE(g.lambda_star.has_value());
}

TEST(FitGrowth, SmallMomentsHaveNoDoubleExponentialRate) {
  const std::vector<double> t{1.0, 2.0, 3.0, 4.0}, m{1.1, 1.3, 1.6, 2.0};
  EXPECT_FALSE(fit_growth(t, m).lambda_star.has_value());
}

TEST(CatalystParams, Validation) {
  auto p = params(10);
  p.nu = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}
