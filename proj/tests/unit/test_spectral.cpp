#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pam/error.hpp"
#include "pam/green.hpp"
#include "pam/potentials.hpp"
#include "pam/rng.hpp"
#include "pam/spectral.hpp"

using namespace pam;

TEST(PrincipalEigen, DirichletChainSpectrum) {
  const double kappa = 0.8;
  for (int R : {0, 1, 3, 10}) {
    Box box(1, R);
    const double n = static_cast<double>(box.size());
    const auto res = principal_eigen(Field(box, 0.0), kappa);
    EXPECT_NEAR(res.lambda, -2.0 * kappa * (1.0 - std::cos(std::numbers::pi / (n + 1.0))), 1e-10) << R;
  }
}

TEST(PrincipalEigen, SingleSiteDomain) {
  Box box(3, 2);
  Field V(box, kNegInf);
  V[box.center_index()] = 0.0;
  const auto res = principal_eigen(V, 1.5);
  EXPECT_NEAR(res.lambda, -9.0, 1e-12);
  EXPECT_NEAR(res.eigenfunction[box.center_index()], 1.0, 1e-12);
}

TEST(PrincipalEigen, EmptyDomain) {
  const auto res = principal_eigen(Field(Box(1, 3), kNegInf), 1.0);
  EXPECT_TRUE(res.empty_domain);
  EXPECT_EQ(res.lambda, kNegInf);
}

TEST(PrincipalEigen, ShiftCovariance) {
  Box box(2, 5);
  Field V = sample_field(PotentialSpec::double_exponential(1.0), box, 3);
  Field W = V;
  for (std::size_t i = 0; i < W.size(); ++i) W[i] += 2.5;
  const auto a = principal_eigen(V, 1.0), b = principal_eigen(W, 1.0);
  EXPECT_NEAR(b.lambda, a.lambda + 2.5, 1e-9);
  for (std::size_t i = 0; i < V.size(); ++i) EXPECT_NEAR(a.eigenfunction[i], b.eigenfunction[i], 1e-6);
}

class EigenMethods : public ::testing::TestWithParam<EigenMethod> {};

TEST_P(EigenMethods, MatchDenseOracle) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Box box(2, 6);
    Field V = sample_field(PotentialSpec::double_exponential(1.0), box, seed);
    EigenOptions opts;
    opts.method = GetParam();
    const auto res = principal_eigen(V, 1.0, opts);
    EXPECT_NEAR(res.lambda, oracle::top_eigenvalue(V, 1.0), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(All, EigenMethods,
                         ::testing::Values(EigenMethod::automatic, EigenMethod::krylov, EigenMethod::power,
                                           EigenMethod::dense));

TEST(PrincipalEigen, BoundsAndPositivity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Box box(1, 30);
    Field V = sample_field(PotentialSpec::double_exponential(2.0), box, seed);
    const auto res = principal_eigen(V, 1.0);
    const double vmax = max_height(V).h;
    EXPECT_LE(res.lambda, vmax + 1e-12);
    EXPECT_GE(res.lambda, vmax - 2.0 - 1e-12);
    // Entries below rounding level relative to the peak may come out as 0;
    // near the peak of the potential the eigenfunction is resolved.
    const std::size_t top = max_height(V).argmax[0];
    for (std::size_t i = 0; i < box.size(); ++i) {
      EXPECT_GE(res.eigenfunction[i], 0.0);
      if (box.distance(i, top) <= 3) EXPECT_GT(res.eigenfunction[i], 0.0);
    }
  }
}

TEST(PrincipalEigen, MonotoneInPotentialAndDomain) {
  Box box(1, 20);
  Field V = sample_field(PotentialSpec::double_exponential(1.0), box, 9);
  Field W = V;
  W[3] += 1.0;
  EXPECT_LE(principal_eigen(V, 1.0).lambda, principal_eigen(W, 1.0).lambda + 1e-12);
  Field smaller = V;
  for (std::size_t i = 0; i < 5; ++i) smaller[i] = kNegInf;
  EXPECT_LE(principal_eigen(smaller, 1.0).lambda, principal_eigen(V, 1.0).lambda + 1e-12);
}

TEST(PrincipalEigen, DisconnectedTieIsFlagged) {
  Box box(1, 4);
  Field V(box, kNegInf);
  V[0] = 1.0;
  V[8] = 1.0;
  const auto res = principal_eigen(V, 1.0);
  EXPECT_TRUE(res.degenerate);
  EXPECT_GT(res.eigenfunction[0], 0.0);
  EXPECT_EQ(res.eigenfunction[8], 0.0);
}

TEST(RayleighQuotient, EigenfunctionAndDelta) {
  Box box(2, 4);
  Field V = sample_field(PotentialSpec::double_exponential(1.0), box, 2);
  const auto res = principal_eigen(V, 1.0);
  EXPECT_NEAR(rayleigh_quotient(V, 1.0, res.eigenfunction), res.lambda, 1e-9);
  Field d(box);
  d[box.center_index()] = 1.0;
  EXPECT_NEAR(rayleigh_quotient(Field(box, 0.0), 1.0, d), -4.0, 1e-14);
}

TEST(RayleighQuotient, RandomVectorsStayBelowLambda) {
  Box box(1, 15);
  Field V = sample_field(PotentialSpec::double_exponential(1.0), box, 5);
  const double lambda = principal_eigen(V, 1.0).lambda;
  for (std::uint64_t s = 0; s < 20; ++s) {
    CounterRng rng(s);
    Field f(box);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform() - 0.5;
    const double n = norm2(f.values());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] /= n;
    EXPECT_LE(rayleigh_quotient(V, 1.0, f), lambda + 1e-10);
  }
}

TEST(DenseSpectrum, MatchesOracle) {
  Box box(1, 5);
  Field V = sample_field(PotentialSpec::double_exponential(1.0), box, 6);
  const auto ev = dense_spectrum(V, 1.0);
  EXPECT_NEAR(ev.back(), oracle::top_eigenvalue(V, 1.0), 1e-12);
  EXPECT_TRUE(std::is_sorted(ev.begin(), ev.end()));
}

TEST(Green, ThreeDimensionalValue) {
  const auto g = green_function_origin(3);
  // Watson's closed form for the simple cubic lattice, divided by 6 for the
  // unnormalized Laplacian.
  const double watson = std::sqrt(6.0) / (32.0 * std::pow(std::numbers::pi, 3)) * std::tgamma(1.0 / 24.0) *
                        std::tgamma(5.0 / 24.0) * std::tgamma(7.0 / 24.0) * std::tgamma(11.0 / 24.0);
  EXPECT_NEAR(g.G, watson / 6.0, 1e-9);
  EXPECT_NEAR(g.r_threshold, 3.9568, 1e-4);
  EXPECT_FALSE(g.recurrent);
}

TEST(Green, RecurrentDimensions) {
  for (int d : {1, 2}) {
    const auto g = green_function_origin(d);
    EXPECT_TRUE(g.recurrent);
    EXPECT_TRUE(std::isinf(g.G));
  }
}

TEST(Green, ThresholdIncreasesWithDimension) {
  double prev = 0.0;
  for (int d : {3, 4, 5}) {
    const double r = green_function_origin(d).r_threshold;
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(Green, StableUnderRefinement) {
  const double a = green_function_origin(3, 0).G, b = green_function_origin(3, 1).G;
  EXPECT_NEAR(a, b, 1e-7 * b);
}

class RankOneD1 : public ::testing::TestWithParam<double> {};

TEST_P(RankOneD1, ClosedFormBothRoutes) {
  const double r = GetParam();
  const double exact = std::sqrt(4.0 + r * r) - 2.0;
  EXPECT_NEAR(mu_of_r(r, 1).mu, exact, 1e-6);
  MuOptions box;
  box.method = MuMethod::box;
  EXPECT_NEAR(mu_of_r(r, 1, box).mu, exact, 1e-4);
  MuOptions both;
  both.method = MuMethod::both;
  EXPECT_NO_THROW(mu_of_r(r, 1, both));
}

INSTANTIATE_TEST_SUITE_P(Couplings, RankOneD1, ::testing::Values(0.5, 1.0, 2.0, 5.0));

TEST(RankOne, ZeroCouplingAndSubcriticalD3) {
  for (int d : {1, 2, 3}) EXPECT_EQ(mu_of_r(0.0, d).mu, 0.0);
  EXPECT_EQ(mu_of_r(2.0, 3).mu, 0.0);
  EXPECT_GT(mu_of_r(5.0, 3).mu, 0.0);
}

TEST(RankOne, LargeCouplingDominates) {
  for (int d : {1, 3}) {
    const double a = mu_of_r(1e2, d).mu / 1e2, b = mu_of_r(1e3, d).mu / 1e3;
    EXPECT_GT(b, a);
    EXPECT_NEAR(b, 1.0, 0.01);
  }
}

TEST(RankOne, BoxEigenvaluesApproachLimitFromBelow) {
  const double exact = std::sqrt(5.0) - 2.0;
  double prev = -1e300;
  for (int R : {4, 8, 16, 32}) {
    const double v = box_top_eigenvalue(1.0, 1, R);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, exact);
    prev = v;
  }
}
