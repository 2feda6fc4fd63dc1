#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "pam/error.hpp"
#include "pam/scaling.hpp"

using namespace pam;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(Hhat, VanishesAtOne) {
  for (double g : {0.0, 0.5, 1.0, 1.5})
    EXPECT_NEAR(hhat(1.0, make_profile(g, 1.3, g < 1.0 ? 0.0 : (g == 1.0 ? 1.0 : kInf))), 0.0, 1e-15);
}

TEST(Hhat, PowerBranchValue) { EXPECT_DOUBLE_EQ(hhat(2.0, make_profile(0.0, 1.0, 0.0)), 1.0); }

TEST(Hhat, GammaToOneLimit) {
  const double rho = 1.5;
  const double near = hhat(2.0, make_profile(0.9999, rho, 0.0));
  EXPECT_NEAR(near, 2.0 * rho * std::log(2.0), 1e-3);
}

TEST(Hhat, ConvexInY) {
  for (double g : {0.0, 0.5, 1.0}) {
    const auto prof = make_profile(g, 1.0, g == 1.0 ? 1.0 : 0.0);
    for (double y = 0.2; y < 8.0; y *= 1.3)
      EXPECT_LE(hhat(1.5 * y, prof), 0.5 * (hhat(y, prof) + hhat(2.0 * y, prof)) + 1e-12);
  }
}

TEST(Classify, Cases) {
  EXPECT_EQ(classify(1.0, 1.0), 2);
  EXPECT_EQ(classify(0.0, 0.0), 4);
  EXPECT_EQ(classify(2.0, kInf), 1);
  EXPECT_EQ(classify(1.0, kInf), 1);
  EXPECT_EQ(classify(1.0, 0.0), 3);
  EXPECT_DOUBLE_EQ(island_exponent(0.0, 3), 0.2);
}

TEST(Classify, InconsistentPairsAreRejected) {
  EXPECT_THROW(classify(0.5, 1.0), ConfigError);
  EXPECT_THROW(classify(2.0, 0.0), ConfigError);
  EXPECT_THROW(classify(1.0, -1.0), ConfigError);
}

TEST(AlphaAnnealed, PowerLawExample) {
  const auto root = alpha_annealed(EtaFunction::power(0.0), 1, 1e6);
  EXPECT_NEAR(root.alpha, 100.0, 1e-8);
}

TEST(AlphaAnnealed, LinearEtaConvergesToInverseRoot) {
  EXPECT_NEAR(alpha_annealed(EtaFunction::power(1.0), 2, 1e8).alpha, 1.0, 1e-6);
  EXPECT_NEAR(alpha_annealed(EtaFunction::power(1.0, 4.0), 2, 1e8).alpha, 0.5, 1e-6);
}

class AlphaPower : public ::testing::TestWithParam<std::tuple<double, int>> {};

TEST_P(AlphaPower, MatchesTNuWithSmallResidual) {
  const auto [g, d] = GetParam();
  const double nu = island_exponent(g, d);
  for (double t = 1e3; t <= 1e6; t *= 10.0) {
    const auto root = alpha_annealed(EtaFunction::power(g), d, t);
    EXPECT_NEAR(root.alpha / std::pow(t, nu), 1.0, 1e-9);
    EXPECT_LT(root.residual, 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(Grid, AlphaPower,
                         ::testing::Combine(::testing::Values(0.0, 0.25, 0.5, 0.75), ::testing::Values(1, 2, 3)));

TEST(AlphaQuenched, CubeOfLog) {
  auto alpha = [](double s) { return std::cbrt(s); };
  EXPECT_NEAR(alpha_quenched(alpha, 1, std::exp(10.0)).alpha, 1000.0, 1e-6);
}

TEST(AlphaQuenched, ConstantAlpha) {
  auto one = [](double) { return 1.0; };
  for (double t : {10.0, 1e4}) EXPECT_NEAR(alpha_quenched(one, 2, t).alpha, 2.0 * std::log(t), 1e-9);
}

TEST(AlphaQuenched, StrictlyIncreasing) {
  auto alpha = [](double s) { return std::pow(s, 0.25); };
  double prev = 0.0;
  for (double t = 3.0; t < 1e8; t *= 5.0) {
    const double a = alpha_quenched(alpha, 1, t).alpha;
    EXPECT_GT(a, prev);
    prev = a;
  }
}

TEST(EtaParse, KnownForms) {
  EXPECT_EQ(EtaFunction::parse("power:0.5").gamma, 0.5);
  EXPECT_EQ(EtaFunction::parse("linear:4").eta_star, 4.0);
  EXPECT_EQ(EtaFunction::parse("tlogt").eta_star, kInf);
  EXPECT_EQ(EtaFunction::parse("t/logt").eta_star, 0.0);
  EXPECT_EQ(classify(EtaFunction::parse("double-exponential").gamma,
                     EtaFunction::parse("double-exponential").eta_star),
            2);
  EXPECT_THROW(EtaFunction::parse("cosine"), ConfigError);
}

TEST(Class3, OneDimensionalGaussian) {
  const auto c = class3_check(1.0, 1.0, 1, 6.0, 1.0 / 64.0);
  EXPECT_LT(c.rel_l2_error, 1e-3);
  EXPECT_NEAR(c.a_fit, c.a_continuum, 1e-3);
  EXPECT_LT(c.symmetry_error, 1e-10);
  EXPECT_NEAR(c.lambda, c.lambda_continuum, 1e-3);
}

TEST(Class3, TwoDimensionalFactorizes) {
  const auto c = class3_check(1.0, 1.0, 2, 4.5, 1.0 / 16.0);
  EXPECT_LT(c.factorization_error, 1e-6);
  EXPECT_LT(c.symmetry_error, 1e-8);
}

TEST(Class3, SmallWindowIsFlagged) { EXPECT_THROW(class3_check(1.0, 1.0, 1, 1.0, 1.0 / 32.0), BoxTooSmallError); }
