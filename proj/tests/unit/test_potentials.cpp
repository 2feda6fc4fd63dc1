#include <gtest/gtest.h>

#include <cmath>

#include "pam/error.hpp"
#include "pam/potentials.hpp"
#include "pam/stats.hpp"

using namespace pam;

namespace pam {
void PrintTo(const PotentialSpec& spec, std::ostream* os) { *os << spec.to_json(); }
}  // namespace pam

TEST(PotentialSpec, JsonRoundTrip) {
  for (const auto& spec : {PotentialSpec::double_exponential(2.0), PotentialSpec::bernoulli_trap(0.3),
                           PotentialSpec::bounded_tail(1.5, 0.25), PotentialSpec::constant(0.7)}) {
    const PotentialSpec back = PotentialSpec::from_json(spec.to_json());
    EXPECT_EQ(back.to_json(), spec.to_json());
  }
}

TEST(PotentialSpec, InvalidGammaNamesTheField) {
  try {
    PotentialSpec::from_json(R"({"family":"bounded_tail","params":{"D":1,"gamma":1.5}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
}

TEST(PotentialSpec, UnknownKeysAreRejected) {
  EXPECT_THROW(PotentialSpec::from_json(R"({"family":"double_exponential","params":{"rho":1,"x":2}})"),
               ConfigError);
  EXPECT_THROW(PotentialSpec::from_json(R"({"family":"gaussian","params":{}})"), ConfigError);
}

TEST(Sampler, FullTrapProbabilityKillsEverySite) {
  Field f = sample_field(PotentialSpec::bernoulli_trap(1.0), Box(2, 3), 1);
  for (double v : f.values()) EXPECT_EQ(v, kNegInf);
}

TEST(Sampler, SameSeedSameField) {
  const auto spec = PotentialSpec::double_exponential(1.0);
  Field a = sample_field(spec, Box(2, 5), 9);
  Field b = sample_field(spec, Box(2, 5), 9);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Sampler, SiteValuesDoNotDependOnTheBox) {
  const auto spec = PotentialSpec::double_exponential(1.0);
  Field small = sample_field(spec, Box(2, 2), 3);
  Field large = sample_field(spec, Box(2, 6), 3);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i], large.at(small.box().point(i)));
}

TEST(Sampler, DoubleExponentialTailFrequency) {
  const double rho = 1.0;
  Field f = sample_field(PotentialSpec::double_exponential(rho), Box(1, 50000), 17);
  for (double r : {-1.0, 0.0, 0.5, 1.0}) {
    const double p = std::exp(-std::exp(r / rho));
    double hits = 0.0;
    for (double v : f.values()) hits += v > r ? 1.0 : 0.0;
    const double n = static_cast<double>(f.size());
    const double se = std::sqrt(p * (1.0 - p) / n);
    EXPECT_NEAR(hits / n, p, 3.0 * se) << "r = " << r;
  }
}

class SamplerKs : public ::testing::TestWithParam<PotentialSpec> {};

TEST_P(SamplerKs, MarginalsMatchTheLaw) {
  const PotentialSpec spec = GetParam();
  TailFunctions tails(spec);
  Field f = sample_field(spec, Box(1, 50000), 23);
  std::vector<double> x(f.values().begin(), f.values().end());
  const auto res = stats::ks_test(x, [&](double r) { return tails.cdf(r); });
  EXPECT_GT(res.p_value, 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Families, SamplerKs,
                         ::testing::Values(PotentialSpec::double_exponential(0.5),
                                           PotentialSpec::double_exponential(4.0),
                                           PotentialSpec::bounded_tail(1.0, 0.5),
                                           PotentialSpec::tabulated({-1.0, 0.0, 2.0}, {0.0, 0.4, 1.0})));

TEST(Tails, DoubleExponentialInversion) {
  TailFunctions tails(PotentialSpec::double_exponential(2.0));
  EXPECT_NEAR(tails.psi(std::exp(1.0)), 2.0, 1e-14);
  EXPECT_NEAR(tails.phi(2.0), std::exp(1.0), 1e-14);
}

TEST(Tails, PsiShiftIsRhoLogC) {
  const double rho = 1.7;
  TailFunctions tails(PotentialSpec::double_exponential(rho));
  for (double s : {0.5, 3.0, 40.0, 1e4})
    for (double c : {0.25, 2.0, 10.0}) EXPECT_NEAR(tails.psi(c * s) - tails.psi(s), rho * std::log(c), 1e-12);
}

TEST(Tails, TrapHIsConstant) {
  TailFunctions tails(PotentialSpec::bernoulli_trap(0.3));
  for (double t : {0.1, 1.0, 50.0}) EXPECT_NEAR(tails.H(t), std::log(0.7), 1e-15);
}

class TailInvariants : public ::testing::TestWithParam<PotentialSpec> {};

TEST_P(TailInvariants, PhiInvertsPsi) {
  TailFunctions tails(GetParam());
  for (double s = 0.01; s < 1e3; s *= 1.7) {
    const double r = tails.psi(s);
    if (!std::isfinite(r)) continue;
    EXPECT_NEAR(tails.phi(r), s, 1e-8 * s) << "s = " << s;
    EXPECT_NEAR(tails.psi_bisection(s), r, 1e-9 * (1.0 + std::abs(r)));
  }
}

TEST_P(TailInvariants, PsiStrictlyIncreasing) {
  TailFunctions tails(GetParam());
  double prev = -std::numeric_limits<double>::infinity();
  for (double s = 0.01; s < 1e3; s *= 1.7) {
    const double r = tails.psi(s);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST_P(TailInvariants, HVanishesAtZeroAndIsConvex) {
  TailFunctions tails(GetParam());
  EXPECT_EQ(tails.H(0.0), 0.0);
  for (double t = 0.25; t < 20.0; t *= 1.5) {
    const double a = tails.H(t), b = tails.H(2.0 * t), m = tails.H(1.5 * t);
    EXPECT_LE(m, 0.5 * (a + b) + 1e-10);
  }
}

TEST_P(TailInvariants, HClosedFormMatchesQuadrature) {
  TailFunctions tails(GetParam());
  for (double t : {0.5, 2.0, 10.0}) EXPECT_NEAR(tails.H(t), tails.H_quadrature(t), 1e-7 * (1.0 + std::abs(tails.H(t))));
}

INSTANTIATE_TEST_SUITE_P(Families, TailInvariants,
                         ::testing::Values(PotentialSpec::double_exponential(1.0),
                                           PotentialSpec::double_exponential(3.0),
                                           PotentialSpec::bounded_tail(2.0, 0.5)));

TEST(Tails, PsiApproachesRhoLogT) {
  const double rho = 2.0;
  TailFunctions tails(PotentialSpec::double_exponential(rho));
  double prev = 1e300;
  for (double t : {1e1, 1e3, 1e6}) {
    const double gap = std::abs(tails.psi(t) - rho * std::log(t));
    EXPECT_LE(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(HLimit, DoubleExponentialHalf) {
  const std::vector<double> grid{50, 100, 200, 400, 800, 1600};
  const auto est = assumption_H_limit(PotentialSpec::double_exponential(1.0), 0.5, grid);
  const double target = 0.5 * std::log(0.5);
  EXPECT_NEAR(est.extrapolated, target, 0.05 * std::abs(target));
}

TEST(HLimit, TrapLimitIsZero) {
  const auto est = assumption_H_limit(PotentialSpec::bernoulli_trap(0.2), 0.5, std::vector<double>{10, 100, 1000});
  EXPECT_NEAR(est.extrapolated, 0.0, 1e-3);
}

TEST(HLimit, UnitFactorIsIdenticallyZero) {
  const auto est = assumption_H_limit(PotentialSpec::double_exponential(1.0), 1.0, std::vector<double>{10, 100, 1000});
  for (double r : est.ratios) EXPECT_EQ(r, 0.0);
}

TEST(MaxHeight, SpikeAndTies) {
  Box box(1, 3);
  Field f(box, 0.0);
  f[box.center_index()] = 5.0;
  Height h = max_height(f);
  EXPECT_EQ(h.h, 5.0);
  ASSERT_EQ(h.argmax.size(), 1u);
  EXPECT_EQ(h.argmax[0], box.center_index());
  f[0] = 5.0;
  EXPECT_EQ(max_height(f).argmax.size(), 2u);
  EXPECT_EQ(max_height(f, 2).argmax.size(), 1u);
}

TEST(MaxHeight, StaysNearNormalizationAcrossSeeds) {
  const double rho = 1.0;
  const auto spec = PotentialSpec::double_exponential(rho);
  TailFunctions tails(spec);
  const int t = 200;
  const auto norm = height_normalization(tails, 1, t);
  std::vector<double> gaps;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Field xi = sample_field(spec, Box(1, t), seed);
    gaps.push_back(max_height(xi).h - norm.psi_log_box);
  }
  // Gumbel fluctuations of the maximum are O(rho / log t) in this family.
  for (double g : gaps) EXPECT_LT(std::abs(g), 2.0 * rho);
  EXPECT_LT(std::abs(stats::median(gaps)), 0.3 * rho);
}

TEST(RescaleShift, UnitScaleIsPlainShift) {
  Box box(1, 4);
  Field f(box);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i) * 0.5;
  auto s = rescale_shift(f, 1.0, 1.0, 3.0);
  ASSERT_EQ(s.values.size(), 7u);
  for (std::size_t j = 0; j < 7; ++j) EXPECT_DOUBLE_EQ(s.values[j], f[j + 1] - 1.0);
}

TEST(RescaleShift, ConstantMinusItselfVanishes) {
  Field f(Box(2, 4), 2.5);
  for (double v : rescale_shift(f, 2.5, 2.0, 1.5).values) EXPECT_EQ(v, 0.0);
}

TEST(RescaleShift, RampWithAlphaTwo) {
  Box box(1, 6);
  Field f(box);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(box.offset(i)[0]);
  auto s = rescale_shift(f, 1.0, 2.0, 2.0);
  for (std::size_t j = 0; j < s.axis.size(); ++j) {
    const double x = s.axis[j];
    EXPECT_DOUBLE_EQ(s.values[j], 4.0 * (std::floor(2.0 * x) - 1.0));
  }
}
