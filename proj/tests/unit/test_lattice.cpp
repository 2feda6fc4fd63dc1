#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "pam/error.hpp"
#include "pam/lattice.hpp"
#include "pam/rng.hpp"
#include "pam/snapshot.hpp"

using namespace pam;

namespace {

Field random_field(const Box& box, std::uint64_t seed) {
  CounterRng rng(seed);
  Field f(box);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 2.0 * rng.uniform() - 1.0;
  return f;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pam_lattice_" + name);
}

}  // namespace

TEST(Box, RowMajorIndexing) {
  Box box(2, 1);
  EXPECT_EQ(box.size(), 9u);
  EXPECT_EQ(box.index({-1, -1}), 0u);
  EXPECT_EQ(box.index({-1, 0}), 1u);
  EXPECT_EQ(box.index({0, -1}), 3u);
  EXPECT_EQ(box.center_index(), 4u);
  EXPECT_EQ(box.offset(5), (Point{0, 1}));
  EXPECT_FALSE(box.contains({2, 0}));
  EXPECT_THROW(box.index({2, 0}), ConfigError);
}

TEST(Box, CenteredBoxReportsRelativeOffsets) {
  Box box(1, 2, BoundaryMode::zero_dirichlet, {10});
  EXPECT_EQ(box.point(0), (Point{8}));
  EXPECT_EQ(box.offset(0), (Point{-2}));
  EXPECT_EQ(box.index({12}), 4u);
}

TEST(Box, PeriodicNeighboursWrap) {
  Box box(1, 2, BoundaryMode::periodic);
  EXPECT_EQ(box.neighbor(4, 0), 0);
  EXPECT_EQ(box.neighbor(0, 1), 4);
  EXPECT_EQ(box.distance(0, 4), 1);
  Box dir(1, 2);
  EXPECT_EQ(dir.neighbor(4, 0), Box::kOutside);
  EXPECT_EQ(dir.distance(0, 4), 4);
}

TEST(Laplacian, ConstantIsHarmonicOnPeriodicBox) {
  for (int d = 1; d <= 3; ++d) {
    Field f(Box(d, 2, BoundaryMode::periodic), 3.5);
    Field lap = apply_laplacian(f);
    for (double v : lap.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Laplacian, DeltaStencilOnSmallDirichletBox) {
  Box box(1, 1);
  Field f(box);
  f[box.center_index()] = 1.0;
  Field lap = apply_laplacian(f);
  EXPECT_EQ(lap[0], 1.0);
  EXPECT_EQ(lap[1], -2.0);
  EXPECT_EQ(lap[2], 1.0);
}

TEST(Laplacian, MatchesDenseStencilMatrix) {
  for (auto mode : {BoundaryMode::zero_dirichlet, BoundaryMode::periodic}) {
    Box box(2, 2, mode);
    Field f = random_field(box, 11);
    Field lap = apply_laplacian(f);
    Eigen::VectorXd x(static_cast<Eigen::Index>(f.size()));
    for (std::size_t i = 0; i < f.size(); ++i) x(static_cast<Eigen::Index>(i)) = f[i];
    Eigen::VectorXd y = oracle::laplacian_matrix(box) * x;
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(lap[i], y(static_cast<Eigen::Index>(i)), 1e-13);
  }
}

TEST(Laplacian, RejectsSingularSites) {
  Field f(Box(1, 2), 0.0);
  f[1] = kNegInf;
  try {
    apply_laplacian(f);
    FAIL();
  } catch (const SingularSiteError& e) {
    EXPECT_EQ(e.site_index(), 1u);
  }
}

class LaplacianForm : public ::testing::TestWithParam<std::tuple<int, BoundaryMode, int>> {};

TEST_P(LaplacianForm, SymmetricAndNegativeSemidefinite) {
  const auto [d, mode, seed] = GetParam();
  Box box(d, 2, mode);
  Field f = random_field(box, static_cast<std::uint64_t>(seed));
  Field g = random_field(box, static_cast<std::uint64_t>(seed) + 100);
  Field lf = apply_laplacian(f), lg = apply_laplacian(g);
  EXPECT_NEAR(dot(lf.values(), g.values()), dot(f.values(), lg.values()), 1e-11);
  EXPECT_LE(dot(lf.values(), f.values()), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Grid, LaplacianForm,
                         ::testing::Combine(::testing::Values(1, 2, 3),
                                            ::testing::Values(BoundaryMode::zero_dirichlet, BoundaryMode::periodic),
                                            ::testing::Values(1, 2, 3)));

TEST(Laplacian, DirichletDiagonalAtInteriorSite) {
  Box box(3, 2);
  Field f(box);
  f[box.center_index()] = 1.0;
  EXPECT_EQ(apply_laplacian(f)[box.center_index()], -6.0);
}

TEST(RestrictDomain, SingleFiniteSite) {
  Box box(1, 3);
  Field f(box, kNegInf);
  f[box.center_index()] = 0.0;
  Restriction r = restrict_domain(f);
  ASSERT_EQ(r.domain.size(), 1u);
  EXPECT_EQ(r.domain.sites[0], box.center_index());
  EXPECT_EQ(r.domain.nbr[0], -1);
  EXPECT_EQ(r.domain.nbr[1], -1);
}

TEST(RestrictDomain, FiniteFieldKeepsWholeBox) {
  Box box(2, 2);
  Restriction r = restrict_domain(Field(box, 1.0));
  EXPECT_EQ(r.domain.size(), box.size());
}

TEST(RestrictDomain, TwoSiteClusterStaysAdjacent) {
  Box box(1, 3);
  Field f(box, kNegInf);
  f[3] = 0.0;
  f[4] = 0.0;
  Restriction r = restrict_domain(f);
  ASSERT_EQ(r.domain.size(), 2u);
  EXPECT_EQ(r.domain.nbr[0], 1);  // +e_0 neighbour of site 3 is local index 1
  EXPECT_EQ(r.domain.nbr[3], 0);
  EXPECT_EQ(connected_components(r.domain).size(), 1u);
}

TEST(RestrictDomain, SeparatedClustersAreDistinctComponents) {
  Box box(1, 3);
  Field f(box, kNegInf);
  f[0] = 0.0;
  f[5] = 0.0;
  f[6] = 0.0;
  auto comps = connected_components(restrict_domain(f).domain);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].size(), 1u);
  EXPECT_EQ(comps[1].size(), 2u);
}

TEST(Snapshot, RoundTripIsBitExact) {
  Box box(3, 2, BoundaryMode::periodic);
  Field f = random_field(box, 5);
  f[7] = kNegInf;
  const auto path = temp_path("roundtrip.snap");
  save_field(f, path, 1.25, 42, -3.5);
  Snapshot s = load_snapshot(path);
  EXPECT_EQ(s.header.dim, 3);
  EXPECT_EQ(s.header.radius, 2);
  EXPECT_EQ(s.header.mode, BoundaryMode::periodic);
  EXPECT_EQ(s.header.time, 1.25);
  EXPECT_EQ(s.header.seed, 42u);
  EXPECT_EQ(s.header.log_scale, -3.5);
  ASSERT_EQ(s.field.size(), f.size());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(s.field[i], f[i]);
  std::filesystem::remove(path);
}

TEST(Snapshot, TruncatedPayloadIsRejected) {
  Box box(1, 4);
  const auto path = temp_path("truncated.snap");
  save_field(Field(box, 2.0), path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  EXPECT_THROW(load_field(path), ParseError);
  std::filesystem::remove(path);
}

TEST(Snapshot, MissingFileIsRejected) { EXPECT_THROW(load_field(temp_path("absent.snap")), ParseError); }

TEST(Field, RejectsPositiveInfinity) {
  std::vector<double> v{0.0, std::numeric_limits<double>::infinity(), 0.0};
  EXPECT_THROW(Field(Box(1, 1), v), ConfigError);
}
