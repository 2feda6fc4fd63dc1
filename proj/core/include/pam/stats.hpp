#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pam::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> x);

// log(mean(exp(logs))) without overflow.
double log_mean_exp(std::span<const double> logs);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double half_width() const noexcept { return 0.5 * (hi - lo); }
};

// Percentile bootstrap over n i.i.d. units. statistic receives the resampled
// unit indices. Deterministic given seed.
Interval bootstrap(std::size_t n,
                   const std::function<double(std::span<const std::size_t>)>& statistic,
                   std::size_t resamples, std::uint64_t seed, double level = 0.95);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // from the supplied per-point sigmas, else from residuals
};

// Ordinary least squares; sigma (optional) is propagated into slope_se.
LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma = {});

// General least squares on a small dense basis; returns coefficients.
std::vector<double> least_squares(const std::vector<std::vector<double>>& columns,
                                  std::span<const double> y);

struct TestResult {
  double statistic = 0.0;
  double p_value = 0.0;
  int dof = 0;
};

// Pearson chi-square goodness of fit. Cells whose expected count is below
// min_expected are pooled into the last retained cell.
TestResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                          double min_expected = 5.0);

// One-sample Kolmogorov-Smirnov test against a continuous CDF.
TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

double median(std::vector<double> x);

}  // namespace pam::stats
