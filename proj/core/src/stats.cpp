#include "pam/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "pam/error.hpp"
#include "pam/rng.hpp"

namespace pam::stats {

MeanSe mean_se(std::span<const double> x) {
  MeanSe r;
  const auto n = static_cast<double>(x.size());
  if (x.empty()) return r;
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return r;
}

double log_mean_exp(std::span<const double> logs) {
  if (logs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(logs.begin(), logs.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double l : logs) s += std::exp(l - m);
  return m + std::log(s / static_cast<double>(logs.size()));
}

Interval bootstrap(std::size_t n,
                   const std::function<double(std::span<const std::size_t>)>& statistic,
                   std::size_t resamples, std::uint64_t seed, double level) {
  if (n == 0) throw ConfigError("bootstrap needs at least one unit");
  std::vector<double> values;
  values.reserve(resamples);
  std::vector<std::size_t> idx(n);
  for (std::size_t b = 0; b < resamples; ++b) {
    CounterRng rng(stream_key(seed, {0x626f6f74, static_cast<std::int64_t>(b)}));
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    const double v = statistic(idx);
    if (std::isfinite(v)) values.push_back(v);
  }
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  const double alpha = 0.5 * (1.0 - level);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("line fit needs at least two points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (!sigma.empty()) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mx) * (x[i] - mx) * sigma[i] * sigma[i];
    f.slope_se = std::sqrt(var) / sxx;
  } else if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

std::vector<double> least_squares(const std::vector<std::vector<double>>& columns,
                                  std::span<const double> y) {
  const auto m = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd a(m, k);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    b(i) = y[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j)
      a(i, j) = columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  return {c.data(), c.data() + c.size()};
}

TestResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                          double min_expected) {
  if (observed.size() != expected.size() || observed.empty())
    throw ConfigError("chi-square: observed/expected size mismatch");
  std::vector<double> obs, exp;
  double o_acc = 0.0, e_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected[i];
    if (e_acc >= min_expected) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp.empty()) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
    } else {
      obs.back() += o_acc;
      exp.back() += e_acc;
    }
  }
  TestResult r;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double d = obs[i] - exp[i];
    r.statistic += d * d / exp[i];
  }
  r.dof = static_cast<int>(obs.size()) - 1;
  if (r.dof < 1) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ConfigError("KS test needs samples");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  TestResult r;
  r.statistic = d;
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

double median(std::vector<double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  double m = x[mid];
  if (x.size() % 2 == 0) {
    const double lower = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

}  // namespace pam::stats
