#include "pam/green.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pam/error.hpp"
#include "pam/stats.hpp"

namespace pam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kFirstPanelExponent = -16;
constexpr int kLastPanelExponent = 44;

// Coefficients of exp(-x) I_0(x) ~ (2 pi x)^{-1/2} sum_k a_k x^{-k}.
std::vector<double> bessel_asymptotic_coefficients(int count) {
  std::vector<double> a(static_cast<std::size_t>(count));
  a[0] = 1.0;
  for (int k = 1; k < count; ++k) {
    const double odd = 2.0 * k - 1.0;
    a[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(k - 1)] * odd * odd / (8.0 * k);
  }
  return a;
}

// exp(-2s) I_0(2s): the return probability of a one-dimensional walk with
// generator Delta.
double heat_kernel_1d(double s) {
  const double x = 2.0 * s;
  if (x < 50.0) return std::exp(-x) * std::cyl_bessel_i(0.0, x);
  static const std::vector<double> a = bessel_asymptotic_coefficients(12);
  double sum = 0.0, p = 1.0;
  for (double c : a) {
    sum += c * p;
    p /= x;
  }
  return sum / std::sqrt(2.0 * M_PI * x);
}

struct NodeSet {
  std::vector<double> s;
  std::vector<double> weight;  // quadrature weight times heat_kernel_1d(s)^d
};

const NodeSet& nodes(int d, int refinement) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, NodeSet> cache;
  std::lock_guard lock(mutex);
  auto [it, inserted] = cache.try_emplace({d, refinement});
  if (!inserted) return it->second;
  NodeSet& ns = it->second;
  using Rule = boost::math::quadrature::gauss<double, 30>;
  const auto& x = Rule::abscissa();
  const auto& w = Rule::weights();
  std::vector<double> edges{0.0};
  for (int e = kFirstPanelExponent; e <= kLastPanelExponent; ++e) edges.push_back(std::ldexp(1.0, e));
  const int pieces = 1 << refinement;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double len = (edges[p + 1] - edges[p]) / pieces;
    for (int q = 0; q < pieces; ++q) {
      const double a = edges[p] + q * len;
      const double half = 0.5 * len, mid = a + half;
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (double sgn : {-1.0, 1.0}) {
          const double s = mid + sgn * half * x[i];
          ns.s.push_back(s);
          ns.weight.push_back(half * w[i] * std::pow(heat_kernel_1d(s), d));
        }
      }
    }
  }
  return ns;
}

// int_S^inf exp(-mu s) heat_kernel_1d(s)^d ds from the asymptotic series.
double tail(double mu, int d, double S) {
  if (mu * S > 700.0) return 0.0;
  if (d <= 2) {
    if (mu == 0.0) return kInf;
    const double a = 0.5 * d;
    const double x = mu * S;
    const double upper = d == 1 ? boost::math::tgamma(0.5, x) : boost::math::expint(1, x);
    return std::pow(4.0 * M_PI, -a) * std::pow(mu, a - 1.0) * upper;
  }
  // (sum_k a_k u^k)^d with u = 1/(2s), truncated.
  const int terms = 6;
  const std::vector<double> a = bessel_asymptotic_coefficients(terms);
  std::vector<double> c(static_cast<std::size_t>(terms), 0.0);
  c[0] = 1.0;
  for (int rep = 0; rep < d; ++rep) {
    std::vector<double> next(static_cast<std::size_t>(terms), 0.0);
    for (int i = 0; i < terms; ++i)
      for (int j = 0; i + j < terms; ++j)
        next[static_cast<std::size_t>(i + j)] += c[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(j)];
    c = next;
  }
  double sum = 0.0;
  for (int j = 0; j < terms; ++j) {
    const double expo = 0.5 * d + j;
    sum += c[static_cast<std::size_t>(j)] * std::pow(2.0, -j) * std::pow(S, 1.0 - expo) / (expo - 1.0);
  }
  return std::exp(-mu * S) * std::pow(4.0 * M_PI, -0.5 * d) * sum;
}

}  // namespace

double resolvent_origin(double mu, int d, int refinement) {
  if (d < 1) throw ConfigError("dimension must be positive");
  if (!(mu >= 0.0)) throw ConfigError("resolvent needs mu >= 0");
  if (refinement < 0 || refinement > 6) throw ConfigError("refinement must be in [0, 6]");
  if (mu == 0.0 && d <= 2) return kInf;
  const NodeSet& ns = nodes(d, refinement);
  double sum = 0.0;
  for (std::size_t i = 0; i < ns.s.size(); ++i) sum += ns.weight[i] * std::exp(-mu * ns.s[i]);
  return sum + tail(mu, d, std::ldexp(1.0, kLastPanelExponent));
}

GreenValue green_function_origin(int d, int refinement) {
  GreenValue g;
  if (d <= 2) {
    g.G = kInf;
    g.r_threshold = 0.0;
    g.recurrent = true;
    return g;
  }
  g.G = resolvent_origin(0.0, d, refinement);
  g.r_threshold = 1.0 / g.G;
  return g;
}

std::string_view to_string(MuMethod m) {
  switch (m) {
    case MuMethod::resolvent: return "resolvent";
    case MuMethod::box: return "box";
    case MuMethod::both: return "both";
  }
  return "?";
}

MuMethod parse_mu_method(std::string_view text) {
  if (text == "resolvent") return MuMethod::resolvent;
  if (text == "box") return MuMethod::box;
  if (text == "both") return MuMethod::both;
  throw ConfigError("unknown mu method '" + std::string(text) + "'");
}

double box_top_eigenvalue(double r, int d, int R) {
  if (d < 1 || R < 0) throw ConfigError("box_top_eigenvalue: bad geometry");
  const int n = 2 * R + 1;
  std::vector<double> e;
  for (int j = 1; j <= n; j += 2) e.push_back(-2.0 * (1.0 - std::cos(M_PI * j / (n + 1))));
  const double top = d * e[0];
  if (r <= 0.0) return top;
  std::vector<double> energies{0.0};
  for (int k = 0; k < d; ++k) {
    std::vector<double> next;
    next.reserve(energies.size() * e.size());
    for (double a : energies)
      for (double b : e) next.push_back(a + b);
    energies.swap(next);
  }
  const double weight = std::pow(2.0 / (n + 1), d);
  auto f = [&](double lambda) {
    double s = 0.0;
    for (double E : energies) s += 1.0 / (lambda - E);
    return r * weight * s - 1.0;
  };
  // f decreases from +inf at the top unperturbed level; the weights sum to 1,
  // so f(top + r) <= 0.
  double lo = top, hi = top + r;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

std::vector<int> default_radii(int d) {
  switch (d) {
    case 1: return {50, 100, 200, 400};
    case 2: return {16, 24, 32, 48};
    case 3: return {16, 24, 32, 48};
    default: return {6, 8, 12, 16};
  }
}

RankOneResult mu_resolvent(double r, int d) {
  RankOneResult res;
  res.r = r;
  res.d = d;
  res.method = MuMethod::resolvent;
  if (r == 0.0) return res;
  if (d >= 3) {
    const GreenValue g = green_function_origin(d);
    if (r <= g.r_threshold) {
      res.residual = std::max(0.0, 1.0 - r * g.G);
      return res;
    }
  }
  auto f = [&](double mu) { return r * resolvent_origin(mu, d) - 1.0; };
  double lo = std::max(0.0, r - 2.0 * d), hi = r;
  while (f(hi) > 0.0) hi *= 2.0;
  while (lo > 0.0 && f(lo) < 0.0) lo *= 0.5;
  if (lo == 0.0) {
    double x = hi;
    while (f(x * 0.5) <= 0.0) {
      x *= 0.5;
      if (x < 1e-300) return res;
    }
    hi = x;
    lo = 0.5 * x;
  }
  for (int it = 0; it < 300 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  res.mu = 0.5 * (lo + hi);
  res.residual = std::abs(f(res.mu));
  return res;
}

RankOneResult mu_box(double r, int d, std::vector<int> radii) {
  RankOneResult res;
  res.r = r;
  res.d = d;
  res.method = MuMethod::box;
  if (radii.empty()) radii = default_radii(d);
  if (radii.size() < 3) throw ConfigError("box method needs at least three radii");
  std::sort(radii.begin(), radii.end());
  res.radii = radii;
  std::vector<double> one, h2, h3;
  for (int R : radii) {
    res.box_values.push_back(box_top_eigenvalue(r, d, R));
    const double h = 1.0 / (R + 1.0);
    one.push_back(1.0);
    h2.push_back(h * h);
    h3.push_back(h * h * h);
  }
  res.extrapolated = stats::least_squares({one, h2, h3}, res.box_values)[0];
  res.mu = std::max(0.0, res.extrapolated);
  return res;
}

}  // namespace

RankOneResult mu_of_r(double r, int d, const MuOptions& opts) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("mu_of_r needs finite r >= 0");
  if (d < 1) throw ConfigError("dimension must be positive");
  switch (opts.method) {
    case MuMethod::resolvent:
      return mu_resolvent(r, d);
    case MuMethod::box:
      return mu_box(r, d, opts.radii);
    case MuMethod::both: {
      RankOneResult a = mu_resolvent(r, d);
      const RankOneResult b = mu_box(r, d, opts.radii);
      if (std::abs(a.mu - b.mu) > opts.agreement_tol) {
        std::ostringstream os;
        os << "mu(" << r << ") in d=" << d << ": resolvent " << a.mu << " vs box " << b.mu;
        throw MethodDisagreementError(os.str(), a.mu, b.mu);
      }
      a.method = MuMethod::both;
      a.radii = b.radii;
      a.box_values = b.box_values;
      a.extrapolated = b.extrapolated;
      return a;
    }
  }
  return {};
}

}  // namespace pam
