#include "pam/scaling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <boost/math/tools/minima.hpp>

#include "pam/error.hpp"

namespace pam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  return v;
}

// Bisection on the sign change of g in log space, expanding the bracket
// geometrically from x0 until the sign changes.
ScaleRoot monotone_root(const std::function<double(double)>& g, double x0, std::string_view what) {
  double lo = x0, hi = x0;
  double glo = g(lo), ghi = glo;
  int expansions = 0;
  while (!(ghi > 0.0)) {
    hi *= 2.0;
    ghi = g(hi);
    if (++expansions > 200 || !std::isfinite(hi)) {
      std::ostringstream os;
      os << what << ": no root in [" << x0 << ", " << hi << "]";
      throw NumericError(os.str());
    }
  }
  expansions = 0;
  while (!(glo < 0.0)) {
    lo *= 0.5;
    glo = g(lo);
    if (++expansions > 200 || lo == 0.0) {
      std::ostringstream os;
      os << what << ": no root in [" << lo << ", " << x0 << "]";
      throw NumericError(os.str());
    }
  }
  ScaleRoot root;
  for (root.iterations = 0; root.iterations < 200; ++root.iterations) {
    const double mid = std::sqrt(lo * hi);
    (g(mid) > 0.0 ? hi : lo) = mid;
    if (hi - lo <= 1e-12 * hi) break;
  }
  root.alpha = std::sqrt(lo * hi);
  return root;
}

struct Grid {
  int dim;
  std::size_t n;  // points per axis
  double step;
  double R;
  double coord(std::size_t j) const { return -R + static_cast<double>(j) * step; }
  std::size_t size() const { return dim == 1 ? n : n * n; }
};

// Lowest eigenpair of -kappa Delta_h + rho |x|^2 by inverse iteration.
std::pair<double, Eigen::VectorXd> harmonic_ground_state(const Grid& g, double kappa, double rho) {
  const auto N = static_cast<Eigen::Index>(g.size());
  const double c = kappa / (g.step * g.step);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(N) * (2 * g.dim + 1));
  const auto n = static_cast<Eigen::Index>(g.n);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::Index ix = g.dim == 1 ? i : i / n;
    const Eigen::Index iy = g.dim == 1 ? 0 : i % n;
    double r2 = 0.0;
    r2 += g.coord(static_cast<std::size_t>(ix)) * g.coord(static_cast<std::size_t>(ix));
    if (g.dim == 2) r2 += g.coord(static_cast<std::size_t>(iy)) * g.coord(static_cast<std::size_t>(iy));
    trip.emplace_back(i, i, 2.0 * g.dim * c + rho * r2);
    if (ix > 0) trip.emplace_back(i, i - (g.dim == 1 ? 1 : n), -c);
    if (ix + 1 < n) trip.emplace_back(i, i + (g.dim == 1 ? 1 : n), -c);
    if (g.dim == 2) {
      if (iy > 0) trip.emplace_back(i, i - 1, -c);
      if (iy + 1 < n) trip.emplace_back(i, i + 1, -c);
    }
  }
  Eigen::SparseMatrix<double> M(N, N);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw NumericError("class3_check: factorization failed");
  Eigen::VectorXd x = Eigen::VectorXd::Ones(N);
  x.normalize();
  std::vector<double> history;
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Eigen::VectorXd y = ldlt.solve(x);
    y.normalize();
    const double change = (y - x).lpNorm<Eigen::Infinity>();
    x = y;
    lambda = x.dot(M * x);
    history.push_back(lambda);
    if (change < 1e-14) return {lambda, x};
  }
  throw ConvergenceError("class3_check: inverse iteration did not converge", history);
}

}  // namespace

EtaFunction EtaFunction::power(double gamma, double scale) {
  if (!(gamma >= 0.0) || !(scale > 0.0)) throw ConfigError("eta = c t^gamma needs gamma >= 0, c > 0");
  EtaFunction e;
  e.eta = [gamma, scale](double t) { return scale * std::pow(t, gamma); };
  e.gamma = gamma;
  e.eta_star = gamma < 1.0 ? 0.0 : (gamma == 1.0 ? scale : kInf);
  std::ostringstream os;
  os << scale << "*t^" << gamma;
  e.name = os.str();
  return e;
}

EtaFunction EtaFunction::t_log_t() {
  EtaFunction e;
  e.eta = [](double t) { return t * std::log(std::max(t, M_E)); };
  e.gamma = 1.0;
  e.eta_star = kInf;
  e.name = "t*log(t)";
  return e;
}

EtaFunction EtaFunction::t_over_log_t() {
  EtaFunction e;
  e.eta = [](double t) { return t / std::log(std::max(t, M_E)); };
  e.gamma = 1.0;
  e.eta_star = 0.0;
  e.name = "t/log(t)";
  return e;
}

EtaFunction EtaFunction::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "power" || head == "bounded") return power(parse_number(arg, "eta exponent"));
  if (head == "linear") return power(1.0, parse_number(arg, "eta slope"));
  if (head == "double-exponential" && arg.empty()) return power(1.0, 1.0);
  if (head == "trap" && arg.empty()) return power(0.0, 1.0);
  if (head == "tlogt" && arg.empty()) return t_log_t();
  if (head == "t/logt" && arg.empty()) return t_over_log_t();
  throw ConfigError("unknown eta specification '" + std::string(text) + "'");
}

EtaFunction eta_for(const PotentialSpec& spec) {
  switch (spec.family) {
    case Family::double_exponential:
      return EtaFunction::power(1.0, 1.0);
    case Family::bernoulli_trap:
      return EtaFunction::power(0.0, 1.0);
    case Family::bounded_tail:
      return EtaFunction::power(spec.gamma, 1.0);
    case Family::tabulated:
      break;
  }
  throw ConfigError("no closed-form eta for tabulated laws; supply one explicitly");
}

double hhat(double y, const ScalingProfile& profile) {
  if (!(y > 0.0)) throw ConfigError("hhat needs y > 0");
  if (profile.gamma == 1.0) return profile.rho * y * std::log(y);
  return profile.rho * (y - std::pow(y, profile.gamma)) / (1.0 - profile.gamma);
}

int classify(double gamma, double eta_star) {
  if (!(gamma >= 0.0) || !(eta_star >= 0.0)) throw ConfigError("classify needs gamma >= 0 and eta_* >= 0");
  if (gamma < 1.0 && eta_star > 0.0) throw ConfigError("inconsistent pair: gamma < 1 forces eta_* = 0");
  if (eta_star == kInf) {
    if (gamma < 1.0) throw ConfigError("inconsistent pair: eta_* = inf needs gamma >= 1");
    return 1;
  }
  if (gamma > 1.0) throw ConfigError("inconsistent pair: gamma > 1 forces eta_* = inf");
  if (eta_star > 0.0) return 2;
  return gamma == 1.0 ? 3 : 4;
}

ScalingProfile make_profile(double gamma, double rho, double eta_star) {
  if (!(rho > 0.0)) throw ConfigError("scaling profile needs rho > 0");
  ScalingProfile p;
  p.gamma = gamma;
  p.rho = rho;
  p.eta_star = eta_star;
  p.cls = classify(gamma, eta_star);
  return p;
}

double island_exponent(double gamma, int d) {
  if (gamma >= 1.0) return 0.0;
  return (1.0 - gamma) / (d + 2.0 - d * gamma);
}

ScaleRoot alpha_annealed(const EtaFunction& eta, int d, double t) {
  if (!(t > 0.0) || d < 1) throw ConfigError("alpha_annealed needs t > 0 and d >= 1");
  if (eta.gamma > 1.0 || eta.eta_star == kInf)
    throw ConfigError("alpha_annealed needs gamma <= 1 and eta_* < inf");
  auto g = [&](double a) {
    const double s = t * std::pow(a, -d);
    return std::log(eta(s)) - std::log(s) + 2.0 * std::log(a);
  };
  ScaleRoot root = monotone_root(g, 1.0, "alpha_annealed");
  const double s = t * std::pow(root.alpha, -d);
  root.t_alpha_d = s;
  const double target = std::pow(root.alpha, -2.0);
  root.residual = std::abs(eta(s) / s - target) / target;
  return root;
}

ScaleRoot alpha_quenched(const std::function<double(double)>& alpha, int d, double t) {
  if (!(t > 1.0) || d < 1) throw ConfigError("alpha_quenched needs t > 1 and d >= 1");
  const double rhs = d * std::log(t);
  auto g = [&](double a) { return std::log(a) - 2.0 * std::log(alpha(a)) - std::log(rhs); };
  ScaleRoot root = monotone_root(g, rhs, "alpha_quenched");
  const double al = alpha(root.alpha);
  root.residual = std::abs(root.alpha / (al * al) - rhs) / rhs;
  return root;
}

Class3Check class3_check(double rho, double kappa, int d, double R, double step) {
  if (d != 1 && d != 2) throw ConfigError("class3_check supports d = 1 and d = 2");
  if (!(rho > 0.0) || !(kappa > 0.0) || !(R > 0.0) || !(step > 0.0) || step >= R)
    throw ConfigError("class3_check needs rho, kappa, R, step > 0 and step < R");
  const auto n = static_cast<std::size_t>(std::llround(2.0 * R / step)) + 1;
  const Grid grid{d, n, step, R};
  auto [lambda, x] = harmonic_ground_state(grid, kappa, rho);
  if (x.sum() < 0.0) x = -x;
  x /= x.maxCoeff();

  Class3Check out;
  out.dim = d;
  out.step = step;
  out.R = R;
  out.points_per_axis = n;
  out.lambda = -lambda;
  out.lambda_continuum = -d * std::sqrt(kappa * rho);
  out.a_continuum = 0.5 * std::sqrt(rho / kappa);

  std::vector<double> r2(grid.size());
  double total = 0.0, shell = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t ix = d == 1 ? i : i / n;
    const std::size_t iy = d == 1 ? 0 : i % n;
    double s = grid.coord(ix) * grid.coord(ix);
    if (d == 2) s += grid.coord(iy) * grid.coord(iy);
    r2[i] = s;
    const double w2 = x(static_cast<Eigen::Index>(i)) * x(static_cast<Eigen::Index>(i));
    total += w2;
    const bool edge = ix == 0 || ix + 1 == n || (d == 2 && (iy == 0 || iy + 1 == n));
    if (edge) shell += w2;
  }
  out.boundary_mass = shell / total;
  if (out.boundary_mass > 1e-6) {
    std::ostringstream os;
    os << "class3_check: boundary mass " << out.boundary_mass << " exceeds 1e-6; enlarge R";
    throw BoxTooSmallError(os.str(), out.boundary_mass);
  }

  const double wnorm = std::sqrt(total);
  auto misfit = [&](double a) {
    double wg = 0.0, gg = 0.0;
    for (std::size_t i = 0; i < r2.size(); ++i) {
      const double gi = std::exp(-a * r2[i]);
      wg += x(static_cast<Eigen::Index>(i)) * gi;
      gg += gi * gi;
    }
    const double c = wg / gg;
    double err = 0.0;
    for (std::size_t i = 0; i < r2.size(); ++i) {
      const double e = x(static_cast<Eigen::Index>(i)) - c * std::exp(-a * r2[i]);
      err += e * e;
    }
    return std::sqrt(err) / wnorm;
  };
  const auto [a_best, err_best] =
      boost::math::tools::brent_find_minima(misfit, out.a_continuum / 4.0, out.a_continuum * 4.0, 52);
  out.a_fit = a_best;
  out.rel_l2_error = err_best;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t ix = d == 1 ? i : i / n;
    const std::size_t iy = d == 1 ? 0 : i % n;
    const std::size_t mx = n - 1 - ix, my = d == 1 ? 0 : n - 1 - iy;
    const std::size_t j1 = d == 1 ? mx : mx * n + iy;
    out.symmetry_error = std::max(out.symmetry_error, std::abs(x(static_cast<Eigen::Index>(i)) - x(static_cast<Eigen::Index>(j1))));
    if (d == 2) {
      const std::size_t j2 = ix * n + my;
      out.symmetry_error = std::max(out.symmetry_error, std::abs(x(static_cast<Eigen::Index>(i)) - x(static_cast<Eigen::Index>(j2))));
    }
  }
  if (d == 2) {
    auto [l1, x1] = harmonic_ground_state(Grid{1, n, step, R}, kappa, rho);
    if (x1.sum() < 0.0) x1 = -x1;
    x1 /= x1.maxCoeff();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double prod = x1(static_cast<Eigen::Index>(i / n)) * x1(static_cast<Eigen::Index>(i % n));
      out.factorization_error = std::max(out.factorization_error, std::abs(prod - x(static_cast<Eigen::Index>(i))));
    }
  }
  out.eigenfunction.assign(x.data(), x.data() + x.size());
  return out;
}

}  // namespace pam
