#include "pam/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <json.hpp>

#include "pam/error.hpp"
#include "pam/rng.hpp"
#include "pam/stats.hpp"

namespace pam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using nlohmann::json;

double log_sum_exp(const std::vector<double>& terms) {
  if (terms.empty()) return kNegInf;
  const double m = *std::max_element(terms.begin(), terms.end());
  if (m == kNegInf) return m;
  double s = 0.0;
  for (double x : terms) s += std::exp(x - m);
  return m + std::log(s);
}

// log of int exp(g(y)) dy for a smooth g whose derivative is strictly
// decreasing (one interior maximum).
template <class G, class GP>
double log_integral_unimodal(G g, GP gprime) {
  double lo = -1.0, hi = 1.0;
  while (gprime(lo) <= 0.0) lo *= 2.0;
  while (gprime(hi) >= 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (gprime(mid) > 0.0 ? lo : hi) = mid;
  }
  const double ystar = 0.5 * (lo + hi);
  const double gmax = g(ystar);
  boost::math::quadrature::sinh_sinh<double> integrator;
  auto f = [&](double z) {
    const double v = g(ystar + z) - gmax;
    return v < -745.0 ? 0.0 : std::exp(v);
  };
  const double value = integrator.integrate(f, 1e-12);
  return gmax + std::log(value);
}

const json& require(const json& params, const char* key, const char* family) {
  auto it = params.find(key);
  if (it == params.end() || !it->is_number())
    throw ConfigError(std::string(family) + "." + key + " is required and must be a number");
  return *it;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

double tabulated_cdf(const PotentialSpec& s, double x) {
  const auto k = static_cast<std::size_t>(std::upper_bound(s.r.begin(), s.r.end(), x) - s.r.begin());
  if (k == 0) return 0.0;
  if (k == s.r.size()) return 1.0;
  const std::size_t i = k - 1;
  const double w = (x - s.r[i]) / (s.r[i + 1] - s.r[i]);
  return s.F[i] + w * (s.F[i + 1] - s.F[i]);
}

double tabulated_quantile(const PotentialSpec& s, double u) {
  const auto j = static_cast<std::size_t>(std::lower_bound(s.F.begin(), s.F.end(), u) - s.F.begin());
  if (j == 0) return s.r.front();
  if (j == s.F.size()) return s.r.back();
  if (s.r[j - 1] == s.r[j]) return s.r[j];
  return s.r[j - 1] + (u - s.F[j - 1]) / (s.F[j] - s.F[j - 1]) * (s.r[j] - s.r[j - 1]);
}

// Bounded-tail law with gamma > 0: xi = -T, P(T <= x) = exp(-D x^{-beta}).
double beta_of(const PotentialSpec& s) { return s.gamma / (1.0 - s.gamma); }

bool bounded_is_trap(const PotentialSpec& s) {
  return s.family == Family::bounded_tail && s.gamma == 0.0;
}

double trap_probability(const PotentialSpec& s) {
  return s.family == Family::bernoulli_trap ? s.p_trap : -std::expm1(-s.D);
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::double_exponential: return "double_exponential";
    case Family::bernoulli_trap: return "bernoulli_trap";
    case Family::bounded_tail: return "bounded_tail";
    case Family::tabulated: return "tabulated";
  }
  return "?";
}

PotentialSpec PotentialSpec::double_exponential(double rho) {
  PotentialSpec s;
  s.family = Family::double_exponential;
  s.rho = rho;
  s.validate();
  return s;
}

PotentialSpec PotentialSpec::bernoulli_trap(double p_trap) {
  PotentialSpec s;
  s.family = Family::bernoulli_trap;
  s.p_trap = p_trap;
  s.validate();
  return s;
}

PotentialSpec PotentialSpec::bounded_tail(double D, double gamma) {
  PotentialSpec s;
  s.family = Family::bounded_tail;
  s.D = D;
  s.gamma = gamma;
  s.validate();
  return s;
}

PotentialSpec PotentialSpec::tabulated(std::vector<double> r, std::vector<double> F) {
  PotentialSpec s;
  s.family = Family::tabulated;
  s.r = std::move(r);
  s.F = std::move(F);
  s.validate();
  return s;
}

PotentialSpec PotentialSpec::constant(double c) { return tabulated({c, c}, {0.0, 1.0}); }

void PotentialSpec::validate() const {
  switch (family) {
    case Family::double_exponential:
      if (!(rho > 0.0) || !std::isfinite(rho))
        throw ConfigError("double_exponential.rho must be in (0, inf)");
      break;
    case Family::bernoulli_trap:
      // p = 1 is kept as the degenerate all-trap law.
      if (!(p_trap >= 0.0 && p_trap <= 1.0))
        throw ConfigError("bernoulli_trap.p_trap must be in [0, 1]");
      break;
    case Family::bounded_tail:
      if (!(D > 0.0) || !std::isfinite(D)) throw ConfigError("bounded_tail.D must be positive");
      if (!(gamma >= 0.0 && gamma < 1.0))
        throw ConfigError("bounded_tail.gamma must be in [0, 1)");
      break;
    case Family::tabulated: {
      if (r.size() < 2 || r.size() != F.size())
        throw ConfigError("tabulated.r and tabulated.F need equal length >= 2");
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (!std::isfinite(r[i])) throw ConfigError("tabulated.r must be finite");
        if (!(F[i] >= 0.0 && F[i] <= 1.0)) throw ConfigError("tabulated.F must lie in [0, 1]");
        if (i > 0 && (r[i] < r[i - 1] || F[i] < F[i - 1]))
          throw ConfigError("tabulated.r and tabulated.F must be nondecreasing");
        if (i > 1 && r[i] == r[i - 1] && r[i] == r[i - 2])
          throw ConfigError("tabulated.r repeats a knot more than twice");
      }
      if (F.back() != 1.0) throw ConfigError("tabulated.F must end at 1");
      break;
    }
  }
}

PotentialSpec PotentialSpec::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("potential spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("potential spec must be a JSON object");
  reject_unknown(j, {"family", "params"}, "potential spec");
  if (!j.contains("family") || !j["family"].is_string())
    throw ConfigError("potential spec needs a string 'family'");
  const std::string family = j["family"];
  const json params = j.value("params", json::object());
  if (!params.is_object()) throw ConfigError("potential params must be an object");
  PotentialSpec s;
  if (family == "double_exponential") {
    reject_unknown(params, {"rho"}, family);
    s.family = Family::double_exponential;
    s.rho = require(params, "rho", "double_exponential");
  } else if (family == "bernoulli_trap") {
    reject_unknown(params, {"p_trap"}, family);
    s.family = Family::bernoulli_trap;
    s.p_trap = require(params, "p_trap", "bernoulli_trap");
  } else if (family == "bounded_tail") {
    reject_unknown(params, {"D", "gamma"}, family);
    s.family = Family::bounded_tail;
    s.D = require(params, "D", "bounded_tail");
    s.gamma = require(params, "gamma", "bounded_tail");
  } else if (family == "tabulated") {
    reject_unknown(params, {"r", "F"}, family);
    s.family = Family::tabulated;
    try {
      s.r = params.at("r").get<std::vector<double>>();
      s.F = params.at("F").get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError("tabulated.r and tabulated.F must be numeric arrays");
    }
  } else if (family == "constant") {
    reject_unknown(params, {"c"}, family);
    return constant(require(params, "c", "constant"));
  } else {
    throw ConfigError("unknown potential family '" + family + "'");
  }
  s.validate();
  return s;
}

std::string PotentialSpec::to_json() const {
  json j;
  j["family"] = std::string(to_string(family));
  switch (family) {
    case Family::double_exponential: j["params"] = {{"rho", rho}}; break;
    case Family::bernoulli_trap: j["params"] = {{"p_trap", p_trap}}; break;
    case Family::bounded_tail: j["params"] = {{"D", D}, {"gamma", gamma}}; break;
    case Family::tabulated: j["params"] = {{"r", r}, {"F", F}}; break;
  }
  return j.dump();
}

double quantile(const PotentialSpec& spec, double u) {
  switch (spec.family) {
    case Family::double_exponential:
      return spec.rho * std::log(-std::log1p(-u));
    case Family::bernoulli_trap:
      return u < spec.p_trap ? kNegInf : 0.0;
    case Family::bounded_tail: {
      if (bounded_is_trap(spec)) return u < trap_probability(spec) ? kNegInf : 0.0;
      // P(xi <= r) = 1 - exp(-D (-r)^{-beta}) for r < 0.
      const double s = -std::log1p(-u);
      return -std::pow(spec.D / s, 1.0 / beta_of(spec));
    }
    case Family::tabulated:
      return tabulated_quantile(spec, u);
  }
  return 0.0;
}

Field sample_field(const PotentialSpec& spec, const Box& box, std::uint64_t seed) {
  spec.validate();
  std::vector<double> values(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point x = box.point(i);
    CounterRng rng(stream_key(seed, std::span<const int>(x)));
    values[i] = quantile(spec, rng.uniform());
  }
  return Field(box, std::move(values));
}

TailFunctions::TailFunctions(PotentialSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

double TailFunctions::cdf(double r) const {
  switch (spec_.family) {
    case Family::double_exponential:
      return -std::expm1(-std::exp(r / spec_.rho));
    case Family::bernoulli_trap:
    case Family::bounded_tail:
      if (r >= 0.0) return 1.0;
      if (spec_.family == Family::bernoulli_trap || bounded_is_trap(spec_))
        return trap_probability(spec_);
      return -std::expm1(-spec_.D * std::pow(-r, -beta_of(spec_)));
    case Family::tabulated:
      return tabulated_cdf(spec_, r);
  }
  return 0.0;
}

double TailFunctions::phi(double r) const {
  switch (spec_.family) {
    case Family::double_exponential:
      return std::exp(r / spec_.rho);
    case Family::bounded_tail:
      if (!bounded_is_trap(spec_)) return r >= 0.0 ? kInf : spec_.D * std::pow(-r, -beta_of(spec_));
      [[fallthrough]];
    default: {
      const double F = cdf(r);
      return F >= 1.0 ? kInf : -std::log1p(-F);
    }
  }
}

double TailFunctions::psi(double s) const {
  if (spec_.family == Family::double_exponential) return spec_.rho * std::log(s);
  if (spec_.family == Family::bounded_tail && !bounded_is_trap(spec_))
    return -std::pow(spec_.D / s, 1.0 / beta_of(spec_));
  if (spec_.family == Family::bernoulli_trap || bounded_is_trap(spec_))
    return s <= -std::log1p(-trap_probability(spec_)) ? kNegInf : 0.0;
  return psi_bisection(s);
}

double TailFunctions::psi_bisection(double s) const {
  double hi = 1.0;
  while (phi(hi) < s) {
    hi = hi < 0.0 ? hi / 2.0 : 2.0 * hi + 1.0;
    if (hi > 1e300) return kInf;
  }
  double step = 1.0, lo = hi - step;
  while (phi(lo) >= s) {
    step *= 2.0;
    lo = hi - step;
    if (lo < -1e300) return kNegInf;
  }
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (phi(mid) >= s ? hi : lo) = mid;
  }
  return hi;
}

double TailFunctions::H(double t) const {
  if (t == 0.0) return 0.0;
  switch (spec_.family) {
    case Family::double_exponential:
      // xi = rho log E with E ~ Exp(1), so E exp(t xi) = Gamma(1 + rho t).
      if (t <= -1.0 / spec_.rho)
        throw DivergenceError("H(t) = +inf for t <= -1/rho in the double-exponential family");
      return std::lgamma(1.0 + spec_.rho * t);
    case Family::bernoulli_trap:
    case Family::bounded_tail:
      if (t < 0.0 && (spec_.family == Family::bounded_tail || spec_.p_trap > 0.0))
        throw DivergenceError("H(t) = +inf for t < 0 when xi is unbounded below");
      if (spec_.family == Family::bernoulli_trap || bounded_is_trap(spec_)) {
        const double p = trap_probability(spec_);
        return p >= 1.0 ? kNegInf : std::log1p(-p);
      }
      return H_quadrature(t);
    case Family::tabulated: {
      std::vector<double> terms;
      const auto& r = spec_.r;
      const auto& F = spec_.F;
      if (F.front() > 0.0) terms.push_back(std::log(F.front()) + t * r.front());
      for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const double dF = F[i + 1] - F[i];
        if (dF <= 0.0) continue;
        const double dr = r[i + 1] - r[i];
        if (dr == 0.0) {
          terms.push_back(std::log(dF) + t * r[i]);
        } else {
          const double slope = dF / dr;
          terms.push_back(std::log(slope) + t * r[i] + std::log(std::expm1(t * dr) / t));
        }
      }
      return log_sum_exp(terms);
    }
  }
  return 0.0;
}

double TailFunctions::H_quadrature(double t) const {
  if (t == 0.0) return 0.0;
  switch (spec_.family) {
    case Family::double_exponential: {
      if (t <= -1.0 / spec_.rho)
        throw DivergenceError("H(t) = +inf for t <= -1/rho in the double-exponential family");
      // With x = e^y: E exp(t xi) = int exp(a y - e^y) dy, a = 1 + rho t.
      const double a = 1.0 + spec_.rho * t;
      return log_integral_unimodal([a](double y) { return a * y - std::exp(y); },
                                   [a](double y) { return a - std::exp(y); });
    }
    case Family::bounded_tail: {
      if (bounded_is_trap(spec_)) return H(t);
      if (t < 0.0) throw DivergenceError("H(t) = +inf for t < 0 when xi is unbounded below");
      // E exp(-t T) = int t e^{-tx} P(T <= x) dx, then x = e^y.
      const double D = spec_.D, beta = beta_of(spec_);
      return log_integral_unimodal(
          [=](double y) { return std::log(t) + y - t * std::exp(y) - D * std::exp(-beta * y); },
          [=](double y) { return 1.0 - t * std::exp(y) + D * beta * std::exp(-beta * y); });
    }
    case Family::tabulated: {
      std::vector<double> terms;
      const auto& r = spec_.r;
      const auto& F = spec_.F;
      if (F.front() > 0.0) terms.push_back(std::log(F.front()) + t * r.front());
      for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const double dF = F[i + 1] - F[i];
        if (dF <= 0.0) continue;
        if (r[i + 1] == r[i]) {
          terms.push_back(std::log(dF) + t * r[i]);
          continue;
        }
        const double slope = dF / (r[i + 1] - r[i]);
        const double anchor = t > 0 ? r[i + 1] : r[i];
        auto f = [&](double x) { return std::exp(t * (x - anchor)); };
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, r[i], r[i + 1], 10, 1e-12);
        terms.push_back(std::log(slope * v) + t * anchor);
      }
      return log_sum_exp(terms);
    }
    case Family::bernoulli_trap:
      return H(t);
  }
  return 0.0;
}

double TailFunctions::ess_sup() const {
  switch (spec_.family) {
    case Family::double_exponential: return kInf;
    case Family::bernoulli_trap: return spec_.p_trap >= 1.0 ? kNegInf : 0.0;
    case Family::bounded_tail: return 0.0;
    case Family::tabulated: {
      const auto it = std::lower_bound(spec_.F.begin(), spec_.F.end(), 1.0);
      return spec_.r[static_cast<std::size_t>(it - spec_.F.begin())];
    }
  }
  return kInf;
}

HLimitEstimate assumption_H_limit(const PotentialSpec& spec, double c,
                                  std::span<const double> t_grid) {
  if (!(c > 0.0 && c <= 1.0)) throw ConfigError("assumption_H_limit needs c in (0, 1]");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0) || (i > 0 && t_grid[i] <= t_grid[i - 1]))
      throw ConfigError("t_grid must be positive and increasing");
  }
  TailFunctions tails(spec);
  HLimitEstimate est;
  est.t.assign(t_grid.begin(), t_grid.end());
  for (double t : t_grid) est.ratios.push_back((tails.H(c * t) - c * tails.H(t)) / t);
  if (c == 1.0) {
    est.extrapolated = 0.0;
    est.converged = true;
    est.limit = 0.0;
    return est;
  }
  if (est.t.size() < 4) {
    if (!est.ratios.empty()) est.extrapolated = est.ratios.back();
    return est;
  }
  auto fit = [&](std::size_t first) {
    std::vector<double> one, logt, inv, y;
    for (std::size_t i = first; i < est.t.size(); ++i) {
      one.push_back(1.0);
      logt.push_back(std::log(est.t[i]) / est.t[i]);
      inv.push_back(1.0 / est.t[i]);
      y.push_back(est.ratios[i]);
    }
    return stats::least_squares({one, logt, inv}, y)[0];
  };
  est.extrapolated = fit(0);
  const double dropped = fit(1);
  const double scale = std::max({1e-12, std::abs(est.extrapolated), std::abs(est.ratios.back())});
  est.converged = std::isfinite(est.extrapolated) && std::abs(dropped - est.extrapolated) <= 1e-3 * scale;
  if (est.converged) est.limit = est.extrapolated;
  return est;
}

Height max_height(const Field& f) { return max_height(f, f.box().radius()); }

Height max_height(const Field& f, int radius) {
  Height h;
  h.h = kNegInf;
  const Box& box = f.box();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (radius < box.radius()) {
      const Point off = box.offset(i);
      bool inside = true;
      for (int v : off) inside = inside && std::abs(v) <= radius;
      if (!inside) continue;
    }
    if (f[i] > h.h) {
      h.h = f[i];
      h.argmax.assign(1, i);
    } else if (f[i] == h.h && h.h > kNegInf) {
      h.argmax.push_back(i);
    }
  }
  if (h.h == kNegInf) throw NumericError("max_height: field is -inf everywhere");
  return h;
}

HeightNormalization height_normalization(const TailFunctions& tails, int d, double t) {
  HeightNormalization n;
  n.psi_d_log_t = tails.psi(d * std::log(t));
  n.psi_log_box = tails.psi(d * std::log(2.0 * t + 1.0));
  return n;
}

ContinuumSample rescale_shift(const Field& f, double shift, double alpha, double R,
                              std::optional<double> step) {
  if (!(alpha >= 1.0)) throw ConfigError("rescale_shift needs alpha >= 1");
  if (!(R >= 0.0)) throw ConfigError("rescale_shift needs R >= 0");
  ContinuumSample out;
  out.dim = f.box().dim();
  out.step = step.value_or(1.0 / alpha);
  if (!(out.step > 0.0)) throw ConfigError("rescale_shift needs a positive grid step");
  const auto n = static_cast<std::size_t>(std::floor(2.0 * R / out.step + 1e-9)) + 1;
  for (std::size_t j = 0; j < n; ++j) out.axis.push_back(-R + static_cast<double>(j) * out.step);
  std::vector<int> site(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = std::floor(out.axis[j] * alpha + 1e-12);
    if (std::abs(s) > f.box().radius())
      throw ConfigError("rescale_shift window exceeds the field's box");
    site[j] = static_cast<int>(s);
  }
  std::size_t total = 1;
  for (int k = 0; k < out.dim; ++k) total *= n;
  out.values.resize(total);
  const double a2 = alpha * alpha;
  Point x(static_cast<std::size_t>(out.dim));
  std::vector<std::size_t> idx(static_cast<std::size_t>(out.dim), 0);
  for (std::size_t m = 0; m < total; ++m) {
    for (int k = 0; k < out.dim; ++k) x[k] = f.box().center()[k] + site[idx[k]];
    const double v = f.at(x);
    out.values[m] = v == kNegInf ? kNegInf : a2 * (v - shift);
    for (int k = out.dim - 1; k >= 0; --k) {
      if (++idx[k] < n) break;
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace pam
