#include "pam/variational.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "pam/error.hpp"
#include "pam/spectral.hpp"

namespace pam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// (-Delta v)(x) with the box's boundary handling.
void neg_laplacian(const Box& box, std::span<const double> v, std::span<double> out) {
  const int slots = 2 * box.dim();
  for (std::size_t x = 0; x < box.size(); ++x) {
    double acc = slots * v[x];
    for (int q = 0; q < slots; ++q) {
      const std::int32_t y = box.neighbor(x, q);
      if (y != Box::kOutside) acc -= v[static_cast<std::size_t>(y)];
    }
    out[x] = acc;
  }
}

double sup_norm_shell(const Box& box, std::span<const double> mu) {
  double mass = 0.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point off = box.offset(i);
    int m = 0;
    for (int c : off) m = std::max(m, std::abs(c));
    if (m == box.radius()) mass += mu[i];
  }
  return mass;
}

// kappa <-Delta v, v> - rho sum v^2 log v^2 at v = e^s / |e^s|, and its
// gradient in s.
struct ChiObjective {
  const Box& box;
  double kappa;
  double rho;
  mutable std::vector<double> v, lv;

  ChiObjective(const Box& b, double k, double r) : box(b), kappa(k), rho(r), v(b.size()), lv(b.size()) {}

  double operator()(const std::vector<double>& s, std::vector<double>& g) const {
    const double m = *std::max_element(s.begin(), s.end());
    double n2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      v[i] = std::exp(s[i] - m);
      n2 += v[i] * v[i];
    }
    const double nrm = std::sqrt(n2);
    for (double& x : v) x /= nrm;
    neg_laplacian(box, v, lv);
    double Q = 0.0, E = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      Q += v[i] * lv[i];
      if (v[i] > 0.0) E += v[i] * v[i] * std::log(v[i] * v[i]);
    }
    g.resize(s.size());
    double c = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double ent = v[i] > 0.0 ? 2.0 * v[i] * std::log(v[i] * v[i]) + 2.0 * v[i] : 0.0;
      g[i] = 2.0 * kappa * lv[i] - rho * ent;
      c += g[i] * v[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i] * (g[i] - c * v[i]);
    return kappa * Q - rho * E;
  }
};

struct DescentResult {
  std::vector<double> s;
  double value = 0.0;
  std::vector<double> trace;
  std::size_t iterations = 0;
};

double inf_norm(const std::vector<double>& g) {
  double m = 0.0;
  for (double x : g) m = std::max(m, std::abs(x));
  return m;
}

// Limited-memory BFGS with Armijo backtracking; every accepted step lowers
// the objective.
DescentResult lbfgs(const ChiObjective& f, std::vector<double> s, const VarOptions& opts) {
  const std::size_t n = s.size();
  const std::size_t memory = 10;
  std::deque<std::vector<double>> S, Y;
  std::deque<double> RHO;
  std::vector<double> g(n), g_new(n), p(n), s_new(n), q(n);
  DescentResult res;
  double J = f(s, g);
  res.trace.push_back(J);
  int stall = 0;
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    if (inf_norm(g) <= opts.grad_tol) break;
    q = g;
    std::vector<double> alpha(S.size());
    for (std::size_t k = S.size(); k-- > 0;) {
      double a = 0.0;
      for (std::size_t i = 0; i < n; ++i) a += S[k][i] * q[i];
      a *= RHO[k];
      alpha[k] = a;
      for (std::size_t i = 0; i < n; ++i) q[i] -= a * Y[k][i];
    }
    double gamma = 1.0;
    if (!S.empty()) {
      double sy = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sy += S.back()[i] * Y.back()[i];
        yy += Y.back()[i] * Y.back()[i];
      }
      gamma = sy / yy;
    } else {
      gamma = 1.0 / std::max(1.0, inf_norm(g));
    }
    for (double& x : q) x *= gamma;
    for (std::size_t k = 0; k < S.size(); ++k) {
      double b = 0.0;
      for (std::size_t i = 0; i < n; ++i) b += Y[k][i] * q[i];
      b *= RHO[k];
      for (std::size_t i = 0; i < n; ++i) q[i] += S[k][i] * (alpha[k] - b);
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = -q[i];
      slope += p[i] * g[i];
    }
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      RHO.clear();
      slope = 0.0;
      const double scale = 1.0 / std::max(1.0, inf_norm(g));
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = -scale * g[i];
        slope += p[i] * g[i];
      }
    }
    double step = 1.0, J_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) s_new[i] = s[i] + step * p[i];
      J_new = f(s_new, g_new);
      if (std::isfinite(J_new) && J_new <= J + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (inf_norm(g) <= 1e-6) break;
      throw ConvergenceError("chi_d descent: line search failed", res.trace);
    }
    if (J_new > J) throw ConvergenceError("chi_d descent is not monotone", res.trace);
    std::vector<double> sk(n), yk(n);
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sk[i] = s_new[i] - s[i];
      yk[i] = g_new[i] - g[i];
      sy += sk[i] * yk[i];
    }
    if (sy > 1e-300) {
      S.push_back(std::move(sk));
      Y.push_back(std::move(yk));
      RHO.push_back(1.0 / sy);
      if (S.size() > memory) {
        S.pop_front();
        Y.pop_front();
        RHO.pop_front();
      }
    }
    stall = (J - J_new <= 1e-16 * std::abs(J)) ? stall + 1 : 0;
    s.swap(s_new);
    g.swap(g_new);
    J = J_new;
    res.trace.push_back(J);
    res.iterations = it + 1;
    if (stall >= 10) break;
  }
  if (inf_norm(g) > 1e-6)
    throw ConvergenceError("chi_d descent did not converge", res.trace);
  res.s = std::move(s);
  res.value = J;
  return res;
}

std::vector<double> gaussian_log_profile(const Box& box, double sigma, double shift) {
  std::vector<double> s(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point off = box.offset(i);
    double r2 = 0.0;
    for (int c : off) r2 += (c - shift) * (c - shift);
    s[i] = -r2 / (2.0 * sigma * sigma);
  }
  return s;
}

std::vector<double> sine_log_profile(const Box& box) {
  std::vector<double> s(box.size(), 0.0);
  const double L = 2.0 * box.radius() + 2.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point off = box.offset(i);
    for (int c : off) s[i] += std::log(std::sin(M_PI * (c + box.radius() + 1) / L));
  }
  return s;
}

void insert_distinct(std::vector<double>& values, double v) {
  for (double x : values)
    if (std::abs(x - v) <= 1e-8 * (std::abs(v) + 1.0)) return;
  values.push_back(v);
  std::sort(values.begin(), values.end());
}

// Newton's method for kappa Delta v + 2 rho v log v = 0 in s = log v,
// written as G_x = kappa (sum_y e^{s_y - s_x} - 2d) + 2 rho s_x = 0.
// Returns the sup norm of kappa Delta v + 2 rho v log v.
double newton_logistic(const Box& box, double kappa, double rho, std::vector<double>& s,
                       std::size_t max_iterations = 200) {
  const auto n = static_cast<Eigen::Index>(box.size());
  const int slots = 2 * box.dim();
  auto eval = [&](const std::vector<double>& x, Eigen::VectorXd& G) {
    G.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int q = 0; q < slots; ++q) {
        const std::int32_t y = box.neighbor(static_cast<std::size_t>(i), q);
        if (y != Box::kOutside) acc += std::exp(x[static_cast<std::size_t>(y)] - x[static_cast<std::size_t>(i)]);
      }
      G(i) = kappa * (acc - slots) + 2.0 * rho * x[static_cast<std::size_t>(i)];
    }
  };
  auto true_residual = [&](const std::vector<double>& x, const Eigen::VectorXd& G) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) r = std::max(r, std::abs(std::exp(x[static_cast<std::size_t>(i)]) * G(i)));
    return r;
  };
  Eigen::VectorXd G, G_new;
  eval(s, G);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::SparseMatrix<double> J(n, n);
  std::vector<double> trial(s.size());
  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (G.lpNorm<Eigen::Infinity>() < 1e-12) break;
    trip.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      double diag = 2.0 * rho;
      for (int q = 0; q < slots; ++q) {
        const std::int32_t y = box.neighbor(static_cast<std::size_t>(i), q);
        if (y == Box::kOutside) continue;
        const double e = kappa * std::exp(s[static_cast<std::size_t>(y)] - s[static_cast<std::size_t>(i)]);
        diag -= e;
        trip.emplace_back(i, y, e);
      }
      trip.emplace_back(i, i, diag);
    }
    J.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) break;
    const Eigen::VectorXd delta = lu.solve(-G);
    if (lu.info() != Eigen::Success || !delta.allFinite()) break;
    const double g0 = G.norm();
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (std::size_t i = 0; i < s.size(); ++i) trial[i] = s[i] + step * delta(static_cast<Eigen::Index>(i));
      eval(trial, G_new);
      if (G_new.allFinite() && G_new.norm() < g0) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    s = trial;
    G = G_new;
    if (step == 1.0 && delta.lpNorm<Eigen::Infinity>() < 1e-14) break;
  }
  return true_residual(s, G);
}

// KKT projection: V = min(0, rho log(w^2 / z)) with z such that
// sum exp(V / rho) = 1.
// Solvers leave rounding noise where v is below ~1e-16 of its maximum, and
// Newton in log variables does not recover from it. Unresolved sites are
// refilled outward from the resolved ones by dropping the outer neighbours:
// v (2d kappa - 2 rho log v) = kappa sum_{inner y} v(y).
void rebuild_log_tail(const Box& box, double kappa, double rho, std::vector<double>& s,
                      std::vector<bool> resolved) {
  std::size_t top = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (resolved[i] && s[i] > s[top]) top = i;
  const Point peak = box.offset(top);
  std::vector<int> dist(box.size());
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point x = box.offset(i);
    for (int k = 0; k < box.dim(); ++k) dist[i] += std::abs(x[k] - peak[k]);
    if (!resolved[i]) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
  const int slots = 2 * box.dim();
  for (std::size_t i : order) {
    double inner = 0.0;
    for (int q = 0; q < slots; ++q) {
      const std::int32_t y = box.neighbor(i, q);
      if (y == Box::kOutside) continue;
      const auto j = static_cast<std::size_t>(y);
      if (resolved[j] && dist[j] < dist[i]) inner += std::exp(s[j]);
    }
    if (!(inner > 0.0)) continue;
    const double target = std::log(kappa * inner);
    double x = std::min(target, 0.0) - 1.0;
    for (int it = 0; it < 60; ++it) x = target - std::log(slots * kappa - 2.0 * rho * x);
    s[i] = x;
    resolved[i] = true;
  }
}

Field kkt_project(const Field& w, double rho) {
  std::vector<double> w2(w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w2[i] = std::max(w[i] * w[i], 1e-300);
    total += w2[i];
  }
  auto f = [&](double logz) {
    const double z = std::exp(logz);
    double s = 0.0;
    for (double x : w2) s += std::min(1.0, x / z);
    return s - 1.0;
  };
  double lo = std::log(1e-300), hi = std::log(std::max(total, 1.0));
  if (std::abs(f(0.0)) < 1e-15) {
    lo = hi = 0.0;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > 0.0 ? lo : hi) = mid;
    }
  }
  const double logz = 0.5 * (lo + hi);
  std::vector<double> V(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) V[i] = std::min(0.0, rho * (std::log(w2[i]) - logz));
  return Field(w.box(), std::move(V));
}

VarSolution chi_tilde_infinite(int d, double kappa, int R) {
  // I(V) = |{V > -inf}| <= 1 admits single-site supports only; larger
  // connected supports are enumerated to record how much they would gain.
  const Box box(d, std::max(R, 3));
  VarSolution sol;
  sol.dim = d;
  sol.radius = box.radius();
  const std::size_t c = box.center_index();
  std::vector<std::vector<std::size_t>> frontier{{c}};
  double best_feasible = -kInf;
  const int k_max = 3;
  for (int k = 1; k <= k_max; ++k) {
    double best = -kInf;
    for (const auto& support : frontier) {
      std::vector<double> V(box.size(), kNegInf);
      for (auto i : support) V[i] = 0.0;
      const double lambda = principal_eigen(Field(box, V), kappa).lambda;
      best = std::max(best, lambda);
      if (rate_I(Field(box, V), kInf) <= 1.0) best_feasible = std::max(best_feasible, lambda);
    }
    sol.trace.push_back(best);
    if (k == k_max) break;
    std::vector<std::vector<std::size_t>> next;
    for (const auto& support : frontier) {
      for (auto i : support) {
        for (int q = 0; q < 2 * d; ++q) {
          const std::int32_t y = box.neighbor(i, q);
          if (y == Box::kOutside) continue;
          const auto yy = static_cast<std::size_t>(y);
          if (std::find(support.begin(), support.end(), yy) != support.end()) continue;
          auto grown = support;
          grown.push_back(yy);
          std::sort(grown.begin(), grown.end());
          if (std::find(next.begin(), next.end(), grown) == next.end()) next.push_back(grown);
        }
      }
    }
    frontier.swap(next);
  }
  std::vector<double> V(box.size(), kNegInf);
  V[c] = 0.0;
  std::vector<double> w(box.size(), 0.0);
  w[c] = 1.0;
  sol.value = -best_feasible;
  sol.profile = Field(box, V);
  sol.eigenfunction = Field(box, w);
  sol.converged = true;
  sol.local_optima = {sol.value};
  return sol;
}

}  // namespace

void validate_measure(const Field& mu) {
  double s = 0.0;
  for (double p : mu.values()) {
    if (!(p >= 0.0)) throw ConfigError("measure has a negative or undefined entry");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ConfigError("measure does not sum to 1");
}

double donsker_varadhan(const Field& mu) {
  validate_measure(mu);
  const Box& box = mu.box();
  std::vector<double> v(mu.size()), lv(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) v[i] = std::sqrt(mu[i]);
  neg_laplacian(box, v, lv);
  return dot(v, lv);
}

double entropy(const Field& mu) {
  validate_measure(mu);
  double s = 0.0;
  for (double p : mu.values())
    if (p > 0.0) s -= p * std::log(p);
  return s;
}

VarSolution chi_d(int d, double kappa, double rho, int R, const VarOptions& opts) {
  if (!(kappa > 0.0)) throw ConfigError("chi_d needs kappa > 0");
  if (!(rho >= 0.0)) throw ConfigError("chi_d needs rho in [0, inf]");
  const Box box(d, R);
  VarSolution sol;
  sol.dim = d;
  sol.radius = R;
  if (rho == kInf) {
    std::vector<double> mu(box.size(), 0.0);
    mu[box.center_index()] = 1.0;
    sol.value = 2.0 * d * kappa;
    sol.profile = Field(box, mu);
    sol.converged = true;
    sol.local_optima = {sol.value};
    return sol;
  }
  if (rho == 0.0) {
    // Pure Dirichlet energy: the minimizer is the box ground state.
    const std::vector<double> s = sine_log_profile(box);
    std::vector<double> mu(box.size());
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) total += mu[i] = std::exp(2.0 * s[i]);
    for (double& x : mu) x /= total;
    sol.value = kappa * 2.0 * d * (1.0 - std::cos(M_PI / (2.0 * R + 2.0)));
    sol.profile = Field(box, mu);
    sol.converged = true;
    sol.local_optima = {sol.value};
    if (d > 1) sol.tensorized = sol.value;
    return sol;
  }
  const ChiObjective f(box, kappa, rho);
  std::vector<std::vector<double>> starts{
      gaussian_log_profile(box, 1.0, 0.0), gaussian_log_profile(box, 0.5, 0.0),
      gaussian_log_profile(box, 2.0, 0.0), sine_log_profile(box),
      gaussian_log_profile(box, 1.0, 0.5)};
  bool have = false;
  DescentResult best;
  for (auto& s0 : starts) {
    DescentResult r = lbfgs(f, s0, opts);
    insert_distinct(sol.local_optima, r.value);
    if (!have || r.value < best.value) {
      best = std::move(r);
      have = true;
    }
  }
  const double m = *std::max_element(best.s.begin(), best.s.end());
  std::vector<double> mu(box.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) total += mu[i] = std::exp(2.0 * (best.s[i] - m));
  for (double& x : mu) x /= total;
  sol.value = best.value;
  sol.profile = Field(box, mu);
  sol.iterations = best.iterations;
  sol.trace = std::move(best.trace);
  sol.converged = true;
  sol.boundary_mass = sup_norm_shell(box, mu);
  if (opts.check_boundary && sol.boundary_mass > opts.boundary_tol) {
    std::ostringstream os;
    os << "chi_d: boundary mass " << sol.boundary_mass << " exceeds " << opts.boundary_tol
       << " at R = " << R << "; enlarge the box";
    throw BoxTooSmallError(os.str(), sol.boundary_mass);
  }
  if (d > 1) sol.tensorized = d * chi_d(1, kappa, rho, R, opts).value;
  return sol;
}

LogisticSolution logistic_equation_1d(double kappa, double rho, int R) {
  if (!(kappa > 0.0) || !(rho > 0.0) || !std::isfinite(rho))
    throw ConfigError("logistic equation needs kappa > 0 and rho in (0, inf)");
  const Box box(1, R);
  std::vector<std::vector<double>> starts;
  {
    VarOptions o;
    o.check_boundary = false;
    const VarSolution chi = chi_d(1, kappa, rho, R, o);
    // A normalized minimizer v solves kappa Delta v + 2 rho v log v + chi v = 0,
    // so exp(chi / (2 rho)) v solves the equation itself.
    std::vector<double> s(box.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = 0.5 * std::log(std::max(chi.profile[i], 1e-300)) + chi.value / (2.0 * rho);
    std::vector<bool> resolved(box.size());
    for (std::size_t i = 0; i < s.size(); ++i) resolved[i] = chi.profile[i] > 1e-10;
    rebuild_log_tail(box, kappa, rho, s, resolved);
    starts.push_back(std::move(s));
  }
  for (double sigma : {0.5, 1.0, 2.0}) starts.push_back(gaussian_log_profile(box, sigma, 0.0));
  LogisticSolution best;
  bool have = false;
  std::vector<double> history;
  for (auto& s : starts) {
    const double res = newton_logistic(box, kappa, rho, s);
    history.push_back(res);
    if (!(res < 1e-8)) continue;
    std::vector<double> v(s.size());
    double n2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      v[i] = std::exp(s[i]);
      n2 += v[i] * v[i];
    }
    const double nrm = std::sqrt(n2);
    insert_distinct(best.candidate_norms, nrm);
    if (!have || nrm < best.norm) {
      best.v = Field(box, v);
      best.norm = nrm;
      best.residual = res;
      have = true;
    }
  }
  if (!have) throw ConvergenceError("logistic equation: no start converged", history);
  // Symmetrize the rounding noise away.
  std::vector<double> v(best.v.values().begin(), best.v.values().end());
  for (std::size_t i = 0; i < v.size() / 2; ++i) {
    const double m = 0.5 * (v[i] + v[v.size() - 1 - i]);
    v[i] = v[v.size() - 1 - i] = m;
  }
  best.v = Field(box, std::move(v));
  return best;
}

double rate_I(const Field& V, double rho) {
  double s = 0.0;
  for (double x : V.values()) {
    if (x > 0.0) throw ConfigError("rate_I needs V <= 0");
    if (x == kNegInf) continue;
    s += rho == kInf ? 1.0 : std::exp(x / rho);
  }
  return s;
}

VarSolution chi_tilde_d(int d, double kappa, double rho, int R, const VarOptions& opts) {
  if (!(kappa > 0.0)) throw ConfigError("chi_tilde_d needs kappa > 0");
  if (!(rho > 0.0)) throw ConfigError("chi_tilde_d needs rho in (0, inf]");
  if (rho == kInf) return chi_tilde_infinite(d, kappa, R);
  const Box box(d, R);
  VarSolution sol;
  sol.dim = d;
  sol.radius = R;

  std::vector<double> w0(box.size());
  {
    const auto s = gaussian_log_profile(box, 1.0, 0.0);
    double n2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) n2 += (w0[i] = std::exp(s[i])) * w0[i];
    for (double& x : w0) x /= std::sqrt(n2);
  }
  Field w(box, w0);
  Field V = kkt_project(w, rho);
  double lambda = -kInf;
  double theta = 1.0;
  Field V_good = V;
  const std::size_t max_ascent = std::min<std::size_t>(opts.max_iterations, 5000);
  for (std::size_t it = 0; it < max_ascent; ++it) {
    EigenOptions eo;
    eo.warm_start = &w;
    const SpectralResult eig = principal_eigen(V, kappa, eo);
    if (eig.lambda < lambda - 1e-9 * (std::abs(lambda) + 1.0)) {
      // Ascent violated: retry with a damped step between the last good
      // potential and the rejected one.
      theta *= 0.5;
      if (theta < 1e-4) throw ConvergenceError("chi_tilde_d ascent oscillates", sol.trace);
      std::vector<double> mix(box.size());
      for (std::size_t i = 0; i < mix.size(); ++i)
        mix[i] = rho * std::log((1.0 - theta) * std::exp(V_good[i] / rho) + theta * std::exp(V[i] / rho));
      V = Field(box, std::move(mix));
      continue;
    }
    const double previous = lambda;
    lambda = eig.lambda;
    w = eig.eigenfunction;
    V_good = V;
    sol.trace.push_back(lambda);
    sol.iterations = it + 1;
    V = kkt_project(w, rho);
    sol.feasibility = std::abs(rate_I(V, rho) - 1.0);
    if (sol.feasibility >= 1e-8)
      throw NumericError("chi_tilde_d: KKT projection lost feasibility");
    if (std::abs(lambda - previous) <= 1e-13 * (std::abs(lambda) + 1.0)) {
      sol.converged = true;
      break;
    }
  }
  if (!sol.converged && opts.max_iterations > max_ascent)
    throw ConvergenceError("chi_tilde_d ascent did not converge", sol.trace);

  if (opts.polish) {
    // At the fixed point V = 2 rho log w, so v = exp(-lambda / (2 rho)) w
    // solves kappa Delta v + 2 rho v log v = 0 and lambda = -rho log |v|^2.
    std::vector<double> s(box.size());
    std::vector<bool> resolved(box.size());
    const double wmax = *std::max_element(w.values().begin(), w.values().end());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::log(std::max(w[i], 1e-250)) - lambda / (2.0 * rho);
      resolved[i] = w[i] > 1e-10 * wmax;
    }
    rebuild_log_tail(box, kappa, rho, s, resolved);
    const double res = newton_logistic(box, kappa, rho, s);
    double n2 = 0.0;
    for (double x : s) n2 += std::exp(2.0 * x);
    const double polished = -rho * std::log(n2);
    if (res < 1e-10 && std::abs(polished - lambda) <= 1e-6 * (std::abs(lambda) + 1.0)) {
      const double log_norm = 0.5 * std::log(n2);
      std::vector<double> wv(box.size()), Vv(box.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        wv[i] = std::exp(s[i] - log_norm);
        Vv[i] = 2.0 * rho * (s[i] - log_norm);
      }
      lambda = polished;
      w = Field(box, std::move(wv));
      V = Field(box, std::move(Vv));
      sol.feasibility = std::abs(rate_I(V, rho) - 1.0);
      sol.converged = true;
    } else {
      V = V_good;
    }
  } else {
    V = V_good;
  }
  sol.value = -lambda;
  sol.profile = V;
  sol.eigenfunction = w;
  sol.local_optima = {sol.value};
  std::vector<double> w2(box.size());
  for (std::size_t i = 0; i < w2.size(); ++i) w2[i] = w[i] * w[i];
  sol.boundary_mass = sup_norm_shell(box, w2);
  if (opts.check_boundary && sol.boundary_mass > opts.boundary_tol) {
    std::ostringstream os;
    os << "chi_tilde_d: boundary mass " << sol.boundary_mass << " exceeds " << opts.boundary_tol
       << " at R = " << R << "; enlarge the box";
    throw BoxTooSmallError(os.str(), sol.boundary_mass);
  }
  return sol;
}

int mass_radius(const Field& w, double eps) {
  const Box& box = w.box();
  const double l2 = dot(w.values(), w.values());
  std::vector<double> shell_sum(static_cast<std::size_t>(box.radius()) + 1, 0.0);
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point off = box.offset(i);
    int m = 0;
    for (int c : off) m = std::max(m, std::abs(c));
    shell_sum[static_cast<std::size_t>(m)] += w[i];
  }
  // outside[r] = sum over shells > r
  double outside = 0.0;
  for (double s : shell_sum) outside += s;
  for (int r = 0; r <= box.radius(); ++r) {
    outside -= shell_sum[static_cast<std::size_t>(r)];
    if (l2 * std::max(outside, 0.0) < eps) return r;
  }
  return -1;
}

ShapeResult center_shapes(ShapeResult shapes) {
  const Box& box = shapes.V.box();
  double vmax = kNegInf;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (shapes.V[i] > vmax) {
      vmax = shapes.V[i];
      arg = i;
    }
  }
  std::size_t ties = 0;
  for (std::size_t i = 0; i < box.size(); ++i)
    if (shapes.V[i] >= vmax - 1e-9 * (std::abs(vmax) + 1.0)) ++ties;
  shapes.multiple_maxima = ties > 1;
  const std::size_t c = box.center_index();
  if (arg != c) {
    const Point a = box.offset(arg);
    std::vector<double> V(box.size(), kNegInf), w(box.size(), 0.0);
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (auto j = box.find_offset(i, a)) {
        V[i] = shapes.V[*j];
        w[i] = shapes.w[*j];
      }
    }
    shapes.V = Field(box, std::move(V));
    shapes.w = Field(box, std::move(w));
  }
  const double w0 = shapes.w[c];
  if (w0 > 0.0 && w0 != 1.0) {
    std::vector<double> w(shapes.w.values().begin(), shapes.w.values().end());
    for (double& x : w) x /= w0;
    shapes.w = Field(box, std::move(w));
  }
  return shapes;
}

ShapeResult optimal_shapes(int d, double kappa, double rho, int R, std::vector<double> eps,
                           const VarOptions& opts) {
  const VarSolution sol = chi_tilde_d(d, kappa, rho, R, opts);
  ShapeResult shapes;
  shapes.chi_tilde = sol.value;
  shapes.V = sol.profile;
  shapes.w = sol.eigenfunction;
  shapes = center_shapes(std::move(shapes));
  shapes.eps = std::move(eps);
  for (double e : shapes.eps) shapes.r.push_back(mass_radius(shapes.w, e));
  return shapes;
}

IRResult rate_IR_bounded(std::span<const double> phi, int d, double step, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("rate_IR_bounded needs gamma in [0, 1)");
  if (!(step > 0.0)) throw ConfigError("rate_IR_bounded needs a positive grid step");
  const double cell = std::pow(step, d);
  const double beta = gamma / (1.0 - gamma);
  IRResult res;
  for (double x : phi) {
    if (x > 0.0) throw ConfigError("rate_IR_bounded needs phi <= 0");
    if (x == kNegInf) continue;
    if (gamma == 0.0) {
      res.value += cell;
    } else if (x == 0.0) {
      res.value = kInf;
      res.divergent = true;
      return res;
    } else {
      res.value += std::pow(-x, -beta) * cell;
    }
  }
  res.refinements = {res.value};
  return res;
}

IRResult rate_IR_bounded(const std::function<double(std::span<const double>)>& phi, int d,
                         double R, double gamma, double rel_tol) {
  if (!(R > 0.0)) throw ConfigError("rate_IR_bounded needs R > 0");
  IRResult res;
  const std::size_t budget = 1u << 22;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t n = 4;; n *= 2) {
    std::size_t total = 1;
    for (int k = 0; k < d; ++k) total *= n;
    if (total > budget) break;
    const double h = 2.0 * R / static_cast<double>(n);
    std::vector<double> values(total);
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t m = 0; m < total; ++m) {
      for (int k = 0; k < d; ++k) x[static_cast<std::size_t>(k)] = -R + (static_cast<double>(idx[static_cast<std::size_t>(k)]) + 0.5) * h;
      values[m] = phi(x);
      for (int k = d - 1; k >= 0; --k) {
        if (++idx[static_cast<std::size_t>(k)] < n) break;
        idx[static_cast<std::size_t>(k)] = 0;
      }
    }
    const IRResult level = rate_IR_bounded(values, d, h, gamma);
    if (level.divergent) return level;
    res.refinements.push_back(level.value);
    const std::size_t k = res.refinements.size();
    if (k >= 2) {
      const double diff = std::abs(res.refinements[k - 1] - res.refinements[k - 2]);
      if (diff <= rel_tol * std::abs(res.refinements[k - 1])) {
        res.value = res.refinements.back();
        return res;
      }
    }
  }
  const std::size_t k = res.refinements.size();
  res.value = res.refinements.back();
  if (k >= 4) {
    const double d1 = std::abs(res.refinements[k - 1] - res.refinements[k - 2]);
    const double d2 = std::abs(res.refinements[k - 2] - res.refinements[k - 3]);
    const double d3 = std::abs(res.refinements[k - 3] - res.refinements[k - 4]);
    if (d1 >= 0.7 * d2 && d2 >= 0.7 * d3) {
      res.value = kInf;
      res.divergent = true;
    }
  }
  return res;
}

}  // namespace pam
