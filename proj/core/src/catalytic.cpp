#include "pam/catalytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pam/error.hpp"
#include "pam/green.hpp"
#include "pam/parallel.hpp"
#include "pam/propagator.hpp"
#include "pam/stats.hpp"

namespace pam {

namespace {

void check_grid(std::vector<double>& t_grid) {
  if (t_grid.empty()) throw ConfigError("t grid is empty");
  std::sort(t_grid.begin(), t_grid.end());
  t_grid.erase(std::unique(t_grid.begin(), t_grid.end()), t_grid.end());
  if (!(t_grid.front() >= 0.0)) throw ConfigError("t grid needs nonnegative times");
}

std::size_t random_neighbor(const Box& box, std::size_t x, CounterRng& rng) {
  const auto slot = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * box.dim())));
  return static_cast<std::size_t>(box.neighbor(x, slot));
}

}  // namespace

Box CatalystParams::torus() const { return Box(d, radius, BoundaryMode::periodic); }

void CatalystParams::validate() const {
  if (d < 1) throw ConfigError("catalytic: d must be >= 1");
  if (radius < 1) throw ConfigError("catalytic: torus radius must be >= 1");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw ConfigError("catalytic: nu must be >= 0");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("catalytic: rho must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("catalytic: gamma must be >= 0");
  if (death_rate && !std::isfinite(*death_rate)) throw ConfigError("catalytic: death rate must be finite");
}

CatalystProcess::CatalystProcess(const CatalystParams& params, std::uint64_t seed)
    : torus_(params.torus()),
      rate_(2.0 * params.d * params.rho),
      counts_(torus_.size(), 0),
      rng_(stream_key(seed, {0x636174})) {
  params.validate();
  CounterRng init(stream_key(seed, {0x706f6973}));
  if (params.nu > 0.0) {
    std::poisson_distribution<int> poisson(params.nu);
    for (std::size_t x = 0; x < torus_.size(); ++x) {
      counts_[x] = poisson(init);
      for (int k = 0; k < counts_[x]; ++k) positions_.push_back(x);
    }
  }
  const double total = rate_ * static_cast<double>(positions_.size());
  next_ = total > 0.0 ? rng_.exponential(total) : std::numeric_limits<double>::infinity();
}

void CatalystProcess::advance_to(double t, const JumpCallback& on_jump) {
  if (t < time_) throw ConfigError("catalyst process cannot run backwards");
  const double total = rate_ * static_cast<double>(positions_.size());
  while (next_ <= t) {
    const auto k = static_cast<std::size_t>(rng_.below(positions_.size()));
    const std::size_t from = positions_[k];
    const std::size_t to = random_neighbor(torus_, from, rng_);
    if (on_jump) on_jump(next_, from, to);
    --counts_[from];
    ++counts_[to];
    positions_[k] = to;
    next_ += rng_.exponential(total);
  }
  time_ = t;
}

CatalystTrajectory simulate_catalysts(const CatalystParams& params, std::vector<double> t_grid,
                                      std::uint64_t seed) {
  check_grid(t_grid);
  CatalystProcess proc(params, seed);
  CatalystTrajectory traj;
  traj.walkers = proc.walkers();
  for (double t : t_grid) {
    proc.advance_to(t, [&](double, std::size_t, std::size_t) { ++traj.jumps; });
    traj.t.push_back(t);
    traj.counts.push_back(proc.counts());
  }
  return traj;
}

std::vector<ScaledField> evolve_catalytic(const CatalystParams& params,
                                          const CatalyticEvolutionConfig& cfg, std::uint64_t seed) {
  std::vector<double> grid = cfg.t_grid;
  check_grid(grid);
  if (!(cfg.kappa >= 0.0)) throw ConfigError("catalytic: kappa must be >= 0");
  if (!(cfg.dt > 0.0)) throw ConfigError("catalytic: dt must be positive");
  CatalystProcess proc(params, seed);
  const Box& box = proc.torus();
  const Domain domain = full_domain(box);
  const DiffusionPropagator prop(domain, cfg.kappa);
  const std::size_t n = box.size();
  const double delta = params.delta();

  std::vector<double> u(n, 1.0), occ(n, 0.0), last(n, 0.0);
  double log_scale = 0.0;
  double now = 0.0;
  std::vector<ScaledField> out;

  auto on_jump = [&](double s, std::size_t from, std::size_t to) {
    for (std::size_t x : {from, to}) {
      occ[x] += proc.counts()[x] * (s - last[x]);
      last[x] = s;
    }
  };
  auto step = [&](double t_next) {
    const double h = t_next - now;
    if (cfg.kappa > 0.0) prop.apply(u, 0.5 * h);
    proc.advance_to(t_next, on_jump);
    double m = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      occ[x] += proc.counts()[x] * (t_next - last[x]);
      last[x] = t_next;
      u[x] *= std::exp(params.gamma * occ[x] - delta * h);
      occ[x] = 0.0;
      m = std::max(m, u[x]);
    }
    if (cfg.kappa > 0.0) prop.apply(u, 0.5 * h);
    if (!std::isfinite(m)) throw NumericError("evolve_catalytic: non-finite solution");
    if (m > 1e100 || (m < 1e-100 && m > 0.0)) {
      for (double& v : u) v /= m;
      log_scale += std::log(m);
    }
    now = t_next;
  };
  for (double target : grid) {
    while (now < target) {
      const double t_next = std::min(target, now + cfg.dt);
      step(t_next - now < 1e-14 ? target : t_next);
    }
    out.push_back(ScaledField{target, Field(box, u), log_scale});
  }
  return out;
}

CatalyticMoments direct_moments(const CatalystParams& params, double kappa, std::vector<double> p_list,
                                std::vector<double> t_grid, std::size_t realizations,
                                std::uint64_t seed, double dt, int threads) {
  check_grid(t_grid);
  if (realizations < 2) throw ConfigError("direct_moments needs at least two realizations");
  if (p_list.empty()) throw ConfigError("direct_moments needs a p list");
  CatalyticEvolutionConfig cfg{kappa, t_grid, dt};
  // samples[p][t][r]
  std::vector<std::vector<std::vector<double>>> samples(
      p_list.size(), std::vector<std::vector<double>>(t_grid.size(), std::vector<double>(realizations)));
  parallel_for(
      realizations,
      [&](std::size_t r) {
        const auto fields = evolve_catalytic(params, cfg, realization_seed(seed, r));
        for (std::size_t it = 0; it < fields.size(); ++it) {
          const ScaledField& f = fields[it];
          for (std::size_t ip = 0; ip < p_list.size(); ++ip) {
            double s = 0.0;
            for (std::size_t x = 0; x < f.values.size(); ++x) s += std::exp(p_list[ip] * f.log_at(x));
            samples[ip][it][r] = s / static_cast<double>(f.values.size());
          }
        }
      },
      threads);
  CatalyticMoments m;
  m.p = std::move(p_list);
  m.t = std::move(t_grid);
  m.samples = realizations;
  for (std::size_t ip = 0; ip < m.p.size(); ++ip) {
    m.estimate.emplace_back();
    m.se.emplace_back();
    for (std::size_t it = 0; it < m.t.size(); ++it) {
      const auto ms = stats::mean_se(samples[ip][it]);
      m.estimate.back().push_back(ms.mean);
      m.se.back().push_back(ms.se);
    }
  }
  return m;
}

namespace {

// One bundle: returns int_0^t sum_i w(s, X_i(s)) ds at every grid time.
std::vector<double> fk_bundle(const CatalystParams& params, double kappa, int p,
                              const std::vector<double>& grid, std::uint64_t key) {
  const Box box = params.torus();
  const std::size_t n = box.size();
  const int slots = 2 * params.d;
  CounterRng rng(key);
  std::vector<std::size_t> pos(static_cast<std::size_t>(p), box.center_index());
  std::vector<double> D(n, 0.0);
  D[box.center_index()] = p;
  const double jump_rate = 2.0 * params.d * kappa * p;
  double next_jump = jump_rate > 0.0 ? rng.exponential(jump_rate) : std::numeric_limits<double>::infinity();

  std::vector<double> w(n, 0.0);
  double I = 0.0;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  auto rhs = [&](const std::vector<double>& x, std::vector<double>& out) {
    double dI = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double lap = -slots * x[i];
      for (int q = 0; q < slots; ++q) lap += x[static_cast<std::size_t>(box.neighbor(i, q))];
      out[i] = params.rho * lap + params.gamma * D[i] * (1.0 + x[i]);
      dI += D[i] * x[i];
    }
    return dI;
  };
  // Classical RK4 on (w, I) over h from state x.
  auto rk4 = [&](const std::vector<double>& x, double h, std::vector<double>& out) {
    const double a1 = rhs(x, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    const double a2 = rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    const double a3 = rhs(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    const double a4 = rhs(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  };

  const double h_cap = std::min(0.05, 1.0 / (4.0 * params.d * params.rho + p * params.gamma + 1e-300));
  double h = h_cap;
  std::vector<double> full(n), half(n), two(n);
  std::vector<double> out;
  double now = 0.0;
  auto integrate_to = [&](double target) {
    while (now < target) {
      const double hh = std::min(h, target - now);
      const double dfull = rk4(w, hh, full);
      const double dh1 = rk4(w, 0.5 * hh, half);
      const double dh2 = rk4(half, 0.5 * hh, two);
      double err = std::abs(dfull - dh1 - dh2), scale = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        err = std::max(err, std::abs(full[i] - two[i]));
        scale = std::max(scale, std::abs(two[i]));
      }
      if (err > 1e-10 * scale) {
        h = 0.5 * hh;
        if (h < 1e-12) {
          std::ostringstream os;
          os << "fk_moment: w-solver step rejected down to " << h << " in bundle with key " << key;
          throw NumericError(os.str());
        }
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (two[i] < -1e-12) throw NumericError("fk_moment: w became negative");
        w[i] = std::max(two[i], 0.0);
      }
      I += dh1 + dh2;
      now += hh;
      h = std::min(h_cap, 1.5 * hh);
    }
  };
  for (double target : grid) {
    while (next_jump <= target) {
      integrate_to(next_jump);
      const auto k = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(p)));
      D[pos[k]] -= 1.0;
      pos[k] = random_neighbor(box, pos[k], rng);
      D[pos[k]] += 1.0;
      next_jump += rng.exponential(jump_rate);
    }
    integrate_to(target);
    out.push_back(I);
  }
  return out;
}

}  // namespace

CatalyticMoments fk_moment(const CatalystParams& params, double kappa, int p, std::vector<double> t_grid,
                           std::size_t paths, std::uint64_t seed, int threads) {
  params.validate();
  check_grid(t_grid);
  if (p < 1) throw ConfigError("fk_moment needs p >= 1");
  if (paths < 2) throw ConfigError("fk_moment needs at least two path bundles");
  if (!(kappa >= 0.0)) throw ConfigError("catalytic: kappa must be >= 0");
  std::vector<std::vector<double>> weights(t_grid.size(), std::vector<double>(paths));
  const double c = params.nu * params.gamma;
  const double shift = params.nu * params.gamma - params.delta();
  parallel_for(
      paths,
      [&](std::size_t b) {
        const auto I = fk_bundle(params, kappa, p, t_grid, stream_key(seed, {0x666b6d, static_cast<std::int64_t>(b)}));
        for (std::size_t it = 0; it < t_grid.size(); ++it)
          weights[it][b] = std::exp(c * I[it] + p * shift * t_grid[it]);
      },
      threads);
  CatalyticMoments m;
  m.p = {static_cast<double>(p)};
  m.t = std::move(t_grid);
  m.samples = paths;
  m.estimate.emplace_back();
  m.se.emplace_back();
  for (auto& wv : weights) {
    const auto ms = stats::mean_se(wv);
    m.estimate[0].push_back(ms.mean);
    m.se[0].push_back(ms.se);
  }
  return m;
}

LambdaStar lambda_star_probe(int d, double rho, double gamma, int p) {
  if (!(rho > 0.0) || !(gamma >= 0.0) || p < 1) throw ConfigError("lambda_star_probe needs rho > 0, gamma >= 0, p >= 1");
  LambdaStar ls;
  ls.q = p * gamma / rho;
  ls.mu = mu_of_r(ls.q, d).mu;
  ls.lambda_star = rho * ls.mu;
  ls.strongly_catalytic = ls.lambda_star > 0.0;
  return ls;
}

LambdaLimits lambda_limits(int d, double nu, double gamma, double rho, int p, std::optional<double> polaron) {
  if (d < 3) throw RegimeError("lambda_limits: d <= 2 is always strongly catalytic (lambda_p* > 0)");
  if (!(nu >= 0.0) || !(gamma > 0.0) || !(rho > 0.0) || p < 1)
    throw ConfigError("lambda_limits needs nu >= 0, gamma > 0, rho > 0, p >= 1");
  const double rd = green_function_origin(d).r_threshold;
  const double q = p * gamma / rho;
  if (q >= rd) {
    std::ostringstream os;
    os << "lambda_limits: p gamma / rho = " << q << " >= r_d = " << rd
       << ", outside the weakly catalytic regime (lambda_p* > 0)";
    throw RegimeError(os.str());
  }
  LambdaLimits lim;
  lim.r_d = rd;
  lim.small_kappa = p * nu * gamma * q / (rd - q);
  if (d >= 4) {
    lim.large_kappa = nu * gamma * gamma / rd;
    lim.intermittent_large_kappa = std::nullopt;
  } else if (polaron) {
    lim.large_kappa = nu * gamma * gamma / rd + std::sqrt(p) * std::sqrt(nu * gamma * gamma / rho) * *polaron;
    lim.intermittent_large_kappa = true;
  } else {
    lim.intermittent_large_kappa = true;
  }
  return lim;
}

GrowthFit fit_growth(std::span<const double> t, std::span<const double> moment, std::span<const double> se) {
  if (t.size() != moment.size() || t.size() < 2) throw ConfigError("fit_growth needs matching series of length >= 2");
  if (!se.empty() && se.size() != t.size()) throw ConfigError("fit_growth: se length mismatch");
  const double t_half = 0.5 * t.back();
  std::vector<double> x, y, sig, xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_half || !(moment[i] > 0.0)) continue;
    x.push_back(t[i]);
    y.push_back(std::log(moment[i]));
    if (!se.empty()) sig.push_back(std::max(se[i] / moment[i], 1e-300));
    if (moment[i] > std::exp(M_E)) {
      xs.push_back(t[i]);
      ys.push_back(std::log(std::log(moment[i])));
    }
  }
  if (x.size() < 2) throw NumericError("fit_growth: fewer than two usable points in the latter half");
  GrowthFit g;
  const auto f = stats::fit_line(x, y, sig);
  g.lambda = f.slope;
  g.lambda_se = f.slope_se;
  if (xs.size() >= 2) g.lambda_star = stats::fit_line(xs, ys).slope;
  return g;
}

}  // namespace pam
