#include "pam/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pam/error.hpp"
#include "pam/parallel.hpp"
#include "pam/propagator.hpp"
#include "pam/rng.hpp"
#include "pam/stats.hpp"

namespace pam {

namespace {

constexpr double kRescaleHigh = 1e150;
constexpr double kRescaleLow = 1e-150;

double max_finite(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v)
    if (x > m) m = x;
  return m;
}

std::vector<double> snapshot_grid(const EvolutionConfig& cfg) {
  std::vector<double> times = cfg.snapshot_times;
  for (double t : times) {
    if (!(t >= 0.0) || t > cfg.t_end)
      throw ConfigError("snapshot times must lie in [0, t_end]");
  }
  times.push_back(cfg.t_end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

}  // namespace

std::string_view to_string(Stepper s) {
  return s == Stepper::explicit_euler ? "explicit" : "split_exponential";
}

Stepper parse_stepper(std::string_view text) {
  if (text == "split_exponential" || text == "split-exponential" || text == "split")
    return Stepper::split_exponential;
  if (text == "explicit") return Stepper::explicit_euler;
  throw ConfigError("unknown stepper '" + std::string(text) + "'");
}

double ScaledField::log_at(std::size_t i) const {
  const double v = values[i];
  return v > 0.0 ? std::log(v) + log_scale : kNegInf;
}

Field ScaledField::unscaled() const {
  std::vector<double> out(values.values().begin(), values.values().end());
  const double s = std::exp(log_scale);
  for (double& x : out) x *= s;
  return Field(values.box(), std::move(out));
}

double default_time_step(const Field& xi, double kappa, double dt_max) {
  const double xmax = std::max(0.0, max_finite(xi.values()));
  return std::min(dt_max, 0.25 / (2.0 * xi.box().dim() * kappa + xmax));
}

Evolution evolve(const Field& xi, const Field& u0, const EvolutionConfig& cfg) {
  if (!(cfg.kappa >= 0.0) || !std::isfinite(cfg.kappa)) throw ConfigError("kappa must be >= 0");
  if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) throw ConfigError("t_end must be positive");
  if (!(cfg.dt_max > 0.0)) throw ConfigError("dt_max must be positive");
  if (!xi.box().same_geometry(u0.box()))
    throw ConfigError("potential and initial datum live on different boxes");
  for (double v : u0.values())
    if (!(v >= 0.0)) throw ConfigError("initial datum must be nonnegative and finite");

  const std::vector<double> times = snapshot_grid(cfg);
  const Restriction restr = restrict_domain(xi);
  const Domain& dom = restr.domain;
  const std::vector<double>& pot = restr.values;
  const int d = xi.box().dim();

  Evolution out;
  double dt = 0.0;
  if (cfg.stepper == Stepper::split_exponential) {
    dt = default_time_step(xi, cfg.kappa, cfg.dt_max);
  } else {
    double amax = 0.0;
    for (double v : pot) amax = std::max(amax, std::abs(v));
    const double bound = 1.0 / (2.0 * d * cfg.kappa + amax);
    dt = cfg.dt_max;
    if (dt > bound) {
      std::ostringstream os;
      os << "explicit stepper unstable at step 1: dt = " << dt << " exceeds 1/(2d kappa + max|xi|) = "
         << bound;
      throw NumericError(os.str());
    }
  }
  out.dt = dt;

  std::vector<double> v(dom.size());
  for (std::size_t j = 0; j < dom.size(); ++j) v[j] = u0[dom.sites[j]];
  double log_scale = 0.0;
  auto renormalize = [&](std::size_t step, double t) {
    const double m = dom.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) {
      std::ostringstream os;
      os << "non-finite solution value at step " << step << " (t = " << t << ")";
      throw NumericError(os.str());
    }
    if (m > kRescaleHigh || (m > 0.0 && m < kRescaleLow)) {
      for (double& x : v) x /= m;
      log_scale += std::log(m);
    }
  };
  renormalize(0, 0.0);

  auto record = [&](double t) {
    out.snapshots.push_back({t, embed(dom, v, 0.0), log_scale});
  };

  DiffusionPropagator prop(dom, cfg.kappa);
  std::vector<double> half(dom.size()), work(dom.size());
  double t_now = 0.0;
  std::size_t step = 0;
  for (double target : times) {
    const double span = target - t_now;
    if (span <= 0.0) {
      record(target);
      continue;
    }
    const auto n = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
    const double h = span / static_cast<double>(n);
    if (cfg.stepper == Stepper::split_exponential) {
      for (std::size_t j = 0; j < dom.size(); ++j) half[j] = std::exp(0.5 * h * pot[j]);
    }
    for (std::size_t k = 0; k < n; ++k) {
      ++step;
      if (cfg.stepper == Stepper::split_exponential) {
        for (std::size_t j = 0; j < v.size(); ++j) v[j] *= half[j];
        prop.apply(v, h);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] *= half[j];
      } else {
        apply_operator(dom, cfg.kappa, pot, v, work);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] += h * work[j];
      }
      renormalize(step, t_now + static_cast<double>(k + 1) * h);
    }
    t_now = target;
    record(target);
  }
  out.steps = step;
  return out;
}

TotalMass total_mass(const Field& u, double log_scale) {
  double s = 0.0;
  for (double v : u.values()) s += v;
  TotalMass m;
  m.log_U = s > 0.0 ? std::log(s) + log_scale : kNegInf;
  m.U = std::exp(m.log_U);
  return m;
}

TotalMass total_mass(const ScaledField& u) { return total_mass(u.values, u.log_scale); }

int default_radius(int d, double kappa, double t) {
  const double reach = 2.0 * d * kappa * t;
  return static_cast<int>(std::ceil(reach + 6.0 * std::sqrt(reach)));
}

MonteCarloEstimate feynman_kac(const Field& xi, double t, const WalkConfig& cfg) {
  if (cfg.paths < 1) throw ConfigError("feynman_kac needs at least one path");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("feynman_kac needs finite t >= 0");
  if (!(cfg.kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
  const Box& box = xi.box();
  const int slots = 2 * box.dim();
  const double rate = slots * cfg.kappa;
  std::optional<std::size_t> target;
  if (cfg.pinned) target = box.index(*cfg.pinned);
  const std::size_t start = box.center_index();

  std::vector<double> logw(cfg.paths, kNegInf);
  parallel_for(
      cfg.paths,
      [&](std::size_t path) {
        CounterRng rng(stream_key(cfg.seed, {0x666b, static_cast<std::int64_t>(path)}));
        std::size_t pos = start;
        if (xi[pos] == kNegInf) return;
        double time = 0.0, integral = 0.0;
        for (;;) {
          const double tau = rate > 0.0 ? rng.exponential(rate) : std::numeric_limits<double>::infinity();
          if (time + tau >= t) {
            integral += xi[pos] * (t - time);
            break;
          }
          integral += xi[pos] * tau;
          time += tau;
          const std::int32_t next = box.neighbor(pos, static_cast<int>(rng.below(static_cast<std::uint64_t>(slots))));
          if (next == Box::kOutside) return;
          pos = static_cast<std::size_t>(next);
          if (xi[pos] == kNegInf) return;
        }
        if (target && pos != *target) return;
        logw[path] = integral;
      },
      cfg.threads);

  MonteCarloEstimate est;
  est.paths = cfg.paths;
  const double m = max_finite(logw);
  if (m == kNegInf) {
    est.log_estimate = kNegInf;
    return est;
  }
  double sum = 0.0, sum2 = 0.0;
  for (double l : logw) {
    if (l == kNegInf) continue;
    ++est.survivors;
    const double w = std::exp(l - m);
    sum += w;
    sum2 += w * w;
  }
  const auto n = static_cast<double>(cfg.paths);
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0)) : 0.0;
  est.log_estimate = m + std::log(mean);
  est.estimate = std::exp(est.log_estimate);
  est.se = std::sqrt(var / n) * std::exp(m);
  return est;
}

std::uint64_t realization_seed(std::uint64_t seed, std::size_t r) {
  return stream_key(seed, {0x7265616c, static_cast<std::int64_t>(r)});
}

MomentTable moment_table(std::vector<double> p_list, std::vector<double> t_list,
                         std::vector<std::vector<double>> log_u0, std::size_t bootstrap,
                         std::uint64_t seed) {
  MomentTable table;
  table.p = std::move(p_list);
  table.t = std::move(t_list);
  table.log_u0 = std::move(log_u0);
  if (table.log_u0.size() != table.t.size())
    throw ConfigError("moment table: one sample vector per time is required");
  for (std::size_t ip = 0; ip < table.p.size(); ++ip) {
    const double p = table.p[ip];
    for (std::size_t it = 0; it < table.t.size(); ++it) {
      const auto& logs = table.log_u0[it];
      std::vector<double> scaled(logs.size());
      for (std::size_t i = 0; i < logs.size(); ++i) scaled[i] = p * logs[i];
      MomentCell cell;
      cell.p = p;
      cell.t = table.t[it];
      cell.lambda = stats::log_mean_exp(scaled);
      if (cell.lambda > kNegInf) {
        const double m = max_finite(scaled);
        double s = 0.0, s2 = 0.0;
        for (double l : scaled) {
          const double w = std::exp(l - m);
          s += w;
          s2 += w * w;
        }
        cell.ess = s * s / s2;
      }
      cell.low_ess = cell.ess < 10.0;
      if (bootstrap > 0 && !scaled.empty()) {
        std::vector<double> buf(scaled.size());
        const auto ci = stats::bootstrap(
            scaled.size(),
            [&](std::span<const std::size_t> idx) {
              for (std::size_t i = 0; i < idx.size(); ++i) buf[i] = scaled[idx[i]];
              return stats::log_mean_exp(buf);
            },
            bootstrap, stream_key(seed, {0x626f6f74, static_cast<std::int64_t>(ip), static_cast<std::int64_t>(it)}));
        cell.ci_lo = std::min(ci.lo, cell.lambda);
        cell.ci_hi = std::max(ci.hi, cell.lambda);
      } else {
        cell.ci_lo = cell.ci_hi = cell.lambda;
      }
      table.cells.push_back(cell);
    }
  }
  return table;
}

MomentTable moment_ensemble(const PotentialSpec& spec, const Box& box, const EnsembleConfig& cfg) {
  if (cfg.realizations < 1) throw ConfigError("moment_ensemble needs at least one realization");
  const std::vector<double> times = snapshot_grid(cfg.evolution);
  std::vector<std::vector<double>> log_u0(times.size(), std::vector<double>(cfg.realizations));
  const Field one(box, 1.0);
  const std::size_t origin = box.center_index();
  parallel_for(
      cfg.realizations,
      [&](std::size_t r) {
        const Field xi = sample_field(spec, box, realization_seed(cfg.seed, r));
        const Evolution ev = evolve(xi, one, cfg.evolution);
        for (std::size_t it = 0; it < times.size(); ++it)
          log_u0[it][r] = ev.snapshots[it].log_at(origin);
      },
      cfg.threads);
  return moment_table(cfg.p_list, times, std::move(log_u0), cfg.bootstrap, cfg.seed);
}

}  // namespace pam
