#include "pam/intermittency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pam/error.hpp"
#include "pam/parallel.hpp"
#include "pam/rng.hpp"

namespace pam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_grid(std::vector<double>& t_grid) {
  if (t_grid.empty()) throw ConfigError("t grid is empty");
  std::sort(t_grid.begin(), t_grid.end());
  t_grid.erase(std::unique(t_grid.begin(), t_grid.end()), t_grid.end());
  if (!(t_grid.front() > 0.0)) throw ConfigError("t grid needs positive times");
}

bool abs_decreasing(const std::vector<double>& x) {
  for (std::size_t i = 1; i < x.size(); ++i)
    if (std::abs(x[i]) >= std::abs(x[i - 1])) return false;
  return x.size() >= 2;
}

int sup_norm(const Point& p) {
  int m = 0;
  for (int c : p) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::intermittent:
      return "intermittent";
    case Verdict::not_intermittent:
      return "not-intermittent";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "?";
}

bool holder_ordered(const MomentTable& table, double tol) {
  std::vector<std::size_t> order(table.p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return table.p[a] < table.p[b]; });
  for (std::size_t it = 0; it < table.t.size(); ++it) {
    for (std::size_t k = 1; k < order.size(); ++k) {
      const auto& lo = table.at(order[k - 1], it);
      const auto& hi = table.at(order[k], it);
      const double a = lo.lambda / lo.p, b = hi.lambda / hi.p;
      if (b < a - tol * (std::abs(a) + 1.0)) return false;
    }
  }
  return true;
}

GapTrend p_intermittency_test(const MomentTable& table, double p) {
  if (!(p >= 2.0)) throw ConfigError("p-intermittency needs p >= 2");
  auto find_p = [&](double q) {
    for (std::size_t i = 0; i < table.p.size(); ++i)
      if (table.p[i] == q) return i;
    std::ostringstream os;
    os << "moment table has no column p = " << q;
    throw ConfigError(os.str());
  };
  const std::size_t ip = find_p(p), iq = find_p(p - 1.0);
  if (table.t.size() < 4) throw ConfigError("p-intermittency needs at least 4 times");
  GapTrend g;
  g.p = p;
  g.t = table.t;
  bool any_width = false;
  for (std::size_t it = 0; it < table.t.size(); ++it) {
    const auto& a = table.at(ip, it);
    const auto& b = table.at(iq, it);
    g.gap.push_back(a.lambda / p - b.lambda / (p - 1.0));
    const double half = 0.5 * (a.ci_hi - a.ci_lo) / p + 0.5 * (b.ci_hi - b.ci_lo) / (p - 1.0);
    g.gap_half.push_back(half);
    any_width = any_width || half > 0.0;
  }
  if (any_width) {
    std::vector<double> sigma(g.gap_half.size());
    const double floor = 1e-12 + 1e-3 * *std::max_element(g.gap_half.begin(), g.gap_half.end());
    for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::max(g.gap_half[i], floor) / 1.96;
    g.fit = stats::fit_line(g.t, g.gap, sigma);
  } else {
    g.fit = stats::fit_line(g.t, g.gap);
  }
  g.increasing = true;
  for (std::size_t i = 1; i < g.gap.size(); ++i) g.increasing = g.increasing && g.gap[i] > g.gap[i - 1];
  double scale = 0.0;
  for (double x : g.gap) scale = std::max(scale, std::abs(x));
  const double tiny = 1e-9 * (scale + 1.0) / std::max(1.0, g.t.back());
  if (g.increasing && g.fit.slope - 2.0 * g.fit.slope_se > 0.0 && g.fit.slope > tiny)
    g.verdict = Verdict::intermittent;
  else if (g.fit.slope + 2.0 * g.fit.slope_se <= tiny)
    g.verdict = Verdict::not_intermittent;
  else
    g.verdict = Verdict::inconclusive;
  return g;
}

AnnealedCheck annealed_check(const PotentialSpec& spec, int d, double kappa, double p,
                             std::vector<double> t_grid, double chi, const AnnealedOptions& opts) {
  check_grid(t_grid);
  if (!(p >= 1.0)) throw ConfigError("annealed_check needs p >= 1");
  const TailFunctions tails(spec);
  const int radius = opts.radius > 0 ? opts.radius : default_radius(d, kappa, t_grid.back());
  const Box box(d, radius);
  EnsembleConfig cfg;
  cfg.evolution.kappa = kappa;
  cfg.evolution.t_end = t_grid.back();
  cfg.evolution.snapshot_times = t_grid;
  cfg.evolution.dt_max = opts.dt_max;
  cfg.p_list = {p};
  cfg.realizations = opts.realizations;
  cfg.seed = opts.seed;
  cfg.bootstrap = opts.bootstrap;
  cfg.threads = opts.threads;
  AnnealedCheck out;
  out.p = p;
  out.chi = chi;
  out.table = moment_ensemble(spec, box, cfg);
  std::vector<double> diffs;
  for (std::size_t it = 0; it < out.table.t.size(); ++it) {
    const double t = out.table.t[it];
    const MomentCell& cell = out.table.at(0, it);
    const double H = tails.H(p * t);
    AnnealedRow row;
    row.t = t;
    row.lambda_over_t = cell.lambda / t;
    row.ci_lo = cell.ci_lo / t;
    row.ci_hi = cell.ci_hi / t;
    row.prediction = (H - chi * p * t) / t;
    row.difference = row.lambda_over_t - row.prediction;
    row.sandwich_lo = (H - 2.0 * d * kappa * p * t) / t;
    row.sandwich_hi = H / t;
    row.low_ess = cell.low_ess;
    diffs.push_back(row.difference);
    out.rows.push_back(row);
  }
  out.trend_to_zero = abs_decreasing(diffs);
  return out;
}

double single_path_lower_bound(const Field& xi, double kappa, double t, std::size_t z) {
  const Box& box = xi.box();
  const int d = box.dim();
  // Shortest lattice path from the center to z, one coordinate at a time.
  std::vector<std::size_t> path{box.center_index()};
  Point cur = box.point(box.center_index());
  const Point target = box.point(z);
  for (int k = 0; k < d; ++k) {
    while (cur[k] != target[k]) {
      cur[k] += cur[k] < target[k] ? 1 : -1;
      path.push_back(box.index(cur));
    }
  }
  const auto n = static_cast<double>(path.size() - 1);
  double xi_min = kInf;
  for (auto i : path) xi_min = std::min(xi_min, xi[i]);
  if (xi_min == kNegInf) return kNegInf;
  const double h = xi[z];
  if (n == 0.0) return (h - 2.0 * d * kappa) * t;
  // Exactly n jumps in [0, s] along the path, none in (s, t]:
  // e^{-2d kappa t} (kappa s)^n / n! e^{s xi_min + (t - s) h}.
  double best = kNegInf;
  for (int k = 1; k < 400; ++k) {
    const double s = t * k / 400.0;
    const double v = -2.0 * d * kappa * t + n * std::log(kappa * s) - std::lgamma(n + 1.0) +
                     s * std::min(xi_min, h) + (t - s) * h;
    best = std::max(best, v);
  }
  return best;
}

QuenchedCheck quenched_check(const PotentialSpec& spec, int d, double kappa,
                             std::vector<double> t_grid, std::uint64_t seed, double chi_tilde,
                             const QuenchedOptions& opts) {
  check_grid(t_grid);
  QuenchedCheck out;
  out.chi_tilde = chi_tilde;
  std::vector<double> diffs;
  for (double t : t_grid) {
    const int radius = static_cast<int>(std::ceil(t));
    const Box box(d, radius);
    const Field xi = sample_field(spec, box, seed);
    Field u0(box, 0.0);
    u0[box.center_index()] = 1.0;
    EvolutionConfig cfg;
    cfg.kappa = kappa;
    cfg.t_end = t;
    cfg.dt_max = opts.dt_max;
    const Evolution ev = evolve(xi, u0, cfg);
    const ScaledField& u = ev.snapshots.back();
    const TotalMass U = total_mass(u);
    double shell = 0.0, total = 0.0;
    for (std::size_t i = 0; i < box.size(); ++i) {
      total += u.values[i];
      if (sup_norm(box.offset(i)) == radius) shell += u.values[i];
    }
    QuenchedRow row;
    row.t = t;
    row.radius = radius;
    row.boundary_fraction = total > 0.0 ? shell / total : 0.0;
    if (row.boundary_fraction > opts.boundary_tol) {
      std::ostringstream os;
      os << "quenched_check: " << row.boundary_fraction << " of U(" << t
         << ") sits on the boundary of B_t; enlarge the box";
      throw BoxTooSmallError(os.str(), row.boundary_fraction);
    }
    const Height h = max_height(xi);
    row.h_t = h.h;
    row.argmax = h.argmax;
    row.log_U_over_t = U.log_U / t;
    row.gap = row.h_t - row.log_U_over_t;
    row.difference = row.gap - chi_tilde;
    double lb = kNegInf;
    for (auto z : h.argmax) lb = std::max(lb, single_path_lower_bound(xi, kappa, t, z));
    row.lower_bound = lb / t;
    diffs.push_back(row.difference);
    out.rows.push_back(std::move(row));
  }
  out.trend_to_zero = abs_decreasing(diffs);
  return out;
}

IslandReport extract_islands(const Field& xi, const Field& u, double h_t, const ShapeResult& shapes,
                             double eps, int R, const IslandOptions& opts) {
  const Box& box = u.box();
  if (!xi.box().same_geometry(box)) throw ConfigError("extract_islands: xi and u live on different boxes");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("extract_islands needs eps in (0, 1)");
  if (R < 0 || R > shapes.V.box().radius())
    throw ConfigError("extract_islands: shape radius exceeds the stored optimal shapes");
  const Box& sbox = shapes.V.box();
  if (sbox.dim() != box.dim()) throw ConfigError("extract_islands: shape dimension mismatch");

  IslandReport rep;
  rep.shape_radius = R;
  if (opts.capture_radius >= 0) {
    rep.capture_radius = opts.capture_radius;
  } else {
    rep.capture_radius = R;
    for (std::size_t k = 0; k < shapes.eps.size(); ++k)
      if (shapes.eps[k] == eps && shapes.r[k] >= 0) rep.capture_radius = shapes.r[k];
  }
  rep.delta_min = opts.delta_min >= 0.0 ? opts.delta_min : (opts.t > 1.0 ? std::pow(opts.t, 0.9) : 1.0);

  double U = 0.0;
  for (double x : u.values()) {
    if (!(x >= 0.0)) throw ConfigError("extract_islands needs a nonnegative solution");
    U += x;
  }
  if (!(U > 0.0)) throw NumericError("extract_islands: zero total mass");

  std::vector<std::size_t> order(box.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return u[a] > u[b]; });

  const int r = rep.capture_radius;
  const int reach = std::max(r, 1);
  auto is_local_max = [&](std::size_t i) {
    for (std::size_t j = 0; j < box.size(); ++j)
      if (box.distance(i, j) <= reach && u[j] > u[i]) return false;
    return true;
  };

  std::vector<std::size_t> centers;
  std::vector<char> covered(box.size(), 0);
  double captured = 0.0;
  auto accept = [&](std::size_t c) {
    centers.push_back(c);
    for (std::size_t j = 0; j < box.size(); ++j) {
      if (!covered[j] && box.distance(c, j) <= r) {
        covered[j] = 1;
        captured += u[j];
      }
    }
  };
  // Ties of the potential maximum seed one island each.
  const Height top = max_height(xi);
  if (top.argmax.size() > 1)
    for (auto c : top.argmax)
      if (centers.size() < opts.k_max) accept(c);

  for (std::size_t i : order) {
    if (captured >= (1.0 - eps) * U || centers.size() >= opts.k_max) break;
    if (u[i] <= 0.0) break;
    bool far = true;
    for (auto c : centers) far = far && box.distance(i, c) >= rep.delta_min;
    if (!far || !is_local_max(i)) continue;
    accept(i);
  }
  rep.captured_fraction = std::clamp(captured / U, 0.0, 1.0);
  rep.target_reached = rep.captured_fraction >= 1.0 - eps;

  for (auto c : centers) {
    Island isl;
    isl.center = box.point(c);
    isl.log_u = std::log(u[c]);
    double own = 0.0;
    for (std::size_t j = 0; j < box.size(); ++j)
      if (box.distance(c, j) <= r) own += u[j];
    isl.captured = own / U;
    const std::size_t s0 = sbox.center_index();
    for (std::size_t k = 0; k < sbox.size(); ++k) {
      const Point off = sbox.offset(k);
      if (sup_norm(off) > R) continue;
      const auto j = box.find_offset(c, off);
      if (!j) continue;
      const double dv = xi[*j] - h_t - shapes.V[k];
      const double dw = u[*j] / u[c] - shapes.w[k] / shapes.w[s0];
      isl.potential_distance = std::max(isl.potential_distance, std::isnan(dv) ? kInf : std::abs(dv));
      isl.profile_distance = std::max(isl.profile_distance, std::abs(dw));
    }
    rep.islands.push_back(std::move(isl));
  }
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b) {
      const int dist = box.distance(centers[a], centers[b]);
      rep.min_pairwise_distance = rep.min_pairwise_distance == 0 ? dist : std::min(rep.min_pairwise_distance, dist);
    }
  if (opts.t > 1.0 && !centers.empty())
    rep.log_count_over_log_t = std::log(static_cast<double>(centers.size())) / std::log(opts.t);
  return rep;
}

double autocorrelation(const Field& mu, int x) {
  const Box& box = mu.box();
  Point shift(static_cast<std::size_t>(box.dim()), 0);
  shift[0] = x;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const double v = std::sqrt(std::max(mu[i], 0.0));
    den += v * v;
    const Point target = [&] {
      Point p = box.offset(i);
      p[0] += x;
      return p;
    }();
    if (sup_norm(target) > box.radius()) continue;
    if (const auto j = box.find_offset(box.center_index(), target))
      num += v * std::sqrt(std::max(mu[*j], 0.0));
  }
  return num / den;
}

CorrelationProfile correlation_profile(const PotentialSpec& spec, int d, double kappa, double t,
                                       const std::vector<int>& x_list, const CorrelationOptions& opts) {
  if (!(t > 0.0)) throw ConfigError("correlation_profile needs t > 0");
  if (opts.realizations < 2) throw ConfigError("correlation_profile needs at least two realizations");
  int xmax = 0;
  for (int x : x_list) xmax = std::max(xmax, std::abs(x));
  const int radius = opts.radius > 0 ? opts.radius : default_radius(d, kappa, t) + xmax;
  if (xmax > radius) throw ConfigError("correlation_profile: offset outside the box");
  const Box box(d, radius);
  const std::size_t origin = box.center_index();
  std::vector<std::size_t> sites;
  for (int x : x_list) {
    Point off(static_cast<std::size_t>(d), 0);
    off[0] = x;
    sites.push_back(*box.find_offset(origin, off));
  }
  // log u(t,0) and log u(t,x) per realization
  std::vector<double> log0(opts.realizations);
  std::vector<std::vector<double>> logx(x_list.size(), std::vector<double>(opts.realizations));
  const Field one(box, 1.0);
  EvolutionConfig cfg;
  cfg.kappa = kappa;
  cfg.t_end = t;
  cfg.dt_max = opts.dt_max;
  parallel_for(
      opts.realizations,
      [&](std::size_t r) {
        const Field xi = sample_field(spec, box, realization_seed(opts.seed, r));
        const Evolution ev = evolve(xi, one, cfg);
        const ScaledField& u = ev.snapshots.back();
        log0[r] = u.log_at(origin);
        for (std::size_t k = 0; k < sites.size(); ++k) logx[k][r] = u.log_at(sites[k]);
      },
      opts.threads);

  CorrelationProfile prof;
  prof.t = t;
  std::vector<double> den(opts.realizations);
  for (std::size_t r = 0; r < den.size(); ++r) den[r] = 2.0 * log0[r];
  {
    const double m = *std::max_element(den.begin(), den.end());
    double s = 0.0, s2 = 0.0;
    for (double l : den) {
      const double w = std::exp(l - m);
      s += w;
      s2 += w * w;
    }
    prof.ess = s * s / s2;
  }
  prof.inconclusive = !(prof.ess >= 10.0);

  std::optional<Field> mu1, mu2;
  if (spec.family == Family::double_exponential) {
    VarOptions vo;
    vo.check_boundary = false;
    mu1 = chi_d(d, kappa, spec.rho, opts.limit_radius, vo).profile;
    mu2 = chi_d(d, kappa, 2.0 * spec.rho, opts.limit_radius, vo).profile;
  }
  for (std::size_t k = 0; k < x_list.size(); ++k) {
    std::vector<double> num(opts.realizations);
    for (std::size_t r = 0; r < num.size(); ++r) num[r] = log0[r] + logx[k][r];
    CorrelationPoint pt;
    pt.x = x_list[k];
    pt.c = std::exp(stats::log_mean_exp(num) - stats::log_mean_exp(den));
    if (sites[k] == origin) pt.c = 1.0;
    std::vector<double> bn(num.size()), bd(den.size());
    const auto ci = stats::bootstrap(
        num.size(),
        [&](std::span<const std::size_t> idx) {
          for (std::size_t i = 0; i < idx.size(); ++i) {
            bn[i] = num[idx[i]];
            bd[i] = den[idx[i]];
          }
          return std::exp(stats::log_mean_exp(bn) - stats::log_mean_exp(bd));
        },
        opts.bootstrap, stream_key(opts.seed, {0x636f7272, static_cast<std::int64_t>(k)}));
    pt.ci_lo = std::min(ci.lo, pt.c);
    pt.ci_hi = std::max(ci.hi, pt.c);
    pt.limit_rho = mu1 ? autocorrelation(*mu1, pt.x) : std::nan("");
    pt.limit_prho = mu2 ? autocorrelation(*mu2, pt.x) : std::nan("");
    prof.points.push_back(pt);
  }
  return prof;
}

}  // namespace pam
