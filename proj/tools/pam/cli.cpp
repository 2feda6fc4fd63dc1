#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <json.hpp>

#include "pam/catalytic.hpp"
#include "pam/error.hpp"
#include "pam/green.hpp"
#include "pam/intermittency.hpp"
#include "pam/parallel.hpp"
#include "pam/potentials.hpp"
#include "pam/scaling.hpp"
#include "pam/snapshot.hpp"
#include "pam/solver.hpp"
#include "pam/spectral.hpp"
#include "pam/variational.hpp"

#ifndef PAM_VERSION
#define PAM_VERSION "0.0.0"
#endif

namespace pam::cli {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

enum class Kind { real, integer, text, reals, integers, texts, object };

struct Param {
  std::string name;
  Kind kind;
  json def;
  std::string help;
};

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no infinities; non-finite reals travel as strings.
json real_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double parse_real(const std::string& s, const std::string& field) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError(field + ": '" + s + "' is not a number");
  }
  if (pos != s.size()) throw ConfigError(field + ": '" + s + "' is not a number");
  return v;
}

long long parse_integer(const std::string& s, const std::string& field) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError(field + ": '" + s + "' is not an integer");
  }
  if (pos != s.size()) throw ConfigError(field + ": '" + s + "' is not an integer");
  return v;
}

json coerce_real(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return real_json(parse_real(v.get<std::string>(), field));
  throw ConfigError(field + " must be a number");
}

json coerce_integer(const json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x == std::floor(x) && std::abs(x) < 9e15) return static_cast<long long>(x);
  }
  if (v.is_string()) return parse_integer(v.get<std::string>(), field);
  throw ConfigError(field + " must be an integer");
}

json read_object(const std::string& text_or_path, const std::string& field) {
  std::string text = text_or_path;
  if (text.empty() || text.front() != '{') {
    std::ifstream in(text_or_path);
    if (!in) throw ConfigError(field + ": cannot open '" + text_or_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(field + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(field + " must be a JSON object");
  return j;
}

json coerce(const Param& p, const json& v) {
  const std::string& f = p.name;
  switch (p.kind) {
    case Kind::real:
      return coerce_real(v, f);
    case Kind::integer:
      return coerce_integer(v, f);
    case Kind::text:
      if (!v.is_string()) throw ConfigError(f + " must be a string");
      return v;
    case Kind::reals:
    case Kind::integers:
    case Kind::texts: {
      const json arr = v.is_array() ? v : json::array({v});
      json out = json::array();
      for (const auto& e : arr) {
        if (p.kind == Kind::reals) out.push_back(coerce_real(e, f));
        else if (p.kind == Kind::integers) out.push_back(coerce_integer(e, f));
        else if (e.is_string()) out.push_back(e);
        else throw ConfigError(f + " must be a list of strings");
      }
      return out;
    }
    case Kind::object:
      if (v.is_object()) return v;
      if (v.is_string()) return read_object(v.get<std::string>(), f);
      throw ConfigError(f + " must be a JSON object");
  }
  return v;
}

json coerce_cli(const Param& p, const std::vector<std::string>& raw) {
  if (p.kind == Kind::reals || p.kind == Kind::integers || p.kind == Kind::texts) {
    json arr = json::array();
    for (const auto& s : raw) arr.push_back(s);
    return coerce(p, arr);
  }
  return coerce(p, json(raw.back()));
}

double as_real(const json& v) {
  if (v.is_number()) return v.get<double>();
  return parse_real(v.get<std::string>(), "value");
}

using Cell = std::variant<double, long long, std::string>;

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    write_line(std::vector<Cell>(header.begin(), header.end()));
  }

  void row(const std::vector<Cell>& cells) { write_line(cells); }

 private:
  void write_line(const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      if (const auto* d = std::get_if<double>(&cells[i])) out_ << format_double(*d);
      else if (const auto* n = std::get_if<long long>(&cells[i])) out_ << *n;
      else out_ << std::get<std::string>(cells[i]);
    }
    out_ << '\n';
  }

  std::ofstream out_;
};

std::string point_cell(const Point& p) {
  std::string s;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k) s += ';';
    s += std::to_string(p[k]);
  }
  return s;
}

// Column order of every table the tool writes.
const std::map<std::string, std::map<std::string, std::vector<std::string>>>& table_headers() {
  static const std::map<std::string, std::map<std::string, std::vector<std::string>>> h = {
      {"solve", {{"mass.csv", {"t", "U", "logU", "log_u_center"}}}},
      {"moments", {{"moments.csv", {"p", "t", "lambda", "lambda_over_p", "ci_lo", "ci_hi", "ess", "low_ess"}}}},
      {"eigen", {}},
      {"mu", {{"mu.csv", {"r", "mu", "method", "residual"}}}},
      {"variational", {{"shapes.csv", {"offset", "V", "w"}}}},
      {"scaling", {{"scaling.csv", {"t", "alpha", "alpha_tilde", "class"}}}},
      {"islands", {{"islands.csv", {"center", "log_u", "captured", "potential_distance", "profile_distance"}}}},
      {"check annealed",
       {{"annealed.csv",
         {"t", "lambda_over_t", "ci_lo", "ci_hi", "prediction", "difference", "sandwich_lo", "sandwich_hi", "low_ess"}}}},
      {"check quenched",
       {{"quenched.csv",
         {"seed", "t", "radius", "h_t", "log_U_over_t", "gap", "chi_tilde", "difference", "lower_bound",
          "boundary_fraction"}}}},
      {"check correlation", {{"correlation.csv", {"x", "c", "ci_lo", "ci_hi", "limit_rho", "limit_2rho"}}}},
      {"catalytic", {{"catalytic.csv", {"t", "route", "estimate", "se"}}}},
      {"report", {}},
  };
  return h;
}

class Context {
 public:
  std::string command;
  json cfg;
  fs::path out;
  std::vector<std::string> tables;
  std::vector<std::string> files;
  bool inconclusive = false;

  double real(const std::string& k) const { return as_real(cfg.at(k)); }
  int integer(const std::string& k) const { return static_cast<int>(cfg.at(k).get<long long>()); }
  std::size_t count(const std::string& k) const {
    const long long v = cfg.at(k).get<long long>();
    if (v < 0) throw ConfigError(k + " must be nonnegative");
    return static_cast<std::size_t>(v);
  }
  std::string text(const std::string& k) const { return cfg.at(k).get<std::string>(); }
  std::vector<double> reals(const std::string& k) const {
    std::vector<double> v;
    for (const auto& e : cfg.at(k)) v.push_back(as_real(e));
    return v;
  }
  std::vector<int> integers(const std::string& k) const {
    std::vector<int> v;
    for (const auto& e : cfg.at(k)) v.push_back(static_cast<int>(e.get<long long>()));
    return v;
  }
  std::vector<std::string> texts(const std::string& k) const {
    std::vector<std::string> v;
    for (const auto& e : cfg.at(k)) v.push_back(e.get<std::string>());
    return v;
  }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg.at("seed").get<long long>()); }
  PotentialSpec potential() const { return PotentialSpec::from_json(cfg.at("potential").dump()); }

  fs::path file(const std::string& name) {
    files.push_back(name);
    return out / name;
  }
  Csv table(const std::string& name) {
    tables.push_back(name);
    return Csv(file(name), table_headers().at(command).at(name));
  }
  void write_json(const std::string& name, const json& j) {
    std::ofstream f(file(name));
    f << j.dump(2) << '\n';
  }
};

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
  std::function<void(Context&)> body;
};

json default_potential() { return json{{"family", "double_exponential"}, {"params", {{"rho", 1.0}}}}; }

double rho_of(const PotentialSpec& spec, const std::string& what) {
  if (spec.family != Family::double_exponential)
    throw ConfigError(what + " needs a double_exponential potential");
  return spec.rho;
}

// ---------------------------------------------------------------- solve

void cmd_solve(Context& ctx) {
  const int d = ctx.integer("d");
  const double kappa = ctx.real("kappa");
  const double t = ctx.real("t");
  int R = ctx.integer("R");
  if (R <= 0) R = default_radius(d, kappa, t);
  const Box box(d, R, parse_boundary_mode(ctx.text("boundary")));
  const PotentialSpec spec = ctx.potential();
  const Field xi = sample_field(spec, box, ctx.seed());
  Field u0(box, 0.0);
  const std::string init = ctx.text("u0");
  if (init == "one") {
    u0 = Field(box, 1.0);
  } else if (init == "delta") {
    u0[box.center_index()] = 1.0;
  } else {
    throw ConfigError("u0 must be 'delta' or 'one'");
  }
  EvolutionConfig cfg;
  cfg.kappa = kappa;
  cfg.t_end = t;
  cfg.snapshot_times = ctx.reals("snapshots");
  cfg.stepper = parse_stepper(ctx.text("stepper"));
  cfg.dt_max = ctx.real("dt");
  const Evolution ev = evolve(xi, u0, cfg);

  save_field(xi, ctx.file("xi.snap"), 0.0, ctx.seed(), 0.0);
  Csv mass = ctx.table("mass.csv");
  json snaps = json::array();
  for (std::size_t k = 0; k < ev.snapshots.size(); ++k) {
    const ScaledField& s = ev.snapshots[k];
    char name[32];
    std::snprintf(name, sizeof name, "u_%03zu.snap", k);
    save_field(s.values, ctx.file(name), s.t, ctx.seed(), s.log_scale);
    const TotalMass m = total_mass(s);
    mass.row({s.t, m.U, m.log_U, s.log_at(box.center_index())});
    snaps.push_back({{"t", s.t}, {"file", name}});
  }
  ctx.write_json("solve.json", {{"radius", R}, {"dt", ev.dt}, {"steps", ev.steps}, {"snapshots", snaps}});
}

// -------------------------------------------------------------- moments

void cmd_moments(Context& ctx) {
  const int d = ctx.integer("d");
  const double kappa = ctx.real("kappa");
  EnsembleConfig cfg;
  const auto t_list = ctx.reals("t");
  if (t_list.empty()) throw ConfigError("t needs at least one time");
  cfg.evolution.kappa = kappa;
  cfg.evolution.t_end = *std::max_element(t_list.begin(), t_list.end());
  cfg.evolution.snapshot_times = t_list;
  cfg.evolution.dt_max = ctx.real("dt");
  cfg.p_list = ctx.reals("p");
  cfg.realizations = ctx.count("n");
  cfg.seed = ctx.seed();
  cfg.bootstrap = ctx.count("bootstrap");
  int R = ctx.integer("R");
  if (R <= 0) R = default_radius(d, kappa, cfg.evolution.t_end);
  const MomentTable table = moment_ensemble(ctx.potential(), Box(d, R), cfg);
  Csv csv = ctx.table("moments.csv");
  for (const auto& c : table.cells)
    csv.row({c.p, c.t, c.lambda, c.lambda / c.p, c.ci_lo, c.ci_hi, c.ess, static_cast<long long>(c.low_ess)});
  json verdicts = json::array();
  for (double p : table.p) {
    if (p < 2.0 || table.t.size() < 4) continue;
    if (std::find(table.p.begin(), table.p.end(), p - 1.0) == table.p.end()) continue;
    const GapTrend g = p_intermittency_test(table, p);
    verdicts.push_back({{"p", p},
                        {"verdict", std::string(to_string(g.verdict))},
                        {"slope", g.fit.slope},
                        {"slope_se", g.fit.slope_se},
                        {"gap", g.gap}});
  }
  ctx.write_json("intermittency.json", {{"holder_ordered", holder_ordered(table)}, {"radius", R}, {"tests", verdicts}});
}

// ---------------------------------------------------------------- eigen

void cmd_eigen(Context& ctx) {
  Field V;
  const std::string field = ctx.text("field");
  if (!field.empty()) {
    V = load_field(field);
  } else {
    const Box box(ctx.integer("d"), ctx.integer("R"), parse_boundary_mode(ctx.text("boundary")));
    V = sample_field(ctx.potential(), box, ctx.seed());
  }
  EigenOptions opts;
  opts.method = parse_eigen_method(ctx.text("method"));
  opts.tol = ctx.real("tol");
  const SpectralResult res = principal_eigen(V, ctx.real("kappa"), opts);
  if (!res.empty_domain) save_field(res.eigenfunction, ctx.file("eigenfunction.snap"), 0.0, ctx.seed());
  ctx.write_json("eigen.json", {{"lambda", real_json(res.lambda)},
                                {"residual", res.residual},
                                {"iterations", res.iterations},
                                {"method", std::string(to_string(res.method))},
                                {"degenerate", res.degenerate},
                                {"empty_domain", res.empty_domain},
                                {"eigenfunction", res.empty_domain ? json() : json("eigenfunction.snap")}});
}

// ------------------------------------------------------------------- mu

void cmd_mu(Context& ctx) {
  const int d = ctx.integer("d");
  MuOptions opts;
  opts.method = parse_mu_method(ctx.text("method"));
  opts.agreement_tol = ctx.real("agreement_tol");
  Csv csv = ctx.table("mu.csv");
  for (double r : ctx.reals("r")) {
    const RankOneResult res = mu_of_r(r, d, opts);
    csv.row({r, res.mu, std::string(to_string(res.method)), res.residual});
  }
  const GreenValue g = green_function_origin(d);
  ctx.write_json("green.json", {{"d", d}, {"G", real_json(g.G)}, {"r_d", g.r_threshold}, {"recurrent", g.recurrent}});
}

// ---------------------------------------------------------- variational

json local_optima_json(const VarSolution& s) {
  json j = json::array();
  for (double v : s.local_optima) j.push_back(real_json(v));
  return j;
}

void cmd_variational(Context& ctx) {
  const int d = ctx.integer("d");
  const double kappa = ctx.real("kappa");
  const double rho = ctx.real("rho");
  const int R = ctx.integer("R");
  VarOptions opts;
  opts.boundary_tol = ctx.real("boundary_tol");
  const std::string which = ctx.text("which");
  if (which == "chi") {
    const VarSolution s = chi_d(d, kappa, rho, R, opts);
    save_field(s.profile, ctx.file("profile.snap"));
    ctx.write_json("variational.json",
                   {{"which", which},
                    {"value", real_json(s.value)},
                    {"profile", "profile.snap"},
                    {"diagnostics",
                     {{"boundary_mass", s.boundary_mass},
                      {"iterations", s.iterations},
                      {"converged", s.converged},
                      {"tensorized", s.tensorized ? real_json(*s.tensorized) : json()},
                      {"local_optima", local_optima_json(s)}}}});
  } else if (which == "chitilde") {
    const VarSolution s = chi_tilde_d(d, kappa, rho, R, opts);
    save_field(s.profile, ctx.file("profile.snap"));
    save_field(s.eigenfunction, ctx.file("eigenfunction.snap"));
    ctx.write_json("variational.json", {{"which", which},
                                        {"value", real_json(s.value)},
                                        {"profile", "profile.snap"},
                                        {"eigenfunction", "eigenfunction.snap"},
                                        {"diagnostics",
                                         {{"boundary_mass", s.boundary_mass},
                                          {"iterations", s.iterations},
                                          {"converged", s.converged},
                                          {"feasibility", s.feasibility}}}});
  } else if (which == "shapes") {
    const ShapeResult s = optimal_shapes(d, kappa, rho, R, ctx.reals("eps"), opts);
    save_field(s.V, ctx.file("profile.snap"));
    save_field(s.w, ctx.file("eigenfunction.snap"));
    Csv csv = ctx.table("shapes.csv");
    for (std::size_t i = 0; i < s.V.size(); ++i) csv.row({point_cell(s.V.box().offset(i)), s.V[i], s.w[i]});
    json radii = json::array();
    for (std::size_t k = 0; k < s.eps.size(); ++k) radii.push_back({{"eps", s.eps[k]}, {"r", s.r[k]}});
    ctx.write_json("variational.json", {{"which", which},
                                        {"value", real_json(s.chi_tilde)},
                                        {"profile", "profile.snap"},
                                        {"eigenfunction", "eigenfunction.snap"},
                                        {"diagnostics", {{"multiple_maxima", s.multiple_maxima}, {"radii", radii}}}});
  } else {
    throw ConfigError("which must be chi, chitilde or shapes");
  }
}

// -------------------------------------------------------------- scaling

void cmd_scaling(Context& ctx) {
  const EtaFunction eta = EtaFunction::parse(ctx.text("eta"));
  const int d = ctx.integer("d");
  const int cls = classify(eta.gamma, eta.eta_star);
  Csv csv = ctx.table("scaling.csv");
  for (double t : ctx.reals("t")) {
    double a = kNan, at = kNan;
    if (cls != 1) {
      a = alpha_annealed(eta, d, t).alpha;
      if (t > 1.0)
        at = alpha_quenched([&](double s) { return alpha_annealed(eta, d, s).alpha; }, d, t).alpha;
    }
    csv.row({t, a, at, static_cast<long long>(cls)});
  }
  ctx.write_json("scaling.json", {{"eta", eta.name},
                                  {"gamma", eta.gamma},
                                  {"eta_star", real_json(eta.eta_star)},
                                  {"class", cls},
                                  {"nu", island_exponent(eta.gamma, d)}});
}

// -------------------------------------------------------------- islands

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

void cmd_islands(Context& ctx) {
  const fs::path run = ctx.text("run");
  if (run.empty()) throw ConfigError("islands needs --run <solve output directory>");
  const json rcfg = read_json_file(run / "config.json");
  const json rsolve = read_json_file(run / "solve.json");
  const PotentialSpec spec = PotentialSpec::from_json(rcfg.at("potential").dump());
  const double rho = rho_of(spec, "islands");
  const int d = static_cast<int>(rcfg.at("d").get<long long>());
  const double kappa = as_real(rcfg.at("kappa"));
  const Field xi = load_field(run / "xi.snap");
  const Snapshot u = load_snapshot(run / rsolve.at("snapshots").back().at("file").get<std::string>());
  const double t = u.header.time;
  const double eps = ctx.real("eps");
  const int R = ctx.integer("R");
  const int shapes_R = std::max(ctx.integer("shapes_R"), R);
  const ShapeResult shapes = optimal_shapes(d, kappa, rho, shapes_R, {eps});
  const int reach = std::min(static_cast<int>(std::ceil(t)), xi.box().radius());
  const double h_t = max_height(xi, reach).h;
  IslandOptions io;
  io.t = t;
  io.delta_min = ctx.real("delta_min");
  io.k_max = ctx.count("kmax");
  const IslandReport rep = extract_islands(xi, u.field, h_t, shapes, eps, R, io);
  Csv csv = ctx.table("islands.csv");
  json islands = json::array();
  for (const auto& isl : rep.islands) {
    csv.row({point_cell(isl.center), isl.log_u, isl.captured, isl.potential_distance, isl.profile_distance});
    islands.push_back({{"center", isl.center},
                       {"log_u", isl.log_u},
                       {"captured", isl.captured},
                       {"potential_distance", real_json(isl.potential_distance)},
                       {"profile_distance", isl.profile_distance}});
  }
  ctx.write_json("islands.json", {{"t", t},
                                  {"h_t", h_t},
                                  {"eps", eps},
                                  {"islands", islands},
                                  {"count", rep.islands.size()},
                                  {"captured_fraction", rep.captured_fraction},
                                  {"target_reached", rep.target_reached},
                                  {"min_pairwise_distance", rep.min_pairwise_distance},
                                  {"log_count_over_log_t", rep.log_count_over_log_t},
                                  {"capture_radius", rep.capture_radius},
                                  {"shape_radius", rep.shape_radius},
                                  {"delta_min", rep.delta_min}});
}

// --------------------------------------------------------------- checks

void cmd_check_annealed(Context& ctx) {
  const PotentialSpec spec = ctx.potential();
  const int d = ctx.integer("d");
  const double kappa = ctx.real("kappa");
  double chi = ctx.real("chi");
  if (std::isnan(chi)) {
    if (spec.family == Family::double_exponential)
      chi = chi_d(d, kappa, spec.rho, ctx.integer("var_R")).value;
    else if (spec.family == Family::tabulated && spec.r.front() == spec.r.back())
      chi = 0.0;  // constant potential
    else
      throw ConfigError("check annealed: supply --chi for this potential family");
  }
  AnnealedOptions opts;
  opts.realizations = ctx.count("n");
  opts.seed = ctx.seed();
  opts.radius = ctx.integer("R");
  opts.bootstrap = ctx.count("bootstrap");
  opts.dt_max = ctx.real("dt");
  const AnnealedCheck chk = annealed_check(spec, d, kappa, ctx.real("p"), ctx.reals("t"), chi, opts);
  Csv csv = ctx.table("annealed.csv");
  for (const auto& r : chk.rows) {
    csv.row({r.t, r.lambda_over_t, r.ci_lo, r.ci_hi, r.prediction, r.difference, r.sandwich_lo, r.sandwich_hi,
             static_cast<long long>(r.low_ess)});
    ctx.inconclusive = ctx.inconclusive || r.low_ess;
  }
  ctx.write_json("annealed.json", {{"chi", chi}, {"p", chk.p}, {"trend_to_zero", chk.trend_to_zero}});
}

void cmd_check_quenched(Context& ctx) {
  const PotentialSpec spec = ctx.potential();
  const int d = ctx.integer("d");
  const double kappa = ctx.real("kappa");
  double chit = ctx.real("chi_tilde");
  if (std::isnan(chit)) chit = chi_tilde_d(d, kappa, rho_of(spec, "check quenched"), ctx.integer("var_R")).value;
  QuenchedOptions opts;
  opts.dt_max = ctx.real("dt");
  opts.boundary_tol = ctx.real("boundary_tol");
  Csv csv = ctx.table("quenched.csv");
  json trends = json::array();
  const std::size_t seeds = std::max<std::size_t>(1, ctx.count("seeds"));
  for (std::size_t k = 0; k < seeds; ++k) {
    const std::uint64_t seed = ctx.seed() + k;
    const QuenchedCheck q = quenched_check(spec, d, kappa, ctx.reals("t"), seed, chit, opts);
    for (const auto& r : q.rows)
      csv.row({static_cast<long long>(seed), r.t, static_cast<long long>(r.radius), r.h_t, r.log_U_over_t, r.gap,
               chit, r.difference, r.lower_bound, r.boundary_fraction});
    trends.push_back({{"seed", seed}, {"trend_to_zero", q.trend_to_zero}});
  }
  ctx.write_json("quenched.json", {{"chi_tilde", chit}, {"runs", trends}});
}

void cmd_check_correlation(Context& ctx) {
  CorrelationOptions opts;
  opts.realizations = ctx.count("n");
  opts.seed = ctx.seed();
  opts.radius = ctx.integer("R");
  opts.bootstrap = ctx.count("bootstrap");
  opts.dt_max = ctx.real("dt");
  opts.limit_radius = ctx.integer("var_R");
  const CorrelationProfile prof =
      correlation_profile(ctx.potential(), ctx.integer("d"), ctx.real("kappa"), ctx.real("t"), ctx.integers("x"), opts);
  Csv csv = ctx.table("correlation.csv");
  for (const auto& p : prof.points)
    csv.row({static_cast<long long>(p.x), p.c, p.ci_lo, p.ci_hi, p.limit_rho, p.limit_prho});
  ctx.inconclusive = prof.inconclusive;
  ctx.write_json("correlation.json", {{"t", prof.t}, {"ess", prof.ess}, {"inconclusive", prof.inconclusive}});
}

// ------------------------------------------------------------ catalytic

void cmd_catalytic(Context& ctx) {
  CatalystParams cp;
  cp.d = ctx.integer("d");
  cp.radius = ctx.integer("L");
  cp.nu = ctx.real("nu");
  cp.gamma = ctx.real("gamma");
  cp.rho = ctx.real("rho");
  if (const double dr = ctx.real("death_rate"); !std::isnan(dr)) cp.death_rate = dr;
  cp.validate();
  const double kappa = ctx.real("kappa");
  const int p = ctx.integer("p");
  const auto t = ctx.reals("t");
  const CatalyticMoments direct =
      direct_moments(cp, kappa, {static_cast<double>(p)}, t, ctx.count("n"), ctx.seed(), ctx.real("dt"));
  const CatalyticMoments fk = fk_moment(cp, kappa, p, t, ctx.count("paths"), ctx.seed());
  Csv csv = ctx.table("catalytic.csv");
  for (std::size_t i = 0; i < direct.t.size(); ++i) csv.row({direct.t[i], std::string("direct"), direct.estimate[0][i], direct.se[0][i]});
  for (std::size_t i = 0; i < fk.t.size(); ++i) csv.row({fk.t[i], std::string("fk"), fk.estimate[0][i], fk.se[0][i]});

  const LambdaStar ls = lambda_star_probe(cp.d, cp.rho, cp.gamma, p);
  json limits;
  try {
    std::optional<double> polaron;
    if (const double P = ctx.real("polaron"); !std::isnan(P)) polaron = P;
    const LambdaLimits lim = lambda_limits(cp.d, cp.nu, cp.gamma, cp.rho, p, polaron);
    limits = {{"r_d", lim.r_d},
              {"small_kappa", lim.small_kappa},
              {"large_kappa", lim.large_kappa ? json(*lim.large_kappa) : json()},
              {"intermittent_small_kappa", lim.intermittent_small_kappa},
              {"intermittent_large_kappa",
               lim.intermittent_large_kappa ? json(*lim.intermittent_large_kappa) : json()}};
  } catch (const RegimeError& e) {
    limits = {{"regime_error", e.what()}};
  }
  ctx.write_json("prediction.json", {{"lambda_star", ls.lambda_star},
                                     {"mu", ls.mu},
                                     {"q", ls.q},
                                     {"regime", ls.strongly_catalytic ? "strongly" : "weakly"},
                                     {"kappa_limits", limits}});
}

// --------------------------------------------------------------- report

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void cmd_report(Context& ctx) {
  const auto inputs = ctx.texts("inputs");
  std::string kind = ctx.text("kind");
  std::vector<json> manifests;
  for (const auto& dir : inputs) {
    json m = read_json_file(fs::path(dir) / "manifest.json");
    const std::string sub = m.at("subcommand").get<std::string>();
    if (kind.empty()) kind = sub;
    if (sub != kind)
      throw ConfigError("report: mixed subcommands '" + kind + "' and '" + sub + "' cannot be merged");
    manifests.push_back(std::move(m));
  }
  const std::vector<std::string> prov{"run", "run_seed", "run_config_hash"};
  std::vector<std::string> names;
  std::map<std::string, std::vector<std::string>> headers;
  if (!kind.empty()) {
    const auto it = table_headers().find(kind);
    if (it == table_headers().end()) throw ConfigError("report: unknown run kind '" + kind + "'");
    for (const auto& [name, h] : it->second) {
      names.push_back(name);
      headers[name] = h;
    }
  }
  json summary = {{"subcommand", kind}, {"runs", json::array()}, {"tables", names}};
  std::map<std::string, std::vector<std::vector<std::string>>> rows;
  for (std::size_t r = 0; r < manifests.size(); ++r) {
    const json& m = manifests[r];
    summary["runs"].push_back({{"dir", inputs[r]}, {"seed", m.at("seed")}, {"config_hash", m.at("config_hash")}});
    for (const auto& name : names) {
      std::ifstream in(fs::path(inputs[r]) / name);
      if (!in) throw ConfigError("report: " + inputs[r] + " has no " + name);
      std::string line;
      std::getline(in, line);
      const auto h = split_csv_line(line);
      if (h != headers[name]) {
        std::set<std::string> a(h.begin(), h.end()), b(headers[name].begin(), headers[name].end());
        std::string diff;
        for (const auto& c : a)
          if (!b.count(c)) diff += " +" + c;
        for (const auto& c : b)
          if (!a.count(c)) diff += " -" + c;
        if (diff.empty()) diff = " (column order)";
        throw ConfigError("report: schema mismatch in " + inputs[r] + "/" + name + ":" + diff);
      }
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row{inputs[r], m.at("seed").dump(), m.at("config_hash").get<std::string>()};
        const auto cells = split_csv_line(line);
        row.insert(row.end(), cells.begin(), cells.end());
        rows[name].push_back(std::move(row));
      }
    }
  }
  if (names.empty()) {
    names.push_back("merged.csv");
    headers["merged.csv"] = {};
  }
  for (const auto& name : names) {
    std::vector<std::string> h = prov;
    h.insert(h.end(), headers[name].begin(), headers[name].end());
    ctx.tables.push_back(name);
    Csv csv(ctx.file(name), h);
    for (const auto& row : rows[name]) csv.row(std::vector<Cell>(row.begin(), row.end()));
  }
  ctx.write_json("report.json", summary);
}

// ------------------------------------------------------------- registry

std::vector<Param> with_common(std::vector<Param> p) {
  p.push_back({"seed", Kind::integer, 0, "random seed"});
  p.push_back({"threads", Kind::integer, 0, "worker threads (0: PAM_THREADS or all cores)"});
  return p;
}

Param potential_param() { return {"potential", Kind::object, default_potential(), "potential spec: JSON text or file"}; }

std::vector<Command> commands() {
  const json default_eps = json::array({0.5, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-4});
  return {
      {"solve",
       "evolve the PAM from u0 and write snapshots",
       with_common({potential_param(),
                    {"d", Kind::integer, 1, "dimension"},
                    {"R", Kind::integer, 0, "box radius (0: from kappa and t)"},
                    {"kappa", Kind::real, 1.0, "diffusion constant"},
                    {"t", Kind::real, 1.0, "final time"},
                    {"snapshots", Kind::reals, json::array(), "extra snapshot times"},
                    {"stepper", Kind::text, "split", "split or explicit"},
                    {"dt", Kind::real, 0.01, "largest time step"},
                    {"boundary", Kind::text, "dirichlet", "dirichlet or periodic"},
                    {"u0", Kind::text, "delta", "initial datum: delta or one"}}),
       cmd_solve},
      {"moments",
       "ensemble moment Lyapunov table",
       with_common({potential_param(),
                    {"d", Kind::integer, 1, "dimension"},
                    {"R", Kind::integer, 0, "box radius (0: from kappa and t)"},
                    {"kappa", Kind::real, 1.0, "diffusion constant"},
                    {"t", Kind::reals, json::array({1.0, 2.0, 3.0, 4.0}), "times"},
                    {"p", Kind::reals, json::array({1.0, 2.0}), "moment orders"},
                    {"n", Kind::integer, 100, "realizations"},
                    {"bootstrap", Kind::integer, 200, "bootstrap resamples"},
                    {"dt", Kind::real, 0.01, "largest time step"}}),
       cmd_moments},
      {"eigen",
       "principal eigenpair of kappa Delta + V",
       with_common({potential_param(),
                    {"field", Kind::text, "", "potential snapshot file (else sampled)"},
                    {"d", Kind::integer, 1, "dimension"},
                    {"R", Kind::integer, 8, "box radius"},
                    {"boundary", Kind::text, "dirichlet", "dirichlet or periodic"},
                    {"kappa", Kind::real, 1.0, "diffusion constant"},
                    {"method", Kind::text, "auto", "auto, krylov, power or dense"},
                    {"tol", Kind::real, 1e-10, "relative residual tolerance"}}),
       cmd_eigen},
      {"mu",
       "top of the spectrum of Delta + r delta_0",
       with_common({{"d", Kind::integer, 1, "dimension"},
                    {"r", Kind::reals, json::array({1.0}), "coupling values"},
                    {"method", Kind::text, "resolvent", "resolvent, box or both"},
                    {"agreement_tol", Kind::real, 1e-4, "tolerance between methods"}}),
       cmd_mu},
      {"variational",
       "characteristic variational constants and optimal shapes",
       with_common({{"d", Kind::integer, 1, "dimension"},
                    {"kappa", Kind::real, 1.0, "diffusion constant"},
                    {"rho", Kind::real, 1.0, "tail parameter (inf allowed)"},
                    {"R", Kind::integer, 10, "box radius"},
                    {"which", Kind::text, "chitilde", "chi, chitilde or shapes"},
                    {"eps", Kind::reals, default_eps, "mass-radius levels for shapes"},
                    {"boundary_tol", Kind::real, 1e-8, "largest boundary mass"}}),
       cmd_variational},
      {"scaling",
       "annealed and quenched scale functions",
       with_common({{"eta", Kind::text, "power:0", "power:<g>, linear:<c>, tlogt, t/logt, double-exponential, trap"},
                    {"d", Kind::integer, 1, "dimension"},
                    {"t", Kind::reals, json::array({1e3, 1e4, 1e5, 1e6}), "times"}}),
       cmd_scaling},
      {"islands",
       "relevant islands of a solve run",
       with_common({{"run", Kind::text, "", "solve output directory"},
                    {"eps", Kind::real, 0.01, "uncaptured mass fraction"},
                    {"R", Kind::integer, 5, "shape comparison radius"},
                    {"shapes_R", Kind::integer, 12, "box radius for the optimal shapes"},
                    {"delta_min", Kind::real, -1.0, "island separation (<0: t^0.9)"},
                    {"kmax", Kind::integer, 20, "largest number of islands"}}),
       cmd_islands},
      {"check annealed",
       "annealed moment asymptotics table",
       with_common({potential_param(),
                    {"d", Kind::integer, 1, "dimension"},
                    {"kappa", Kind::real, 1.0, "diffusion constant"},
                    {"p", Kind::real, 1.0, "moment order"},
                    {"t", Kind::reals, json::array({1.0, 2.0, 3.0, 4.0}), "times"},
                    {"n", Kind::integer, 200, "realizations"},
                    {"R", Kind::integer, 0, "box radius (0: from kappa and t)"},
                    {"chi", Kind::real, "nan", "variational constant (nan: computed)"},
                    {"var_R", Kind::integer, 12, "box radius of the variational problem"},
                    {"bootstrap", Kind::integer, 200, "bootstrap resamples"},
                    {"dt", Kind::real, 0.01, "largest time step"}}),
       cmd_check_annealed},
      {"check quenched",
       "quenched total-mass asymptotics table",
       with_common({potential_param(),
                    {"d", Kind::integer, 1, "dimension"},
                    {"kappa", Kind::real, 1.0, "diffusion constant"},
                    {"t", Kind::reals, json::array({4.0, 8.0, 16.0, 32.0}), "times"},
                    {"seeds", Kind::integer, 1, "number of consecutive seeds"},
                    {"chi_tilde", Kind::real, "nan", "variational constant (nan: computed)"},
                    {"var_R", Kind::integer, 12, "box radius of the variational problem"},
                    {"boundary_tol", Kind::real, 0.5, "largest mass fraction on the box boundary"},
                    {"dt", Kind::real, 0.01, "largest time step"}}),
       cmd_check_quenched},
      {"check correlation",
       "spatial correlation profile",
       with_common({potential_param(),
                    {"d", Kind::integer, 1, "dimension"},
                    {"kappa", Kind::real, 1.0, "diffusion constant"},
                    {"t", Kind::real, 2.0, "time"},
                    {"x", Kind::integers, json::array({0, 1, 2, 3}), "offsets along the first axis"},
                    {"n", Kind::integer, 200, "realizations"},
                    {"R", Kind::integer, 0, "box radius (0: from kappa and t)"},
                    {"var_R", Kind::integer, 12, "box radius of the limit profile"},
                    {"bootstrap", Kind::integer, 200, "bootstrap resamples"},
                    {"dt", Kind::real, 0.01, "largest time step"}}),
       cmd_check_correlation},
      {"catalytic",
       "catalytic PAM moments and predictions",
       with_common({{"d", Kind::integer, 1, "dimension"},
                    {"nu", Kind::real, 1.0, "catalyst density"},
                    {"gamma", Kind::real, 1.0, "coupling"},
                    {"rho", Kind::real, 1.0, "catalyst diffusion constant"},
                    {"kappa", Kind::real, 1.0, "reactant diffusion constant"},
                    {"p", Kind::integer, 1, "moment order"},
                    {"t", Kind::reals, json::array({0.5, 1.0, 2.0}), "times"},
                    {"L", Kind::integer, 10, "torus radius (side 2L+1)"},
                    {"n", Kind::integer, 200, "catalyst realizations"},
                    {"paths", Kind::integer, 2000, "path bundles"},
                    {"dt", Kind::real, 0.01, "time step"},
                    {"death_rate", Kind::real, "nan", "centering (nan: nu gamma)"},
                    {"polaron", Kind::real, "nan", "polaron constant for d = 3"}}),
       cmd_catalytic},
      {"report",
       "merge the tables of several runs",
       with_common({{"inputs", Kind::texts, json::array(), "run directories"},
                    {"kind", Kind::text, "", "run kind (needed for an empty set)"}}),
       cmd_report},
  };
}

int code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config:
      return kConfigError;
    case ErrorKind::numeric:
      return kNumericError;
    case ErrorKind::inconclusive:
      return kInconclusive;
  }
  return kNumericError;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"parabolic Anderson model laboratory", "pam"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PAM_VERSION);

  struct Slot {
    Command cmd;
    CLI::App* app = nullptr;
    std::map<std::string, std::vector<std::string>> raw;
    std::string config;
    std::string out;
  };
  std::vector<Command> cmds = commands();
  std::vector<std::unique_ptr<Slot>> slots;
  CLI::App* check = app.add_subcommand("check", "asymptotic checks: annealed, quenched, correlation");
  check->require_subcommand(1);
  for (auto& c : cmds) {
    auto slot = std::make_unique<Slot>();
    slot->cmd = c;
    const bool nested = c.name.rfind("check ", 0) == 0;
    CLI::App* sub = nested ? check->add_subcommand(c.name.substr(6), c.help) : app.add_subcommand(c.name, c.help);
    sub->add_option("--config", slot->config, "JSON config file");
    sub->add_option("--out", slot->out, "output directory");
    for (const auto& p : slot->cmd.params) {
      auto* opt = sub->add_option("--" + p.name, slot->raw[p.name], p.help);
      if (p.kind == Kind::reals || p.kind == Kind::integers || p.kind == Kind::texts)
        opt->delimiter(',');
      else
        opt->expected(1);
    }
    slot->app = sub;
    slots.push_back(std::move(slot));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  Slot* chosen = nullptr;
  for (auto& s : slots)
    if (s->app->parsed()) chosen = s.get();
  if (!chosen) return kConfigError;

  Context ctx;
  ctx.command = chosen->cmd.name;
  std::string hash = "unhashed";
  try {
    json cfg = json::object();
    for (const auto& p : chosen->cmd.params) cfg[p.name] = coerce(p, p.def);
    if (!chosen->config.empty()) {
      const json file = read_object(chosen->config, "config");
      std::vector<std::string> unknown;
      for (auto it = file.begin(); it != file.end(); ++it) {
        const auto p = std::find_if(chosen->cmd.params.begin(), chosen->cmd.params.end(),
                                    [&](const Param& q) { return q.name == it.key(); });
        if (p == chosen->cmd.params.end()) {
          unknown.push_back(it.key());
          continue;
        }
        cfg[p->name] = coerce(*p, it.value());
      }
      if (!unknown.empty()) {
        std::string list;
        for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError("unknown config keys: " + list);
      }
    }
    for (const auto& p : chosen->cmd.params) {
      const auto& raw = chosen->raw[p.name];
      if (!raw.empty()) cfg[p.name] = coerce_cli(p, raw);
    }
    if (cfg.contains("potential")) PotentialSpec::from_json(cfg["potential"].dump());
    ctx.cfg = cfg;
    hash = hex64(fnv1a(cfg.dump()));

    std::string dir = chosen->out;
    if (dir.empty()) {
      dir = "pam-" + ctx.command;
      std::replace(dir.begin(), dir.end(), ' ', '-');
    }
    ctx.out = dir;
    fs::create_directories(ctx.out);

    if (std::getenv("PAM_THREADS") == nullptr && ctx.integer("threads") > 0)
      set_default_threads(ctx.integer("threads"));

    {
      std::ofstream f(ctx.out / "config.json");
      f << cfg.dump(2) << '\n';
    }
    const auto t0 = std::chrono::steady_clock::now();
    chosen->cmd.body(ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest = {{"tool", "pam"},
                     {"version", PAM_VERSION},
                     {"subcommand", ctx.command},
                     {"config_hash", hash},
                     {"seed", ctx.seed()},
                     {"wall_time_s", wall},
                     {"tables", ctx.tables},
                     {"files", ctx.files}};
    std::ofstream f(ctx.out / "manifest.json");
    f << manifest.dump(2) << '\n';
  } catch (const Error& e) {
    std::cerr << "pam " << ctx.command << " [config " << hash << "]: " << e.what() << '\n';
    return code_for(e);
  } catch (const json::exception& e) {
    std::cerr << "pam " << ctx.command << " [config " << hash << "]: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "pam " << ctx.command << ": " << e.what() << '\n';
    return kConfigError;
  }
  if (ctx.inconclusive) {
    std::cerr << "pam " << ctx.command << ": diagnostic inconclusive (low effective sample size)\n";
    return kInconclusive;
  }
  return kOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pam::cli
