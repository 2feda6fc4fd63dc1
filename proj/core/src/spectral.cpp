#include "pam/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "pam/error.hpp"

namespace pam {

namespace {

// kappa Delta + V on one connected component, in component-local indices.
struct LocalOperator {
  std::size_t n = 0;
  int slots = 2;
  double kappa = 1.0;
  std::vector<std::int32_t> nbr;
  std::vector<double> diag;

  void apply(const double* x, double* y) const {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const std::int32_t* nb = &nbr[i * static_cast<std::size_t>(slots)];
      for (int q = 0; q < slots; ++q)
        if (nb[q] >= 0) acc += x[nb[q]];
      y[i] = kappa * acc + diag[i] * x[i];
    }
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      a(ii, ii) = diag[i];
      for (int q = 0; q < slots; ++q) {
        const std::int32_t j = nbr[i * static_cast<std::size_t>(slots) + static_cast<std::size_t>(q)];
        if (j >= 0) a(ii, j) += kappa;
      }
    }
    return a;
  }
};

struct LocalResult {
  double lambda = 0.0;
  Eigen::VectorXd vec;
  double residual = 0.0;
  std::size_t iterations = 0;
};

LocalOperator build_operator(const Domain& dom, std::span<const double> values,
                             const std::vector<std::size_t>& comp, double kappa) {
  LocalOperator op;
  op.n = comp.size();
  op.slots = 2 * dom.dim();
  op.kappa = kappa;
  std::vector<std::int64_t> where(dom.size(), -1);
  for (std::size_t j = 0; j < comp.size(); ++j) where[comp[j]] = static_cast<std::int64_t>(j);
  op.nbr.resize(op.n * static_cast<std::size_t>(op.slots));
  op.diag.resize(op.n);
  for (std::size_t j = 0; j < comp.size(); ++j) {
    const std::size_t li = comp[j];
    op.diag[j] = values[li] - op.slots * kappa;
    for (int q = 0; q < op.slots; ++q) {
      const std::int32_t nb = dom.nbr[li * static_cast<std::size_t>(op.slots) + static_cast<std::size_t>(q)];
      op.nbr[j * static_cast<std::size_t>(op.slots) + static_cast<std::size_t>(q)] =
          nb < 0 ? -1 : static_cast<std::int32_t>(where[static_cast<std::size_t>(nb)]);
    }
  }
  return op;
}

double residual_norm(const LocalOperator& op, const Eigen::VectorXd& x, double lambda) {
  Eigen::VectorXd y(x.size());
  op.apply(x.data(), y.data());
  return (y - lambda * x).norm();
}

LocalResult solve_dense(const LocalOperator& op) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense());
  if (es.info() != Eigen::Success) throw NumericError("dense eigensolver failed");
  const auto last = static_cast<Eigen::Index>(op.n) - 1;
  LocalResult r;
  r.lambda = es.eigenvalues()(last);
  r.vec = es.eigenvectors().col(last);
  r.iterations = 1;
  return r;
}

// Restarted Lanczos with full reorthogonalization: Rayleigh-Ritz on a
// Krylov basis of at most m vectors, restarted from the top Ritz vectors
// plus the residual of the leading one.
LocalResult solve_krylov(const LocalOperator& op, Eigen::VectorXd start, double tol,
                         std::size_t max_matvecs) {
  const auto n = static_cast<Eigen::Index>(op.n);
  const Eigen::Index m = std::min<Eigen::Index>(n, 48);
  const Eigen::Index keep = std::min<Eigen::Index>(8, std::max<Eigen::Index>(1, m - 2));
  Eigen::MatrixXd V(n, m), AV(n, m);
  Eigen::Index cols = 0;
  std::size_t matvecs = 0;
  std::vector<double> history;

  auto add = [&](Eigen::VectorXd w) {
    const double before = w.norm();
    if (before == 0.0) return false;
    for (int pass = 0; pass < 2 && cols > 0; ++pass) {
      const Eigen::VectorXd c = V.leftCols(cols).transpose() * w;
      w -= V.leftCols(cols) * c;
    }
    const double after = w.norm();
    if (after <= 1e-12 * before) return false;
    V.col(cols) = w / after;
    op.apply(V.col(cols).data(), AV.col(cols).data());
    ++matvecs;
    ++cols;
    return true;
  };

  if (!add(std::move(start))) add(Eigen::VectorXd::Ones(n));
  LocalResult res;
  for (;;) {
    while (cols < m) {
      if (!add(AV.col(cols - 1))) break;
    }
    Eigen::MatrixXd T = V.leftCols(cols).transpose() * AV.leftCols(cols);
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const Eigen::Index top = cols - 1;
    const double theta = es.eigenvalues()(top);
    const Eigen::VectorXd y = es.eigenvectors().col(top);
    Eigen::VectorXd x = V.leftCols(cols) * y;
    const Eigen::VectorXd r = AV.leftCols(cols) * y - theta * x;
    const double rn = r.norm();
    history.push_back(rn);
    if (rn <= tol * (std::abs(theta) + 1.0) || cols == n) {
      res.lambda = theta;
      res.vec = x / x.norm();
      res.residual = rn;
      res.iterations = matvecs;
      return res;
    }
    if (matvecs >= max_matvecs) {
      std::ostringstream os;
      os << "Krylov eigensolver did not converge in " << matvecs << " operator applications (residual "
         << rn << ")";
      throw ConvergenceError(os.str(), history);
    }
    const Eigen::Index k = std::min(keep, cols - 1);
    const Eigen::MatrixXd Y = es.eigenvectors().rightCols(k);
    const Eigen::MatrixXd newV = V.leftCols(cols) * Y;
    const Eigen::MatrixXd newAV = AV.leftCols(cols) * Y;
    V.leftCols(k) = newV;
    AV.leftCols(k) = newAV;
    cols = k;
    if (!add(r)) {
      res.lambda = theta;
      res.vec = x / x.norm();
      res.residual = rn;
      res.iterations = matvecs;
      return res;
    }
  }
}

LocalResult solve_power(const LocalOperator& op, Eigen::VectorXd x, double tol,
                        std::size_t max_iterations) {
  double dmin = 0.0;
  for (double v : op.diag) dmin = std::min(dmin, v);
  // kappa Delta + V >= min V - 4d kappa, so adding the shift makes the
  // iteration matrix nonnegative definite.
  const double shift = op.slots * op.kappa - dmin;
  Eigen::VectorXd y(x.size());
  x /= x.norm();
  std::vector<double> history;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    op.apply(x.data(), y.data());
    const double lambda = x.dot(y);
    const double rn = (y - lambda * x).norm();
    if (it % 1000 == 0) history.push_back(rn);
    if (rn <= tol * (std::abs(lambda) + 1.0)) return {lambda, x, rn, it};
    y += shift * x;
    x = y / y.norm();
  }
  throw ConvergenceError("power iteration did not converge", history);
}

}  // namespace

std::string_view to_string(EigenMethod m) {
  switch (m) {
    case EigenMethod::automatic: return "automatic";
    case EigenMethod::krylov: return "krylov";
    case EigenMethod::power: return "power";
    case EigenMethod::dense: return "dense";
  }
  return "?";
}

EigenMethod parse_eigen_method(std::string_view text) {
  if (text == "automatic" || text == "auto") return EigenMethod::automatic;
  if (text == "krylov") return EigenMethod::krylov;
  if (text == "power") return EigenMethod::power;
  if (text == "dense") return EigenMethod::dense;
  throw ConfigError("unknown eigen method '" + std::string(text) + "'");
}

SpectralResult principal_eigen(const Field& V, double kappa, const EigenOptions& opts) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be >= 0");
  const Restriction restr = restrict_domain(V);
  const Domain& dom = restr.domain;
  SpectralResult out;
  out.method = opts.method;
  if (dom.empty()) {
    out.empty_domain = true;
    out.eigenfunction = Field(V.box(), 0.0);
    return out;
  }
  const auto comps = connected_components(dom);
  std::vector<double> best_local(dom.size(), 0.0);
  bool have = false;
  for (const auto& comp : comps) {
    const LocalOperator op = build_operator(dom, restr.values, comp, kappa);
    Eigen::VectorXd start = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.n));
    if (opts.warm_start && opts.warm_start->box().same_geometry(V.box())) {
      for (std::size_t j = 0; j < op.n; ++j) {
        const double w = std::abs((*opts.warm_start)[dom.sites[comp[j]]]);
        start(static_cast<Eigen::Index>(j)) = w + 1e-8;
      }
    }
    EigenMethod method = opts.method;
    if (method == EigenMethod::automatic) method = op.n <= 200 ? EigenMethod::dense : EigenMethod::krylov;
    LocalResult lr;
    switch (method) {
      case EigenMethod::dense:
        lr = solve_dense(op);
        break;
      case EigenMethod::power:
        lr = solve_power(op, start, opts.tol, opts.max_iterations);
        break;
      default:
        try {
          lr = solve_krylov(op, start, opts.tol, opts.max_iterations);
        } catch (const ConvergenceError&) {
          if (opts.method != EigenMethod::automatic || op.n >= 4000) throw;
          lr = solve_dense(op);
          method = EigenMethod::dense;
        }
    }
    const double tie = 1e-10 * (std::abs(out.lambda) + 1.0);
    if (have && std::abs(lr.lambda - out.lambda) <= tie) {
      out.degenerate = true;
      continue;
    }
    if (have && lr.lambda < out.lambda) continue;
    have = true;
    out.lambda = lr.lambda;
    out.iterations = lr.iterations;
    out.method = method;
    Eigen::VectorXd v = lr.vec;
    if (v.sum() < 0.0) v = -v;
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = std::max(0.0, v(j));
    v /= v.norm();
    out.residual = residual_norm(op, v, lr.lambda);
    std::fill(best_local.begin(), best_local.end(), 0.0);
    for (std::size_t j = 0; j < op.n; ++j) best_local[comp[j]] = v(static_cast<Eigen::Index>(j));
    out.degenerate = false;
  }
  out.eigenfunction = embed(dom, best_local, 0.0);
  return out;
}

double rayleigh_quotient(const Field& V, double kappa, const Field& f) {
  if (!V.box().same_geometry(f.box())) throw ConfigError("rayleigh_quotient: box mismatch");
  const double nrm = norm2(f.values());
  if (std::abs(nrm - 1.0) > 1e-8) throw ConfigError("rayleigh_quotient: f must have unit l2 norm");
  for (std::size_t i = 0; i < V.size(); ++i) {
    if (V[i] == kNegInf && f[i] != 0.0)
      throw ConfigError("rayleigh_quotient: f is not supported in {V > -inf} at " +
                        format_point(V.box().point(i)));
  }
  const Restriction restr = restrict_domain(V);
  std::vector<double> x(restr.domain.size()), y(restr.domain.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = f[restr.domain.sites[j]];
  apply_operator(restr.domain, kappa, restr.values, x, y);
  return dot(x, y);
}

std::vector<double> dense_spectrum(const Field& V, double kappa) {
  const Restriction restr = restrict_domain(V);
  if (restr.domain.empty()) return {};
  std::vector<std::size_t> all(restr.domain.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  const LocalOperator op = build_operator(restr.domain, restr.values, all, kappa);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense(), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

}  // namespace pam
