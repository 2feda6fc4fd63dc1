#include "pam/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pam/error.hpp"

namespace pam {

DiffusionPropagator::DiffusionPropagator(const Domain& domain, double kappa)
    : domain_(&domain), kappa_(kappa) {
  if (!(kappa >= 0.0)) throw ConfigError("diffusion constant must be nonnegative");
}

void DiffusionPropagator::apply(std::span<double> x, double tau) const {
  const Domain& dom = *domain_;
  const std::size_t n = dom.size();
  if (x.size() != n) throw ConfigError("propagator: vector size does not match the domain");
  if (tau <= 0.0 || kappa_ == 0.0 || n == 0) return;
  const int slots = 2 * dom.dim();
  const double rate = static_cast<double>(slots) * kappa_;
  // Substeps with rate * h <= 4 keep the series short (about 30 terms).
  const auto substeps = static_cast<int>(std::ceil(rate * tau / 4.0));
  const double h = tau / substeps;
  const double decay = std::exp(-rate * h);
  std::vector<double> term(n), next(n), sum(n);
  for (int s = 0; s < substeps; ++s) {
    std::copy(x.begin(), x.end(), term.begin());
    std::copy(x.begin(), x.end(), sum.begin());
    double sum_max = *std::max_element(sum.begin(), sum.end());
    // Remaining tail after term k is bounded by term_k * (q/(k+1)) / (1 - q/(k+1)).
    for (int k = 1; k < 200; ++k) {
      const double c = kappa_ * h / k;
      double term_max = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const std::int32_t* nb = &dom.nbr[i * static_cast<std::size_t>(slots)];
        for (int q = 0; q < slots; ++q)
          if (nb[q] >= 0) acc += term[static_cast<std::size_t>(nb[q])];
        next[i] = c * acc;
        term_max = std::max(term_max, next[i]);
      }
      term.swap(next);
      for (std::size_t i = 0; i < n; ++i) sum[i] += term[i];
      sum_max = std::max(sum_max, term_max);
      const double ratio = rate * h / (k + 1);
      if (ratio < 0.5 && term_max * ratio / (1.0 - ratio) <= 1e-17 * sum_max) break;
      if (term_max == 0.0) break;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = decay * sum[i];
  }
}

}  // namespace pam
