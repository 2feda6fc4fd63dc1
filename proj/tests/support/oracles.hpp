#pragma once

// Dense reference constructions shared by the unit and acceptance tests.
// They rebuild operators from lattice coordinates instead of the library's
// neighbour tables.

#include <cmath>
#include <cstdlib>
#include <vector>

#include <Eigen/Dense>

#include "pam/lattice.hpp"

namespace oracle {

inline bool adjacent(const pam::Box& box, const pam::Point& a, const pam::Point& b) {
  int l1 = 0;
  for (int k = 0; k < box.dim(); ++k) {
    int diff = std::abs(a[k] - b[k]);
    if (box.boundary() == pam::BoundaryMode::periodic) diff = std::min(diff, box.side() - diff);
    l1 += diff;
  }
  return l1 == 1;
}

// Laplacian stencil matrix on the whole box.
inline Eigen::MatrixXd laplacian_matrix(const pam::Box& box) {
  const auto n = static_cast<Eigen::Index>(box.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    L(i, i) = -2.0 * box.dim();
    const auto pi = box.offset(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (adjacent(box, pi, box.offset(static_cast<std::size_t>(j)))) L(i, j) += 1.0;
    }
  }
  return L;
}

// kappa Delta + V restricted to {V > -inf}; sites lists the kept indices.
inline Eigen::MatrixXd operator_matrix(const pam::Field& V, double kappa, std::vector<std::size_t>* sites = nullptr) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < V.size(); ++i)
    if (V[i] != pam::kNegInf) keep.push_back(i);
  const Eigen::MatrixXd L = laplacian_matrix(V.box());
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd A(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      A(a, b) = kappa * L(static_cast<Eigen::Index>(keep[a]), static_cast<Eigen::Index>(keep[b]));
  for (Eigen::Index a = 0; a < m; ++a) A(a, a) += V[keep[a]];
  if (sites) *sites = keep;
  return A;
}

inline double top_eigenvalue(const pam::Field& V, double kappa) {
  const Eigen::MatrixXd A = operator_matrix(V, kappa);
  if (A.rows() == 0) return pam::kNegInf;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// exp(t (kappa Delta + V)) u0 by dense eigendecomposition.
inline std::vector<double> propagate(const pam::Field& V, double kappa, double t, const std::vector<double>& u0) {
  std::vector<std::size_t> keep;
  const Eigen::MatrixXd A = operator_matrix(V, kappa, &keep);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  Eigen::VectorXd x(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) x(static_cast<Eigen::Index>(a)) = u0[keep[a]];
  const Eigen::VectorXd ex = (es.eigenvalues().array() * t).exp();
  const Eigen::VectorXd y = es.eigenvectors() * (ex.asDiagonal() * (es.eigenvectors().transpose() * x));
  std::vector<double> out(V.size(), 0.0);
  for (std::size_t a = 0; a < keep.size(); ++a) out[keep[a]] = y(static_cast<Eigen::Index>(a));
  return out;
}

}  // namespace oracle
