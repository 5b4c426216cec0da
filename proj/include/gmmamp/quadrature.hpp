#pragma once

// Standard-normal helpers and Gauss-Hermite quadrature for the
// one-dimensional Gaussian expectations used by the theory modules.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "gmmamp/errors.hpp"

namespace gmmamp {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * 0.39894228040143267794;
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

// Nodes and weights for E[f(Z)], Z standard normal: sum_i w_i f(x_i).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Golub-Welsch on the probabilists' Hermite recurrence: the Jacobi matrix is
// tridiagonal with zero diagonal and off-diagonal sqrt(k). Eigenvalues are
// the nodes; squared first eigenvector components are the weights.
inline const GaussHermiteRule& gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order must be positive");
  static std::map<int, GaussHermiteRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success)
    throw NumericalError("gauss_hermite: eigensolver failed");

  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] = eig.eigenvalues()(k);
    const double v0 = eig.eigenvectors()(0, k);
    rule.weights[k] = v0 * v0;
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

// P(c + Z0 > max_{k=1..r-1} Z_k) for independent standard normals: the
// chance that the coordinate carrying a mean shift c wins an argmax over r
// exchangeable coordinates. Equals 1/r at c = 0 and Phi(c/sqrt(2)) at r = 2.
inline double argmax_correct_rate(double c, int r) {
  if (r < 2) throw std::invalid_argument("argmax_correct_rate: r must be >= 2");
  if (r == 2) return normal_cdf(c * 0.70710678118654752440);
  // Condition on the largest rival u: density (r-1) phi(u) Phi(u)^{r-2}.
  const GaussHermiteRule& rule = gauss_hermite(160);
  double acc = 0.0;
  for (size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = rule.nodes[i];
    acc += rule.weights[i] * (r - 1) * std::pow(normal_cdf(u), r - 2) *
           normal_cdf(c - u);
  }
  return acc;
}

}  // namespace gmmamp
