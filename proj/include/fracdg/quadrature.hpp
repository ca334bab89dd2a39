#pragma once

// 1D Gauss quadrature on [-1, 1]: Legendre rules for smooth integrands and
// Jacobi rules whose weight (1-x)^a (1+x)^b absorbs endpoint singularities.
//
// Nodes and weights come from a Golub-Welsch eigen-solve of the symmetric
// tridiagonal matrix of the Jacobi three-term recurrence, stable up to the
// supported point count without tabulated data.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "fracdg/common.hpp"

namespace fracdg {

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int size() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

/// Total mass of the Jacobi weight: \int_{-1}^{1} (1-x)^a (1+x)^b dx.
inline double jacobi_weight_mass(double a, double b) {
  return std::pow(2.0, a + b + 1.0) *
         std::exp(std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                  std::lgamma(a + b + 2.0));
}

}  // namespace detail

/// Gauss-Jacobi rule with weight (1-x)^a (1+x)^b, a,b > -1.
/// Exact for polynomials of degree <= 2n-1 against the weight.
inline QuadRule gauss_jacobi(int n, double a, double b) {
  if (n < 1 || n > 64)
    throw ConfigError("gauss_jacobi: point count " + std::to_string(n) +
                      " outside supported range [1, 64]");
  if (a <= -1.0 || b <= -1.0)
    throw ConfigError("gauss_jacobi: exponents must be > -1 (got a=" +
                      std::to_string(a) + ", b=" + std::to_string(b) + ")");

  const double mu0 = detail::jacobi_weight_mass(a, b);

  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);

  if (n == 1) {
    rule.nodes[0] = (b - a) / (a + b + 2.0);
    rule.weights[0] = mu0;
    return rule;
  }

  // Recurrence coefficients of the monic Jacobi polynomials.
  Eigen::VectorXd diag(n), sub(n - 1);
  diag[0] = (b - a) / (a + b + 2.0);
  for (int k = 1; k < n; ++k) {
    const double s = 2.0 * k + a + b;
    diag[k] = (b * b - a * a) / (s * (s + 2.0));
    double beta;
    if (k == 1) {
      // The generic formula has a removable 0/0 at a+b = -1; the factor
      // (1+a+b) cancels between numerator and denominator.
      beta = 4.0 * (1.0 + a) * (1.0 + b) /
             ((2.0 + a + b) * (2.0 + a + b) * (3.0 + a + b));
    } else {
      beta = 4.0 * k * (k + a) * (k + b) * (k + a + b) /
             (s * s * (s + 1.0) * (s - 1.0));
    }
    sub[k - 1] = std::sqrt(beta);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()[i];
    const double q0 = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * q0 * q0;
  }

  if (a == b) {
    // Symmetric weight: enforce the exact node/weight symmetry about 0.
    for (int i = 0; i < n / 2; ++i) {
      const int j = n - 1 - i;
      const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
      const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
      rule.nodes[i] = -x;
      rule.nodes[j] = x;
      rule.weights[i] = w;
      rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  }
  return rule;
}

/// Gauss-Legendre rule: exact for polynomials of degree <= 2n-1.
inline QuadRule gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

}  // namespace fracdg
