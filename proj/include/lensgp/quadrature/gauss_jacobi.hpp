#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

#include "lensgp/errors.hpp"

namespace lensgp::quad {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Jacobi rule for the weight (1 - t)^alpha (1 + t)^beta on [-1, 1],
/// from the Jacobi matrix eigenproblem (Golub-Welsch).
inline GaussRule gauss_jacobi(std::size_t n, double alpha, double beta) {
  if (n == 0 || alpha <= -1.0 || beta <= -1.0)
    throw HypothesisError("quadrature", "Gauss-Jacobi needs n > 0 and exponents > -1");
  const double ab = alpha + beta;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double s = 2.0 * k + ab;
    const auto i = static_cast<Eigen::Index>(k);
    J(i, i) = k == 0 ? (beta - alpha) / (ab + 2.0) : (beta * beta - alpha * alpha) / (s * (s + 2.0));
    if (k + 1 < n) {
      const double m = k + 1.0, t = 2.0 * m + ab;
      const double b2 = 4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (t * t * (t + 1.0) * (t - 1.0));
      J(i, i + 1) = J(i + 1, i) = std::sqrt(b2);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) + std::lgamma(beta + 1.0) -
                              std::lgamma(ab + 2.0));
  GaussRule r;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double v = es.eigenvectors()(0, i);
    r.nodes.push_back(es.eigenvalues()(i));
    r.weights.push_back(mu0 * v * v);
  }
  return r;
}

/// Integral of |x - s|^{-e} g(x) over the panel between s and s + w (w may be
/// negative), for smooth g.
template <class G>
double jacobi_panel(G&& g, double s, double w, double e, std::size_t n = 40) {
  const GaussRule r = gauss_jacobi(n, 0.0, -e);
  const double h = 0.5 * std::abs(w);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += r.weights[k] * g(s + 0.5 * w * (1.0 + r.nodes[k]));
  return std::pow(h, 1.0 - e) * sum;
}

}  // namespace lensgp::quad
