#pragma once

// Closed-form complex Gaussian evolutions, one factor per axis:
//
//   psi(y) = N exp(-A (y - q)^2 / 2 + i p (y - q) + i S),   N0 = (Re A0 / pi)^{1/4}.
//
// harmonic-trap  (i u_t = -u_yy/2 + w^2 y^2 u/2):
//   A = w (A0 cos wt + i w sin wt) / (w cos wt + i A0 sin wt)
//   N = N0 (cos wt + i (A0/w) sin wt)^{-1/2}
//   q = q0 cos wt + (p0/w) sin wt,   p = p0 cos wt - w q0 sin wt
//   S = (p0^2 - w^2 q0^2) sin(2wt) / (4w) + q0 p0 (cos 2wt - 1) / 2
//
// variable-coefficient  (i u_t + s a(t) u_yy = 0, with P = s int_0^t a):
//   psi = N0 (1 + 2 i P A0)^{-1/2} exp(-A'(y - q0 - 2 P p0)^2 / 2 + i p0 (y - q0) - i P p0^2),
//   A' = A0 / (1 + 2 i P A0).
// The free flow is the case a = 1/2, s = 1.

#include <cmath>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/spectral/grid.hpp"

namespace lensgp {

struct GaussianAxis {
  cplx A0{1.0, 0.0};  // inverse squared width (Re A0 > 0)
  double q0 = 0.0;    // centre
  double p0 = 0.0;    // mean momentum
};

enum class GaussianKind { free, harmonic_trap, variable_coefficient };

inline GaussianKind parse_gaussian_kind(const std::string& s) {
  if (s == "free") return GaussianKind::free;
  if (s == "harmonic-trap") return GaussianKind::harmonic_trap;
  if (s == "variable-coefficient-diagonal" || s == "variable-coefficient") return GaussianKind::variable_coefficient;
  throw StructuralError("spectral", "unsupported gaussian oracle kind '" + s + "'");
}

struct GaussianParams {
  std::vector<GaussianAxis> axes;
  std::vector<double> omega;     // harmonic-trap: per-axis frequency sqrt(eta)
  std::vector<double> integral;  // variable-coefficient: per-axis s_l int_0^t a_l
};

/// Value of one axis factor at y after evolution for time t.
inline cplx gaussian_factor(GaussianKind kind, const GaussianAxis& g, double y, double t, double omega,
                            double integral) {
  if (!(g.A0.real() > 0.0)) throw StructuralError("spectral", "gaussian width needs Re A0 > 0");
  const double n0 = std::pow(g.A0.real() / std::numbers::pi, 0.25);
  const cplx I{0.0, 1.0};
  switch (kind) {
    case GaussianKind::free:
    case GaussianKind::variable_coefficient: {
      const double P = kind == GaussianKind::free ? 0.5 * t : integral;
      const cplx den = 1.0 + 2.0 * I * P * g.A0;
      const cplx A = g.A0 / den;
      const double c = y - g.q0 - 2.0 * P * g.p0;
      return n0 / std::sqrt(den) * std::exp(-0.5 * A * c * c + I * (g.p0 * (y - g.q0) - P * g.p0 * g.p0));
    }
    case GaussianKind::harmonic_trap: {
      const double w = omega;
      if (!(w > 0.0)) throw StructuralError("spectral", "harmonic oracle needs omega > 0");
      const double c = std::cos(w * t), s = std::sin(w * t);
      const cplx A = w * (g.A0 * c + I * w * s) / (w * c + I * g.A0 * s);
      const cplx N = n0 / std::sqrt(c + I * (g.A0 / w) * s);
      const double q = g.q0 * c + g.p0 / w * s;
      const double p = g.p0 * c - w * g.q0 * s;
      const double S = (g.p0 * g.p0 - w * w * g.q0 * g.q0) * std::sin(2 * w * t) / (4 * w) +
                       g.q0 * g.p0 * (std::cos(2 * w * t) - 1.0) / 2.0;
      const double d = y - q;
      return N * std::exp(-0.5 * A * d * d + I * (p * d + S));
    }
  }
  throw StructuralError("spectral", "unsupported gaussian oracle kind");
}

/// Samples the product Gaussian at time t on the grid.
inline WaveField gaussian_oracle(GaussianKind kind, const GaussianParams& prm, const GridSpec& grid, double t) {
  const std::size_t r = grid.rank();
  if (prm.axes.size() != r) throw StructuralError("spectral", "gaussian oracle: one axis parameter set per grid axis");
  if (kind == GaussianKind::harmonic_trap && prm.omega.size() != r)
    throw StructuralError("spectral", "gaussian oracle: harmonic kind needs one omega per axis");
  if (kind == GaussianKind::variable_coefficient && prm.integral.size() != r)
    throw StructuralError("spectral", "gaussian oracle: variable-coefficient kind needs one integral per axis");
  std::vector<std::vector<cplx>> fac(r);
  for (std::size_t d = 0; d < r; ++d) {
    const auto& a = grid.axis(d);
    fac[d].resize(a.points);
    const double w = kind == GaussianKind::harmonic_trap ? prm.omega[d] : 0.0;
    const double P = kind == GaussianKind::variable_coefficient ? prm.integral[d] : 0.0;
    for (std::size_t j = 0; j < a.points; ++j) fac[d][j] = gaussian_factor(kind, prm.axes[d], a.x(j), t, w, P);
  }
  WaveField f(grid, t, "gaussian");
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < f.size(); ++flat) {
    cplx v{1.0, 0.0};
    for (std::size_t d = 0; d < r; ++d) v *= fac[d][idx[d]];
    f.data[flat] = v;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < grid.axis(d).points) break;
      idx[d] = 0;
    }
  }
  return f;
}

/// Isotropic helper: same Gaussian on every axis.
inline GaussianParams isotropic_gaussian(std::size_t rank, GaussianAxis g = {}) {
  GaussianParams p;
  p.axes.assign(rank, g);
  return p;
}

}  // namespace lensgp
