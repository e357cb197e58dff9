#pragma once

// Sp(2,R) calculus for the 1d trap propagator. With
//   B(tau) = [[beta, -alpha], [-beta', alpha']]
// and beta != 0, B factors as lower * diag * upper and the propagator of
//   i u_tau = -u_yy / 2 + eta(tau) y^2 u / 2
// is chirp(beta'/beta) o dilation(beta) o free(alpha/beta).

#include <cmath>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/spectral/fft.hpp"
#include "lensgp/spectral/grid.hpp"
#include "lensgp/spectral/operators.hpp"
#include "lensgp/traps/trajectory.hpp"

namespace lensgp {

struct SpMatrix2 {
  double m11 = 1, m12 = 0, m21 = 0, m22 = 1;

  double det() const { return m11 * m22 - m12 * m21; }
  SpMatrix2 operator*(const SpMatrix2& o) const {
    return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22, m21 * o.m11 + m22 * o.m21,
            m21 * o.m12 + m22 * o.m22};
  }
  /// Inverse of a unit-determinant matrix.
  SpMatrix2 inverse() const { return {m22, -m12, -m21, m11}; }
  double max_abs_diff(const SpMatrix2& o) const {
    return std::max({std::abs(m11 - o.m11), std::abs(m12 - o.m12), std::abs(m21 - o.m21), std::abs(m22 - o.m22)});
  }
};

struct LduFactors {
  double chirp = 0.0;  // c = beta'/beta
  double scale = 1.0;  // beta
  double time = 0.0;   // t = alpha/beta

  /// [[1,0],[-c,1]] * diag(beta, 1/beta) * [[1,-t],[0,1]].
  SpMatrix2 reconstruct() const {
    return {scale, -scale * time, -chirp * scale, chirp * scale * time + 1.0 / scale};
  }
};

inline SpMatrix2 b_matrix(const TrajectoryPair& tr, std::size_t axis, double tau) {
  const auto s = tr.at(axis, tau);
  return {s.beta, -s.alpha, -s.beta_dot, s.alpha_dot};
}

inline LduFactors ldu_decompose(const SpMatrix2& m) {
  if (m.m11 == 0.0 || !std::isfinite(m.m11))
    throw SingularLensError("metaplectic", "LDU factorization needs a nonzero top-left entry");
  return {-m.m21 / m.m11, m.m11, -m.m12 / m.m11};
}

// ---- axis-wise building blocks (work on any rank) ----

/// Multiply by exp(i c y^2 / 2) along one axis.
inline void chirp_axis(WaveField& f, std::size_t axis, double c) {
  if (c == 0.0) return;
  std::vector<std::vector<cplx>> fac(f.grid.rank());
  const auto& a = f.grid.axis(axis);
  fac[axis].resize(a.points);
  for (std::size_t j = 0; j < a.points; ++j) fac[axis][j] = std::polar(1.0, 0.5 * c * a.x(j) * a.x(j));
  apply_separable(f, fac);
}

/// f(y) -> |beta|^{-1/2} f(y / beta) along one axis, by trigonometric
/// interpolation of the samples (the field is taken to vanish outside the box).
inline void dilate_axis(WaveField& f, std::size_t axis, double beta) {
  if (beta == 0.0) throw SingularLensError("metaplectic", "dilation by beta = 0");
  const double ab = std::abs(beta);
  if (ab < 0.1 - 1e-12 || ab > 10.0 + 1e-12)
    throw AccuracyError("metaplectic", "dilation |beta| = " + std::to_string(ab) + " outside [0.1, 10]");
  if (beta == 1.0) return;
  const auto& a = f.grid.axis(axis);
  std::vector<double> targets(a.points);
  for (std::size_t j = 0; j < a.points; ++j) targets[j] = a.x(j) / beta;
  resample_axis(f, axis, targets);
  std::vector<std::vector<cplx>> fac(f.grid.rank());
  fac[axis].assign(a.points, cplx{1.0 / std::sqrt(ab), 0.0});
  apply_separable(f, fac);
}

/// exp(i t d^2/dy^2 / 2) along the listed axes, per-axis times.
inline void free_flow_axes(WaveField& f, const std::vector<double>& times) {
  if (times.size() != f.grid.rank()) throw StructuralError("metaplectic", "one free time per axis");
  bool any = false;
  for (double t : times) any = any || t != 0.0;
  if (!any) return;
  std::vector<std::vector<cplx>> fac(f.grid.rank());
  for (std::size_t d = 0; d < f.grid.rank(); ++d) {
    if (times[d] == 0.0) continue;
    const auto& a = f.grid.axis(d);
    fac[d].resize(a.points);
    for (std::size_t j = 0; j < a.points; ++j) fac[d][j] = std::polar(1.0, -0.5 * a.k(j) * a.k(j) * times[d]);
  }
  apply_fourier_separable(f, fac);
}

inline void free_flow_axis(WaveField& f, std::size_t axis, double t) {
  std::vector<double> times(f.grid.rank(), 0.0);
  times.at(axis) = t;
  free_flow_axes(f, times);
}

inline void require_1d(const WaveField& f, const char* op) {
  if (f.grid.rank() != 1) throw StructuralError("metaplectic", std::string(op) + " expects a 1d field");
}

inline WaveField apply_chirp(WaveField f, double c) {
  require_1d(f, "apply_chirp");
  chirp_axis(f, 0, c);
  return f;
}

inline WaveField apply_dilation(WaveField f, double beta) {
  require_1d(f, "apply_dilation");
  dilate_axis(f, 0, beta);
  return f;
}

inline WaveField apply_free_propagator(WaveField f, double t) {
  require_1d(f, "apply_free_propagator");
  free_flow_axis(f, 0, t);
  f.time += t;
  return f;
}

/// mu(M) f along one axis through the LDU factors of M.
inline void metaplectic_axis(WaveField& f, std::size_t axis, const SpMatrix2& m) {
  const LduFactors d = ldu_decompose(m);
  free_flow_axis(f, axis, d.time);
  dilate_axis(f, axis, d.scale);
  chirp_axis(f, axis, d.chirp);
}

inline WaveField apply_metaplectic(WaveField f, const SpMatrix2& m) {
  require_1d(f, "apply_metaplectic");
  metaplectic_axis(f, 0, m);
  return f;
}

/// Solution at tau of the 1d trap equation with u(0) = f.
inline WaveField propagate_trap_1d(WaveField f, const TrajectoryPair& tr, std::size_t axis, double tau) {
  require_1d(f, "propagate_trap_1d");
  if (std::abs(tau) > tr.T0() * (1 + 1e-12))
    throw RangeError("metaplectic", "tau outside [-T0, T0]");
  metaplectic_axis(f, 0, b_matrix(tr, axis, tau));
  f.time = tau;
  return f;
}

/// Tensor-product trap propagator: axis d of the field uses trajectory axis d.
inline WaveField propagate_trap(WaveField f, const TrajectoryPair& tr, double tau) {
  if (f.grid.rank() != tr.dim()) throw StructuralError("metaplectic", "field rank must match the trap dimension");
  if (std::abs(tau) > tr.T0() * (1 + 1e-12))
    throw RangeError("metaplectic", "tau outside [-T0, T0]");
  std::vector<LduFactors> fac;
  std::vector<double> times;
  for (std::size_t d = 0; d < tr.dim(); ++d) {
    fac.push_back(ldu_decompose(b_matrix(tr, d, tau)));
    times.push_back(fac.back().time);
  }
  free_flow_axes(f, times);
  for (std::size_t d = 0; d < tr.dim(); ++d) {
    dilate_axis(f, d, fac[d].scale);
    chirp_axis(f, d, fac[d].chirp);
  }
  f.time = tau;
  return f;
}

/// (i p d/dy + q y) f along one axis.
inline WaveField linear_momentum_axis(const WaveField& f, std::size_t axis, double p, double q) {
  WaveField d = derivative(f, axis);
  const auto& a = f.grid.axis(axis);
  const std::size_t stride = f.grid.stride(axis);
  WaveField out(f.grid, f.time, f.tag);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double y = a.x((i / stride) % a.points);
    out.data[i] = cplx{0.0, p} * d.data[i] + q * y * f.data[i];
  }
  return out;
}

/// P_y(tau) f = i beta f' + beta' y f.
inline WaveField momentum_apply(const WaveField& f, const TrajectoryPair& tr, std::size_t axis, double tau,
                                std::size_t field_axis = 0) {
  const auto s = tr.at(axis, tau);
  return linear_momentum_axis(f, field_axis, s.beta, s.beta_dot);
}

/// X_y(tau) f = i alpha f' + alpha' y f.
inline WaveField position_apply(const WaveField& f, const TrajectoryPair& tr, std::size_t axis, double tau,
                                std::size_t field_axis = 0) {
  const auto s = tr.at(axis, tau);
  return linear_momentum_axis(f, field_axis, s.alpha, s.alpha_dot);
}

}  // namespace lensgp
