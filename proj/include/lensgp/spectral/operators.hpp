#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lensgp/spectral/fft.hpp"
#include "lensgp/spectral/grid.hpp"

namespace lensgp {

/// Multiplies every sample by prod_d factors[d][i_d]. An empty factor vector
/// stands for the constant 1 on that axis. Works for real-space factors and,
/// applied between fft::forward/backward, for separable Fourier multipliers.
inline void apply_separable(std::span<cplx> data, const GridSpec& g,
                            const std::vector<std::vector<cplx>>& factors) {
  const std::size_t r = g.rank();
  if (factors.size() != r) throw StructuralError("spectral", "apply_separable: one factor per axis");
  for (std::size_t d = 0; d < r; ++d)
    if (!factors[d].empty() && factors[d].size() != g.axis(d).points)
      throw StructuralError("spectral", "apply_separable: factor length does not match axis");
  // The last axis is contiguous; the outer multi-index advances once per line.
  std::vector<std::size_t> idx(r, 0);
  const std::size_t last = g.axis(r - 1).points;
  for (std::size_t base = 0; base < g.size(); base += last) {
    cplx p{1.0, 0.0};
    for (std::size_t d = 0; d + 1 < r; ++d)
      if (!factors[d].empty()) p *= factors[d][idx[d]];
    if (factors[r - 1].empty()) {
      for (std::size_t j = 0; j < last; ++j) data[base + j] *= p;
    } else {
      for (std::size_t j = 0; j < last; ++j) data[base + j] *= p * factors[r - 1][j];
    }
    for (std::size_t d = r - 1; d-- > 0;) {
      if (++idx[d] < g.axis(d).points) break;
      idx[d] = 0;
    }
  }
}

inline void apply_separable(WaveField& f, const std::vector<std::vector<cplx>>& factors) {
  apply_separable(f.span(), f.grid, factors);
}

/// Per-axis wavenumber table.
inline std::vector<double> wavenumbers(const Axis& a) {
  std::vector<double> k(a.points);
  for (std::size_t j = 0; j < a.points; ++j) k[j] = a.k(j);
  return k;
}

inline std::vector<double> coordinates(const Axis& a) {
  std::vector<double> x(a.points);
  for (std::size_t j = 0; j < a.points; ++j) x[j] = a.x(j);
  return x;
}

/// Applies a Fourier multiplier built from one factor per axis.
inline void apply_fourier_separable(WaveField& f, const std::vector<std::vector<cplx>>& factors) {
  fft::forward(f);
  apply_separable(f, factors);
  fft::backward(f);
}

/// Spectral derivative d/dx_d. The Nyquist bin of the odd multiplier is zeroed.
inline WaveField derivative(const WaveField& f, std::size_t axis) {
  WaveField out = f;
  std::vector<std::vector<cplx>> fac(f.grid.rank());
  const auto& a = f.grid.axis(axis);
  fac[axis].resize(a.points);
  for (std::size_t j = 0; j < a.points; ++j)
    fac[axis][j] = a.is_nyquist(j) ? cplx{} : cplx{0.0, a.k(j)};
  apply_fourier_separable(out, fac);
  return out;
}

/// Spectral second derivative along one axis.
inline WaveField second_derivative(const WaveField& f, std::size_t axis) {
  WaveField out = f;
  std::vector<std::vector<cplx>> fac(f.grid.rank());
  const auto& a = f.grid.axis(axis);
  fac[axis].resize(a.points);
  for (std::size_t j = 0; j < a.points; ++j) fac[axis][j] = -a.k(j) * a.k(j);
  apply_fourier_separable(out, fac);
  return out;
}

/// sum_d weights[d] * d^2/dx_d^2 f, one transform pair.
inline WaveField weighted_laplacian(const WaveField& f, const std::vector<double>& weights) {
  if (weights.size() != f.grid.rank()) throw StructuralError("spectral", "weighted_laplacian: one weight per axis");
  WaveField out = f;
  fft::forward(out);
  const std::size_t r = f.grid.rank();
  std::vector<std::vector<double>> k2(r);
  for (std::size_t d = 0; d < r; ++d) {
    auto k = wavenumbers(f.grid.axis(d));
    k2[d].resize(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) k2[d][j] = weights[d] * k[j] * k[j];
  }
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    double s = 0.0;
    for (std::size_t d = 0; d < r; ++d) s += k2[d][idx[d]];
    out.data[flat] *= -s;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < f.grid.axis(d).points) break;
      idx[d] = 0;
    }
  }
  fft::backward(out);
  return out;
}

/// Applies fn to every line of samples running along `axis`. fn receives
/// (line_in, line_out) as contiguous buffers of length points(axis).
template <class Fn>
void for_each_line(std::span<cplx> data, const GridSpec& g, std::size_t axis, Fn&& fn) {
  const std::size_t m = g.axis(axis).points;
  const std::size_t stride = g.stride(axis);
  const std::size_t block = stride * m;
  std::vector<cplx> in(m), out(m);
  for (std::size_t outer = 0; outer < g.size(); outer += block) {
    for (std::size_t inner = 0; inner < stride; ++inner) {
      const std::size_t base = outer + inner;
      for (std::size_t j = 0; j < m; ++j) in[j] = data[base + j * stride];
      fn(std::span<const cplx>(in), std::span<cplx>(out));
      for (std::size_t j = 0; j < m; ++j) data[base + j * stride] = out[j];
    }
  }
}

/// Weights of the even-M trigonometric interpolant (Nyquist mode split as a
/// cosine): p(X) = sum_m w_m(X) f_m with w_m(X) = D(X - x_m),
/// D(u) = sin(pi M u / L) / (M tan(pi u / L)).
inline double dirichlet_kernel(double u, const Axis& a) {
  const double m = static_cast<double>(a.points);
  const double arg = std::numbers::pi * u / a.length;
  if (std::abs(arg) < 1e-15) return 1.0;
  return std::sin(m * arg) / (m * std::tan(arg));
}

/// Dense interpolation matrix (row-major, targets x rows) evaluating the
/// trigonometric interpolant at `targets`. Targets outside [-L/2, L/2) get a
/// zero row: the field is taken to vanish outside the box.
inline std::vector<double> interpolation_matrix(const Axis& a, std::span<const double> targets) {
  const std::size_t m = a.points;
  std::vector<double> w(targets.size() * m, 0.0);
  const double lo = -0.5 * a.length, hi = 0.5 * a.length;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double X = targets[i];
    if (!(X >= lo && X < hi)) continue;
    for (std::size_t j = 0; j < m; ++j) w[i * m + j] = dirichlet_kernel(X - a.x(j), a);
  }
  return w;
}

/// Replaces samples along `axis` by the interpolant evaluated at targets[j]
/// (one target per output grid point).
inline void resample_axis(WaveField& f, std::size_t axis, std::span<const double> targets) {
  const auto& a = f.grid.axis(axis);
  if (targets.size() != a.points) throw StructuralError("spectral", "resample_axis: one target per grid point");
  const auto w = interpolation_matrix(a, targets);
  const std::size_t m = a.points;
  for_each_line(f.span(), f.grid, axis, [&](std::span<const cplx> in, std::span<cplx> out) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = &w[i * m];
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        re += row[j] * in[j].real();
        im += row[j] * in[j].imag();
      }
      out[i] = {re, im};
    }
  });
}

/// Fraction of spectral mass in the outer 1/8 of the band on any axis.
inline double spectral_tail(const WaveField& f) {
  WaveField g = f;
  fft::forward(g);
  const std::size_t r = f.grid.rank();
  std::vector<std::vector<char>> outer(r);
  for (std::size_t d = 0; d < r; ++d) {
    const auto& a = f.grid.axis(d);
    outer[d].resize(a.points);
    for (std::size_t j = 0; j < a.points; ++j) outer[d][j] = std::abs(a.k(j)) > 0.875 * a.k_max();
  }
  double tail = 0.0, total = 0.0;
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    const double w = std::norm(g.data[flat]);
    total += w;
    bool o = false;
    for (std::size_t d = 0; d < r && !o; ++d) o = outer[d][idx[d]];
    if (o) tail += w;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < f.grid.axis(d).points) break;
      idx[d] = 0;
    }
  }
  return total > 0.0 ? tail / total : 0.0;
}

/// Fraction of L2 mass within `cells` grid cells of the box boundary.
inline double boundary_mass(const WaveField& f, std::size_t cells = 2) {
  const std::size_t r = f.grid.rank();
  std::vector<std::size_t> idx(r, 0);
  double edge = 0.0, total = 0.0;
  for (std::size_t flat = 0; flat < f.size(); ++flat) {
    const double w = std::norm(f.data[flat]);
    total += w;
    bool near = false;
    for (std::size_t d = 0; d < r && !near; ++d) {
      const std::size_t m = f.grid.axis(d).points;
      near = idx[d] < cells || idx[d] + cells >= m;
    }
    if (near) edge += w;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < f.grid.axis(d).points) break;
      idx[d] = 0;
    }
  }
  return total > 0.0 ? edge / total : 0.0;
}

}  // namespace lensgp
