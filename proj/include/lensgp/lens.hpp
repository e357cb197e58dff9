#pragma once

// Generalized lens transform.
//
// For trajectories (alpha_l, beta_l) and t = upsilon_1(tau),
//   u(tau, y) = prod_l exp(i (beta_l'/beta_l) y_l^2 / 2) |beta_l|^{-1/2} v(t, y_1/beta_1, ..., y_n/beta_n)
// carries solutions of i v_t + sum_l a_l(t) d_l^2 v = 0 with
//   a_l(t) = beta_1^2 / (2 beta_l^2) evaluated at tau = upsilon_1^{-1}(t)
// to solutions of the trap equation. Kernels gamma(y; y') transform with the
// chirp on y and the conjugate chirp on y'.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/metaplectic.hpp"
#include "lensgp/spectral/operators.hpp"
#include "lensgp/spectral/solvers.hpp"
#include "lensgp/traps/trajectory.hpp"

namespace lensgp {

struct LensMap {
  double tau = 0.0;
  double t = 0.0;  // upsilon_1(tau)
  std::vector<double> alpha, beta, beta_dot;

  std::size_t dim() const { return beta.size(); }
  double chirp(std::size_t l) const { return beta_dot[l] / beta[l]; }
};

inline LensMap make_lens_map(const TrajectoryPair& tr, double tau) {
  LensMap m;
  m.tau = tau;
  for (std::size_t l = 0; l < tr.dim(); ++l) {
    const auto s = tr.at(l, tau);
    if (s.beta == 0.0)
      throw SingularLensError("lens", "beta_" + std::to_string(l + 1) + " vanishes at tau = " + std::to_string(tau));
    m.alpha.push_back(s.alpha);
    m.beta.push_back(s.beta);
    m.beta_dot.push_back(s.beta_dot);
  }
  m.t = m.alpha[0] / m.beta[0];
  return m;
}

/// v(t, .) on the lens side -> u(tau, .) on the trap side.
inline WaveField lens_forward_field(WaveField v, const LensMap& m) {
  if (v.grid.rank() != m.dim()) throw StructuralError("lens", "field rank must match the lens dimension");
  for (std::size_t l = 0; l < m.dim(); ++l) {
    dilate_axis(v, l, m.beta[l]);
    chirp_axis(v, l, m.chirp(l));
  }
  v.time = m.tau;
  return v;
}

/// u(tau, .) on the trap side -> v(t, .) on the lens side.
inline WaveField lens_inverse_field(WaveField u, const LensMap& m) {
  if (u.grid.rank() != m.dim()) throw StructuralError("lens", "field rank must match the lens dimension");
  for (std::size_t l = 0; l < m.dim(); ++l) {
    chirp_axis(u, l, -m.chirp(l));
    dilate_axis(u, l, 1.0 / m.beta[l]);
  }
  u.time = m.t;
  return u;
}

/// One-particle density kernel gamma(y; y') stored on grid x grid.
struct DensityKernel {
  WaveField field;
  std::size_t n = 0;  // spatial dimension
  bool physical = false;
  bool normalized = false;

  DensityKernel() = default;
  DensityKernel(const GridSpec& g, double time = 0.0) : field(GridSpec::concat(g, g), time, "kernel"), n(g.rank()) {}

  GridSpec base() const { return field.grid.slice(0, n); }
  double time() const { return field.time; }
  double norm() const { return field.norm(); }

  cplx trace() const {
    const std::size_t m = base().size();
    cplx s{};
    for (std::size_t i = 0; i < m; ++i) s += field.data[i * m + i];
    return s * base().cell_volume();
  }

  /// max |gamma(y; y') - conj gamma(y'; y)| relative to max |gamma|.
  double hermitian_defect() const {
    const std::size_t m = base().size();
    double d = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        d = std::max(d, std::abs(field.data[i * m + j] - std::conj(field.data[j * m + i])));
        mx = std::max(mx, std::abs(field.data[i * m + j]));
      }
    return mx > 0.0 ? d / mx : 0.0;
  }
};

/// gamma(y; y') = phi(y) conj(psi(y')).
inline DensityKernel rank_one_kernel(const WaveField& phi, const WaveField& psi) {
  require_same_grid(phi.grid, psi.grid, "rank_one_kernel");
  DensityKernel k(phi.grid, phi.time);
  const std::size_t m = phi.size();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) k.field.data[i * m + j] = phi.data[i] * std::conj(psi.data[j]);
  k.physical = &phi == &psi;
  return k;
}

inline DensityKernel rank_one_kernel(const WaveField& phi) {
  DensityKernel k = rank_one_kernel(phi, phi);
  k.physical = true;
  return k;
}

/// T_l^{-1}: trap-side kernel at tau -> lens-side kernel at t.
inline DensityKernel lens_kernel_inverse(DensityKernel g, const LensMap& m) {
  if (g.n != m.dim()) throw StructuralError("lens", "kernel dimension must match the lens dimension");
  const std::size_t n = g.n;
  for (std::size_t l = 0; l < n; ++l) {
    chirp_axis(g.field, l, -m.chirp(l));
    dilate_axis(g.field, l, 1.0 / m.beta[l]);
    chirp_axis(g.field, n + l, m.chirp(l));
    dilate_axis(g.field, n + l, 1.0 / m.beta[l]);
  }
  g.field.time = m.t;
  return g;
}

/// T_l: lens-side kernel at t -> trap-side kernel at tau.
inline DensityKernel lens_kernel_forward(DensityKernel g, const LensMap& m) {
  if (g.n != m.dim()) throw StructuralError("lens", "kernel dimension must match the lens dimension");
  const std::size_t n = g.n;
  for (std::size_t l = 0; l < n; ++l) {
    dilate_axis(g.field, l, m.beta[l]);
    chirp_axis(g.field, l, m.chirp(l));
    dilate_axis(g.field, n + l, m.beta[l]);
    chirp_axis(g.field, n + l, -m.chirp(l));
  }
  g.field.time = m.tau;
  return g;
}

/// Convenience overload: evaluate the lens map at tau first.
inline DensityKernel lens_kernel_inverse(const DensityKernel& g, const TrajectoryPair& tr, double tau) {
  return lens_kernel_inverse(g, make_lens_map(tr, tau));
}

// ---- L_x(t) coefficients ----

struct LxCoefficients {
  double t = 0.0;
  double tau = 0.0;  // upsilon_1^{-1}(t), clamped to [-T0, T0]
  std::vector<double> a;
  double c0 = 0.0;
};

namespace detail {

inline double lx_tau(const TrajectoryPair& tr, double t) {
  const double edge = tr.upsilon(0, tr.T0());
  if (t >= edge) return tr.T0();
  if (t <= -edge) return -tr.T0();
  return tr.upsilon_inverse(0, t);
}

inline std::vector<double> lx_values(const TrajectoryPair& tr, double tau) {
  std::vector<double> a(tr.dim());
  const double b1 = tr.beta(0, tau);
  a[0] = 0.5;
  for (std::size_t l = 1; l < tr.dim(); ++l) {
    const double bl = tr.beta(l, tau);
    a[l] = 0.5 * b1 * b1 / (bl * bl);
  }
  return a;
}

}  // namespace detail

/// Certified floor: min over l and over the lens window of a_l.
inline double lx_floor(const TrajectoryPair& tr) {
  double c0 = 0.5;
  const auto n = static_cast<std::ptrdiff_t>(tr.steps());
  for (std::ptrdiff_t j = 0; j <= n && static_cast<double>(j) * tr.dt() <= tr.T0() * (1 + 1e-12); ++j) {
    const double b1 = tr.sample(0, j).beta;
    for (std::size_t l = 1; l < tr.dim(); ++l) {
      const double bl = tr.sample(l, j).beta;
      c0 = std::min(c0, 0.5 * b1 * b1 / (bl * bl));
    }
  }
  return c0;
}

/// a_1 = 1/2 and a_l = beta_1^2 / (2 beta_l^2) at upsilon_1^{-1}(t), frozen at
/// their window-edge values for |t| beyond upsilon_1(T0).
inline LxCoefficients build_Lx_coefficients(const TrajectoryPair& tr, double t) {
  LxCoefficients c;
  c.t = t;
  c.tau = detail::lx_tau(tr, t);
  c.a = detail::lx_values(tr, c.tau);
  c.c0 = lx_floor(tr);
  return c;
}

/// Coefficient schedule for the lens-side linear solver. Breakpoints sit at
/// the images of the switch knots and at the window edges.
inline CoefficientSchedule lx_schedule(const TrajectoryPair& tr) {
  CoefficientSchedule s;
  s.c0 = lx_floor(tr);
  const TrajectoryPair* p = &tr;
  for (std::size_t l = 0; l < tr.dim(); ++l) {
    if (l == 0) {
      s.a.push_back([](double) { return 0.5; });
      s.primitive.push_back([](double t) { return 0.5 * t; });
      continue;
    }
    s.a.push_back([p, l](double t) { return detail::lx_values(*p, detail::lx_tau(*p, t))[l]; });
  }
  const double edge = tr.upsilon(0, tr.T0());
  s.breakpoints = {-edge, edge};
  for (const auto& ax : tr.spec().axes)
    for (double k : ax.times)
      if (k > 0.0 && k < tr.T0()) {
        const double u = tr.upsilon(0, k);
        s.breakpoints.push_back(u);
        s.breakpoints.push_back(-u);
      }
  return s;
}

/// Lens-side cubic coupling for a trap-side coupling b0: the amplitude scales
/// by prod_l beta_l^{-1/2} and time by beta_1^{-2}, so the coefficient becomes
/// b0 beta_1^2 / prod_l beta_l at upsilon_1^{-1}(t). It equals b0 for
/// isotropic traps in two dimensions.
inline std::function<double(double)> lens_nls_coupling(const TrajectoryPair& tr, double b0) {
  const TrajectoryPair* p = &tr;
  return [p, b0](double t) {
    const double tau = detail::lx_tau(*p, t);
    double prod = 1.0;
    for (std::size_t l = 0; l < p->dim(); ++l) prod *= p->beta(l, tau);
    const double b1 = p->beta(0, tau);
    return b0 * b1 * b1 / prod;
  };
}

/// Closed form of int_0^t a_l: (1/2) upsilon_l(upsilon_1^{-1}(t)) inside the
/// window, continued linearly with the frozen edge value outside.
inline double lx_primitive_exact(const TrajectoryPair& tr, std::size_t l, double t) {
  const double edge = tr.upsilon(0, tr.T0());
  const double tc = std::clamp(t, -edge, edge);
  const double tau = detail::lx_tau(tr, tc);
  double A = 0.5 * tr.upsilon(l, tau);
  if (t != tc) A += detail::lx_values(tr, t > 0 ? tr.T0() : -tr.T0())[l] * (t - tc);
  return A;
}

// ---- R operator and the identities around it ----

/// Components (P_{y_i}(tau) (x) P_{y'_j}(-tau)) gamma for i, j < n, row-major in (i, j).
/// P_y(tau) = i beta d_y + beta' y; at -tau the beta' term flips sign.
inline std::vector<WaveField> apply_R_operator(const DensityKernel& g, const TrajectoryPair& tr, double tau) {
  const std::size_t n = g.n;
  if (tr.dim() != n) throw StructuralError("lens", "kernel dimension must match the trap dimension");
  std::vector<WaveField> comps;
  for (std::size_t i = 0; i < n; ++i) {
    const auto si = tr.at(i, tau);
    WaveField a = linear_momentum_axis(g.field, i, si.beta, si.beta_dot);
    for (std::size_t j = 0; j < n; ++j) {
      const auto sj = tr.at(j, tau);
      comps.push_back(linear_momentum_axis(a, n + j, sj.beta, -sj.beta_dot));
    }
  }
  return comps;
}

inline double component_norm(const std::vector<WaveField>& c) {
  double s = 0.0;
  for (const auto& f : c) s += f.norm_squared();
  return std::sqrt(s);
}

inline double component_distance(const std::vector<WaveField>& a, const std::vector<WaveField>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).norm_squared();
  return std::sqrt(s);
}

/// Relative residual of R_tau gamma = T_l[(i d_{x_i})(i d_{x'_j}) T_l^{-1} gamma].
inline double naturality_residual(const DensityKernel& g, const TrajectoryPair& tr, double tau) {
  const LensMap m = make_lens_map(tr, tau);
  const auto lhs = apply_R_operator(g, tr, tau);
  const DensityKernel lensed = lens_kernel_inverse(g, m);
  const std::size_t n = g.n;
  std::vector<WaveField> rhs;
  for (std::size_t i = 0; i < n; ++i) {
    WaveField a = linear_momentum_axis(lensed.field, i, 1.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      DensityKernel c = lensed;
      c.field = linear_momentum_axis(a, n + j, 1.0, 0.0);
      rhs.push_back(lens_kernel_forward(c, m).field);
    }
  }
  const double den = component_norm(lhs);
  const double num = component_distance(lhs, rhs);
  return den > 0.0 ? num / den : num;
}

using KernelProvider = std::function<DensityKernel(double tau)>;

/// H_y gamma with H = -Lap + sum_l eta_l(tau) y_l^2 acting on the y block
/// (prime = false) or the y' block (prime = true).
inline WaveField trap_hamiltonian_block(const DensityKernel& g, const TrajectoryPair& tr, double tau, bool prime) {
  const std::size_t n = g.n;
  std::vector<double> w(2 * n, 0.0);
  for (std::size_t l = 0; l < n; ++l) w[(prime ? n : 0) + l] = -1.0;
  WaveField out = weighted_laplacian(g.field, w);
  const std::size_t off = prime ? n : 0;
  for (std::size_t l = 0; l < n; ++l) {
    std::vector<std::vector<cplx>> fac(2 * n);
    const auto& a = g.field.grid.axis(off + l);
    fac[off + l].resize(a.points);
    const double e = tr.eta(l, tau);
    for (std::size_t j = 0; j < a.points; ++j) fac[off + l][j] = e * a.x(j) * a.x(j);
    WaveField v = g.field;
    apply_separable(v, fac);
    out += v;
  }
  return out;
}

struct IntertwineReport {
  double residual = 0.0;
  double lhs_norm = 0.0;
  double rhs_norm = 0.0;
};

/// Compares (i d_t + sum_l a_l (d_{x_l}^2 - d_{x'_l}^2)) T_l^{-1} gamma with
/// beta_1^2 T_l^{-1}[(i d_tau - H_y / 2 + H_{y'} / 2) gamma], both at tau.
/// Time derivatives use 4th-order central differences with step h.
inline IntertwineReport intertwine_residual(const KernelProvider& gamma, const TrajectoryPair& tr, double tau,
                                            double h = 1e-3) {
  const DensityKernel g0 = gamma(tau);
  const std::size_t n = g0.n;
  const LensMap m = make_lens_map(tr, tau);
  const double t = m.t;

  // Lens-side derivative in t: u(s) = T_l^{-1} gamma(upsilon_1^{-1}(s)).
  auto lensed_at = [&](double s) {
    const double ts = tr.upsilon_inverse(0, s);
    return lens_kernel_inverse(gamma(ts), make_lens_map(tr, ts)).field;
  };
  const WaveField up1 = lensed_at(t + h), um1 = lensed_at(t - h), up2 = lensed_at(t + 2 * h), um2 = lensed_at(t - 2 * h);
  WaveField ut = (8.0 / (12.0 * h)) * (up1 - um1);
  ut -= (1.0 / (12.0 * h)) * (up2 - um2);
  const WaveField u = lens_kernel_inverse(g0, m).field;
  const auto a = build_Lx_coefficients(tr, t).a;
  std::vector<double> w(2 * n);
  for (std::size_t l = 0; l < n; ++l) {
    w[l] = a[l];
    w[n + l] = -a[l];
  }
  const WaveField Lu = weighted_laplacian(u, w);
  WaveField iut = cplx{0.0, 1.0} * ut;
  WaveField lhs = iut + Lu;

  // Trap side.
  const WaveField gp1 = gamma(tau + h).field, gm1 = gamma(tau - h).field;
  const WaveField gp2 = gamma(tau + 2 * h).field, gm2 = gamma(tau - 2 * h).field;
  WaveField gt = (8.0 / (12.0 * h)) * (gp1 - gm1);
  gt -= (1.0 / (12.0 * h)) * (gp2 - gm2);
  WaveField bracket = cplx{0.0, 1.0} * gt;
  bracket -= 0.5 * trap_hamiltonian_block(g0, tr, tau, false);
  bracket += 0.5 * trap_hamiltonian_block(g0, tr, tau, true);
  DensityKernel bk = g0;
  bk.field = bracket;
  const double b1 = m.beta[0];
  WaveField rhs = (b1 * b1) * lens_kernel_inverse(bk, m).field;

  IntertwineReport r;
  r.lhs_norm = lhs.norm();
  r.rhs_norm = rhs.norm();
  const double den = iut.norm() + Lu.norm();
  const double num = (lhs - rhs).norm();
  r.residual = den > 0.0 ? num / den : num;
  return r;
}

}  // namespace lensgp
