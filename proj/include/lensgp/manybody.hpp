#pragma once

// Small-N bosonic dynamics
//
//   i psi_tau = sum_j h_j(tau) psi + (1/N) sum_{i<j} V_N(y_i - y_j) psi,
//   h_j = -(1/2) Lap_j + (1/2) sum_l eta_l(tau) y_{j,l}^2,
//   V_N(x) = N^{n beta} V(N^beta x),
//
// on the N*n dimensional product grid, plus marginal densities and the k = 1
// BBGKY residual. Particle j owns axes [j n, (j + 1) n); particle 1 varies
// slowest in memory.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/lens.hpp"
#include "lensgp/parallel.hpp"
#include "lensgp/quadrature/gauss_kronrod.hpp"
#include "lensgp/spectral/diagnostics.hpp"
#include "lensgp/spectral/fft.hpp"
#include "lensgp/spectral/grid.hpp"
#include "lensgp/spectral/operators.hpp"
#include "lensgp/spectral/solvers.hpp"
#include "lensgp/traps/switch.hpp"

namespace lensgp::manybody {

inline constexpr double default_memory_cap = 2.0 * 1024 * 1024 * 1024;

/// Radial base potential V(|x|) supported in |x| < radius, and its scaling.
struct InteractionSpec {
  std::function<double(double)> profile;
  double radius = 0.0;
  double beta = 0.2;
  std::size_t n = 1;
  double b0 = 0.0;  // int_{R^n} V
  std::string name;

  bool is_zero() const { return !profile || b0 == 0.0; }

  double scale(std::size_t N) const { return std::pow(static_cast<double>(N), beta); }

  /// V_N(x) with |x| = r.
  double scaled(double r, std::size_t N) const {
    if (is_zero()) return 0.0;
    const double s = scale(N);
    const double u = s * r;
    return u < radius ? std::pow(s, static_cast<double>(n)) * profile(u) : 0.0;
  }

  /// Support diameter of V_N.
  double support_diameter(std::size_t N) const { return 2.0 * radius / scale(N); }

  void check() const {
    if (n != 1 && n != 2) throw StructuralError("manybody", "interaction dimension must be 1 or 2");
    if (is_zero()) return;
    if (!(beta > 0.0 && beta < 0.75)) throw HypothesisError("manybody", "beta must lie in (0, 3/4)");
    if (!(radius > 0.0)) throw StructuralError("manybody", "potential support radius must be positive");
    for (int i = 0; i <= 400; ++i) {
      const double v = profile(radius * i / 400.0);
      if (!(v >= 0.0) || !std::isfinite(v)) throw HypothesisError("manybody", "potential must be finite and nonnegative");
    }
  }

  static InteractionSpec none(std::size_t n = 1) {
    InteractionSpec s;
    s.n = n;
    s.name = "none";
    return s;
  }

  /// c (1 - (r/w)^2)^3 on r < w with c fixed by int V = b0.
  static InteractionSpec bump(std::size_t n, double w, double b0 = 1.0, double beta = 0.2) {
    InteractionSpec s;
    s.n = n;
    s.radius = w;
    s.beta = beta;
    s.name = "bump";
    // int_{-w}^{w} (1 - x^2/w^2)^3 dx = 32 w / 35,  int_{|x|<w} ... d^2x = pi w^2 / 4
    const double unit = n == 1 ? 32.0 * w / 35.0 : std::numbers::pi * w * w / 4.0;
    const double c = b0 / unit;
    s.profile = [c, w](double r) {
      const double u = 1.0 - (r / w) * (r / w);
      return u > 0.0 ? c * u * u * u : 0.0;
    };
    s.b0 = s.integral();
    s.check();
    return s;
  }

  /// int_{R^n} V by adaptive quadrature of the radial profile.
  double integral() const {
    if (!profile) return 0.0;
    auto f = [&](double r) { return n == 1 ? 2.0 * profile(r) : 2.0 * std::numbers::pi * r * profile(r); };
    return quad::integrate(f, 0.0, radius).value;
  }
};

/// psi on (one-particle grid)^N.
struct ManyBodyState {
  WaveField psi;
  std::size_t N = 0;
  std::size_t n = 1;
  bool bosonic = true;

  double time() const { return psi.time; }
  GridSpec particle_grid() const { return psi.grid.slice(0, n); }
};

namespace detail {

inline std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

inline void check_shape(std::size_t N, std::size_t n) {
  if (n == 1 && (N < 1 || N > 4)) throw StructuralError("manybody", "the n = 1 analog supports 1 <= N <= 4");
  if (n == 2 && N != 2) throw StructuralError("manybody", "n = 2 supports N = 2 only");
  if (n != 1 && n != 2) throw StructuralError("manybody", "spatial dimension must be 1 or 2");
}

inline void check_capacity(double bytes, double cap, const std::string& what) {
  if (bytes > cap)
    throw CapacityError("manybody", what + " needs an estimated " + std::to_string(bytes / (1 << 20)) +
                                        " MiB, above the cap of " + std::to_string(cap / (1 << 20)) + " MiB");
}

/// Applies a particle permutation: out(y_1..y_N) = in(y_{perm[0]}..y_{perm[N-1]}).
inline WaveField permuted(const ManyBodyState& s, const std::vector<std::size_t>& perm) {
  const std::size_t P = detail::ipow(s.psi.grid.axis(0).points, s.n);
  WaveField out(s.psi.grid, s.psi.time);
  std::vector<std::size_t> idx(s.N, 0), stride(s.N, 1);
  for (std::size_t j = s.N - 1; j-- > 0;) stride[j] = stride[j + 1] * P;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t j = 0; j < s.N; ++j) src += idx[perm[j]] * stride[j];
    out.data[flat] = s.psi.data[src];
    for (std::size_t j = s.N; j-- > 0;) {
      if (++idx[j] < P) break;
      idx[j] = 0;
    }
  }
  return out;
}

}  // namespace detail

/// Factorized state prod_j phi0(y_j); phi0 is normalized first.
inline ManyBodyState factorized(const WaveField& phi0, std::size_t N, double cap = default_memory_cap) {
  const std::size_t n = phi0.grid.rank();
  detail::check_shape(N, n);
  for (const auto& a : phi0.grid.axes())
    if (!(a == phi0.grid.axis(0))) throw StructuralError("manybody", "one-particle grid must be isotropic");
  const double size = std::pow(static_cast<double>(phi0.size()), static_cast<double>(N));
  detail::check_capacity(16.0 * size, cap, "the factorized state");
  const double nrm = phi0.norm();
  if (!(nrm > 0.0)) throw RangeError("manybody", "phi0 vanishes");
  std::vector<Axis> axes;
  for (std::size_t j = 0; j < N; ++j) axes.insert(axes.end(), phi0.grid.axes().begin(), phi0.grid.axes().end());
  ManyBodyState s{WaveField(GridSpec(axes), phi0.time, "manybody"), N, n, true};
  const std::size_t P = phi0.size();
  std::vector<std::size_t> idx(N, 0);
  for (std::size_t flat = 0; flat < s.psi.size(); ++flat) {
    cplx v = 1.0;
    for (std::size_t j = 0; j < N; ++j) v *= phi0.data[idx[j]] / nrm;
    s.psi.data[flat] = v;
    for (std::size_t j = N; j-- > 0;) {
      if (++idx[j] < P) break;
      idx[j] = 0;
    }
  }
  return s;
}

/// max over transpositions (1 j) of ||psi - P psi|| / ||psi||.
inline double symmetry_defect(const ManyBodyState& s) {
  double d = 0.0;
  const double nrm = s.psi.norm();
  for (std::size_t j = 1; j < s.N; ++j) {
    std::vector<std::size_t> perm(s.N);
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[0], perm[j]);
    const WaveField q = detail::permuted(s, perm);
    double e = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) e += std::norm(s.psi.data[i] - q.data[i]);
    d = std::max(d, std::sqrt(e * s.psi.grid.cell_volume()) / nrm);
  }
  return d;
}

struct ManyBodyOptions {
  double dt = 0.0;  // 0: (spacing)^2 / 4
  double memory_cap = default_memory_cap;
  bool strict = false;
  double tail_limit = 1e-6;
  double escape_limit = 1e-8;
  bool keep_frames = true;
  std::size_t threads = 1;
  std::function<void(const ManyBodyState&)> observe;  // called at every sample
};

struct FrameSummary {
  double time = 0.0;
  double mass = 0.0;
  double energy_per_particle = 0.0;
  double symmetry_defect = 0.0;
  double tail = 0.0;
  double boundary = 0.0;
};

struct ManyBodyTrajectory {
  std::vector<ManyBodyState> frames;
  std::vector<FrameSummary> summary;
  std::vector<std::string> warnings;
  std::size_t steps = 0;
  double dt = 0.0;

  /// E(tau) / E(0) per sample, relative to the initial state.
  double initial_energy = 0.0;
};

namespace detail {

/// Pointwise potential of the N-body Hamiltonian: separable trap part plus the
/// scaled pair interaction, read from a table indexed by grid offsets.
class PairPotential {
public:
  PairPotential(const ManyBodyState& s, const InteractionSpec& inter) : N_(s.N), n_(s.n) {
    const Axis a = s.psi.grid.axis(0);
    M_ = a.points;
    y2_.resize(M_);
    for (std::size_t j = 0; j < M_; ++j) y2_[j] = a.x(j) * a.x(j);
    const double h = a.spacing();
    const std::size_t span = 2 * M_ - 1;
    table_.assign(n_ == 1 ? span : span * span, 0.0);
    const double pref = 1.0 / static_cast<double>(N_);
    for (std::size_t i = 0; i < span; ++i) {
      const double dx = (static_cast<double>(i) - static_cast<double>(M_ - 1)) * h;
      if (n_ == 1) {
        table_[i] = pref * inter.scaled(std::abs(dx), N_);
      } else {
        for (std::size_t k = 0; k < span; ++k) {
          const double dy = (static_cast<double>(k) - static_cast<double>(M_ - 1)) * h;
          table_[i * span + k] = pref * inter.scaled(std::hypot(dx, dy), N_);
        }
      }
    }
    interacting_ = !inter.is_zero();
  }

  /// Trap plus pair potential at the point with per-axis indices idx.
  double operator()(const std::vector<std::size_t>& idx, const std::vector<double>& eta) const {
    double v = 0.0;
    for (std::size_t d = 0; d < idx.size(); ++d) v += 0.5 * eta[d % n_] * y2_[idx[d]];
    if (!interacting_) return v;
    const std::size_t span = 2 * M_ - 1;
    for (std::size_t i = 0; i < N_; ++i)
      for (std::size_t j = i + 1; j < N_; ++j) {
        std::size_t t = idx[i * n_] + M_ - 1 - idx[j * n_];
        if (n_ == 2) t = t * span + (idx[i * n_ + 1] + M_ - 1 - idx[j * n_ + 1]);
        v += table_[t];
      }
    return v;
  }

  double pair_only(const std::vector<std::size_t>& idx) const {
    std::vector<double> zero(n_, 0.0);
    return (*this)(idx, zero);
  }

  std::size_t points() const { return M_; }

private:
  std::size_t N_, n_, M_ = 0;
  std::vector<double> y2_, table_;
  bool interacting_ = false;
};

/// exp(-i V h) on every sample; slabs along the leading axis run on `threads`.
inline void potential_phase(WaveField& u, const PairPotential& V, const std::vector<double>& eta, double h,
                            std::size_t threads) {
  const std::size_t r = u.grid.rank();
  const std::size_t M = V.points();
  const std::size_t slab = u.size() / M;
  parallel_for(M, threads, [&](std::size_t lead) {
    std::vector<std::size_t> idx(r, 0);
    idx[0] = lead;
    for (std::size_t off = 0; off < slab; ++off) {
      cplx& z = u.data[lead * slab + off];
      z *= std::polar(1.0, -V(idx, eta) * h);
      for (std::size_t d = r; d-- > 1;) {
        if (++idx[d] < M) break;
        idx[d] = 0;
      }
    }
  });
}

inline std::vector<double> eta_at(const SwitchSpec& spec, double tau) {
  std::vector<double> e(spec.dim());
  for (std::size_t l = 0; l < spec.dim(); ++l) e[l] = eval_switch(spec, l, tau);
  return e;
}

inline double energy(const ManyBodyState& s, const PairPotential& V, const std::vector<double>& eta) {
  double pot = 0.0;
  const std::size_t r = s.psi.grid.rank();
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < s.psi.size(); ++flat) {
    pot += V(idx, eta) * std::norm(s.psi.data[flat]);
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < V.points()) break;
      idx[d] = 0;
    }
  }
  return kinetic_energy(s.psi) + pot * s.psi.grid.cell_volume();
}

}  // namespace detail

/// Strang split-step for the N-body equation. The potential half steps use
/// the switch at the step midpoint; the kinetic step is exact in Fourier space.
inline ManyBodyTrajectory solve_manybody(ManyBodyState s, const SwitchSpec& spec, const InteractionSpec& inter,
                                         const std::vector<double>& tau_samples, const ManyBodyOptions& opt = {}) {
  detail::check_shape(s.N, s.n);
  inter.check();
  if (spec.dim() != s.n) throw StructuralError("manybody", "switch dimension must match the particle dimension");
  if (inter.n != s.n) throw StructuralError("manybody", "interaction dimension must match the particle dimension");
  const double bytes = 16.0 * static_cast<double>(s.psi.size()) *
                       (4.0 + (opt.keep_frames ? static_cast<double>(tau_samples.size()) : 0.0));
  detail::check_capacity(bytes, opt.memory_cap, "the trajectory");
  ::lensgp::detail::check_samples(s.time(), tau_samples);

  ManyBodyTrajectory out;
  const detail::PairPotential V(s, inter);
  const double h = s.psi.grid.axis(0).spacing();
  if (!inter.is_zero() && inter.support_diameter(s.N) < 8.0 * h)
    out.warnings.push_back("V_N support spans fewer than 8 grid cells");
  const double dt = opt.dt > 0.0 ? opt.dt : default_dt(s.psi.grid);
  out.dt = dt;

  std::vector<std::vector<cplx>> kin;
  double kin_step = -1.0;
  auto set_step = [&](double step) {
    if (step == kin_step) return;
    kin_step = step;
    kin.assign(s.psi.grid.rank(), {});
    for (std::size_t d = 0; d < s.psi.grid.rank(); ++d) {
      const auto k = wavenumbers(s.psi.grid.axis(d));
      for (double kk : k) kin[d].push_back(std::polar(1.0, -0.5 * kk * kk * step));
    }
  };

  out.initial_energy = detail::energy(s, V, detail::eta_at(spec, s.time()));
  const double N = static_cast<double>(s.N);
  double t = s.time();
  for (double tau : tau_samples) {
    const double span = tau - t;
    if (span > 0.0) {
      const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt - 1e-9)));
      const double step = span / static_cast<double>(steps);
      set_step(step);
      for (std::size_t i = 0; i < steps; ++i) {
        const auto eta = detail::eta_at(spec, t + (static_cast<double>(i) + 0.5) * step);
        detail::potential_phase(s.psi, V, eta, 0.5 * step, opt.threads);
        fft::forward(s.psi);
        apply_separable(s.psi, kin);
        fft::backward(s.psi);
        detail::potential_phase(s.psi, V, eta, 0.5 * step, opt.threads);
      }
      out.steps += steps;
    }
    t = tau;
    s.psi.time = tau;

    FrameSummary f;
    f.time = tau;
    f.mass = s.psi.norm_squared();
    f.energy_per_particle = detail::energy(s, V, detail::eta_at(spec, tau)) / N;
    f.symmetry_defect = s.bosonic ? symmetry_defect(s) : 0.0;
    f.tail = spectral_tail(s.psi);
    f.boundary = boundary_mass(s.psi, 2);
    if (f.tail > opt.tail_limit) {
      const std::string msg = "spectral tail " + std::to_string(f.tail) + " at tau = " + std::to_string(tau);
      if (opt.strict) throw ResolutionError("manybody", msg);
      out.warnings.push_back(msg);
    }
    if (f.boundary > opt.escape_limit)
      throw BoxEscapeError("manybody", "boundary mass " + std::to_string(f.boundary) + " at tau = " +
                                           std::to_string(tau) + " exceeds " + std::to_string(opt.escape_limit));
    out.summary.push_back(f);
    if (opt.observe) opt.observe(s);
    if (opt.keep_frames) out.frames.push_back(s);
  }
  return out;
}

/// k-particle marginal, normalized to unit trace.
inline DensityKernel marginal(const ManyBodyState& s, std::size_t k, double cap = default_memory_cap) {
  if (k < 1 || k > 2 || k >= s.N) throw StructuralError("manybody", "marginal order must be 1 or 2 and below N");
  const std::size_t M = s.psi.grid.axis(0).points;
  const std::size_t D = detail::ipow(M, k * s.n);
  const std::size_t R = s.psi.size() / D;
  detail::check_capacity(16.0 * static_cast<double>(D) * static_cast<double>(D), cap, "the marginal kernel");
  GridSpec g = s.psi.grid.slice(0, k * s.n);
  DensityKernel out(g, s.time());
  out.n = k * s.n;
  using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> P(s.psi.data.data(), static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(R));
  Eigen::Map<Mat> G(out.field.data.data(), static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
  G.noalias() = P * P.adjoint();
  const cplx tr = out.trace();
  if (!(std::abs(tr) > 0.0)) throw RangeError("manybody", "state has zero mass");
  const double inv = 1.0 / tr.real();
  for (auto& z : out.field.data) z *= inv;
  out.physical = true;
  out.normalized = true;
  return out;
}

/// Partial trace of a two-particle kernel over its second particle.
inline DensityKernel partial_trace(const DensityKernel& g2) {
  if (g2.n % 2 != 0) throw StructuralError("manybody", "partial trace needs a two-particle kernel");
  const std::size_t n = g2.n / 2;
  const GridSpec base = g2.base();
  const GridSpec g1 = base.slice(0, n);
  const std::size_t D = g1.size(), Z = base.size() / D, DD = D * Z;
  DensityKernel out(g1, g2.time());
  const double dz = base.slice(n, n).cell_volume();
  for (std::size_t a = 0; a < D; ++a)
    for (std::size_t b = 0; b < D; ++b) {
      cplx s{};
      for (std::size_t z = 0; z < Z; ++z) s += g2.field.data[(a * Z + z) * DD + b * Z + z];
      out.field.data[a * D + b] = s * dz;
    }
  out.physical = g2.physical;
  return out;
}

/// Hilbert-Schmidt distance between gamma1 and the projector onto phi / |phi|.
inline double gp_distance(const DensityKernel& g1, const WaveField& phi) {
  require_same_grid(g1.base(), phi.grid, "gp_distance");
  const double nrm2 = phi.norm_squared();
  if (!(nrm2 > 0.0)) throw RangeError("manybody", "phi vanishes");
  const std::size_t m = phi.size();
  const double dv2 = g1.field.grid.cell_volume();
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      s += std::norm(g1.field.data[i * m + j] - phi.data[i] * std::conj(phi.data[j]) / nrm2);
  return std::sqrt(s * dv2);
}

/// Evenly spaced samples tau + j delta, j = -2..2, for bbgky_residual.
inline std::vector<double> bbgky_stencil(double tau, double delta) {
  return {tau - 2 * delta, tau - delta, tau, tau + delta, tau + 2 * delta};
}

struct BbgkyResult {
  double residual = 0.0;     // ||i d_tau gamma - [h, gamma] - collision|| / ||h_y gamma||
  double derivative = 0.0;   // ||i d_tau gamma||
  double commutator = 0.0;   // ||[h, gamma]||
  double collision = 0.0;
  double scale = 0.0;        // ||h_y gamma||
  double time = 0.0;
};

/// k = 1 BBGKY residual at the centre of a five-frame stencil:
///   i d_tau gamma1 = [h, gamma1] + ((N-1)/N) Tr_2 [V_N(y_1 - y_2), gamma2].
/// The time derivative is the fourth-order central difference; the collision
/// term contracts V_N against the diagonal of gamma2 in its second particle
/// without forming gamma2.
inline BbgkyResult bbgky_residual(const ManyBodyTrajectory& tr, const InteractionSpec& inter, const SwitchSpec& spec) {
  if (tr.frames.size() != 5) throw StructuralError("manybody", "BBGKY residual needs the five-frame stencil");
  const auto& mid = tr.frames[2];
  if (mid.n != 1 || mid.N > 3 || mid.N < 2) throw StructuralError("manybody", "BBGKY residual supports n = 1, N = 2 or 3");
  const double delta = tr.frames[3].time() - mid.time();
  for (std::size_t i = 1; i < 5; ++i)
    if (std::abs(tr.frames[i].time() - tr.frames[i - 1].time() - delta) > 1e-12 * std::max(1.0, std::abs(delta)) ||
        !(delta > 0.0))
      throw StructuralError("manybody", "BBGKY stencil frames must be evenly spaced");
  const Axis a = mid.psi.grid.axis(0);
  const double h = a.spacing();
  if (!inter.is_zero() && inter.support_diameter(mid.N) < 8.0 * h)
    throw ResolutionError("manybody", "V_N support spans " + std::to_string(inter.support_diameter(mid.N) / h) +
                                          " grid cells, fewer than 8");

  std::vector<DensityKernel> g;
  for (const auto& f : tr.frames) g.push_back(marginal(f, 1));
  const std::size_t M = a.points;
  const std::size_t MM = M * M;

  BbgkyResult r;
  r.time = mid.time();
  std::vector<cplx> lhs(MM), comm(MM), coll(MM, cplx{});
  for (std::size_t i = 0; i < MM; ++i)
    lhs[i] = cplx(0, 1) * (g[0].field.data[i] - 8.0 * g[1].field.data[i] + 8.0 * g[3].field.data[i] -
                           g[4].field.data[i]) / (12.0 * delta);

  const double eta = eval_switch(spec, 0, mid.time());
  const WaveField lap = weighted_laplacian(g[2].field, {1.0, -1.0});
  const WaveField lap_y = weighted_laplacian(g[2].field, {1.0, 0.0});
  double scale = 0.0;
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) {
      const std::size_t ij = i * M + j;
      const double yi = a.x(i), yj = a.x(j);
      comm[ij] = -0.5 * lap.data[ij] + 0.5 * eta * (yi * yi - yj * yj) * g[2].field.data[ij];
      scale += std::norm(-0.5 * lap_y.data[ij] + 0.5 * eta * yi * yi * g[2].field.data[ij]);
    }

  if (!inter.is_zero()) {
    // sum_z sum_rest [V_N(y - z) - V_N(y' - z)] psi(y, z, rest) conj psi(y', z, rest)
    const auto& psi = mid.psi;
    const double mass = psi.norm_squared();
    const std::size_t R2 = psi.size() / MM;
    const double dvz = psi.grid.cell_volume() / h;  // dz d(rest)
    std::vector<double> vn(2 * M - 1);
    for (std::size_t i = 0; i < vn.size(); ++i)
      vn[i] = inter.scaled(std::abs((static_cast<double>(i) - static_cast<double>(M - 1)) * h), mid.N);
    using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat acc = Mat::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    Mat G(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
    for (std::size_t z = 0; z < M; ++z) {
      Eigen::Map<const Mat, 0, Eigen::OuterStride<>> A(psi.data.data() + z * R2, static_cast<Eigen::Index>(M),
                                                       static_cast<Eigen::Index>(R2),
                                                       Eigen::OuterStride<>(static_cast<Eigen::Index>(M * R2)));
      G.noalias() = A * A.adjoint();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j)
          acc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
              (vn[i + M - 1 - z] - vn[j + M - 1 - z]) * G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const double pref = (static_cast<double>(mid.N) - 1.0) / static_cast<double>(mid.N) * dvz / mass;
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < M; ++j)
        coll[i * M + j] = pref * acc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  double res = 0.0, dn = 0.0, cn = 0.0, kn = 0.0;
  for (std::size_t i = 0; i < MM; ++i) {
    res += std::norm(lhs[i] - comm[i] - coll[i]);
    dn += std::norm(lhs[i]);
    cn += std::norm(comm[i]);
    kn += std::norm(coll[i]);
  }
  const double dv = h * h;
  r.derivative = std::sqrt(dn * dv);
  r.commutator = std::sqrt(cn * dv);
  r.collision = std::sqrt(kn * dv);
  r.scale = std::sqrt(scale * dv);
  r.residual = r.scale > 0.0 ? std::sqrt(res * dv) / r.scale : 0.0;
  return r;
}

/// One-particle GP reference i phi_tau = h(tau) phi + b0 |phi|^2 phi at the
/// given samples, with the same step rule as the N-body run so that V = 0
/// reproduces the tensor factors step for step.
inline std::vector<WaveField> gp_reference(const WaveField& phi0, const SwitchSpec& spec, double b0,
                                           const std::vector<double>& tau_samples, double dt) {
  SolveOptions o;
  o.dt = dt;
  o.box_check = false;
  WaveField u = phi0;
  u *= 1.0 / phi0.norm();
  return solve_trap_nls(u, spec, b0, tau_samples, o).frames;
}

}  // namespace lensgp::manybody
