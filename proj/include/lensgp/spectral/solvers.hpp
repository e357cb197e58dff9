#pragma once

// Split-step Fourier solvers.
//
//   free cubic NLS        i v_t = -(1/2) Lap v + b0 |v|^2 v
//   trap cubic NLS        i u_tau = -(1/2) Lap u + (1/2) sum_l eta_l(tau) y_l^2 u + b0 |u|^2 u
//   variable coefficient  i u_t + sum_l s_l a_l(t) d_l^2 u = 0
//
// The nonlinear solvers use Strang splitting: half step of the pointwise phase
// (potential sampled at the step midpoint, |u|^2 is invariant under it), full
// kinetic step exp(-i |k|^2 dt / 2), second half phase with |u|^2 recomputed.
// The variable-coefficient solver is exact in time: each Fourier mode picks up
// exp(-i s_l k_l^2 A_l(t)) with A_l the primitive of a_l.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/quadrature/gauss_kronrod.hpp"
#include "lensgp/spectral/fft.hpp"
#include "lensgp/spectral/grid.hpp"
#include "lensgp/spectral/operators.hpp"
#include "lensgp/traps/switch.hpp"

namespace lensgp {

struct SolveOptions {
  double dt = 0.0;             // 0: (min grid spacing)^2 / 4
  bool strict = false;         // escalate resolution warnings to errors
  double tail_limit = 1e-6;    // spectral mass in the outer 1/8 band
  double escape_limit = 1e-8;  // mass within 2 cells of the box edge
  bool box_check = true;
};

struct FieldTrajectory {
  std::vector<WaveField> frames;
  std::vector<std::string> warnings;
  double max_tail = 0.0;
  double max_boundary = 0.0;
  std::size_t steps = 0;
};

inline double default_dt(const GridSpec& g) {
  double h = g.axis(0).spacing();
  for (const auto& a : g.axes()) h = std::min(h, a.spacing());
  return 0.25 * h * h;
}

namespace detail {

inline void check_samples(double start, const std::vector<double>& samples) {
  double prev = start;
  for (double s : samples) {
    if (!(s >= prev)) throw StructuralError("spectral", "sample times must be nondecreasing from the initial time");
    prev = s;
  }
}

/// Records tail / boundary monitors for a frame and applies the policy.
inline void monitor(FieldTrajectory& out, const WaveField& f, const SolveOptions& opt, bool escape_is_error,
                    const char* who) {
  const double tail = spectral_tail(f);
  const double edge = boundary_mass(f, 2);
  out.max_tail = std::max(out.max_tail, tail);
  out.max_boundary = std::max(out.max_boundary, edge);
  if (tail > opt.tail_limit) {
    std::string msg = std::string(who) + ": spectral tail " + std::to_string(tail) + " at t = " +
                      std::to_string(f.time) + " exceeds " + std::to_string(opt.tail_limit);
    if (opt.strict) throw ResolutionError("spectral", msg);
    out.warnings.push_back(msg);
  }
  if (opt.box_check && edge > opt.escape_limit) {
    std::string msg = std::string(who) + ": boundary mass " + std::to_string(edge) + " at t = " +
                      std::to_string(f.time) + " exceeds " + std::to_string(opt.escape_limit);
    if (escape_is_error) throw BoxEscapeError("spectral", msg);
    out.warnings.push_back(msg);
  }
}

/// Strang integrator for i u_t = -(1/2) Lap u + (1/2) sum_l w_l(t) y_l^2 u + b0 |u|^2 u.
/// `weights(t)` returns the per-axis w_l; an empty function means no potential.
class StrangStepper {
public:
  StrangStepper(const GridSpec& g, double b0, std::function<std::vector<double>(double)> weights)
      : grid_(g), b0_(b0), weights_(std::move(weights)) {
    const std::size_t r = g.rank();
    y2_.resize(r);
    k2_.resize(r);
    for (std::size_t d = 0; d < r; ++d) {
      const auto& a = g.axis(d);
      y2_[d].resize(a.points);
      k2_[d].resize(a.points);
      for (std::size_t j = 0; j < a.points; ++j) {
        y2_[d][j] = a.x(j) * a.x(j);
        k2_[d][j] = a.k(j) * a.k(j);
      }
    }
  }

  void set_step(double dt) {
    if (dt == dt_) return;
    dt_ = dt;
    kin_.assign(grid_.rank(), {});
    for (std::size_t d = 0; d < grid_.rank(); ++d) {
      kin_[d].resize(k2_[d].size());
      for (std::size_t j = 0; j < k2_[d].size(); ++j) kin_[d][j] = std::polar(1.0, -0.5 * k2_[d][j] * dt);
    }
  }

  /// One Strang step from t to t + dt.
  void step(WaveField& u, double t) {
    std::vector<double> w;
    if (weights_) w = weights_(t + 0.5 * dt_);
    phase(u, w, 0.5 * dt_);
    fft::forward(u);
    apply_separable(u, kin_);
    fft::backward(u);
    phase(u, w, 0.5 * dt_);
  }

private:
  void phase(WaveField& u, const std::vector<double>& w, double h) {
    const std::size_t r = grid_.rank();
    const bool pot = !w.empty();
    if (!pot && b0_ == 0.0) return;
    std::vector<std::size_t> idx(r, 0);
    const std::size_t last = grid_.axis(r - 1).points;
    for (std::size_t base = 0; base < u.size(); base += last) {
      double vouter = 0.0;
      if (pot)
        for (std::size_t d = 0; d + 1 < r; ++d) vouter += w[d] * y2_[d][idx[d]];
      for (std::size_t j = 0; j < last; ++j) {
        cplx& z = u.data[base + j];
        double v = b0_ * std::norm(z);
        if (pot) v += 0.5 * (vouter + w[r - 1] * y2_[r - 1][j]);
        z *= std::polar(1.0, -v * h);
      }
      for (std::size_t d = r - 1; d-- > 0;) {
        if (++idx[d] < grid_.axis(d).points) break;
        idx[d] = 0;
      }
    }
  }

  GridSpec grid_;
  double b0_;
  std::function<std::vector<double>(double)> weights_;
  std::vector<std::vector<double>> y2_, k2_;
  std::vector<std::vector<cplx>> kin_;
  double dt_ = -1.0;
};

inline FieldTrajectory run_strang(WaveField u, double b0, std::function<std::vector<double>(double)> weights,
                                  const std::vector<double>& samples, const SolveOptions& opt,
                                  bool escape_is_error, const char* who) {
  check_samples(u.time, samples);
  const double dt = opt.dt > 0.0 ? opt.dt : default_dt(u.grid);
  StrangStepper stepper(u.grid, b0, std::move(weights));
  FieldTrajectory out;
  double t = u.time;
  for (double s : samples) {
    const double span = s - t;
    if (span > 0.0) {
      const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt - 1e-9)));
      const double h = span / static_cast<double>(n);
      stepper.set_step(h);
      for (std::size_t i = 0; i < n; ++i) stepper.step(u, t + static_cast<double>(i) * h);
      out.steps += n;
    }
    t = s;
    u.time = s;
    monitor(out, u, opt, escape_is_error, who);
    out.frames.push_back(u);
  }
  return out;
}

}  // namespace detail

/// Free cubic NLS. Box escape is reported as a warning.
inline FieldTrajectory solve_free_nls(const WaveField& f, double b0, const std::vector<double>& t_samples,
                                      const SolveOptions& opt = {}) {
  return detail::run_strang(f, b0, {}, t_samples, opt, false, "solve_free_nls");
}

/// Trap cubic NLS with potential (1/2) sum_l eta_l(tau) y_l^2; field axis l uses
/// switch axis l. Box escape raises BoxEscapeError.
inline FieldTrajectory solve_trap_nls(const WaveField& f, const SwitchSpec& spec, double b0,
                                      const std::vector<double>& tau_samples, const SolveOptions& opt = {}) {
  if (spec.dim() != f.grid.rank()) throw StructuralError("spectral", "switch dimension must match field rank");
  auto weights = [spec](double tau) {
    std::vector<double> w(spec.dim());
    for (std::size_t l = 0; l < spec.dim(); ++l) w[l] = eval_switch(spec, l, tau);
    return w;
  };
  return detail::run_strang(f, b0, weights, tau_samples, opt, true, "solve_trap_nls");
}

/// Per-axis coefficients a_l(t) >= c0 > 0 of L = sum_l a_l(t) d_l^2.
struct CoefficientSchedule {
  std::vector<std::function<double(double)>> a;
  double c0 = 0.0;
  std::vector<double> breakpoints;  // kinks / jumps of any a_l
  // Optional exact primitives A_l(t) = int_0^t a_l; used instead of quadrature when set.
  std::vector<std::function<double(double)>> primitive;

  static CoefficientSchedule constant(std::vector<double> values) {
    CoefficientSchedule s;
    s.c0 = values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
    for (double v : values) {
      s.a.push_back([v](double) { return v; });
      s.primitive.push_back([v](double t) { return v * t; });
    }
    return s;
  }

  std::size_t dim() const { return a.size(); }

  double integral(std::size_t l, double t0, double t1) const {
    if (l < primitive.size() && primitive[l]) return primitive[l](t1) - primitive[l](t0);
    quad::QuadOptions q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-13;
    return quad::integrate(a[l], t0, t1, q, breakpoints).value;
  }
};

/// Exact-in-time solve of i u_t + sum_l sign_l a_l(t) d_l^2 u = 0. `signs` holds
/// one entry (+1 or -1) per field axis; empty means all +1.
inline FieldTrajectory solve_variable_coeff_linear(const WaveField& f, const CoefficientSchedule& sched,
                                                   const std::vector<double>& t_samples,
                                                   std::vector<int> signs = {}, const SolveOptions& opt = {}) {
  const std::size_t r = f.grid.rank();
  if (sched.dim() != r) throw StructuralError("spectral", "one coefficient per field axis");
  if (signs.empty()) signs.assign(r, 1);
  if (signs.size() != r) throw StructuralError("spectral", "one sign per field axis");
  for (int s : signs)
    if (s != 1 && s != -1) throw StructuralError("spectral", "signs must be +1 or -1");
  if (!(sched.c0 > 0.0)) throw HypothesisError("spectral", "coefficient floor c0 must be positive");

  // Enforce a_l >= c0 on sampled values over the solve window.
  double lo = f.time, hi = f.time;
  for (double s : t_samples) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  std::vector<double> probe;
  const int n_probe = 2000;
  for (int i = 0; i <= n_probe; ++i) probe.push_back(lo + (hi - lo) * i / n_probe);
  for (double b : sched.breakpoints)
    if (b >= lo && b <= hi) probe.push_back(b);
  for (std::size_t l = 0; l < r; ++l)
    for (double t : probe)
      if (sched.a[l](t) < sched.c0 * (1 - 1e-12))
        throw HypothesisError("spectral", "a_" + std::to_string(l + 1) + "(" + std::to_string(t) +
                                              ") = " + std::to_string(sched.a[l](t)) + " below c0 = " +
                                              std::to_string(sched.c0));

  WaveField spec = f;
  fft::forward(spec);
  FieldTrajectory out;
  SolveOptions o = opt;
  for (double s : t_samples) {
    std::vector<std::vector<cplx>> fac(r);
    for (std::size_t l = 0; l < r; ++l) {
      const double A = sched.integral(l, f.time, s) * signs[l];
      if (A == 0.0) continue;
      const auto& ax = f.grid.axis(l);
      fac[l].resize(ax.points);
      for (std::size_t j = 0; j < ax.points; ++j) fac[l][j] = std::polar(1.0, -ax.k(j) * ax.k(j) * A);
    }
    WaveField u = spec;
    apply_separable(u, fac);
    fft::backward(u);
    u.time = s;
    detail::monitor(out, u, o, false, "solve_variable_coeff_linear");
    out.frames.push_back(std::move(u));
  }
  return out;
}

/// Strang solve of i v_t = -sum_l a_l(t) d_l^2 v + b(t) |v|^2 v. The kinetic
/// substep is exact over each step; b is sampled at the step midpoint.
inline FieldTrajectory solve_variable_coeff_nls(const WaveField& f, const CoefficientSchedule& sched,
                                                const std::function<double(double)>& b,
                                                const std::vector<double>& t_samples, const SolveOptions& opt = {}) {
  const std::size_t r = f.grid.rank();
  if (sched.dim() != r) throw StructuralError("spectral", "one coefficient per field axis");
  detail::check_samples(f.time, t_samples);
  const double dt = opt.dt > 0.0 ? opt.dt : default_dt(f.grid);
  WaveField u = f;
  FieldTrajectory out;
  auto nonlinear = [&](double coef, double h) {
    for (auto& z : u.data) z *= std::polar(1.0, -coef * std::norm(z) * h);
  };
  double t = f.time;
  for (double s : t_samples) {
    const double span = s - t;
    if (span > 0.0) {
      const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt - 1e-9)));
      const double h = span / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double t0 = t + static_cast<double>(i) * h;
        const double coef = b(t0 + 0.5 * h);
        nonlinear(coef, 0.5 * h);
        std::vector<std::vector<cplx>> fac(r);
        for (std::size_t l = 0; l < r; ++l) {
          const double A = sched.integral(l, t0, t0 + h);
          const auto& ax = f.grid.axis(l);
          fac[l].resize(ax.points);
          for (std::size_t j = 0; j < ax.points; ++j) fac[l][j] = std::polar(1.0, -ax.k(j) * ax.k(j) * A);
        }
        fft::forward(u);
        apply_separable(u, fac);
        fft::backward(u);
        nonlinear(coef, 0.5 * h);
      }
      out.steps += n;
    }
    t = s;
    u.time = s;
    detail::monitor(out, u, opt, false, "solve_variable_coeff_nls");
    out.frames.push_back(u);
  }
  return out;
}

}  // namespace lensgp
