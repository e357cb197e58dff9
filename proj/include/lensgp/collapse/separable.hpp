#pragma once

// Separable solutions of
//
//   i u_t + L_{x1}(t) u + L_{x2}(t) u +/- L_{x2'}(t) u = 0,   L_x(t) = sum_l a_l(t) d_l^2,
//
// with x1, x2, x2' in R^n, and the two sides of the collapsing estimate
//
//   LHS = int int | |grad|^{(n-1)/2} u(t, x, x, x) |^2 dx dt
//   RHS = || |grad_1|^{(n-1)/2} |grad_2|^{(n-1)/2} |grad_2'|^{(n-1)/2} f ||^2.
//
// The equation is block separable, so a sum of rank-1 terms g (x) h (x) w stays
// a sum of rank-1 terms and every factor evolves on its own n-dim grid.

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/quadrature/gauss_kronrod.hpp"
#include "lensgp/spectral/fft.hpp"
#include "lensgp/spectral/grid.hpp"
#include "lensgp/spectral/operators.hpp"
#include "lensgp/spectral/solvers.hpp"

namespace lensgp::collapse {

/// Sign in front of L_{x2'}; the first two blocks always carry +.
using SignPattern = std::array<int, 3>;
inline constexpr SignPattern plus_signs{1, 1, 1};
inline constexpr SignPattern minus_signs{1, 1, -1};

struct SeparableTerm {
  cplx weight{1.0, 0.0};
  WaveField g, h, w;

  const WaveField& block(std::size_t b) const { return b == 0 ? g : b == 1 ? h : w; }
  WaveField& block(std::size_t b) { return b == 0 ? g : b == 1 ? h : w; }
};

class SeparableState {
public:
  static constexpr std::size_t max_terms = 16;

  SeparableState() = default;
  explicit SeparableState(GridSpec g) : grid_(std::move(g)) {}

  void add(cplx weight, WaveField g, WaveField h, WaveField w) {
    if (terms_.size() >= max_terms) throw StructuralError("collapse", "at most 16 rank-1 terms");
    if (grid_.rank() == 0) grid_ = g.grid;
    for (const auto* f : {&g, &h, &w}) {
      require_same_grid(grid_, f->grid, "SeparableState::add");
      if (f->time != g.time) throw StructuralError("collapse", "factors of a term must share a time stamp");
    }
    if (!terms_.empty() && g.time != time()) throw StructuralError("collapse", "terms must share a time stamp");
    if (grid_.rank() > 3) throw StructuralError("collapse", "block dimension must be 1, 2 or 3");
    terms_.push_back({weight, std::move(g), std::move(h), std::move(w)});
  }

  const std::vector<SeparableTerm>& terms() const { return terms_; }
  std::vector<SeparableTerm>& terms() { return terms_; }
  const GridSpec& grid() const { return grid_; }
  std::size_t n() const { return grid_.rank(); }
  double time() const { return terms_.empty() ? 0.0 : terms_.front().g.time; }
  bool empty() const { return terms_.empty(); }

  /// Scales every weight; LHS and RHS are quadratic in this factor.
  SeparableState scaled(cplx s) const {
    SeparableState out = *this;
    for (auto& t : out.terms_) t.weight *= s;
    return out;
  }

private:
  GridSpec grid_;
  std::vector<SeparableTerm> terms_;
};

namespace detail {

inline void check_pattern(const SignPattern& s) {
  if (s[0] != 1 || s[1] != 1 || (s[2] != 1 && s[2] != -1))
    throw StructuralError("collapse", "sign pattern must be (+, +, +) or (+, +, -)");
}

inline void check_schedule(const CoefficientSchedule& sched, std::size_t n, double lo, double hi) {
  if (sched.dim() != n) throw StructuralError("collapse", "one coefficient per block axis");
  if (!(sched.c0 > 0.0)) throw HypothesisError("collapse", "coefficient floor c0 must be positive");
  const int probes = 2000;
  for (std::size_t l = 0; l < n; ++l)
    for (int i = 0; i <= probes; ++i) {
      const double t = lo + (hi - lo) * i / probes;
      if (sched.a[l](t) < sched.c0 * (1 - 1e-12))
        throw HypothesisError("collapse", "a_" + std::to_string(l + 1) + " drops below c0 at t = " + std::to_string(t));
    }
}

// Spectral weights |k|^{2s}: the squared L2 norm of |grad|^s f is their sum
// against |F|^2, up to normalization.
inline std::vector<double> seminorm_weights(const GridSpec& g, double s) {
  std::vector<double> wgt(g.size());
  const std::size_t r = g.rank();
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    double k2 = 0.0;
    for (std::size_t d = 0; d < r; ++d) {
      const double k = g.axis(d).k(idx[d]);
      k2 += k * k;
    }
    wgt[flat] = s == 0.0 ? 1.0 : std::pow(k2, s);
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < g.axis(d).points) break;
      idx[d] = 0;
    }
  }
  return wgt;
}

// Fine-grid index of every coarse DFT bin after zero padding by `pad`.
inline std::vector<std::size_t> pad_map(const GridSpec& coarse, const GridSpec& fine) {
  const std::size_t r = coarse.rank();
  std::vector<std::vector<std::size_t>> ax(r);
  for (std::size_t d = 0; d < r; ++d) {
    const auto m = static_cast<std::ptrdiff_t>(coarse.axis(d).points);
    const auto mf = static_cast<std::ptrdiff_t>(fine.axis(d).points);
    for (std::ptrdiff_t j = 0; j < m; ++j) {
      const std::ptrdiff_t s = j >= m / 2 ? j - m : j;
      ax[d].push_back(static_cast<std::size_t>((s + mf) % mf));
    }
  }
  std::vector<std::size_t> map(coarse.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < coarse.size(); ++flat) {
    std::size_t f = 0;
    for (std::size_t d = 0; d < r; ++d) f += ax[d][idx[d]] * fine.stride(d);
    map[flat] = f;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < coarse.axis(d).points) break;
      idx[d] = 0;
    }
  }
  return map;
}

inline GridSpec padded(const GridSpec& g, std::size_t pad) {
  std::vector<Axis> axes;
  for (const auto& a : g.axes()) axes.push_back({a.points * pad, a.length});
  return GridSpec(std::move(axes));
}

// Tail model I(u) ~ C (u^2 + b)^{-q} through samples at u1 < u2 < u3.
struct TailFit {
  double b = 0.0;
  double q = 0.0;
};

inline TailFit fit_tail(double u1, double u2, double u3, double i1, double i2, double i3) {
  if (!(i1 > i3 && i2 > i3))
    throw AccuracyError("collapse", "integrand is not decaying at the window edge; widen the window");
  const double target = std::log(i1 / i3) / std::log(i2 / i3);
  auto rho = [&](double b) { return std::log((u3 * u3 + b) / (u1 * u1 + b)) / std::log((u3 * u3 + b) / (u2 * u2 + b)); };
  double lo = -u1 * u1 * (1 - 1e-12), hi = 1e6 * u3 * u3;
  TailFit f;
  if (target <= rho(hi)) {
    f.b = hi;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (rho(mid) > target ? lo : hi) = mid;
    }
    f.b = 0.5 * (lo + hi);
  }
  f.q = std::log(i1 / i3) / std::log((u3 * u3 + f.b) / (u1 * u1 + f.b));
  return f;
}

inline double tail_integral(const TailFit& f, double u3, double i3) {
  // u = u3 / s
  auto g = [&](double s) {
    const double u = u3 / s;
    return i3 * std::pow((u3 * u3 + f.b) / (u * u + f.b), f.q) * u3 / (s * s);
  };
  quad::QuadOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 0.0;
  return quad::integrate(g, 0.0, 1.0, o).value;
}

}  // namespace detail

/// Evolves every factor under its block's signed flow to time t.
inline SeparableState evolve_separable(const SeparableState& s, const CoefficientSchedule& sched,
                                       const SignPattern& signs, double t) {
  detail::check_pattern(signs);
  if (s.empty()) return s;
  const std::size_t n = s.n();
  if (sched.dim() != n) throw StructuralError("collapse", "one coefficient per block axis");
  SeparableState out(s.grid());
  for (const auto& term : s.terms()) {
    std::array<WaveField, 3> f;
    for (std::size_t b = 0; b < 3; ++b) {
      if (t == term.g.time) {
        f[b] = term.block(b);
        continue;
      }
      f[b] = solve_variable_coeff_linear(term.block(b), sched, {t}, std::vector<int>(n, signs[b])).frames[0];
    }
    out.add(term.weight, std::move(f[0]), std::move(f[1]), std::move(f[2]));
  }
  return out;
}

/// Exact squared norm of the weighted sum through the Gram matrices of the
/// per-block seminorms. `order` overrides the exponent (n - 1) / 2.
inline double collapse_rhs(const SeparableState& s, std::optional<double> order = {}) {
  if (s.empty()) return 0.0;
  const GridSpec& g = s.grid();
  const double ord = order.value_or(0.5 * (double(s.n()) - 1.0));
  const auto wgt = detail::seminorm_weights(g, ord);
  const double scale = g.cell_volume() / static_cast<double>(g.size());
  const std::size_t m = s.terms().size();
  std::array<std::vector<std::vector<cplx>>, 3> spec;
  for (std::size_t b = 0; b < 3; ++b)
    for (const auto& t : s.terms()) {
      WaveField f = t.block(b);
      fft::forward(f);
      spec[b].push_back(std::move(f.data));
    }
  auto gram = [&](std::size_t b, std::size_t i, std::size_t j) {
    cplx acc{};
    const auto& u = spec[b][i];
    const auto& v = spec[b][j];
    for (std::size_t q = 0; q < u.size(); ++q) acc += wgt[q] * std::conj(u[q]) * v[q];
    return acc * scale;
  };
  cplx total{};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const cplx p = gram(0, i, j) * gram(1, i, j) * gram(2, i, j);
      total += std::conj(s.terms()[i].weight) * s.terms()[j].weight * p;
    }
  return total.real();
}

struct LhsOptions {
  double window = 0.0;          // half-width W of [t0 - W, t0 + W]
  std::size_t intervals = 96;   // trapezoid intervals, a multiple of 4
  std::size_t pad = 2;          // zero-padding factor for the trace product
  bool tail_correction = true;  // fitted algebraic tail beyond +/- W
  double tail_limit = 1e-6;     // spectral tail of the trace
  double escape_limit = 1e-8;   // trace mass near the box edge
  std::optional<double> order;  // overrides (n - 1) / 2
};

struct LhsResult {
  double value = 0.0;
  double trapezoid = 0.0;
  double tail = 0.0;                  // fitted tail added to the trapezoid
  std::array<double, 2> decay{0, 0};  // fitted exponents at -W and +W
  double edge_ratio = 0.0;            // max(I(+-W)) / max I
  double max_trace_tail = 0.0;
  double max_trace_boundary = 0.0;
  std::vector<double> times;
  std::vector<double> integrand;
};

/// The fine-grid trace u(t, x, x, x) of an already evolved state.
inline WaveField trace_field(const SeparableState& s, std::size_t pad = 2) {
  if (pad != 1 && pad != 2) throw StructuralError("collapse", "trace padding must be 1 or 2");
  const GridSpec fine = detail::padded(s.grid(), pad);
  WaveField T(fine, s.time(), "trace");
  if (s.empty()) return T;
  const auto map = detail::pad_map(s.grid(), fine);
  const double up = std::pow(double(pad), double(s.n()));
  for (const auto& term : s.terms()) {
    std::array<WaveField, 3> f;
    for (std::size_t b = 0; b < 3; ++b) {
      WaveField c = term.block(b);
      fft::forward(c);
      f[b] = WaveField(fine);
      for (std::size_t i = 0; i < c.size(); ++i) f[b].data[map[i]] = c.data[i];
      fft::backward(f[b]);
    }
    const cplx w = term.weight * up * up * up;
    for (std::size_t i = 0; i < T.size(); ++i) T.data[i] += w * f[0].data[i] * f[1].data[i] * f[2].data[i];
  }
  return T;
}

/// Space-time LHS by trapezoid over [t0 - W, t0 + W] with a fitted power-law
/// tail beyond the window.
inline LhsResult collapse_lhs(const SeparableState& s, const CoefficientSchedule& sched, const SignPattern& signs,
                              const LhsOptions& opt) {
  detail::check_pattern(signs);
  if (!(opt.window > 0.0)) throw RangeError("collapse", "LHS time window must be positive");
  if (opt.intervals < 16 || opt.intervals % 8 != 0)
    throw RangeError("collapse", "LHS interval count must be a multiple of 8 and at least 16");
  if (opt.pad != 1 && opt.pad != 2) throw StructuralError("collapse", "trace padding must be 1 or 2");
  LhsResult res;
  const std::size_t nt = opt.intervals + 1;
  const double t0 = s.time(), W = opt.window, dt = 2.0 * W / double(opt.intervals);
  for (std::size_t j = 0; j < nt; ++j) res.times.push_back(t0 - W + dt * double(j));
  res.integrand.assign(nt, 0.0);
  if (s.empty()) return res;

  const std::size_t n = s.n();
  detail::check_schedule(sched, n, t0 - W, t0 + W);
  const GridSpec& g = s.grid();
  const GridSpec fine = detail::padded(g, opt.pad);
  const auto map = detail::pad_map(g, fine);
  const double ord = opt.order.value_or(0.5 * (double(n) - 1.0));
  const auto wgt = detail::seminorm_weights(fine, ord);
  const double norm_scale = fine.cell_volume() / static_cast<double>(fine.size());
  const double up = std::pow(double(opt.pad), double(n));

  std::vector<std::array<std::vector<cplx>, 3>> spec;
  for (const auto& term : s.terms()) {
    std::array<std::vector<cplx>, 3> b3;
    for (std::size_t b = 0; b < 3; ++b) {
      WaveField c = term.block(b);
      fft::forward(c);
      b3[b] = std::move(c.data);
    }
    spec.push_back(std::move(b3));
  }
  std::vector<std::vector<double>> k2(n);
  for (std::size_t l = 0; l < n; ++l)
    for (double k : wavenumbers(g.axis(l))) k2[l].push_back(k * k);

  WaveField buf(fine), T(fine);
  std::array<std::vector<cplx>, 3> phys;
  for (std::size_t j = 0; j < nt; ++j) {
    const double t = res.times[j];
    std::vector<double> A(n);
    for (std::size_t l = 0; l < n; ++l) A[l] = sched.integral(l, t0, t);
    std::fill(T.data.begin(), T.data.end(), cplx{});
    for (std::size_t m = 0; m < spec.size(); ++m) {
      for (std::size_t b = 0; b < 3; ++b) {
        std::vector<std::vector<cplx>> fac(n);
        for (std::size_t l = 0; l < n; ++l) {
          fac[l].resize(k2[l].size());
          for (std::size_t q = 0; q < k2[l].size(); ++q) fac[l][q] = std::polar(1.0, -signs[b] * k2[l][q] * A[l]);
        }
        std::vector<cplx> c = spec[m][b];
        apply_separable(c, g, fac);
        std::fill(buf.data.begin(), buf.data.end(), cplx{});
        for (std::size_t i = 0; i < c.size(); ++i) buf.data[map[i]] = c[i];
        fft::backward(buf);
        phys[b] = buf.data;
      }
      const cplx w = s.terms()[m].weight * up * up * up;
      for (std::size_t i = 0; i < T.size(); ++i) T.data[i] += w * phys[0][i] * phys[1][i] * phys[2][i];
    }
    const double edge = boundary_mass(T);
    res.max_trace_boundary = std::max(res.max_trace_boundary, edge);
    fft::forward(T);
    double acc = 0.0, total = 0.0, tail = 0.0;
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t i = 0; i < T.size(); ++i) {
      const double p = std::norm(T.data[i]);
      acc += wgt[i] * p;
      total += p;
      bool outer = false;
      for (std::size_t d = 0; d < n && !outer; ++d)
        outer = std::abs(fine.axis(d).k(idx[d])) > 0.875 * fine.axis(d).k_max();
      if (outer) tail += p;
      for (std::size_t d = n; d-- > 0;) {
        if (++idx[d] < fine.axis(d).points) break;
        idx[d] = 0;
      }
    }
    const double tail_frac = total > 0.0 ? tail / total : 0.0;
    res.max_trace_tail = std::max(res.max_trace_tail, tail_frac);
    if (tail_frac > opt.tail_limit)
      throw ResolutionError("collapse", "trace is unresolved at t = " + std::to_string(t) +
                                            ": spectral tail " + std::to_string(tail_frac));
    if (edge > opt.escape_limit)
      throw ResolutionError("collapse", "trace reaches the box edge at t = " + std::to_string(t) +
                                            ": boundary mass " + std::to_string(edge));
    res.integrand[j] = acc * norm_scale;
  }

  double trap = 0.0;
  for (std::size_t j = 0; j < nt; ++j) trap += (j == 0 || j + 1 == nt ? 0.5 : 1.0) * res.integrand[j];
  res.trapezoid = trap * dt;
  double peak = 0.0;
  for (double v : res.integrand) peak = std::max(peak, v);
  if (peak == 0.0) return res;
  res.edge_ratio = std::max(res.integrand.front(), res.integrand.back()) / peak;

  if (opt.tail_correction) {
    const std::size_t q = opt.intervals / 8;
    for (std::size_t side = 0; side < 2; ++side) {
      auto at = [&](std::size_t k) { return res.integrand[side == 0 ? k : nt - 1 - k]; };
      const double i3 = at(0), i2 = at(q), i1 = at(2 * q);
      if (i3 <= 0.0) continue;
      const auto fit = detail::fit_tail(0.5 * W, 0.75 * W, W, i1, i2, i3);
      res.decay[side] = 2.0 * fit.q;
      if (!(2.0 * fit.q > 1.05))
        throw AccuracyError("collapse", "integrand decays too slowly at the window edge (exponent " +
                                            std::to_string(2.0 * fit.q) + "); widen the window");
      res.tail += detail::tail_integral(fit, W, i3);
    }
  }
  res.value = res.trapezoid + res.tail;
  return res;
}

}  // namespace lensgp::collapse
