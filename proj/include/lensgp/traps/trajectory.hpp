#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/traps/switch.hpp"

namespace lensgp {

/// Classical trajectories of x'' + eta_l(tau) x = 0 per axis:
/// alpha (alpha(0)=0, alpha'(0)=1) and beta (beta(0)=1, beta'(0)=0).
///
/// Samples are stored on tau = j*dt for j = 0..steps, covering [0, T0 + delta];
/// negative times follow from the parity of the even-extended switch
/// (alpha odd, beta even).
class TrajectoryPair {
public:
  struct Sample {
    double alpha, alpha_dot, beta, beta_dot;
  };

  TrajectoryPair() = default;

  TrajectoryPair(SwitchSpec spec, double dt) : spec_(std::move(spec)), dt_(dt) {
    spec_.check();
    if (!(dt > 0.0) || dt > spec_.T0 / 100.0 * (1 + 1e-12))
      throw StructuralError("traps", "trajectory step must satisfy 0 < dt <= T0/100");
    const double end = spec_.T0 * 1.05;
    steps_ = static_cast<std::size_t>(std::ceil(end / dt_ - 1e-9));
    axes_.resize(spec_.dim());
    for (std::size_t l = 0; l < spec_.dim(); ++l) integrate(l);
  }

  const SwitchSpec& spec() const { return spec_; }
  double dt() const { return dt_; }
  std::size_t dim() const { return spec_.dim(); }
  double T0() const { return spec_.T0; }
  std::size_t steps() const { return steps_; }
  /// Largest |tau| at which the trajectories may be evaluated.
  double reach() const { return dt_ * static_cast<double>(steps_); }

  /// Stored sample at tau = j * dt (j may be negative).
  Sample sample(std::size_t axis, std::ptrdiff_t j) const {
    const auto& a = axis_data(axis);
    const auto m = static_cast<std::size_t>(j < 0 ? -j : j);
    Sample s = a[m];
    if (j < 0) {
      s.alpha = -s.alpha;
      s.beta_dot = -s.beta_dot;
    }
    return s;
  }

  double eta(std::size_t axis, double tau) const { return eval_switch(spec_, axis, tau); }

  /// Cubic Hermite interpolation using stored derivatives (second derivatives
  /// from the ODE itself).
  Sample at(std::size_t axis, double tau) const {
    const auto& a = axis_data(axis);
    const double at = std::abs(tau);
    if (!(at <= reach() * (1 + 1e-14)))
      throw RangeError("traps", "tau = " + std::to_string(tau) + " outside the solved window");
    std::size_t i = std::min(static_cast<std::size_t>(at / dt_), steps_ - 1);
    const double t0 = static_cast<double>(i) * dt_;
    const double s = (at - t0) / dt_;
    const double e0 = eta(axis, t0), e1 = eta(axis, t0 + dt_);
    const Sample& p = a[i];
    const Sample& q = a[i + 1];
    auto herm = [&](double y0, double d0, double y1, double d1) {
      const double s2 = s * s, s3 = s2 * s;
      return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * dt_ * d0 + (-2 * s3 + 3 * s2) * y1 +
             (s3 - s2) * dt_ * d1;
    };
    Sample r;
    r.alpha = herm(p.alpha, p.alpha_dot, q.alpha, q.alpha_dot);
    r.alpha_dot = herm(p.alpha_dot, -e0 * p.alpha, q.alpha_dot, -e1 * q.alpha);
    r.beta = herm(p.beta, p.beta_dot, q.beta, q.beta_dot);
    r.beta_dot = herm(p.beta_dot, -e0 * p.beta, q.beta_dot, -e1 * q.beta);
    if (tau < 0) {
      r.alpha = -r.alpha;
      r.beta_dot = -r.beta_dot;
    }
    return r;
  }

  double alpha(std::size_t l, double tau) const { return at(l, tau).alpha; }
  double beta(std::size_t l, double tau) const { return at(l, tau).beta; }

  /// alpha' beta - alpha beta'.
  double wronskian(std::size_t l, double tau) const {
    const Sample s = at(l, tau);
    return s.alpha_dot * s.beta - s.alpha * s.beta_dot;
  }

  /// upsilon_l = alpha_l / beta_l.
  double upsilon(std::size_t l, double tau) const {
    const Sample s = at(l, tau);
    if (s.beta == 0.0) throw SingularLensError("traps", "beta vanishes at tau = " + std::to_string(tau));
    return s.alpha / s.beta;
  }

  /// Minimum of |beta_l| over the stored samples in [-T0, T0].
  double min_abs_beta(std::size_t l) const {
    const auto& a = axis_data(l);
    double m = std::abs(a[0].beta);
    for (std::size_t j = 0; j <= steps_ && static_cast<double>(j) * dt_ <= spec_.T0 * (1 + 1e-12); ++j)
      m = std::min(m, std::abs(a[j].beta));
    // beta is even, so scanning [0, T0] covers [-T0, T0]; also look between
    // samples at the interpolated minimum of the last cell.
    m = std::min(m, std::abs(at(l, spec_.T0).beta));
    return m;
  }

  /// True when beta_l keeps its sign on [-T0, T0].
  bool beta_nonvanishing(std::size_t l) const {
    const auto& a = axis_data(l);
    for (std::size_t j = 0; j <= steps_ && static_cast<double>(j) * dt_ <= spec_.T0 * (1 + 1e-12); ++j)
      if (!(a[j].beta > 0.0)) return false;
    return at(l, spec_.T0).beta > 0.0;
  }

  /// Solves upsilon_l(tau) = t for tau in [-T0, T0] by bisection followed by
  /// Newton steps with upsilon' = 1 / beta^2.
  double upsilon_inverse(std::size_t l, double t) const {
    if (!beta_nonvanishing(l))
      throw SingularLensError("traps", "beta vanishes on [-T0, T0]; upsilon is not invertible");
    const double T0 = spec_.T0;
    const double hi_val = upsilon(l, T0);
    if (!(std::abs(t) <= hi_val * (1 + 1e-14)))
      throw RangeError("traps", "upsilon_inverse target " + std::to_string(t) + " outside [" +
                                    std::to_string(-hi_val) + ", " + std::to_string(hi_val) + "]");
    double lo = -T0, hi = T0;
    for (int it = 0; it < 60 && hi - lo > 1e-6 * T0; ++it) {
      const double mid = 0.5 * (lo + hi);
      (upsilon(l, mid) < t ? lo : hi) = mid;
    }
    double tau = 0.5 * (lo + hi);
    for (int it = 0; it < 50; ++it) {
      const Sample s = at(l, tau);
      const double f = s.alpha / s.beta - t;
      if (std::abs(f) <= 1e-13) break;
      (f < 0 ? lo : hi) = tau;
      double next = tau - f * s.beta * s.beta;
      if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
      tau = next;
    }
    return tau;
  }

  /// CSV export, columns axis,tau,alpha,alpha_dot,beta,beta_dot over the
  /// symmetric sample grid.
  void write_csv(std::ostream& os, std::size_t stride = 1) const {
    os << "axis,tau,alpha,alpha_dot,beta,beta_dot\n";
    char buf[256];
    const auto n = static_cast<std::ptrdiff_t>(steps_);
    const auto st = static_cast<std::ptrdiff_t>(std::max<std::size_t>(stride, 1));
    for (std::size_t l = 0; l < dim(); ++l) {
      for (std::ptrdiff_t j = -(n / st) * st; j <= n; j += st) {
        const Sample s = sample(l, j);
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", l,
                      static_cast<double>(j) * dt_, s.alpha, s.alpha_dot, s.beta, s.beta_dot);
        os << buf;
      }
    }
  }

private:
  const std::vector<Sample>& axis_data(std::size_t l) const {
    if (l >= axes_.size()) throw StructuralError("traps", "axis " + std::to_string(l) + " out of range");
    return axes_[l];
  }

  void integrate(std::size_t l) {
    auto& out = axes_[l];
    out.resize(steps_ + 1);
    // state: (alpha, alpha', beta, beta')
    std::array<double, 4> y{0.0, 1.0, 1.0, 0.0};
    auto rhs = [&](double tau, const std::array<double, 4>& s) {
      const double e = eta(l, tau);
      return std::array<double, 4>{s[1], -e * s[0], s[3], -e * s[2]};
    };
    out[0] = {y[0], y[1], y[2], y[3]};
    for (std::size_t j = 0; j < steps_; ++j) {
      const double t = static_cast<double>(j) * dt_;
      const auto k1 = rhs(t, y);
      std::array<double, 4> tmp;
      for (int i = 0; i < 4; ++i) tmp[i] = y[i] + 0.5 * dt_ * k1[i];
      const auto k2 = rhs(t + 0.5 * dt_, tmp);
      for (int i = 0; i < 4; ++i) tmp[i] = y[i] + 0.5 * dt_ * k2[i];
      const auto k3 = rhs(t + 0.5 * dt_, tmp);
      for (int i = 0; i < 4; ++i) tmp[i] = y[i] + dt_ * k3[i];
      const auto k4 = rhs(t + dt_, tmp);
      for (int i = 0; i < 4; ++i) y[i] += dt_ / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      out[j + 1] = {y[0], y[1], y[2], y[3]};
    }
  }

  SwitchSpec spec_;
  double dt_ = 0.0;
  std::size_t steps_ = 0;
  std::vector<std::vector<Sample>> axes_;
};

/// Default step T0 / 10^4.
inline TrajectoryPair solve_trajectories(const SwitchSpec& spec, double dt = 0.0) {
  return TrajectoryPair(spec, dt > 0.0 ? dt : spec.T0 / 1e4);
}

inline double wronskian(const TrajectoryPair& tr, std::size_t axis, double tau) { return tr.wronskian(axis, tau); }
inline double upsilon(const TrajectoryPair& tr, std::size_t axis, double tau) { return tr.upsilon(axis, tau); }
inline double upsilon_inverse(const TrajectoryPair& tr, std::size_t axis, double t) {
  return tr.upsilon_inverse(axis, t);
}

}  // namespace lensgp
