#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"

namespace lensgp {

/// One axis of a switch function: a C^1 piecewise cubic Hermite curve given by
/// knot times (time units), values and slopes. The curve is held constant past
/// its last knot, so the last slope must be zero.
struct SwitchAxis {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> slopes;

  static SwitchAxis constant(double value) { return {{0.0}, {value}, {0.0}}; }

  /// Smoothstep from `from` to `to` over [t0, t1], flat elsewhere.
  static SwitchAxis ramp(double from, double to, double t0, double t1) {
    if (t0 <= 0.0) return {{0.0, t1}, {from, to}, {0.0, 0.0}};
    return {{0.0, t0, t1}, {from, from, to}, {0.0, 0.0, 0.0}};
  }

  std::size_t segment(double tau) const {
    auto it = std::upper_bound(times.begin(), times.end(), tau);
    return static_cast<std::size_t>(std::distance(times.begin(), it)) - 1;
  }

  /// Value and derivative at tau >= 0.
  std::pair<double, double> eval(double tau) const {
    if (tau >= times.back()) return {values.back(), 0.0};
    const std::size_t i = segment(tau);
    const double h = times[i + 1] - times[i];
    const double s = (tau - times[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    const double v = h00 * values[i] + h10 * h * slopes[i] + h01 * values[i + 1] + h11 * h * slopes[i + 1];
    const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1;
    const double d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
    const double d = (d00 * values[i] + d01 * values[i + 1]) / h + d10 * slopes[i] + d11 * slopes[i + 1];
    return {v, d};
  }

  /// Extreme values of the curve on [0, inf) (exact, via the cubic's critical points).
  std::pair<double, double> range() const {
    double lo = values.front(), hi = values.front();
    auto take = [&](double v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    };
    for (double v : values) take(v);
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
      const double h = times[i + 1] - times[i];
      // derivative in s is a quadratic A s^2 + B s + C
      const double p0 = values[i], p1 = values[i + 1], m0 = h * slopes[i], m1 = h * slopes[i + 1];
      const double A = 3 * (2 * p0 + m0 - 2 * p1 + m1);
      const double B = 2 * (-3 * p0 - 2 * m0 + 3 * p1 - m1);
      const double C = m0;
      std::vector<double> roots;
      if (std::abs(A) < 1e-300) {
        if (std::abs(B) > 1e-300) roots.push_back(-C / B);
      } else {
        const double disc = B * B - 4 * A * C;
        if (disc >= 0) {
          const double sq = std::sqrt(disc);
          roots.push_back((-B + sq) / (2 * A));
          roots.push_back((-B - sq) / (2 * A));
        }
      }
      for (double s : roots)
        if (s > 0.0 && s < 1.0) take(eval(times[i] + s * h).first);
    }
    return {lo, hi};
  }
};

/// Per-axis switch functions eta_l on [0, T0].
struct SwitchSpec {
  std::vector<SwitchAxis> axes;
  double T0 = 1.0;
  std::string name;

  SwitchSpec() = default;
  SwitchSpec(std::vector<SwitchAxis> a, double t0, std::string nm = {})
      : axes(std::move(a)), T0(t0), name(std::move(nm)) {
    check();
  }

  std::size_t dim() const { return axes.size(); }

  void check() const {
    if (axes.empty()) throw StructuralError("traps", "switch spec needs at least one axis");
    if (!(T0 > 0.0) || !std::isfinite(T0)) throw StructuralError("traps", "T0 must be positive");
    for (std::size_t l = 0; l < axes.size(); ++l) {
      const auto& a = axes[l];
      const std::string where = "axis " + std::to_string(l) + ": ";
      if (a.times.empty() || a.times.size() != a.values.size() || a.times.size() != a.slopes.size())
        throw StructuralError("traps", where + "knot arrays must be non-empty and of equal length");
      if (a.times.front() != 0.0) throw StructuralError("traps", where + "first knot must sit at tau = 0");
      for (std::size_t i = 1; i < a.times.size(); ++i)
        if (!(a.times[i] > a.times[i - 1]))
          throw StructuralError("traps", where + "knot times must be strictly increasing");
      for (std::size_t i = 0; i < a.times.size(); ++i)
        if (!std::isfinite(a.times[i]) || !std::isfinite(a.values[i]) || !std::isfinite(a.slopes[i]))
          throw StructuralError("traps", where + "non-finite knot data");
      if (a.slopes.back() != 0.0)
        throw StructuralError("traps", where + "last knot slope must be zero (switch is held constant afterwards)");
      if (a.range().first < -1e-14) throw StructuralError("traps", where + "switch function goes negative");
    }
  }

  const SwitchAxis& axis(std::size_t l) const {
    if (l >= axes.size())
      throw StructuralError("traps", "axis " + std::to_string(l) + " out of range (dim " +
                                         std::to_string(axes.size()) + ")");
    return axes[l];
  }
};

/// eta_l(|tau|): the even extension, constant past the last knot.
inline double eval_switch(const SwitchSpec& spec, std::size_t axis, double tau) {
  return std::max(0.0, spec.axis(axis).eval(std::abs(tau)).first);
}

/// d/dtau of the even extension.
inline double eval_switch_rate(const SwitchSpec& spec, std::size_t axis, double tau) {
  const double d = spec.axis(axis).eval(std::abs(tau)).second;
  return tau < 0 ? -d : d;
}

struct AxisCondition {
  double measured = 0.0;  // T0 * sqrt(sup eta)
  bool bound_ok = false;  // measured < pi / 2
  bool initial_rest = false;  // eta'(0) == 0
  bool supported = false;  // eta' == 0 past T0
  bool passed() const { return bound_ok && initial_rest && supported; }
};

struct ConditionReport {
  std::vector<AxisCondition> axes;
  bool passed() const {
    return std::all_of(axes.begin(), axes.end(), [](const AxisCondition& a) { return a.passed(); });
  }
};

/// Checks the trap conditions per axis. Failing specs are reported, not rejected.
inline ConditionReport validate_conditions(const SwitchSpec& spec) {
  spec.check();
  ConditionReport r;
  for (const auto& a : spec.axes) {
    AxisCondition c;
    c.measured = spec.T0 * std::sqrt(std::max(0.0, a.range().second));
    c.bound_ok = c.measured < std::numbers::pi / 2;
    c.initial_rest = a.slopes.front() == 0.0;
    c.supported = a.times.back() <= spec.T0;
    r.axes.push_back(c);
  }
  return r;
}

namespace presets {

inline SwitchSpec harmonic(std::size_t dim = 1, double T0 = 1.0) {
  return SwitchSpec(std::vector<SwitchAxis>(dim, SwitchAxis::constant(1.0)), T0, "harmonic");
}

/// Trap turned off: eta goes 1 -> 0 over [0.25, 0.75].
inline SwitchSpec off_ramp(std::size_t dim = 1) {
  return SwitchSpec(std::vector<SwitchAxis>(dim, SwitchAxis::ramp(1.0, 0.0, 0.25, 0.75)), 1.0, "off-ramp");
}

/// Trap turned on: eta goes 0 -> 1 over [0.25, 0.75].
inline SwitchSpec on_ramp(std::size_t dim = 1) {
  return SwitchSpec(std::vector<SwitchAxis>(dim, SwitchAxis::ramp(0.0, 1.0, 0.25, 0.75)), 1.0, "on-ramp");
}

/// Two axes switched in opposite directions at different rates; an optional
/// third axis holds a constant weak trap.
inline SwitchSpec anisotropic(std::size_t dim = 2) {
  if (dim < 2 || dim > 3) throw StructuralError("traps", "anisotropic preset has 2 or 3 axes");
  std::vector<SwitchAxis> axes{SwitchAxis::ramp(0.8, 0.2, 0.5, 1.0), SwitchAxis::ramp(0.2, 0.8, 0.25, 1.5)};
  if (dim == 3) axes.push_back(SwitchAxis::constant(0.5));
  return SwitchSpec(std::move(axes), 1.5, "anisotropic");
}

inline SwitchSpec zero(std::size_t dim = 1, double T0 = 1.0) {
  return SwitchSpec(std::vector<SwitchAxis>(dim, SwitchAxis::constant(0.0)), T0, "zero");
}

inline SwitchSpec by_name(const std::string& name, std::size_t dim) {
  if (name == "harmonic") return harmonic(dim);
  if (name == "off-ramp") return off_ramp(dim);
  if (name == "on-ramp") return on_ramp(dim);
  if (name == "anisotropic") return anisotropic(dim);
  if (name == "zero") return zero(dim);
  throw StructuralError("traps", "unknown switch preset '" + name + "'");
}

}  // namespace presets

}  // namespace lensgp
