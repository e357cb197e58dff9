#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/quadrature/gauss_jacobi.hpp"
#include "lensgp/quadrature/gauss_kronrod.hpp"

// Singular surface integrals of the form
//
//   I(xi, p) = \int_S  prod_i |c_i xi - eta|^{-e_i}  dS(eta)
//
// with S a line or circle in R^2, or a plane or sphere in R^3. All singular
// points c_i xi sit on the xi axis. Circles and spheres are centred at the
// origin with radius p; lines and planes are parallel to xi at offset p.
// Exactly aligned singularities are integrated with Gauss-Jacobi panels; no
// part of the surface is discarded.

namespace lensgp::quad {

enum class Surface { line, circle, plane, sphere };

inline std::string to_string(Surface s) {
  switch (s) {
    case Surface::line: return "line";
    case Surface::circle: return "circle";
    case Surface::plane: return "plane";
    case Surface::sphere: return "sphere";
  }
  return "?";
}

struct SingularFactor {
  double c;  // position along xi in units of |xi|
  double e;  // exponent
};

struct SurfaceProblem {
  std::string name;
  Surface surface = Surface::circle;
  std::vector<SingularFactor> factors;
  // Integrate against the unit-sphere measure d(sigma) instead of dS.
  bool unit_measure = false;

  std::size_t surface_dim() const { return surface == Surface::line || surface == Surface::circle ? 1 : 2; }
  double exponent_sum() const {
    double s = 0.0;
    for (const auto& f : factors) s += f.e;
    return s;
  }
  // Homogeneity degree in |xi|.
  double expected_slope() const { return (unit_measure ? 0.0 : double(surface_dim())) - exponent_sum(); }
};

namespace lemmas {

inline SurfaceProblem two_d_part1(double a, double b, Surface s = Surface::circle) {
  if (!(a > 0 && a < 1 && b > 0 && b < 1 && a + b > 1))
    throw HypothesisError("quadrature", "2d part 1 needs 0 < a, b < 1 and a + b > 1");
  if (s != Surface::circle && s != Surface::line) throw StructuralError("quadrature", "2d lemma needs a line or circle");
  return {"2d-part1", s, {{1.0, a}, {0.0, b}}, false};
}

inline SurfaceProblem two_d_part2(double eps = 1.0 / 80) {
  if (!(eps > 0 && eps < 1)) throw HypothesisError("quadrature", "2d part 2 needs 0 < eps < 1");
  return {"2d-part2", Surface::circle, {{1.0, 1.0 - eps}, {-1.0, 1.0 - eps}}, true};
}

inline SurfaceProblem three_d_part1(double a, double b, Surface s = Surface::plane) {
  if (!(a > 0 && a < 2 && b > 0 && b < 2 && a + b > 2))
    throw HypothesisError("quadrature", "3d part 1 needs 0 < a, b < 2 and a + b > 2");
  if (s != Surface::plane && s != Surface::sphere) throw StructuralError("quadrature", "3d lemma needs a plane or sphere");
  return {"3d-part1", s, {{1.0, a}, {0.0, b}}, false};
}

inline SurfaceProblem three_d_part2(double eps = 0.1, Surface s = Surface::plane) {
  if (!(eps > 0 && eps < 1)) throw HypothesisError("quadrature", "3d part 2 needs 0 < eps < 1");
  if (s != Surface::plane && s != Surface::sphere) throw StructuralError("quadrature", "3d lemma needs a plane or sphere");
  return {"3d-part2", s, {{0.5, 1.0}, {1.0, 2.0 - eps}, {0.0, 2.0 - eps}}, false};
}

}  // namespace lemmas

namespace detail {

struct LinePoint {
  double x;
  double e;  // effective exponent of |x - x0|^{-e}
  bool exact;
};

inline QuadOptions surface_quad_options(double rel) {
  QuadOptions o;
  o.rel_tol = rel;
  o.abs_tol = 1e-300;
  o.max_panels = 4000;
  return o;
}

// Integral over the finite interval [lo, hi]. Exact points get Gauss-Jacobi
// panels reaching half-way to the nearest other feature; everything else is
// adaptive Gauss-Kronrod with breakpoints at the (near-)singular points.
template <class F>
double integrate_segment(F& f, double lo, double hi, std::vector<LinePoint> pts, double rel) {
  std::sort(pts.begin(), pts.end(), [](const LinePoint& a, const LinePoint& b) { return a.x < b.x; });
  std::vector<double> cuts{lo, hi};
  struct Panel {
    double s, w, e;
  };
  std::vector<Panel> jp;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (p.x < lo || p.x > hi) continue;
    cuts.push_back(p.x);
    if (!p.exact || p.e <= 0.0) continue;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i && pts[j].x != p.x) gap = std::min(gap, std::abs(pts[j].x - p.x));
    for (double b : {lo, hi})
      if (b != p.x) gap = std::min(gap, std::abs(b - p.x));
    const double w = 0.5 * gap;
    if (p.x > lo) {
      jp.push_back({p.x, -w, p.e});
      cuts.push_back(p.x - w);
    }
    if (p.x < hi) {
      jp.push_back({p.x, w, p.e});
      cuts.push_back(p.x + w);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  const auto opt = surface_quad_options(rel);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    const Panel* hit = nullptr;
    for (const auto& q : jp) {
      const double u = std::min(q.s, q.s + q.w), v = std::max(q.s, q.s + q.w);
      if (u == a && v == b) hit = &q;
    }
    if (hit) {
      const double s = hit->s, e = hit->e;
      total += jacobi_panel([&](double x) { return f(x) * std::pow(std::abs(x - s), e); }, s, hit->w, e);
    } else {
      total += integrate<double>(f, a, b, opt).value;
    }
  }
  return total;
}

// \int_R^\infty f, with f ~ r^{-m}, m > 1, via r = R s^{-1/(m-1)}.
template <class F>
double integrate_tail(F& f, double R, double m, double rel) {
  if (!(m > 1.0)) throw HypothesisError("quadrature", "integrand is not integrable at infinity");
  const double q = 1.0 / (m - 1.0);
  auto g = [&](double s) {
    const double r = R * std::pow(s, -q);
    return f(r) * q * r / s;
  };
  return integrate<double>(g, 0.0, 1.0, surface_quad_options(rel)).value;
}

inline bool aligned(double p, double target) { return std::abs(p - target) <= 1e-14 * std::max(1.0, std::abs(target)); }

}  // namespace detail

struct SurfaceOptions {
  double rel_tol = 1e-10;
  // Sup search over the radius (circle, sphere) or offset (line, plane).
  double scan_lo = 1e-3;
  double scan_hi = 1e4;
  std::size_t scan_points = 81;
  std::optional<double> fixed_parameter;
};

/// The integral at a given |xi| and surface parameter.
inline double surface_integral(const SurfaceProblem& pb, double X, double p, const SurfaceOptions& opt = {}) {
  if (!(X > 0.0)) throw RangeError("quadrature", "|xi| must be positive");
  if (!(p >= 0.0)) throw RangeError("quadrature", "surface parameter must be nonnegative");
  if (pb.factors.empty()) throw StructuralError("quadrature", "no singular factors");
  const double rel = opt.rel_tol;
  const auto& fs = pb.factors;
  try {
    switch (pb.surface) {
      case Surface::circle:
      case Surface::sphere: {
        const bool sph = pb.surface == Surface::sphere;
        if (p == 0.0) throw RangeError("quadrature", "radius must be positive");
        double rho = p;
        std::vector<detail::LinePoint> pts;
        for (const auto& f : fs) {
          if (f.c == 0.0) continue;
          const double target = std::abs(f.c) * X;
          if (detail::aligned(rho, target)) {
            rho = target;
            pts.push_back({f.c > 0 ? 0.0 : std::numbers::pi, sph ? f.e - 1.0 : f.e, true});
          }
        }
        // Squared distances in cancellation-free form around theta = 0 and pi.
        auto integrand = [&](double th) {
          double v = 1.0;
          const double s0 = std::sin(0.5 * th), s1 = std::cos(0.5 * th);
          for (const auto& f : fs) {
            const double cx = f.c * X;
            const double d2 = f.c >= 0 ? (rho - cx) * (rho - cx) + 4.0 * cx * rho * s0 * s0
                                       : (rho + cx) * (rho + cx) - 4.0 * cx * rho * s1 * s1;
            v *= std::pow(d2, -0.5 * f.e);
          }
          const double measure = sph ? 2.0 * std::numbers::pi * std::sin(th) * (pb.unit_measure ? 1.0 : rho * rho)
                                     : 2.0 * (pb.unit_measure ? 1.0 : rho);
          return v * measure;
        };
        return detail::integrate_segment(integrand, 0.0, std::numbers::pi, pts, rel);
      }
      case Surface::line: {
        const double d = p;
        std::vector<detail::LinePoint> pts;
        double lo = 0.0, hi = 0.0;
        for (const auto& f : fs) {
          pts.push_back({f.c * X, f.e, d == 0.0});
          lo = std::min(lo, f.c * X);
          hi = std::max(hi, f.c * X);
        }
        auto integrand = [&](double s) {
          double v = 1.0;
          for (const auto& f : fs) v *= std::pow((s - f.c * X) * (s - f.c * X) + d * d, -0.5 * f.e);
          return v;
        };
        const double R = std::max({std::abs(lo), std::abs(hi), d}) + X;
        auto mirror = [&](double s) { return integrand(-s); };
        const double m = pb.exponent_sum();
        return detail::integrate_segment(integrand, -R, R, pts, rel) + detail::integrate_tail(integrand, R, m, rel) +
               detail::integrate_tail(mirror, R, m, rel);
      }
      case Surface::plane: {
        const double d = p;
        const bool exact = d == 0.0;
        // Disks around each singular point, disjoint by construction.
        std::vector<double> pos;
        for (const auto& f : fs) pos.push_back(f.c * X);
        std::vector<double> rad(fs.size(), X);
        for (std::size_t i = 0; i < fs.size(); ++i)
          for (std::size_t j = 0; j < fs.size(); ++j)
            if (i != j) rad[i] = std::min(rad[i], 0.5 * std::abs(pos[i] - pos[j]));
        for (double r : rad)
          if (r <= 0.0) throw StructuralError("quadrature", "coincident singular points");
        auto factor = [&](std::size_t j, double x, double y) {
          const double dx = x - pos[j];
          return std::pow(dx * dx + y * y + d * d, -0.5 * fs[j].e);
        };
        double total = 0.0;
        const double inner_rel = 0.1 * rel;
        for (std::size_t i = 0; i < fs.size(); ++i) {
          // Polar coordinates centred on the point; its own factor is radial.
          auto ring = [&](double r) {
            auto ang = [&](double phi) {
              double v = 1.0;
              const double x = pos[i] + r * std::cos(phi), y = r * std::sin(phi);
              for (std::size_t j = 0; j < fs.size(); ++j)
                if (j != i) v *= factor(j, x, y);
              return v;
            };
            const double g = 2.0 * integrate<double>(ang, 0.0, std::numbers::pi, detail::surface_quad_options(inner_rel)).value;
            return g * r * std::pow(r * r + d * d, -0.5 * fs[i].e);
          };
          std::vector<detail::LinePoint> pts{{0.0, fs[i].e - 1.0, exact}};
          total += detail::integrate_segment(ring, 0.0, rad[i], pts, rel);
        }
        // Complement, in polar coordinates about the origin.
        double R = 0.0;
        std::vector<double> brk;
        for (std::size_t i = 0; i < fs.size(); ++i) {
          R = std::max(R, std::abs(pos[i]) + rad[i]);
          brk.push_back(std::abs(pos[i]) - rad[i]);
          brk.push_back(std::abs(pos[i]) + rad[i]);
          brk.push_back(std::abs(pos[i]));
        }
        R *= 2.0;
        auto arcs = [&](double r) {
          double a = 0.0, b = std::numbers::pi;
          for (std::size_t i = 0; i < fs.size(); ++i) {
            const double c = std::abs(pos[i]);
            if (c == 0.0) {
              if (r < rad[i]) return std::pair{0.0, 0.0};
              continue;
            }
            if (std::abs(r - c) >= rad[i]) continue;
            const double cosw = std::clamp((r * r + c * c - rad[i] * rad[i]) / (2.0 * r * c), -1.0, 1.0);
            const double w = std::acos(cosw);
            if (pos[i] > 0) a = std::max(a, w);
            else b = std::min(b, std::numbers::pi - w);
          }
          return std::pair{a, std::max(a, b)};
        };
        auto shell = [&](double r) {
          const auto [a, b] = arcs(r);
          if (b <= a) return 0.0;
          auto ang = [&](double phi) {
            double v = 1.0;
            const double x = r * std::cos(phi), y = r * std::sin(phi);
            for (std::size_t j = 0; j < fs.size(); ++j) v *= factor(j, x, y);
            return v;
          };
          return 2.0 * r * integrate<double>(ang, a, b, detail::surface_quad_options(inner_rel)).value;
        };
        std::vector<detail::LinePoint> bp;
        for (double b : brk)
          if (b > 0.0) bp.push_back({b, 0.0, false});
        total += detail::integrate_segment(shell, 0.0, R, bp, rel);
        total += detail::integrate_tail(shell, R, pb.exponent_sum() - 1.0, rel);
        return total;
      }
    }
  } catch (const RefinementError& e) {
    std::ostringstream os;
    os << e.what() << " [" << pb.name << " on " << to_string(pb.surface) << ", |xi| = " << X << ", parameter = " << p
       << "]";
    throw RefinementError("quadrature", os.str());
  }
  return 0.0;
}

struct SupSample {
  double xi = 0.0;
  double sup = 0.0;
  double argmax = 0.0;
};

struct SurfaceFit {
  std::string name;
  double slope = 0.0;
  double intercept = 0.0;
  double expected_slope = 0.0;
  std::vector<SupSample> samples;
};

/// Sup over the surface parameter: log scan, golden-section refinement around
/// the best scan point, and the exactly aligned configurations.
inline SupSample surface_sup(const SurfaceProblem& pb, double X, const SurfaceOptions& opt = {}) {
  SupSample best{X, -1.0, 0.0};
  auto consider = [&](double p) {
    const double v = surface_integral(pb, X, p, opt);
    if (v > best.sup) best = {X, v, p};
    return v;
  };
  if (opt.fixed_parameter) {
    consider(*opt.fixed_parameter);
    return best;
  }
  const bool radial = pb.surface == Surface::circle || pb.surface == Surface::sphere;
  const std::size_t n = std::max<std::size_t>(opt.scan_points, 3);
  std::vector<double> grid(n), vals(n);
  const double l0 = std::log(opt.scan_lo), l1 = std::log(opt.scan_hi);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = std::exp(l0 + (l1 - l0) * i / (n - 1));
    vals[i] = consider(grid[i]);
  }
  const auto k = static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
  double a = std::log(grid[k == 0 ? 0 : k - 1]), b = std::log(grid[std::min(k + 1, n - 1)]);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = consider(std::exp(c)), fd = consider(std::exp(d));
  while (b - a > 1e-6) {
    if (fc > fd) {
      b = d, d = c, fd = fc;
      c = b - gr * (b - a);
      fc = consider(std::exp(c));
    } else {
      a = c, c = d, fc = fd;
      d = a + gr * (b - a);
      fd = consider(std::exp(d));
    }
  }
  if (radial) {
    for (const auto& f : pb.factors)
      if (f.c != 0.0) consider(std::abs(f.c) * X);
  } else {
    consider(0.0);
  }
  return best;
}

/// Sup at each |xi| and a least-squares fit of log sup against log |xi|.
inline SurfaceFit surface_bound_check(const SurfaceProblem& pb, const std::vector<double>& xi_samples,
                                      const SurfaceOptions& opt = {}) {
  if (xi_samples.size() < 2) throw RangeError("quadrature", "need at least two |xi| samples");
  const auto [lo, hi] = std::minmax_element(xi_samples.begin(), xi_samples.end());
  if (std::log10(*hi / *lo) < 1.5) throw RangeError("quadrature", "|xi| samples must span at least 1.5 decades");
  SurfaceFit fit;
  fit.name = pb.name;
  fit.expected_slope = pb.expected_slope();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double X : xi_samples) {
    auto s = surface_sup(pb, X, opt);
    fit.samples.push_back(s);
    const double x = std::log(X), y = std::log(s.sup);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double m = static_cast<double>(xi_samples.size());
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / m;
  return fit;
}

inline std::vector<double> log_samples(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1));
  return v;
}

}  // namespace lensgp::quad
