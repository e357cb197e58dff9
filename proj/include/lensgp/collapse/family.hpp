#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "lensgp/collapse/separable.hpp"
#include "lensgp/parallel.hpp"

namespace lensgp::collapse {

/// exp(-|x - center|^2 / (2 width^2)) exp(i momentum . x)
struct GaussianFactor {
  double width = 1.0;
  std::vector<double> center;
  std::vector<double> momentum;

  double coord(const std::vector<double>& v, std::size_t d) const { return d < v.size() ? v[d] : 0.0; }

  GaussianFactor rescaled(double lambda) const {
    GaussianFactor g{width / lambda, center, momentum};
    for (auto& c : g.center) c /= lambda;
    for (auto& p : g.momentum) p *= lambda;
    return g;
  }

  WaveField sample(const GridSpec& g, double t0 = 0.0) const {
    return lensgp::sample(
        g,
        [&](std::span<const double> x) {
          double r2 = 0.0, ph = 0.0;
          for (std::size_t d = 0; d < x.size(); ++d) {
            const double y = x[d] - coord(center, d);
            r2 += y * y;
            ph += coord(momentum, d) * x[d];
          }
          return std::exp(-r2 / (2 * width * width)) * std::polar(1.0, ph);
        },
        t0);
  }
};

struct GaussianTerm {
  cplx weight{1.0, 0.0};
  std::array<GaussianFactor, 3> blocks;
};

/// Grid selection for a Gaussian state that must stay resolved and inside the
/// box over the LHS window. The spacing is snapped to the lattice 2^{j/3}, so
/// rescaled members generally land on grids that are not rescaled copies.
struct GridPolicy {
  double resolve = 6.8;      // width * (k_max * 7/8 - |p|) at the band edge
  double box = 4.5;          // spread widths kept inside each half box
  double lattice = 1.0 / 3;  // log2 step of the spacing lattice
  std::size_t min_points = 16;
  std::size_t max_points = 1024;
};

inline GridSpec choose_grid(const std::vector<GaussianTerm>& terms, std::size_t n, double a_max, double window,
                            const GridPolicy& pol = {}) {
  double kmax = 0.0, half = 0.0;
  for (const auto& t : terms)
    for (const auto& f : t.blocks)
      for (std::size_t d = 0; d < n; ++d) {
        const double p = std::abs(f.coord(f.momentum, d));
        kmax = std::max(kmax, (p + pol.resolve / f.width) * 8.0 / 7.0);
        const double spread = f.width * std::sqrt(1.0 + std::pow(2.0 * a_max * window / (f.width * f.width), 2));
        const double drift = std::abs(f.coord(f.center, d)) + 2.0 * a_max * p * window;
        half = std::max(half, drift + pol.box * spread);
      }
  const double h_req = std::numbers::pi / kmax;
  const double h = std::exp2(std::floor(std::log2(h_req) / pol.lattice) * pol.lattice);
  std::size_t m = pol.min_points;
  while (double(m) * h < 2.0 * half) m *= 2;
  if (m > pol.max_points)
    throw CapacityError("collapse", "grid for the requested family needs " + std::to_string(m) + " points per axis");
  return GridSpec::cube(n, m, double(m) * h);
}

inline SeparableState gaussian_state(const std::vector<GaussianTerm>& terms, const GridSpec& g) {
  SeparableState s(g);
  for (const auto& t : terms) s.add(t.weight, t.blocks[0].sample(g), t.blocks[1].sample(g), t.blocks[2].sample(g));
  return s;
}

struct FamilyMember {
  std::string id;
  double scale = 1.0;
  SeparableState state;
  LhsOptions lhs;
};

/// The base state used by the scale-invariance study: three distinct Gaussians,
/// two of them moving, so the trace is not a symmetric product.
inline std::vector<GaussianTerm> reference_terms(std::size_t n) {
  std::vector<double> c1(n, 0.0), p1(n, 0.0), c2(n, 0.0), p2(n, 0.0);
  c1[0] = 0.5;
  p1[0] = 0.3;
  c2[n - 1] = -0.4;
  p2[n - 1] = -0.2;
  GaussianTerm t;
  t.blocks = {GaussianFactor{1.0, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)},
              GaussianFactor{1.0, c1, p1}, GaussianFactor{1.0, c2, p2}};
  return {t};
}

/// Members f(lambda x) of a Gaussian base state, each on its own grid with a
/// window of `window_units` spreading times width^2 / (2 a_max).
inline std::vector<FamilyMember> gaussian_family(const std::vector<GaussianTerm>& base, std::size_t n,
                                                 const std::vector<double>& lambdas, double a_max,
                                                 double window_units = 6.0, std::size_t intervals = 96,
                                                 const GridPolicy& pol = {}) {
  std::vector<FamilyMember> out;
  for (double lam : lambdas) {
    if (!(lam > 0.0)) throw RangeError("collapse", "scales must be positive");
    std::vector<GaussianTerm> terms = base;
    double wmin = INFINITY;
    for (auto& t : terms)
      for (auto& f : t.blocks) {
        f = f.rescaled(lam);
        wmin = std::min(wmin, f.width);
      }
    const double W = window_units * wmin * wmin / (2.0 * a_max);
    const GridSpec g = choose_grid(terms, n, a_max, W, pol);
    FamilyMember m;
    char buf[64];
    std::snprintf(buf, sizeof buf, "lambda=%.6g", lam);
    m.id = buf;
    m.scale = lam;
    m.state = gaussian_state(terms, g);
    m.lhs.window = W;
    m.lhs.intervals = intervals;
    out.push_back(std::move(m));
  }
  return out;
}

/// lambda = 2^{k/2}, k = -4 .. 4.
inline std::vector<double> default_scales() {
  std::vector<double> v;
  for (int k = -4; k <= 4; ++k) v.push_back(std::exp2(0.5 * k));
  return v;
}

/// a_1 = 1/2 and a_l(t) = 3/8 + tanh(t)/8 on the remaining axes: values in
/// (1/4, 1/2), floor c0 = 1/4, and an absolute time scale that breaks the
/// parabolic rescaling symmetry.
inline CoefficientSchedule anisotropic_schedule(std::size_t n) {
  CoefficientSchedule s;
  s.c0 = 0.25;
  for (std::size_t l = 0; l < n; ++l) {
    if (l == 0) {
      s.a.push_back([](double) { return 0.5; });
      s.primitive.push_back([](double t) { return 0.5 * t; });
    } else {
      s.a.push_back([](double t) { return 0.375 + 0.125 * std::tanh(t); });
      s.primitive.push_back([](double t) {
        const double at = std::abs(t);
        return 0.375 * t + 0.125 * (at + std::log1p(std::exp(-2.0 * at)) - std::log(2.0));
      });
    }
  }
  return s;
}

struct MemberResult {
  std::string id;
  double scale = 1.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double tail_fraction = 0.0;
  double edge_ratio = 0.0;
  std::size_t points = 0;
  double length = 0.0;
};

struct ConstantEstimate {
  std::vector<MemberResult> members;
  double max_ratio = 0.0;
  double min_ratio = 0.0;
  double spread = 0.0;  // max / min - 1

  void write_csv(std::ostream& os) const {
    os << "member,scale,lhs,rhs,ratio\n";
    char buf[256];
    for (const auto& m : members) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n", m.id.c_str(), m.scale, m.lhs, m.rhs, m.ratio);
      os << buf;
    }
  }
};

/// LHS / RHS for every member. Members run in parallel; the reduction is in
/// member order.
inline ConstantEstimate estimate_constant(const std::vector<FamilyMember>& family, const CoefficientSchedule& sched,
                                          const SignPattern& signs, std::size_t threads = 1) {
  if (family.empty()) throw StructuralError("collapse", "empty family");
  ConstantEstimate est;
  est.members.resize(family.size());
  // Degenerate members are rejected before any LHS work.
  std::vector<double> rhs(family.size());
  for (std::size_t i = 0; i < family.size(); ++i) {
    rhs[i] = collapse_rhs(family[i].state);
    if (!(rhs[i] > 0.0)) throw DegenerateMemberError("collapse", "member " + family[i].id + " has zero RHS");
  }
  parallel_for(family.size(), threads, [&](std::size_t i) {
    const auto& m = family[i];
    const auto l = collapse_lhs(m.state, sched, signs, m.lhs);
    auto& r = est.members[i];
    r.id = m.id;
    r.scale = m.scale;
    r.lhs = l.value;
    r.rhs = rhs[i];
    r.ratio = l.value / rhs[i];
    r.tail_fraction = l.value > 0.0 ? l.tail / l.value : 0.0;
    r.edge_ratio = l.edge_ratio;
    r.points = m.state.grid().axis(0).points;
    r.length = m.state.grid().axis(0).length;
  });
  est.max_ratio = est.members.front().ratio;
  est.min_ratio = est.members.front().ratio;
  for (const auto& r : est.members) {
    est.max_ratio = std::max(est.max_ratio, r.ratio);
    est.min_ratio = std::min(est.min_ratio, r.ratio);
  }
  est.spread = est.max_ratio / est.min_ratio - 1.0;
  return est;
}

}  // namespace lensgp::collapse
