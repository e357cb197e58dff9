#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"

namespace lensgp::quad {

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
inline constexpr std::array<double, 8> kronrod_x{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_w{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_w{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T, class F>
std::pair<T, double> gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const T fc = f(c);
  T k = kronrod_w[7] * fc;
  T g = gauss_w[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kronrod_x[i];
    const T s = f(c - dx) + f(c + dx);
    k += kronrod_w[i] * s;
    if (i % 2 == 1) g += gauss_w[i / 2] * s;
  }
  k *= h;
  g *= h;
  return {k, std::abs(k - g)};
}

}  // namespace detail

struct QuadOptions {
  double abs_tol = 1e-13;
  double rel_tol = 1e-12;
  std::size_t max_panels = 20000;
  bool throw_on_failure = true;
};

template <class T = double>
struct QuadResult {
  T value{};
  double error = 0.0;
  std::size_t panels = 0;
  bool converged = true;
};

/// Adaptive Gauss-Kronrod (G7/K15) integration over [a, b], splitting first at
/// the given interior breakpoints (discontinuities of f or its derivatives).
template <class T = double, class F>
QuadResult<T> integrate(F&& f, double a, double b, const QuadOptions& opt = {},
                        const std::vector<double>& breakpoints = {}) {
  QuadResult<T> r;
  if (a == b) return r;
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::vector<double> cuts{a};
  for (double p : breakpoints)
    if (p > a && p < b) cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  struct P {
    double a, b;
    T value;
    double error;
    bool operator<(const P& o) const { return error < o.error; }
  };
  std::priority_queue<P> heap;
  T total{};
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto [v, e] = detail::gk15<T>(f, cuts[i], cuts[i + 1]);
    heap.push({cuts[i], cuts[i + 1], v, e});
    total += v;
    err += e;
  }
  std::size_t panels = heap.size();
  while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) && panels < opt.max_panels) {
    P p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    if (!(m > p.a && m < p.b)) {  // interval exhausted at machine precision
      heap.push({p.a, p.b, p.value, 0.0});
      err -= p.error;
      continue;
    }
    auto [v1, e1] = detail::gk15<T>(f, p.a, m);
    auto [v2, e2] = detail::gk15<T>(f, m, p.b);
    total += v1 + v2 - p.value;
    err += e1 + e2 - p.error;
    heap.push({p.a, m, v1, e1});
    heap.push({m, p.b, v2, e2});
    ++panels;
  }
  // Recompute the sums from the panels to remove accumulated cancellation.
  total = T{};
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  r.value = sign * total;
  r.error = err;
  r.panels = panels;
  r.converged = err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) * 1.0000001;
  if (!r.converged && opt.throw_on_failure)
    throw RefinementError("quadrature", "adaptive quadrature did not converge: error estimate " +
                                            std::to_string(err) + " after " + std::to_string(panels) +
                                            " panels");
  return r;
}

}  // namespace lensgp::quad
