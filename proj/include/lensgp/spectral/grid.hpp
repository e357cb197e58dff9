#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"

namespace lensgp {

using cplx = std::complex<double>;

/// One axis of a uniform periodic box [-L/2, L/2) sampled at M points.
struct Axis {
  std::size_t points = 0;
  double length = 0.0;

  double spacing() const { return length / static_cast<double>(points); }
  double x(std::size_t j) const { return -0.5 * length + static_cast<double>(j) * spacing(); }

  /// Angular wavenumber of DFT bin j. The Nyquist bin is assigned -pi/h.
  double k(std::size_t j) const {
    const auto m = static_cast<std::ptrdiff_t>(points);
    auto s = static_cast<std::ptrdiff_t>(j);
    if (s >= m / 2) s -= m;
    return 2.0 * std::numbers::pi / length * static_cast<double>(s);
  }
  double k_max() const { return std::numbers::pi / spacing(); }
  bool is_nyquist(std::size_t j) const { return j == points / 2; }

  bool operator==(const Axis&) const = default;
};

/// Product of uniform periodic axes. Storage order is row-major with the
/// last axis fastest.
class GridSpec {
public:
  GridSpec() = default;

  explicit GridSpec(std::vector<Axis> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw StructuralError("spectral", "grid needs at least one axis");
    for (const auto& a : axes_) {
      if (a.points < 16 || (a.points & (a.points - 1)) != 0)
        throw StructuralError("spectral", "grid axes need a power-of-two point count >= 16, got " +
                                              std::to_string(a.points));
      if (!(a.length > 0.0) || !std::isfinite(a.length))
        throw StructuralError("spectral", "grid box length must be positive and finite");
    }
    strides_.assign(axes_.size(), 1);
    for (std::size_t d = axes_.size() - 1; d > 0; --d) strides_[d - 1] = strides_[d] * axes_[d].points;
    size_ = strides_[0] * axes_[0].points;
  }

  /// Isotropic grid: `rank` identical axes.
  static GridSpec cube(std::size_t rank, std::size_t points, double length) {
    return GridSpec(std::vector<Axis>(rank, Axis{points, length}));
  }

  std::size_t rank() const { return axes_.size(); }
  std::size_t size() const { return size_; }
  const Axis& axis(std::size_t d) const { return axes_.at(d); }
  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t stride(std::size_t d) const { return strides_.at(d); }

  /// Volume element h_1 * ... * h_r.
  double cell_volume() const {
    double v = 1.0;
    for (const auto& a : axes_) v *= a.spacing();
    return v;
  }

  std::vector<int> shape() const {
    std::vector<int> s;
    for (const auto& a : axes_) s.push_back(static_cast<int>(a.points));
    return s;
  }

  /// Sub-grid made of axes [first, first + count).
  GridSpec slice(std::size_t first, std::size_t count) const {
    return GridSpec(std::vector<Axis>(axes_.begin() + static_cast<std::ptrdiff_t>(first),
                                      axes_.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }

  /// Concatenation of two grids (used for kernels gamma(y; y')).
  static GridSpec concat(const GridSpec& a, const GridSpec& b) {
    std::vector<Axis> axes = a.axes();
    axes.insert(axes.end(), b.axes().begin(), b.axes().end());
    return GridSpec(std::move(axes));
  }

  bool operator==(const GridSpec& o) const { return axes_ == o.axes_; }

private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
  if (!(a == b)) throw GridMismatchError("spectral", std::string(where) + ": grid mismatch");
}

/// Complex scalar field sampled on a GridSpec.
struct WaveField {
  GridSpec grid;
  std::vector<cplx> data;
  double time = 0.0;
  std::string tag;

  WaveField() = default;
  explicit WaveField(GridSpec g, double t = 0.0, std::string tg = {})
      : grid(std::move(g)), data(grid.size(), cplx{}), time(t), tag(std::move(tg)) {}

  std::size_t size() const { return data.size(); }
  std::span<cplx> span() { return data; }
  std::span<const cplx> span() const { return data; }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& z : data) s += std::norm(z);
    return s * grid.cell_volume();
  }
  double norm() const { return std::sqrt(norm_squared()); }

  WaveField& operator*=(cplx s) {
    for (auto& z : data) z *= s;
    return *this;
  }
  WaveField& operator+=(const WaveField& o) {
    require_same_grid(grid, o.grid, "WaveField::operator+=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  WaveField& operator-=(const WaveField& o) {
    require_same_grid(grid, o.grid, "WaveField::operator-=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
  }
};

inline WaveField operator-(WaveField a, const WaveField& b) { return a -= b; }
inline WaveField operator+(WaveField a, const WaveField& b) { return a += b; }
inline WaveField operator*(cplx s, WaveField a) { return a *= s; }

/// L2 inner product <a, b> = sum conj(a) b dV.
inline cplx inner(const WaveField& a, const WaveField& b) {
  require_same_grid(a.grid, b.grid, "inner");
  cplx s{};
  for (std::size_t i = 0; i < a.data.size(); ++i) s += std::conj(a.data[i]) * b.data[i];
  return s * a.grid.cell_volume();
}

/// ||a - b|| / ||b||, or ||a - b|| when b vanishes.
inline double relative_l2_error(const WaveField& a, const WaveField& b) {
  require_same_grid(a.grid, b.grid, "relative_l2_error");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    num += std::norm(a.data[i] - b.data[i]);
    den += std::norm(b.data[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Calls fn(flat_index, coords) over every grid point in storage order.
template <class Fn>
void for_each_point(const GridSpec& g, Fn&& fn) {
  const std::size_t r = g.rank();
  std::vector<std::size_t> idx(r, 0);
  std::vector<double> x(r);
  for (std::size_t d = 0; d < r; ++d) x[d] = g.axis(d).x(0);
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    fn(flat, std::span<const double>(x));
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < g.axis(d).points) {
        x[d] = g.axis(d).x(idx[d]);
        break;
      }
      idx[d] = 0;
      x[d] = g.axis(d).x(0);
    }
  }
}

/// Samples fn(coords) onto a new field.
template <class Fn>
WaveField sample(const GridSpec& g, Fn&& fn, double time = 0.0, std::string tag = {}) {
  WaveField f(g, time, std::move(tag));
  for_each_point(g, [&](std::size_t i, std::span<const double> x) { f.data[i] = fn(x); });
  return f;
}

}  // namespace lensgp
