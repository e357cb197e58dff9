#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lensgp/spectral/fft.hpp"
#include "lensgp/spectral/grid.hpp"
#include "lensgp/spectral/operators.hpp"

namespace lensgp {

struct Diagnostics {
  double time = 0.0;
  double mass = 0.0;
  double kinetic = 0.0;    // (1/2) int |grad u|^2
  double potential = 0.0;  // int V |u|^2
  double interaction = 0.0;  // (b0/2) int |u|^4
  double tail = 0.0;
  double total() const { return kinetic + potential + interaction; }
};

/// (1/2) int |grad u|^2 from the Fourier quadratic form.
inline double kinetic_energy(const WaveField& f) {
  WaveField g = f;
  fft::forward(g);
  const std::size_t r = f.grid.rank();
  std::vector<std::vector<double>> k(r);
  for (std::size_t d = 0; d < r; ++d) k[d] = wavenumbers(f.grid.axis(d));
  std::vector<std::size_t> idx(r, 0);
  double s = 0.0;
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    double k2 = 0.0;
    for (std::size_t d = 0; d < r; ++d) k2 += k[d][idx[d]] * k[d][idx[d]];
    s += k2 * std::norm(g.data[flat]);
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < f.grid.axis(d).points) break;
      idx[d] = 0;
    }
  }
  return 0.5 * s * f.grid.cell_volume() / static_cast<double>(f.size());
}

/// Diagnostics for a field under the potential V(x) (may be empty) and cubic
/// coupling b0.
inline Diagnostics diagnostics(const WaveField& f, const std::function<double(std::span<const double>)>& V = {},
                               double b0 = 0.0) {
  Diagnostics d;
  d.time = f.time;
  d.mass = f.norm_squared();
  d.kinetic = kinetic_energy(f);
  const double dv = f.grid.cell_volume();
  double pot = 0.0, quart = 0.0;
  for_each_point(f.grid, [&](std::size_t i, std::span<const double> x) {
    const double w = std::norm(f.data[i]);
    if (V) pot += V(x) * w;
    quart += w * w;
  });
  d.potential = pot * dv;
  d.interaction = 0.5 * b0 * quart * dv;
  d.tail = spectral_tail(f);
  return d;
}

}  // namespace lensgp
