#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lensgp/manybody.hpp"

using namespace lensgp;
using namespace lensgp::manybody;

namespace {

WaveField packet(std::size_t M, double L, double c = 0.5, double w = 1.0, double p = 0.0) {
  return sample(GridSpec::cube(1, M, L), [&](std::span<const double> x) {
    return std::exp(-(x[0] - c) * (x[0] - c) / (2 * w * w)) * std::polar(1.0, p * x[0]);
  });
}

WaveField packet2(std::size_t M, double L) {
  return sample(GridSpec::cube(2, M, L), [&](std::span<const double> x) {
    return std::exp(-((x[0] - 0.4) * (x[0] - 0.4) + x[1] * x[1] / 1.5) / 2) * std::polar(1.0, 0.3 * x[1]);
  });
}

WaveField ground_state(std::size_t M, double L) {
  return sample(GridSpec::cube(1, M, L), [](std::span<const double> x) {
    return cplx(std::pow(std::numbers::pi, -0.25) * std::exp(-x[0] * x[0] / 2));
  });
}

ManyBodyTrajectory run(const WaveField& phi0, std::size_t N, const SwitchSpec& sw, const InteractionSpec& v,
                       const std::vector<double>& taus, double dt) {
  ManyBodyOptions o;
  o.dt = dt;
  return solve_manybody(factorized(phi0, N), sw, v, taus, o);
}

}  // namespace

TEST(Interaction, BumpIsNormalizedAndScaled) {
  for (std::size_t n : {1u, 2u}) {
    auto v = InteractionSpec::bump(n, 1.3, 0.7);
    EXPECT_NEAR(v.b0, 0.7, 1e-12);
    // Riemann sum of V_N on a fine grid keeps the integral for every N.
    for (std::size_t N : {2u, 4u}) {
      const double h = 2e-3, R = v.support_diameter(N) / 2;
      const int m = static_cast<int>(R / h) + 1;
      double s = 0.0;
      for (int i = -m; i <= m; ++i) {
        if (n == 1) {
          s += v.scaled(std::abs(i * h), N) * h;
        } else {
          for (int j = -m; j <= m; ++j) s += v.scaled(std::hypot(i * h, j * h), N) * h * h;
        }
      }
      EXPECT_NEAR(s, 0.7, 1e-5) << n << " " << N;
    }
  }
  auto bad = InteractionSpec::bump(1, 1.0);
  bad.beta = 0.8;
  EXPECT_THROW(bad.check(), HypothesisError);
  bad.beta = 0.2;
  bad.profile = [](double r) { return r - 0.5; };
  EXPECT_THROW(bad.check(), HypothesisError);
}

TEST(Marginal, FactorizedStateGivesRankOneKernel) {
  const auto phi = packet(32, 12.0, 0.3, 0.9, 0.4);
  for (std::size_t N : {2u, 3u}) {
    auto s = factorized(phi, N);
    EXPECT_NEAR(s.psi.norm_squared(), 1.0, 1e-13);
    auto g = marginal(s, 1);
    EXPECT_NEAR(g.trace().real(), 1.0, 1e-12);
    EXPECT_LE(g.hermitian_defect(), 1e-12);
    EXPECT_LE(gp_distance(g, phi), 1e-13);
  }
}

TEST(Marginal, DistanceBetweenOrthogonalProjectors) {
  const auto a = packet(64, 12.0, 0.0, 1.0);
  const auto b = sample(a.grid, [](std::span<const double> x) { return x[0] * std::exp(-x[0] * x[0] / 2); });
  auto g = marginal(factorized(a, 2), 1);
  EXPECT_NEAR(gp_distance(g, b), std::sqrt(2.0), 1e-12);
  EXPECT_THROW(gp_distance(g, packet(32, 12.0)), GridMismatchError);
}

TEST(Marginal, TwoParticleKernelTracesDownToOneParticleKernel) {
  auto v = InteractionSpec::bump(1, 1.5, 1.0);
  auto tr = run(packet(32, 12.0, 0.5, 0.8, 0.5), 3, presets::harmonic(1), v, {0.3}, 5e-3);
  const auto& s = tr.frames.back();
  auto g1 = marginal(s, 1);
  auto g2 = marginal(s, 2);
  EXPECT_NEAR(g2.trace().real(), 1.0, 1e-12);
  EXPECT_LE(g2.hermitian_defect(), 1e-12);
  auto pt = partial_trace(g2);
  double d = 0.0;
  for (std::size_t i = 0; i < pt.field.size(); ++i) d = std::max(d, std::abs(pt.field.data[i] - g1.field.data[i]));
  EXPECT_LE(d, 1e-10);
  // The interaction has built correlations.
  EXPECT_GT(gp_distance(g1, packet(32, 12.0, 0.5, 0.8, 0.5)), 1e-3);
  EXPECT_THROW(marginal(s, 3), StructuralError);
  EXPECT_THROW(marginal(factorized(packet(32, 12.0), 2), 2), StructuralError);
}

TEST(SolveManybody, NoninteractingFlowStaysFactorized) {
  const std::vector<double> taus{0.1, 0.35, 0.6};
  const auto sw = presets::off_ramp(1);
  for (auto [N, M] : {std::pair<std::size_t, std::size_t>{2, 64}, {3, 32}, {4, 32}}) {
    const auto phi0 = packet(M, 12.0, 0.5, 0.8, 0.7);
    const double dt = 1e-2;
    auto tr = run(phi0, N, sw, InteractionSpec::none(), taus, dt);
    auto ref = gp_reference(phi0, sw, 0.0, taus, dt);
    for (std::size_t i = 0; i < taus.size(); ++i) EXPECT_LE(gp_distance(marginal(tr.frames[i], 1), ref[i]), 1e-8) << N;
  }
}

TEST(SolveManybody, MassAndPermutationSymmetryAlongTheFlow) {
  auto v = InteractionSpec::bump(1, 1.2, 1.0);
  auto tr = run(packet(32, 12.0, 0.4, 0.7, 0.6), 4, presets::on_ramp(1), v, {0.1, 0.2, 0.4}, 1e-2);
  for (const auto& f : tr.summary) {
    EXPECT_NEAR(f.mass, 1.0, 1e-12);
    EXPECT_LE(f.symmetry_defect, 1e-10);
    EXPECT_TRUE(std::isfinite(f.energy_per_particle));
    EXPECT_GT(f.energy_per_particle, 0.0);
  }
  EXPECT_LE(symmetry_defect(tr.frames.back()), 1e-10);

  auto v2 = InteractionSpec::bump(2, 1.5, 1.0);
  ManyBodyOptions o;
  o.dt = 1e-2;
  auto t2 = solve_manybody(factorized(packet2(32, 12.0), 2), presets::harmonic(2), v2, {0.2}, o);
  EXPECT_NEAR(t2.summary.back().mass, 1.0, 1e-12);
  EXPECT_LE(t2.summary.back().symmetry_defect, 1e-10);
  auto g = marginal(t2.frames.back(), 1);
  EXPECT_NEAR(g.trace().real(), 1.0, 1e-12);
}

TEST(SolveManybody, EnergyIsConservedForAStaticTrap) {
  auto v = InteractionSpec::bump(1, 1.5, 1.0);
  auto tr = run(packet(64, 16.0, 0.5, 0.8, 0.3), 2, presets::harmonic(1), v, {0.25, 0.5, 0.75, 1.0}, 2e-3);
  const double e0 = tr.initial_energy / 2;
  for (const auto& f : tr.summary) EXPECT_NEAR(f.energy_per_particle / e0, 1.0, 1e-4);
}

TEST(SolveManybody, SelfOracleOnRefinedGridAndStep) {
  // 2x grid points and half the step; coarse points are a subset of the fine ones.
  auto v = InteractionSpec::bump(1, 1.0, 1.0, 0.2);
  const double tau = 0.2, L = 12.0;
  auto coarse = run(packet(128, L, 0.5, 1.0), 2, presets::harmonic(1), v, {tau}, 2e-3).frames.back();
  auto fine = run(packet(256, L, 0.5, 1.0), 2, presets::harmonic(1), v, {tau}, 1e-3).frames.back();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 128; ++i)
    for (std::size_t j = 0; j < 128; ++j) {
      const cplx a = coarse.psi.data[i * 128 + j], b = fine.psi.data[(2 * i) * 256 + 2 * j];
      num += std::norm(a - b);
      den += std::norm(b);
    }
  EXPECT_LE(std::sqrt(num / den), 1e-4);
}

TEST(SolveManybody, PreconditionsAndCapacity) {
  EXPECT_THROW(factorized(packet(256, 12.0), 4), CapacityError);
  EXPECT_THROW(factorized(packet(16, 12.0), 5), StructuralError);
  EXPECT_THROW(factorized(packet2(16, 12.0), 3), StructuralError);
  ManyBodyOptions o;
  o.memory_cap = 1 << 16;
  EXPECT_THROW(solve_manybody(factorized(packet(64, 12.0), 2), presets::harmonic(1), InteractionSpec::none(), {0.1}, o),
               CapacityError);
  EXPECT_THROW(solve_manybody(factorized(packet(32, 12.0), 2), presets::harmonic(2), InteractionSpec::none(), {0.1}),
               StructuralError);
  // A packet parked at the wall escapes the box.
  EXPECT_THROW(run(packet(32, 12.0, 5.5, 0.5), 2, presets::zero(1), InteractionSpec::none(), {0.1}, 1e-2),
               BoxEscapeError);
}

TEST(Bbgky, NoninteractingResidualIsSmall) {
  const auto sw = presets::off_ramp(1);
  auto tr = run(packet(128, 12.0, 0.5, 0.8, 0.5), 2, sw, InteractionSpec::none(), bbgky_stencil(0.3, 0.01), 2.5e-4);
  auto r = bbgky_residual(tr, InteractionSpec::none(), sw);
  EXPECT_LE(r.residual, 1e-6);
  EXPECT_GT(r.derivative, 0.1 * r.scale);
}

TEST(Bbgky, StaticEigenstateIsStationary) {
  const auto sw = presets::harmonic(1);
  auto tr = run(ground_state(128, 16.0), 2, sw, InteractionSpec::none(), bbgky_stencil(0.2, 0.01), 1e-4);
  auto r = bbgky_residual(tr, InteractionSpec::none(), sw);
  EXPECT_LE(r.residual, 1e-8);
}

TEST(Bbgky, InteractingResidual) {
  auto v = InteractionSpec::bump(1, 1.0, 1.0, 0.2);
  const auto sw = presets::harmonic(1);
  auto tr = run(packet(128, 12.0, 0.5, 1.0), 2, sw, v, bbgky_stencil(0.2, 0.01), 1e-3);
  auto r = bbgky_residual(tr, v, sw);
  EXPECT_LE(r.residual, 1e-3);
  EXPECT_GT(r.collision, 1e-3 * r.scale);

  auto wide = InteractionSpec::bump(1, 0.2, 1.0, 0.2);
  auto t2 = run(packet(64, 12.0, 0.5, 1.0), 2, sw, wide, bbgky_stencil(0.1, 0.01), 1e-3);
  EXPECT_THROW(bbgky_residual(t2, wide, sw), ResolutionError);
}
