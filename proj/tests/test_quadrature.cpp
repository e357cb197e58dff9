#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lensgp/quadrature/gauss_jacobi.hpp"
#include "lensgp/quadrature/gauss_kronrod.hpp"
#include "lensgp/quadrature/surface.hpp"

using namespace lensgp;
using namespace lensgp::quad;

namespace {

double beta_fn(double a, double b) { return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)); }

// Riesz composition: int_{R^d} |x - y|^{-a} |y|^{-b} dy = c |x|^{d - a - b}.
double riesz_constant(double d, double a, double b) {
  const double al = d - a, be = d - b;
  return std::pow(std::numbers::pi, d / 2) * std::tgamma(al / 2) * std::tgamma(be / 2) *
         std::tgamma((d - al - be) / 2) /
         (std::tgamma((d - al) / 2) * std::tgamma((d - be) / 2) * std::tgamma((al + be) / 2));
}

}  // namespace

TEST(GaussJacobi, IntegratesWeightedMonomialsExactly) {
  for (auto [alpha, beta] : {std::pair{0.0, -0.7}, {0.0, -0.9875}, {0.5, 0.3}, {-0.4, 1.2}}) {
    auto r = gauss_jacobi(12, alpha, beta);
    for (int k = 0; k < 10; ++k) {
      // int_{-1}^{1} (1-t)^alpha (1+t)^beta (1+t)^k dt = 2^{alpha+beta+k+1} B(alpha+1, beta+k+1)
      double q = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) q += r.weights[i] * std::pow(1 + r.nodes[i], k);
      const double exact = std::pow(2.0, alpha + beta + k + 1) * beta_fn(alpha + 1, beta + k + 1);
      EXPECT_NEAR(q / exact, 1.0, 1e-12) << alpha << " " << beta << " " << k;
    }
  }
  EXPECT_THROW(gauss_jacobi(4, -1.0, 0.0), HypothesisError);
}

TEST(GaussKronrod, SmoothAndDivergentIntegrands) {
  auto r = integrate([](double x) { return std::exp(-x * x); }, -6.0, 6.0);
  EXPECT_NEAR(r.value, std::sqrt(std::numbers::pi), 1e-13);
  QuadOptions o;
  o.max_panels = 200;
  EXPECT_THROW(integrate([](double x) { return 1.0 / x; }, 0.0, 1.0, o), RefinementError);
}

TEST(SurfaceIntegral, AlignedCircleClosedForm) {
  // rho = |xi|: int_0^{2pi} (2 rho sin(th/2))^{-a} rho^{1-b} dth
  //           = rho^{1-a-b} 2^{-a} 2 sqrt(pi) Gamma((1-a)/2) / Gamma(1 - a/2)
  for (auto [a, b] : {std::pair{0.7, 0.7}, {0.9, 0.3}, {0.55, 0.95}}) {
    auto pb = lemmas::two_d_part1(a, b);
    for (double X : {0.5, 3.0}) {
      const double exact = std::pow(X, 1 - a - b) * std::pow(2.0, -a) * 2 * std::sqrt(std::numbers::pi) *
                           std::tgamma((1 - a) / 2) / std::tgamma(1 - a / 2);
      EXPECT_NEAR(surface_integral(pb, X, X) / exact, 1.0, 1e-10);
    }
  }
}

TEST(SurfaceIntegral, AlignedSphereClosedForm) {
  // rho = |xi|: 2 pi rho^{2-a-b} 2^{2-a} / (2 - a)
  const double a = 1.2, b = 1.2, X = 1.7;
  auto pb = lemmas::three_d_part1(a, b, Surface::sphere);
  const double exact = 2 * std::numbers::pi * std::pow(X, 2 - a - b) * std::pow(2.0, 2 - a) / (2 - a);
  EXPECT_NEAR(surface_integral(pb, X, X) / exact, 1.0, 1e-10);
}

TEST(SurfaceIntegral, LinesAndPlanesThroughTheSingularitiesMatchRiesz) {
  for (double X : {0.5, 4.0}) {
    auto line = lemmas::two_d_part1(0.7, 0.6, Surface::line);
    EXPECT_NEAR(surface_integral(line, X, 0.0) / (riesz_constant(1, 0.7, 0.6) * std::pow(X, 1 - 1.3)), 1.0, 1e-8);
    auto plane = lemmas::three_d_part1(1.2, 1.3);
    EXPECT_NEAR(surface_integral(plane, X, 0.0) / (riesz_constant(2, 1.2, 1.3) * std::pow(X, 2 - 2.5)), 1.0, 1e-8);
  }
}

TEST(SurfaceIntegral, OffAlignmentAgreesWithCompositeSimpson) {
  auto pb = lemmas::two_d_part2();
  const double X = 2.0, rho = 1.3;
  const int m = 200000;
  const double h = 2 * std::numbers::pi / m;
  auto f = [&](double th) {
    const double c = std::cos(th), s = std::sin(th);
    const double d1 = std::hypot(X - rho * c, rho * s), d2 = std::hypot(X + rho * c, rho * s);
    return std::pow(d1, -(1 - 1.0 / 80)) * std::pow(d2, -(1 - 1.0 / 80));
  };
  double simpson = f(0) + f(2 * std::numbers::pi);
  for (int i = 1; i < m; ++i) simpson += (i % 2 ? 4 : 2) * f(i * h);
  simpson *= h / 3;
  EXPECT_NEAR(surface_integral(pb, X, rho) / simpson, 1.0, 1e-10);
}

TEST(SurfaceIntegral, HomogeneousInXi) {
  // I(s xi, s p) = s^{slope} I(xi, p) for every geometry.
  std::vector<std::pair<SurfaceProblem, double>> cases{{lemmas::two_d_part1(0.7, 0.7), 0.8},
                                                       {lemmas::two_d_part1(0.7, 0.7, Surface::line), 0.3},
                                                       {lemmas::three_d_part1(1.2, 1.2, Surface::sphere), 2.2},
                                                       {lemmas::three_d_part2(0.1), 0.0}};
  for (const auto& [pb, p] : cases) {
    const double s = 3.7;
    const double r = surface_integral(pb, s * 1.3, s * p) / surface_integral(pb, 1.3, p);
    EXPECT_NEAR(r / std::pow(s, pb.expected_slope()), 1.0, 1e-8) << pb.name;
  }
}

TEST(SurfaceBound, LemmaSlopes) {
  const auto xs = log_samples(0.5, 50.0, 9);
  auto p1 = surface_bound_check(lemmas::two_d_part1(0.7, 0.7), xs);
  EXPECT_NEAR(p1.slope, -0.4, 0.05);
  auto p2 = surface_bound_check(lemmas::two_d_part2(1.0 / 80), xs);
  EXPECT_NEAR(p2.slope, -(2 - 2.0 / 80), 0.05);
  SurfaceOptions through_origin;
  through_origin.fixed_parameter = 0.0;
  auto p3 = surface_bound_check(lemmas::three_d_part1(1.2, 1.2), xs, through_origin);
  EXPECT_NEAR(p3.slope, -0.4, 0.05);
  // The sup is attained where the surface passes through a singular point.
  for (const auto& s : p1.samples) EXPECT_NEAR(s.argmax, s.xi, 1e-12 * s.xi);
  auto sph = surface_bound_check(lemmas::three_d_part2(0.1, Surface::sphere), xs);
  EXPECT_NEAR(sph.slope, -(3 - 0.2), 0.05);
}

TEST(SurfaceBound, Preconditions) {
  EXPECT_THROW(lemmas::two_d_part1(0.3, 0.5), HypothesisError);
  EXPECT_THROW(lemmas::two_d_part1(1.2, 0.5), HypothesisError);
  EXPECT_THROW(lemmas::three_d_part1(1.0, 0.9), HypothesisError);
  EXPECT_THROW(lemmas::three_d_part1(1.2, 1.2, Surface::circle), StructuralError);
  EXPECT_THROW(surface_bound_check(lemmas::two_d_part1(0.7, 0.7), {1.0, 10.0}), RangeError);
  EXPECT_THROW(surface_integral(lemmas::two_d_part1(0.7, 0.7), 1.0, 0.0), RangeError);
}
