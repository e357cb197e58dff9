#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lensgp/traps/switch.hpp"
#include "lensgp/traps/trajectory.hpp"

using namespace lensgp;

namespace {

// Independent scalar RK4 for x'' + eta x = 0, used as a dense-step oracle.
std::pair<double, double> reference_solution(const SwitchSpec& spec, std::size_t axis, double x0, double v0,
                                             double tau, double dt) {
  double x = x0, v = v0, t = 0.0;
  const int n = static_cast<int>(std::llround(tau / dt));
  const double h = tau / n;
  auto eta = [&](double s) { return eval_switch(spec, axis, s); };
  for (int i = 0; i < n; ++i) {
    const double k1x = v, k1v = -eta(t) * x;
    const double k2x = v + 0.5 * h * k1v, k2v = -eta(t + 0.5 * h) * (x + 0.5 * h * k1x);
    const double k3x = v + 0.5 * h * k2v, k3v = -eta(t + 0.5 * h) * (x + 0.5 * h * k2x);
    const double k4x = v + h * k3v, k4v = -eta(t + h) * (x + h * k3x);
    x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    t += h;
  }
  return {x, v};
}

SwitchSpec random_spec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t dim = 1 + rng() % 3;
  const double T0 = 0.5 + 1.5 * u(rng);
  std::vector<SwitchAxis> axes;
  for (std::size_t l = 0; l < dim; ++l) {
    const double a = 2.0 * u(rng), b = 2.0 * u(rng);
    const double t0 = 0.8 * T0 * u(rng);
    const double t1 = t0 + (T0 - t0) * (0.2 + 0.8 * u(rng));
    axes.push_back(SwitchAxis::ramp(a, b, t0, t1));
  }
  return SwitchSpec(axes, T0);
}

}  // namespace

TEST(SwitchSpec, ConditionsOnConstantTraps) {
  auto one = validate_conditions(SwitchSpec({SwitchAxis::constant(1.0)}, 1.0));
  EXPECT_TRUE(one.passed());
  EXPECT_NEAR(one.axes[0].measured, 1.0, 1e-15);

  auto zero = validate_conditions(SwitchSpec({SwitchAxis::constant(0.0)}, 3.7));
  EXPECT_TRUE(zero.passed());
  EXPECT_EQ(zero.axes[0].measured, 0.0);

  auto four = validate_conditions(SwitchSpec({SwitchAxis::constant(4.0)}, 1.0));
  EXPECT_FALSE(four.passed());
  EXPECT_FALSE(four.axes[0].bound_ok);
  EXPECT_NEAR(four.axes[0].measured, 2.0, 1e-15);
}

TEST(SwitchSpec, InitialSlopeAndSupportAreReported) {
  SwitchAxis moving{{0.0, 0.5}, {1.0, 0.5}, {-0.3, 0.0}};
  auto r = validate_conditions(SwitchSpec({moving}, 1.0));
  EXPECT_FALSE(r.axes[0].initial_rest);
  EXPECT_TRUE(r.axes[0].supported);

  auto late = validate_conditions(SwitchSpec({SwitchAxis::ramp(1.0, 0.5, 0.5, 2.0)}, 1.0));
  EXPECT_FALSE(late.axes[0].supported);
  EXPECT_FALSE(late.passed());
}

TEST(SwitchSpec, MalformedKnotsAreStructuralErrors) {
  EXPECT_THROW(SwitchSpec({SwitchAxis{{0.0, 0.5, 0.4}, {1, 1, 1}, {0, 0, 0}}}, 1.0), StructuralError);
  EXPECT_THROW(SwitchSpec({SwitchAxis{{0.1, 0.5}, {1, 1}, {0, 0}}}, 1.0), StructuralError);
  EXPECT_THROW(SwitchSpec({SwitchAxis{{0.0, 0.5}, {1, 1}, {0, 0.2}}}, 1.0), StructuralError);
  // Hermite overshoot below zero.
  EXPECT_THROW(SwitchSpec({SwitchAxis{{0.0, 0.5, 1.0}, {0.1, 0.0, 0.0}, {0.0, -2.0, 0.0}}}, 1.0), StructuralError);
  EXPECT_THROW(SwitchSpec({}, 1.0), StructuralError);
  EXPECT_THROW(SwitchSpec({SwitchAxis::constant(1.0)}, -1.0), StructuralError);
}

TEST(SwitchSpec, EvenExtension) {
  auto h = presets::harmonic();
  EXPECT_EQ(eval_switch(h, 0, -0.3), 1.0);
  auto r = presets::off_ramp();
  EXPECT_EQ(eval_switch(r, 0, 1.0), 0.0);
  EXPECT_EQ(eval_switch(r, 0, -0.5), eval_switch(r, 0, 0.5));
  EXPECT_NEAR(eval_switch(r, 0, 0.5), 0.5, 1e-15);
  EXPECT_EQ(eval_switch(r, 0, 0.1), 1.0);
  EXPECT_THROW(eval_switch(r, 1, 0.0), StructuralError);
}

TEST(SwitchSpec, PresetsSatisfyConditions) {
  for (auto spec : {presets::harmonic(2), presets::off_ramp(), presets::on_ramp(3), presets::anisotropic(2),
                    presets::anisotropic(3)})
    EXPECT_TRUE(validate_conditions(spec).passed()) << spec.name;
}

TEST(Trajectories, HarmonicIsSinCos) {
  auto tr = solve_trajectories(presets::harmonic(1, 1.5), 1e-4);
  double err = 0.0;
  for (int i = 0; i <= 1500; ++i) {
    const double tau = 1e-3 * i;
    const auto s = tr.at(0, tau);
    err = std::max({err, std::abs(s.alpha - std::sin(tau)), std::abs(s.beta - std::cos(tau)),
                    std::abs(s.alpha_dot - std::cos(tau)), std::abs(s.beta_dot + std::sin(tau))});
  }
  EXPECT_LE(err, 1e-8);
}

TEST(Trajectories, FreeIsExact) {
  auto tr = solve_trajectories(presets::zero(1, 2.0), 2e-3);
  for (double tau : {-2.0, -0.7, 0.0, 0.3, 1.9}) {
    EXPECT_NEAR(tr.alpha(0, tau), tau, 1e-13);
    EXPECT_NEAR(tr.beta(0, tau), 1.0, 1e-15);
  }
}

TEST(Trajectories, RampAgreesWithDenseOracle) {
  auto spec = presets::off_ramp();
  auto tr = solve_trajectories(spec);
  for (double tau : {0.2, 0.37, 0.6123, 0.99}) {
    auto [b, bd] = reference_solution(spec, 0, 1.0, 0.0, tau, tr.dt() / 100);
    auto [a, ad] = reference_solution(spec, 0, 0.0, 1.0, tau, tr.dt() / 100);
    const auto s = tr.at(0, tau);
    EXPECT_NEAR(s.beta, b, 1e-10);
    EXPECT_NEAR(s.beta_dot, bd, 1e-10);
    EXPECT_NEAR(s.alpha, a, 1e-10);
    EXPECT_NEAR(s.alpha_dot, ad, 1e-10);
    EXPECT_NEAR(tr.at(0, -tau).beta, b, 1e-10);
  }
  EXPECT_GT(tr.min_abs_beta(0), 0.0);
}

TEST(Trajectories, InitialValuesAndUpsilon) {
  auto tr = solve_trajectories(presets::harmonic());
  EXPECT_EQ(tr.wronskian(0, 0.0), 1.0);
  EXPECT_EQ(tr.upsilon(0, 0.0), 0.0);
  EXPECT_NEAR(tr.upsilon(0, 0.5), std::tan(0.5), 1e-8);
  auto ramp = solve_trajectories(presets::on_ramp());
  EXPECT_NEAR(ramp.upsilon_inverse(0, ramp.upsilon(0, 0.37)), 0.37, 1e-10);
  EXPECT_NEAR(ramp.upsilon_inverse(0, ramp.upsilon(0, -0.81)), -0.81, 1e-10);
  EXPECT_THROW(ramp.upsilon_inverse(0, ramp.upsilon(0, 1.0) * 1.01), RangeError);
  EXPECT_THROW(tr.at(0, 2.0), RangeError);
}

TEST(Trajectories, StepBoundIsEnforced) {
  EXPECT_THROW(solve_trajectories(presets::harmonic(), 0.02), StructuralError);
  EXPECT_THROW(TrajectoryPair(presets::harmonic(), -1.0), StructuralError);
}

TEST(Trajectories, CsvHasDeclaredColumns) {
  auto tr = solve_trajectories(presets::harmonic(2), 1e-2);
  std::ostringstream os;
  tr.write_csv(os);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "axis,tau,alpha,alpha_dot,beta,beta_dot");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 2 * (2 * 105 + 1));
}

// Property checks over the presets and random ramps.
TEST(TrajectoryProperties, WronskianParityMonotonicity) {
  std::mt19937_64 rng(20240611);
  std::vector<SwitchSpec> specs{presets::harmonic(), presets::off_ramp(), presets::on_ramp(), presets::anisotropic()};
  for (int i = 0; i < 12; ++i) specs.push_back(random_spec(rng));
  for (const auto& spec : specs) {
    auto tr = solve_trajectories(spec);
    const auto n = static_cast<std::ptrdiff_t>(tr.steps());
    const bool ok = validate_conditions(spec).passed();
    for (std::size_t l = 0; l < tr.dim(); ++l) {
      double w = 0.0, odd = 0.0, even = 0.0;
      double prev = -INFINITY;
      bool monotone = true;
      for (std::ptrdiff_t j = -n; j <= n; ++j) {
        const auto s = tr.sample(l, j);
        w = std::max(w, std::abs(s.alpha_dot * s.beta - s.alpha * s.beta_dot - 1.0));
        const auto m = tr.sample(l, -j);
        odd = std::max(odd, std::abs(s.alpha + m.alpha));
        even = std::max(even, std::abs(s.beta - m.beta));
        if (ok && std::abs(static_cast<double>(j) * tr.dt()) <= spec.T0) {
          const double u = s.alpha / s.beta;
          monotone = monotone && u > prev;
          prev = u;
        }
      }
      EXPECT_LE(w, 1e-9);
      EXPECT_LE(odd, 1e-10);
      EXPECT_LE(even, 1e-10);
      if (ok) {
        EXPECT_GT(tr.min_abs_beta(l), 0.0);
        EXPECT_TRUE(monotone);
      }
    }
  }
}
