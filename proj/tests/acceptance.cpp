// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped), so ctest fails on any miss.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "lensgp/cli/experiments.hpp"
#include "lensgp/collapse/family.hpp"
#include "lensgp/lens.hpp"
#include "lensgp/metaplectic.hpp"
#include "lensgp/quadrature/surface.hpp"
#include "lensgp/spectral/solvers.hpp"

using namespace lensgp;

namespace {

// Pinned tolerances.
constexpr double kSinCosTol = 1e-8;
constexpr double kWronskianTol = 1e-9;
constexpr double kBetaFloor = 0.1;
constexpr double kMetaplecticTol = 1e-6;
constexpr double kCommutationTol = 1e-6;
constexpr double kUnitaryTol = 1e-10;
constexpr double kLinearLensTol = 1e-6;
constexpr double kNonlinearLensTol = 1e-4;
constexpr double kOrderTol = 0.2;
constexpr double kIntertwineTol = 1e-4;
constexpr double kSpreadTol = 1e-2;
constexpr double kSlopeTol = 0.05;
constexpr double kDecades = 1.5;
constexpr double kFreeManybodyTol = 1e-8;
constexpr double kBbgkyTol = 1e-3;

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    passed = passed && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [miss]");
  }
};

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string le(const std::string& name, double v, double lim) { return name + " " + g(v) + " <= " + g(lim); }

int failures = 0;
std::FILE* report = nullptr;  // optional copy of the criterion lines

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const Error& e) {
    o.require(false, std::string("error [") + e.module() + "]: " + e.what());
  } catch (const std::exception& e) {
    o.require(false, std::string("error: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0) o.require(secs < budget_s, "runtime " + g(secs) + " s < " + g(budget_s) + " s");
  else if (budget_s == 0) o.detail += "; runtime " + g(secs) + " s";
  if (!o.passed) ++failures;
  for (std::FILE* f : {stdout, report}) {
    if (!f) continue;
    std::fprintf(f, "criterion %2d %s  %s: %s\n", id, o.passed ? "PASS" : "FAIL", title.c_str(), o.detail.c_str());
    std::fflush(f);
  }
}

WaveField packet(const GridSpec& grid, double x0, double p0, double width = 1.0) {
  return sample(grid, [&](std::span<const double> x) {
    cplx v{1.0, 0.0};
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double y = x[d] - x0 * static_cast<double>(d + 1);
      v *= std::pow(std::numbers::pi * width * width, -0.25) * std::exp(-y * y / (2 * width * width)) *
           std::polar(1.0, p0 * x[d]);
    }
    return v;
  });
}

std::vector<SwitchSpec> shipped() {
  return {presets::harmonic(1), presets::off_ramp(1), presets::on_ramp(1), presets::anisotropic(2)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) report = std::fopen(argv[1], "w");
  criterion(1, "harmonic oracle", 1.0, [](Outcome& o) {
    const auto tr = solve_trajectories(presets::harmonic(1, 1.5), 1e-4);
    double err = 0.0;
    for (std::size_t j = 0; j <= 15000; ++j) {
      const double tau = static_cast<double>(j) * 1e-4;
      const auto s = tr.sample(0, static_cast<std::ptrdiff_t>(j));
      err = std::max({err, std::abs(s.alpha - std::sin(tau)), std::abs(s.beta - std::cos(tau))});
    }
    o.require(err <= kSinCosTol, le("max |alpha - sin|, |beta - cos|", err, kSinCosTol));
  });

  criterion(2, "Wronskian invariant", 0, [](Outcome& o) {
    for (const auto& spec : shipped()) {
      const double w = cli::detail::wronskian_drift(solve_trajectories(spec, 1e-4));
      o.require(w <= kWronskianTol, le(spec.name, w, kWronskianTol));
    }
  });

  criterion(3, "beta stays away from zero", 0, [](Outcome& o) {
    for (const auto& spec : shipped()) {
      if (!validate_conditions(spec).passed()) continue;
      const auto tr = solve_trajectories(spec, 1e-4);
      double m = INFINITY;
      for (std::size_t l = 0; l < spec.dim(); ++l) m = std::min(m, tr.min_abs_beta(l));
      o.require(m > kBetaFloor, spec.name + " min|beta| " + g(m) + " > " + g(kBetaFloor));
    }
  });

  const GridSpec line = GridSpec::cube(1, 512, 30.0);

  criterion(4, "metaplectic propagator vs split-step", 10.0, [&](Outcome& o) {
    for (const auto& spec : {presets::off_ramp(1), presets::on_ramp(1)}) {
      const auto tr = solve_trajectories(spec);
      const auto f = packet(line, 0.5, -0.4);
      std::vector<double> taus;
      for (int k = 1; k <= 4; ++k) taus.push_back(0.9 * spec.T0 * k / 4.0);
      SolveOptions opt;
      opt.dt = 2e-4;
      const auto ss = solve_trap_nls(f, spec, 0.0, taus, opt);
      double err = 0.0;
      for (std::size_t i = 0; i < taus.size(); ++i)
        err = std::max(err, relative_l2_error(propagate_trap_1d(f, tr, 0, taus[i]), ss.frames[i]));
      o.require(err <= kMetaplecticTol, le(spec.name, err, kMetaplecticTol));
    }
  });

  criterion(5, "momentum commutes with the flow", 0, [&](Outcome& o) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const auto& spec : {presets::harmonic(1), presets::off_ramp(1), presets::on_ramp(1)}) {
      const auto tr = solve_trajectories(spec);
      double err = 0.0;
      for (int rep = 0; rep < 3; ++rep) {
        const auto f = packet(line, u(rng), 0.8 * u(rng), 0.9 + 0.2 * u(rng));
        for (double tau : {0.3, 0.75}) {
          const auto lhs = momentum_apply(propagate_trap_1d(f, tr, 0, tau), tr, 0, tau);
          const auto rhs = propagate_trap_1d(momentum_apply(f, tr, 0, 0.0), tr, 0, tau);
          err = std::max(err, relative_l2_error(lhs, rhs));
        }
      }
      o.require(err <= kCommutationTol, le(spec.name, err, kCommutationTol));
    }
  });

  criterion(6, "lens unitarity and round trip", 0, [](Outcome& o) {
    const auto grid = GridSpec::cube(2, 128, 24.0);
    const auto v = packet(grid, 0.5, -0.3);
    double unit = 0.0, round = 0.0;
    for (const auto& spec : {presets::harmonic(2), presets::anisotropic(2)}) {
      const auto tr = solve_trajectories(spec);
      for (double tau : {0.3, 0.6, 0.9}) {
        const auto m = make_lens_map(tr, tau);
        const auto u = lens_forward_field(v, m);
        unit = std::max(unit, std::abs(u.norm() - v.norm()) / v.norm());
        round = std::max(round, relative_l2_error(lens_inverse_field(u, m), v));
      }
    }
    o.require(unit <= kUnitaryTol, le("norm defect", unit, kUnitaryTol));
    o.require(round <= kUnitaryTol, le("round trip", round, kUnitaryTol));
  });

  criterion(7, "linear lens equivalence, anisotropic 256^2", 120.0, [](Outcome& o) {
    const auto spec = presets::anisotropic(2);
    const auto grid = GridSpec::cube(2, 256, 40.0);
    const auto tr = solve_trajectories(spec);
    const auto sched = lx_schedule(tr);
    const auto v0 = packet(grid, 0.4, 0.3);
    std::vector<double> taus;
    for (int k = 1; k <= 5; ++k) taus.push_back(0.9 * spec.T0 * k / 5.0);
    SolveOptions opt;
    opt.dt = 1e-3;
    const auto direct = solve_trap_nls(v0, spec, 0.0, taus, opt);
    double err = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const auto m = make_lens_map(tr, taus[i]);
      const auto v = solve_variable_coeff_linear(v0, sched, {m.t}, {}, opt).frames[0];
      err = std::max(err, relative_l2_error(lens_forward_field(v, m), direct.frames[i]));
    }
    o.require(err <= kLinearLensTol, le("max rel error", err, kLinearLensTol));
  });

  criterion(8, "nonlinear lens equivalence, harmonic b0=1", 300.0, [](Outcome& o) {
    const auto grid = GridSpec::cube(2, 256, 24.0);
    const auto rep = cli::nonlinear_lens_check(packet(grid, 0.4, 0.3), presets::harmonic(2), 1.0, 0.6, 1e-3);
    o.require(rep.rel_error <= kNonlinearLensTol, le("rel error", rep.rel_error, kNonlinearLensTol));
    o.require(std::abs(rep.order - 2.0) <= kOrderTol, "Strang order " + g(rep.order) + " = 2 +- " + g(kOrderTol));
  });

  criterion(9, "intertwining residual", 0, [](Outcome& o) {
    const auto grid = GridSpec::cube(1, 128, 24.0);
    for (const auto& spec : {presets::harmonic(1), presets::off_ramp(1)}) {
      const auto tr = solve_trajectories(spec);
      const auto phi0 = packet(grid, 0.8, -0.5);
      KernelProvider gamma = [&](double tau) { return rank_one_kernel(propagate_trap(phi0, tr, tau)); };
      double worst = 0.0;
      for (double tau : {0.2, 0.6}) worst = std::max(worst, intertwine_residual(gamma, tr, tau, 1e-3).residual);
      o.require(worst <= kIntertwineTol, le(spec.name, worst, kIntertwineTol));
    }
  });

  criterion(10, "collapsing estimate scale invariance, n=2", 0, [](Outcome& o) {
    using namespace collapse;
    auto fam = gaussian_family(reference_terms(2), 2, default_scales(), 0.5, 6.0, 96);
    for (auto& m : fam) m.lhs.pad = 2;
    auto timed = [](const std::function<ConstantEstimate()>& f, double& secs) {
      const auto t0 = std::chrono::steady_clock::now();
      auto r = f();
      secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return r;
    };
    double t_iso = 0.0, t_an = 0.0;
    const auto iso = timed([&] { return estimate_constant(fam, CoefficientSchedule::constant({0.5, 0.5}), minus_signs); }, t_iso);
    o.require(iso.spread <= kSpreadTol, le("isotropic spread", iso.spread, kSpreadTol));
    const auto an = timed([&] { return estimate_constant(fam, anisotropic_schedule(2), minus_signs); }, t_an);
    o.require(t_iso < 300.0 && t_an < 300.0, "per-family runtime " + g(t_iso) + " s, " + g(t_an) + " s < 300 s");
    bool finite = true;
    for (const auto& m : an.members) finite = finite && std::isfinite(m.ratio) && m.ratio > 0.0;
    o.require(finite, "anisotropic ratios finite, range [" + g(an.min_ratio) + ", " + g(an.max_ratio) + "]");
  });

  criterion(11, "quadrature decay slopes", 0, [](Outcome& o) {
    using namespace quad;
    const auto xs = log_samples(0.5, 50.0, 9);
    o.require(std::log10(50.0 / 0.5) >= kDecades, "decades " + g(std::log10(100.0)));
    SurfaceOptions origin;
    origin.fixed_parameter = 0.0;
    const std::vector<std::pair<std::string, SurfaceFit>> fits{
        {"2d part 1", surface_bound_check(lemmas::two_d_part1(0.7, 0.7), xs)},
        {"2d part 2", surface_bound_check(lemmas::two_d_part2(1.0 / 80), xs)},
        {"3d part 1", surface_bound_check(lemmas::three_d_part1(1.2, 1.2), xs, origin)}};
    const std::vector<double> expected{-(0.7 + 0.7 - 1), -(2 - 2.0 / 80), -(1.2 + 1.2 - 2)};
    for (std::size_t i = 0; i < fits.size(); ++i) {
      const double d = std::abs(fits[i].second.slope - expected[i]);
      o.require(d <= kSlopeTol, fits[i].first + " slope " + g(fits[i].second.slope) + " vs " + g(expected[i]));
    }
  });

  // Criteria 12 and 13 share one study at the full grids (256^2, 128^3, 64^4).
  cli::ManybodyOutcome mb;
  double mb_seconds = 0.0;
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      mb = cli::run_manybody_study(cli::ManybodySetup{});
    } catch (const std::exception& e) {
      std::printf("many-body study failed: %s\n", e.what());
      mb.noninteracting_max = INFINITY;
    }
    mb_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  criterion(12, "many-body V=0 stays factorized", -1, [&](Outcome& o) {
    o.require(mb.noninteracting_max <= kFreeManybodyTol,
              le("max gp_distance over N in {2,3,4}, all tau", mb.noninteracting_max, kFreeManybodyTol));
  });

  criterion(13, "many-body trend (trend evidence only)", -1, [&](Outcome& o) {
    if (mb.final_distance.size() != 3) throw StructuralError("acceptance", "many-body study did not complete");
    const auto& d = mb.final_distance;
    o.require(d[1] <= d[0] && d[2] <= d[1], "gp_distance at tau=0.2: " + g(d[0]) + ", " + g(d[1]) + ", " + g(d[2]));
    o.require(mb.bbgky_residual >= 0.0 && mb.bbgky_residual <= kBbgkyTol, le("BBGKY residual N=2", mb.bbgky_residual, kBbgkyTol));
    o.require(mb_seconds < 900.0, "runtime " + g(mb_seconds) + " s < 900 s");
  });

  criterion(14, "determinism of artifacts", 0, [](Outcome& o) {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / ("lensgp_acceptance_" + std::to_string(::getpid()));
    const std::vector<std::pair<std::string, std::string>> runs{
        {"trajectories", "[switch]\npreset = off-ramp\n"},
        {"collapse", "[run]\nseed = 17\n[collapse]\nn = 1\nscales = 0.5, 1, 2\nrandom_terms = 2\nintervals = 64\n"},
        {"intertwine", ""},
        {"lens-linear", "[grid]\npoints = 64\nlength = 24\n[lens]\ntaus = 0.4, 0.8\n"}};
    for (const auto& [kind, text] : runs) {
      const auto cfg = io::Config::parse_string(text, kind);
      std::vector<cli::Manifest> ms;
      for (int k = 0; k < 2; ++k) {
        auto s = cli::resolve_settings(cfg, {});
        s.out = (root / (kind + std::to_string(k))).string();
        ms.push_back(cli::run_experiment(kind, cfg, s));
      }
      bool same = ms[0].artifacts.size() == ms[1].artifacts.size() && !ms[0].artifacts.empty();
      for (std::size_t i = 0; same && i < ms[0].artifacts.size(); ++i)
        same = ms[0].artifacts[i].path == ms[1].artifacts[i].path && ms[0].artifacts[i].sha256 == ms[1].artifacts[i].sha256;
      o.require(same, kind + " " + std::to_string(ms[0].artifacts.size()) + " artifacts byte-identical");
    }
    fs::remove_all(root);
  });

  std::printf("%d criteria failed\n", failures);
  if (report) {
    std::fprintf(report, "%d criteria failed\n", failures);
    std::fclose(report);
  }
  return std::min(failures, 100);
}
