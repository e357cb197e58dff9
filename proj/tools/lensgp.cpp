#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lensgp/cli/experiments.hpp"

namespace {

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Flags {
  std::string config;
  std::string out;
  bool strict = false;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

int report(const lensgp::cli::Manifest& m, const lensgp::cli::RunSettings& s) {
  std::cout << m.kind << " -> " << s.out << "\n";
  for (const auto& c : m.result.checks) {
    std::cout << "  " << (c.reported_only ? "INFO" : c.passed ? "PASS" : "FAIL") << "  " << c.name << " = "
              << short_num(c.value);
    if (!c.reported_only) std::cout << " (" << c.relation << " " << short_num(c.limit) << ")";
    std::cout << "\n";
  }
  for (const auto& n : m.result.notes) std::cout << "  note: " << n << "\n";
  std::cout << "  wall clock " << m.wall_clock << " s\n";
  if (m.result.failed()) {
    std::cerr << "lensgp: one or more checks failed\n";
    return s.strict ? 1 : 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lens transform and Gross-Pitaevskii experiments"};
  app.set_version_flag("--version", LENSGP_VERSION);
  app.require_subcommand(1);

  Flags f;
  std::string kind;
  for (const auto& [name, _] : lensgp::cli::experiments()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", f.config, "config file")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory");
    sub->add_flag("--strict", f.strict, "exit 1 when a check fails");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->callback([&kind, name = name] { kind = name; });
  }

  std::string a, b, diff_out;
  lensgp::cli::Tolerances tol;
  auto* cmp = app.add_subcommand("compare", "compare two runs by their manifests");
  cmp->add_option("a", a, "first manifest.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", b, "second manifest.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("--rtol", tol.rtol, "relative tolerance");
  cmp->add_option("--atol", tol.atol, "absolute tolerance");
  cmp->add_option("--out", diff_out, "write diff.csv here");
  cmp->callback([&kind] { kind = "compare"; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (kind == "compare") {
      const auto rep = lensgp::cli::compare(a, b, tol);
      if (!diff_out.empty()) {
        std::filesystem::create_directories(diff_out);
        std::ofstream os(std::filesystem::path(diff_out) / "diff.csv");
        lensgp::cli::write_diff(os, rep);
      }
      lensgp::cli::write_diff(std::cout, rep);
      return rep.entries.empty() ? 0 : 1;
    }
    auto* sub = app.get_subcommand(kind);
    lensgp::cli::RunOverrides o;
    if (sub->count("--out")) o.out = f.out;
    if (sub->count("--seed")) o.seed = f.seed;
    if (sub->count("--threads")) o.threads = f.threads;
    if (sub->count("--strict")) o.strict = true;
    const auto cfg = f.config.empty() ? lensgp::io::Config::parse_string("", "<defaults>")
                                      : lensgp::io::Config::load(f.config);
    const auto s = lensgp::cli::resolve_settings(cfg, o);
    return report(lensgp::cli::run_experiment(kind, cfg, s), s);
  } catch (const lensgp::Error& e) {
    std::cerr << "lensgp: error [" << e.module() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lensgp: error: " << e.what() << "\n";
    return 2;
  }
}
