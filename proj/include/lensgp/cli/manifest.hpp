#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensgp/errors.hpp"
#include "lensgp/io/binary.hpp"
#include "lensgp/io/csv.hpp"
#include "lensgp/io/digest.hpp"
#include "lensgp/version.hpp"

namespace lensgp::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  std::string relation = "<=";  // value <relation> limit
  bool passed = false;
  bool reported_only = false;   // exploratory: never fails a run
};

inline Check make_check(std::string name, double value, std::string relation, double limit) {
  Check c{std::move(name), value, limit, std::move(relation), false, false};
  if (c.relation == "<=") c.passed = value <= limit;
  else if (c.relation == ">=") c.passed = value >= limit;
  else if (c.relation == "<") c.passed = value < limit;
  else if (c.relation == ">") c.passed = value > limit;
  else throw StructuralError("cli", "unknown relation " + c.relation);
  if (!std::isfinite(value)) c.passed = false;
  return c;
}

inline Check report_only(std::string name, double value) {
  Check c{std::move(name), value, 0.0, "report", std::isfinite(value), true};
  return c;
}

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes artifacts into one directory and records their digests. Every file
/// goes through here once.
class ArtifactSet {
public:
  explicit ArtifactSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& dir() const { return dir_; }

  void write_text(const std::string& name, const std::string& text) {
    claim(name);
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw IntegrityError("cli", "cannot write " + (dir_ / name).string());
    f << text;
    f.close();
    record(name);
  }

  void write_field(const std::string& name, const WaveField& w, const std::string& role = "field", std::size_t n = 0) {
    std::ostringstream os(std::ios::binary);
    io::write_nlsf(os, w, role, n);
    write_text(name, os.str());
  }

  const std::vector<Artifact>& artifacts() const { return list_; }

private:
  void claim(const std::string& name) {
    for (const auto& a : list_)
      if (a.path == name) throw StructuralError("cli", "artifact " + name + " written twice");
  }
  void record(const std::string& name) {
    Artifact a;
    a.path = name;
    a.sha256 = io::sha256_file((dir_ / name).string());
    a.bytes = fs::file_size(dir_ / name);
    list_.push_back(a);
  }

  fs::path dir_;
  std::vector<Artifact> list_;
};

struct ExperimentResult {
  std::vector<Check> checks;
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;

  bool failed() const {
    for (const auto& c : checks)
      if (!c.reported_only && !c.passed) return true;
    return false;
  }
};

struct Manifest {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  bool strict = false;
  double wall_clock = 0.0;
  std::vector<Artifact> artifacts;
  ExperimentResult result;

  json to_json() const {
    json j;
    j["tool"] = "lensgp";
    j["version"] = LENSGP_VERSION;
    j["kind"] = kind;
    j["seed"] = seed;
    j["strict"] = strict;
    j["wall_clock_seconds"] = wall_clock;
    json cfg = json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    json arts = json::array();
    for (const auto& a : artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    j["artifacts"] = arts;
    json checks = json::array();
    for (const auto& c : result.checks)
      checks.push_back({{"name", c.name},
                        {"value", c.value},
                        {"relation", c.relation},
                        {"limit", c.limit},
                        {"passed", c.passed},
                        {"reported_only", c.reported_only}});
    j["checks"] = checks;
    json m = json::object();
    for (const auto& [k, v] : result.metrics) m[k] = v;
    j["metrics"] = m;
    j["notes"] = result.notes;
    return j;
  }
};

inline void write_manifest(const fs::path& dir, const Manifest& m) {
  std::ofstream f(dir / "manifest.json");
  if (!f) throw IntegrityError("cli", "cannot write manifest in " + dir.string());
  f << m.to_json().dump(2) << "\n";
}

// ---- comparison ----

struct Tolerances {
  double rtol = 1e-9;
  double atol = 1e-12;
  bool within(double a, double b) const {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
  }
};

struct DiffEntry {
  std::string where;
  std::string a, b;
  double abs_diff = 0.0;
};

struct DiffReport {
  std::vector<DiffEntry> entries;
  bool empty() const { return entries.empty(); }
};

inline json load_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IntegrityError("cli", "cannot open manifest " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw IntegrityError("cli", "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
}

/// Recomputes every artifact digest listed in a manifest.
inline void verify_manifest(const json& m, const fs::path& dir) {
  for (const auto& a : m.at("artifacts")) {
    const fs::path p = dir / a.at("path").get<std::string>();
    if (!fs::exists(p)) throw IntegrityError("cli", "artifact " + p.string() + " is missing");
    const std::string d = io::sha256_file(p.string());
    if (d != a.at("sha256").get<std::string>())
      throw IntegrityError("cli", "artifact " + p.string() + " does not match its recorded digest");
  }
}

namespace detail {

inline bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end && *end == '\0';
}

inline std::string num(double v) { return io::CsvWriter::number(v); }

inline void compare_csv(const std::string& name, const std::string& ta, const std::string& tb, const Tolerances& tol,
                        DiffReport& rep) {
  const auto ra = io::parse_csv(ta), rb = io::parse_csv(tb);
  if (ra.size() != rb.size()) {
    rep.entries.push_back({name + ": rows", std::to_string(ra.size()), std::to_string(rb.size()), 0.0});
    return;
  }
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].size() != rb[i].size()) {
      rep.entries.push_back({name + ": row " + std::to_string(i) + " width", std::to_string(ra[i].size()),
                             std::to_string(rb[i].size()), 0.0});
      continue;
    }
    for (std::size_t j = 0; j < ra[i].size(); ++j) {
      double x, y;
      const std::string where = name + ": row " + std::to_string(i) + " col " + std::to_string(j);
      if (parse_number(ra[i][j], x) && parse_number(rb[i][j], y)) {
        if (!tol.within(x, y)) rep.entries.push_back({where, ra[i][j], rb[i][j], std::abs(x - y)});
      } else if (ra[i][j] != rb[i][j]) {
        rep.entries.push_back({where, ra[i][j], rb[i][j], 0.0});
      }
    }
  }
}

inline void compare_field(const std::string& name, const fs::path& pa, const fs::path& pb, const Tolerances& tol,
                          DiffReport& rep) {
  const auto a = io::load_nlsf(pa.string()), b = io::load_nlsf(pb.string());
  if (!(a.field.grid == b.field.grid) || a.role != b.role) {
    rep.entries.push_back({name + ": header", a.role, b.role, 0.0});
    return;
  }
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.field.size(); ++i) {
    worst = std::max(worst, std::abs(a.field.data[i] - b.field.data[i]));
    scale = std::max({scale, std::abs(a.field.data[i]), std::abs(b.field.data[i])});
  }
  if (worst > tol.atol + tol.rtol * scale) rep.entries.push_back({name + ": max |a - b|", num(worst), num(scale), worst});
}

}  // namespace detail

/// Field-by-field comparison of two runs. Wall-clock time is ignored.
inline DiffReport compare(const fs::path& manifest_a, const fs::path& manifest_b, const Tolerances& tol = {}) {
  const json a = load_manifest(manifest_a), b = load_manifest(manifest_b);
  const std::string ka = a.at("kind").get<std::string>(), kb = b.at("kind").get<std::string>();
  if (ka != kb) throw KindMismatchError("cli", "cannot compare a '" + ka + "' run with a '" + kb + "' run");
  const fs::path da = manifest_a.parent_path(), db = manifest_b.parent_path();
  verify_manifest(a, da);
  verify_manifest(b, db);
  DiffReport rep;

  const auto& ma = a.at("metrics");
  const auto& mb = b.at("metrics");
  for (auto it = ma.begin(); it != ma.end(); ++it) {
    if (!mb.contains(it.key())) {
      rep.entries.push_back({"metrics." + it.key(), "present", "missing", 0.0});
      continue;
    }
    const double x = it.value().get<double>(), y = mb.at(it.key()).get<double>();
    if (!tol.within(x, y)) rep.entries.push_back({"metrics." + it.key(), detail::num(x), detail::num(y), std::abs(x - y)});
  }
  for (auto it = mb.begin(); it != mb.end(); ++it)
    if (!ma.contains(it.key())) rep.entries.push_back({"metrics." + it.key(), "missing", "present", 0.0});

  std::map<std::string, json> cb;
  for (const auto& c : b.at("checks")) cb[c.at("name").get<std::string>()] = c;
  for (const auto& c : a.at("checks")) {
    const std::string n = c.at("name").get<std::string>();
    auto it = cb.find(n);
    if (it == cb.end()) {
      rep.entries.push_back({"checks." + n, "present", "missing", 0.0});
      continue;
    }
    if (c.at("passed") != it->second.at("passed"))
      rep.entries.push_back({"checks." + n + ".passed", c.at("passed").dump(), it->second.at("passed").dump(), 0.0});
    const double x = c.at("value").get<double>(), y = it->second.at("value").get<double>();
    if (!tol.within(x, y)) rep.entries.push_back({"checks." + n + ".value", detail::num(x), detail::num(y), std::abs(x - y)});
  }

  std::map<std::string, bool> in_b;
  for (const auto& x : b.at("artifacts")) in_b[x.at("path").get<std::string>()] = true;
  for (const auto& x : a.at("artifacts")) {
    const std::string p = x.at("path").get<std::string>();
    if (!in_b.count(p)) {
      rep.entries.push_back({"artifacts." + p, "present", "missing", 0.0});
      continue;
    }
    in_b.erase(p);
    const auto ext = fs::path(p).extension().string();
    if (ext == ".csv") {
      detail::compare_csv(p, io::read_file((da / p).string()), io::read_file((db / p).string()), tol, rep);
    } else if (ext == ".nlsf") {
      detail::compare_field(p, da / p, db / p, tol, rep);
    } else if (io::sha256_file((da / p).string()) != io::sha256_file((db / p).string())) {
      rep.entries.push_back({"artifacts." + p, "digest", "differs", 0.0});
    }
  }
  for (const auto& [p, _] : in_b) rep.entries.push_back({"artifacts." + p, "missing", "present", 0.0});
  return rep;
}

inline void write_diff(std::ostream& os, const DiffReport& r) {
  io::CsvWriter w(os, {"where", "a", "b", "abs_diff"});
  for (const auto& e : r.entries) w.row({e.where, e.a, e.b, e.abs_diff});
}

}  // namespace lensgp::cli
