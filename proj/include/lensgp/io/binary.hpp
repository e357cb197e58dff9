#pragma once

// NLSF1 field files: one text header line
//
//   NLSF1 role=<field|kernel> shape=M1,M2,.. lengths=L1,L2,.. time=<t> [n=<dim>] [tag=<word>]
//
// followed by little-endian float64 (re, im) pairs, row-major, last axis fastest.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"
#include "lensgp/lens.hpp"
#include "lensgp/spectral/grid.hpp"

namespace lensgp::io {

struct FieldFile {
  WaveField field;
  std::string role = "field";
  std::size_t n = 0;  // spatial dimension for kernels
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void put_le(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  char b[8];
  std::memcpy(b, &u, 8);
  os.write(b, 8);
}

inline double get_le(const char* b) {
  std::uint64_t u;
  std::memcpy(&u, b, 8);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

inline void write_nlsf(std::ostream& os, const WaveField& f, const std::string& role = "field", std::size_t n = 0) {
  if (role != "field" && role != "kernel") throw StructuralError("io", "role must be field or kernel");
  std::string shape, lengths;
  for (std::size_t d = 0; d < f.grid.rank(); ++d) {
    if (d) {
      shape += ",";
      lengths += ",";
    }
    shape += std::to_string(f.grid.axis(d).points);
    lengths += detail::fmt17(f.grid.axis(d).length);
  }
  os << "NLSF1 role=" << role << " shape=" << shape << " lengths=" << lengths << " time=" << detail::fmt17(f.time);
  if (role == "kernel") os << " n=" << n;
  if (!f.tag.empty() && f.tag.find_first_of(" \n=") == std::string::npos) os << " tag=" << f.tag;
  os << "\n";
  for (const auto& z : f.data) {
    detail::put_le(os, z.real());
    detail::put_le(os, z.imag());
  }
}

inline void write_kernel(std::ostream& os, const DensityKernel& k) { write_nlsf(os, k.field, "kernel", k.n); }

inline FieldFile read_nlsf(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw IntegrityError("io", "empty NLSF1 stream");
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != "NLSF1") throw IntegrityError("io", "bad magic '" + magic + "'");
  std::map<std::string, std::string> kv;
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw IntegrityError("io", "malformed header token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  for (const char* k : {"role", "shape", "lengths", "time"})
    if (!kv.count(k)) throw IntegrityError("io", std::string("header lacks ") + k);
  auto split = [](const std::string& s) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    std::string x;
    while (std::getline(ss, x, ',')) v.push_back(x);
    return v;
  };
  const auto sh = split(kv["shape"]), ln = split(kv["lengths"]);
  if (sh.empty() || sh.size() != ln.size()) throw IntegrityError("io", "shape and lengths disagree");
  std::vector<Axis> axes;
  for (std::size_t d = 0; d < sh.size(); ++d) axes.push_back({std::stoul(sh[d]), std::stod(ln[d])});
  FieldFile out;
  out.role = kv["role"];
  out.field = WaveField(GridSpec(axes), std::stod(kv["time"]), kv.count("tag") ? kv["tag"] : "");
  if (out.role == "kernel") out.n = kv.count("n") ? std::stoul(kv["n"]) : 0;
  std::vector<char> buf(16 * out.field.size());
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw IntegrityError("io", "truncated NLSF1 payload");
  if (is.peek() != std::char_traits<char>::eof()) throw IntegrityError("io", "trailing bytes after NLSF1 payload");
  for (std::size_t i = 0; i < out.field.size(); ++i)
    out.field.data[i] = {detail::get_le(&buf[16 * i]), detail::get_le(&buf[16 * i + 8])};
  return out;
}

inline void save_nlsf(const std::string& path, const WaveField& f, const std::string& role = "field", std::size_t n = 0) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IntegrityError("io", "cannot write " + path);
  write_nlsf(os, f, role, n);
}

inline FieldFile load_nlsf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IntegrityError("io", "cannot open " + path);
  return read_nlsf(is);
}

}  // namespace lensgp::io
