#pragma once

#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"

namespace lensgp::io {

/// Hex SHA-256 of a byte string.
inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw IntegrityError("io", "SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IntegrityError("io", "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

}  // namespace lensgp::io
