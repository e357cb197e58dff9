#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace lensgp::io {

/// RFC 4180 style CSV; doubles as %.17g so they round-trip exactly.
class CsvWriter {
public:
  using Cell = std::variant<double, long long, std::string>;

  CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os) {
    std::vector<Cell> h(header.begin(), header.end());
    row(h);
  }

  void row(const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      std::visit([&](const auto& v) { put(v); }, cells[i]);
    }
    os_ << "\n";
  }

  static std::string number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

private:
  void put(double v) { os_ << number(v); }
  void put(long long v) { os_ << v; }
  void put(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
      os_ << s;
      return;
    }
    os_ << '"';
    for (char c : s) {
      if (c == '"') os_ << '"';
      os_ << c;
    }
    os_ << '"';
  }

  std::ostream& os_;
};

/// Splits CSV text into rows of fields (quoted fields allowed).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(cell);
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(cell);
        rows.push_back(row);
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (any || !cell.empty()) {
    row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lensgp::io
