#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "sojourn/errors.hpp"

namespace sojourn {

// CSV writer with fixed 17-significant-digit formatting (reproducible reruns).
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns) : out_(path) {
    if (!out_) throw Error(Err::IoError, "cannot open " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
    ncols_ = columns.size();
  }

  void field(double v) {
    sep();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out_ << buf;
  }

  void field(int v) {
    sep();
    out_ << v;
  }

  void field(const std::string& v) {
    sep();
    out_ << v;
  }

  void end_row() {
    out_ << '\n';
    col_ = 0;
  }

 private:
  void sep() {
    if (col_++) out_ << ',';
  }
  std::ofstream out_;
  size_t ncols_ = 0;
  size_t col_ = 0;
};

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// FNV-1a, used to fingerprint branch tables in trace metadata.
inline std::string fnv1a_hex(const std::string& data) {
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", h);
  return buf;
}

}  // namespace sojourn
