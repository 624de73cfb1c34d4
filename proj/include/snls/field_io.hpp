#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "snls/grid.hpp"

namespace snls {

// Binary layout (little-endian host order):
//   char[8]  "SNLSFLD1"
//   int32    dim
//   int32    points per dimension
//   float64  half-width L
//   float64  re, im interleaved, N^d pairs in flat grid order

inline constexpr char kFieldMagic[8] = {'S', 'N', 'L', 'S', 'F', 'L', 'D', '1'};

inline void write_field_binary(std::ostream& os, const ComplexField& f) {
  const std::int32_t dim = f.grid.dim(), n = f.grid.points();
  const double L = f.grid.half_width();
  os.write(kFieldMagic, sizeof kFieldMagic);
  os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&L), sizeof L);
  for (const auto& v : f.values) {
    const double re = v.real(), im = v.imag();
    os.write(reinterpret_cast<const char*>(&re), sizeof re);
    os.write(reinterpret_cast<const char*>(&im), sizeof im);
  }
}

inline ComplexField read_field_binary(std::istream& is) {
  char magic[8];
  std::int32_t dim = 0, n = 0;
  double L = 0.0;
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kFieldMagic, sizeof magic) != 0)
    throw std::runtime_error("field: bad binary header");
  is.read(reinterpret_cast<char*>(&dim), sizeof dim);
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&L), sizeof L);
  ComplexField f(Grid(dim, L, n));
  for (auto& v : f.values) {
    double re = 0.0, im = 0.0;
    is.read(reinterpret_cast<char*>(&re), sizeof re);
    is.read(reinterpret_cast<char*>(&im), sizeof im);
    v = {re, im};
  }
  if (!is) throw std::runtime_error("field: truncated binary payload");
  return f;
}

/// CSV: a "# dim,L,N" header line then one "re,im" row per point.
inline void write_field_csv(std::ostream& os, const ComplexField& f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", f.grid.half_width());
  os << "# dim=" << f.grid.dim() << ",L=" << buf << ",N=" << f.grid.points() << "\n";
  os << "re,im\n";
  for (const auto& v : f.values) {
    char row[64];
    std::snprintf(row, sizeof row, "%.17g,%.17g\n", v.real(), v.imag());
    os << row;
  }
}

inline ComplexField read_field_csv(std::istream& is) {
  std::string line;
  int dim = 0, n = 0;
  double L = 0.0;
  if (!std::getline(is, line) || std::sscanf(line.c_str(), "# dim=%d,L=%lf,N=%d", &dim, &L, &n) != 3)
    throw std::runtime_error("field: bad CSV header");
  std::getline(is, line);
  ComplexField f(Grid(dim, L, n));
  for (auto& v : f.values) {
    double re = 0.0, im = 0.0;
    if (!std::getline(is, line) || std::sscanf(line.c_str(), "%lf,%lf", &re, &im) != 2)
      throw std::runtime_error("field: truncated CSV payload");
    v = {re, im};
  }
  return f;
}

}  // namespace snls
