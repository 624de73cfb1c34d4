#pragma once

#include <cmath>
#include <stdexcept>

#include "snls/grid.hpp"
#include "snls/spectral.hpp"

namespace snls {

// Rectangle-rule quadratures with weight dx^d.

inline double norm_l2_sq(const ComplexField& f) {
  require_finite(f, "norm_l2_sq");
  double s = 0.0;
  for (const auto& v : f.values) s += std::norm(v);
  return s * f.grid.cell_volume();
}

/// Returns sum |f|^p dx^d, i.e. ||f||_{L^p}^p.
inline double norm_lp_pow(const ComplexField& f, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("norm_lp_pow: exponent must be >= 1");
  require_finite(f, "norm_lp_pow");
  double s = 0.0;
  for (const auto& v : f.values) s += std::pow(std::abs(v), p);
  return s * f.grid.cell_volume();
}

inline double norm_h1_sq(const ComplexField& f) { return norm_l2_sq(f) + gradient_norm_sq(f); }

/// sum |x|^2 |f|^2 dx^d using the box coordinate; meaningful only while the
/// mass of f stays away from the box boundary.
inline double weighted_x2_norm(const ComplexField& f) {
  require_finite(f, "weighted_x2_norm");
  const Grid& g = f.grid;
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += g.radius_sq(i) * std::norm(f[i]);
  return s * g.cell_volume();
}

/// Fraction of the mass lying in the outer tenth of the box along any axis.
inline double boundary_mass_fraction(const ComplexField& f) {
  const Grid& g = f.grid;
  const double edge = 0.9 * g.half_width();
  double outer = 0.0, total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double m = std::norm(f[i]);
    total += m;
    const auto idx = g.axis_indices(i);
    for (int a = 0; a < g.dim(); ++a) {
      if (std::abs(g.coordinate(idx[a])) > edge) {
        outer += m;
        break;
      }
    }
  }
  return total > 0.0 ? outer / total : 0.0;
}

}  // namespace snls
