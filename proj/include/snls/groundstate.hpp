#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "snls/grid.hpp"
#include "snls/norms.hpp"
#include "snls/spectral.hpp"

namespace snls {

/// Closed-form 1D ground state of R'' - R + R^{2 sigma + 1} = 0:
///   R(x) = ((sigma + 1) sech^2(sigma x))^{1 / (2 sigma)}.
inline double ground_state_profile(double sigma, double x) {
  const double sech = 1.0 / std::cosh(sigma * x);
  return std::pow((sigma + 1.0) * sech * sech, 0.5 / sigma);
}

/// ||R||^2 of the 1D ground state in closed form:
///   (sigma + 1)^{1/sigma} / sigma * B(1/sigma, 1/2).
inline double ground_state_mass_exact(double sigma) {
  return std::pow(sigma + 1.0, 1.0 / sigma) / sigma * std::beta(1.0 / sigma, 0.5);
}

/// Optimal Gagliardo-Nirenberg constant
///   C = (sigma + 1) 2 (2 + 2 sigma - sigma d)^{sigma d / 2 - 1} / (sigma d)^{sigma d / 2} / ||R||^{2 sigma}.
inline double gn_constant(double sigma, int d, double mass_sq_R) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gn_constant: sigma must be positive");
  if (d < 1) throw std::invalid_argument("gn_constant: dimension must be >= 1");
  if (d > 2 && !(sigma < 2.0 / (d - 2))) throw std::invalid_argument("gn_constant: sigma must be below 2/(d-2)");
  if (!(mass_sq_R > 0.0)) throw std::invalid_argument("gn_constant: ||R||^2 must be positive");
  const double sd = sigma * d;
  return (sigma + 1.0) * 2.0 * std::pow(2.0 + 2.0 * sigma - sd, 0.5 * sd - 1.0) / std::pow(sd, 0.5 * sd) /
         std::pow(mass_sq_R, sigma);
}

struct GroundState {
  double sigma = 0.0;
  ComplexField profile;
  double mass_sq = 0.0;      // ||R||^2 by quadrature
  double gn_constant = 0.0;  // from mass_sq
  double ode_residual = 0.0; // max |R'' - R + R^{2 sigma + 1}| over |x| <= 0.9 L
};

/// Largest ground-state value allowed at the box edge.
inline constexpr double kGroundStateEdgeTolerance = 1e-8;

inline GroundState ground_state_1d(double sigma, const Grid& grid) {
  if (!(sigma > 0.0)) throw std::invalid_argument("ground_state_1d: sigma must be positive");
  if (grid.dim() != 1) throw std::invalid_argument("ground_state_1d: only d = 1 has a closed form");
  const double edge = ground_state_profile(sigma, grid.half_width());
  if (edge > kGroundStateEdgeTolerance)
    throw std::invalid_argument("ground_state_1d: box too small, R(L) = " + std::to_string(edge));

  GroundState gs{sigma, ComplexField::sample(grid, [&](double x) { return ground_state_profile(sigma, x); }), 0.0,
                 0.0, 0.0};
  gs.mass_sq = norm_l2_sq(gs.profile);
  gs.gn_constant = gn_constant(sigma, 1, gs.mass_sq);
  const auto lap = laplacian(gs.profile);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid.coordinate(int(i))) > 0.9 * grid.half_width()) continue;
    const double R = gs.profile[i].real();
    const double r = lap[i].real() - R + std::pow(R, 2.0 * sigma + 1.0);
    gs.ode_residual = std::max(gs.ode_residual, std::abs(r));
  }
  return gs;
}

/// Critical-mass threshold ||R|| for the mass-critical pair sigma d = 2.
/// Only d = 1 (sigma = 2) has a closed-form ground state here.
inline double threshold_mass(double sigma, int d) {
  if (std::abs(sigma * d - 2.0) > 1e-12) throw std::invalid_argument("threshold_mass: requires sigma d = 2");
  if (d != 1) throw std::invalid_argument("threshold_mass: only d = 1 is supported");
  return std::sqrt(ground_state_mass_exact(sigma));
}

enum class ThresholdClass { below, at, above };

inline ThresholdClass classify_threshold(double norm_u0, double threshold, double rel_tol = 1e-8) {
  if (std::abs(norm_u0 - threshold) <= rel_tol * threshold) return ThresholdClass::at;
  return norm_u0 < threshold ? ThresholdClass::below : ThresholdClass::above;
}

inline const char* to_string(ThresholdClass c) {
  switch (c) {
    case ThresholdClass::below: return "below";
    case ThresholdClass::at: return "at";
    case ThresholdClass::above: return "above";
  }
  return "?";
}

}  // namespace snls
