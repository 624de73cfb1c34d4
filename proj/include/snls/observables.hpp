#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "snls/grid.hpp"
#include "snls/norms.hpp"
#include "snls/spectral.hpp"

namespace snls {

/// Functionals of one state at time t.
struct ObservableRecord {
  double t = 0.0;
  double mass = 0.0;           // M = ||u||^2
  double energy = 0.0;         // H = 1/2 ||grad u||^2 - lambda/(2 sigma + 2) ||u||_{2 sigma + 2}^{2 sigma + 2}
  double variance = 0.0;       // V = int |x|^2 |u|^2
  double momentum = 0.0;       // G = Im int conj(u) x . grad u
  double h_tilde = 0.0;        // ||grad u||^2 - sigma d / (2 sigma + 2) ||u||_{2 sigma + 2}^{2 sigma + 2}
  double grad_sq = 0.0;        // ||grad u||^2
  double lp_pow = 0.0;         // ||u||_{2 sigma + 2}^{2 sigma + 2}
  double boundary_mass = 0.0;  // mass fraction in the outer tenth of the box

  friend bool operator==(const ObservableRecord&, const ObservableRecord&) = default;
};

inline double mass(const ComplexField& u) { return norm_l2_sq(u); }

inline double energy(const ComplexField& u, double sigma, int lambda = 1) {
  return 0.5 * gradient_norm_sq(u) - lambda / (2.0 * sigma + 2.0) * norm_lp_pow(u, 2.0 * sigma + 2.0);
}

inline double variance(const ComplexField& u) { return weighted_x2_norm(u); }

inline double momentum(const ComplexField& u) {
  const Grid& g = u.grid;
  const auto grad = gradient(u);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto idx = g.axis_indices(i);
    Complex xgrad{};
    for (int a = 0; a < g.dim(); ++a) xgrad += g.coordinate(idx[a]) * grad[std::size_t(a)][i];
    s += (std::conj(u[i]) * xgrad).imag();
  }
  return s * g.cell_volume();
}

inline double h_tilde(const ComplexField& u, double sigma, int d) {
  return gradient_norm_sq(u) - sigma * d / (2.0 * sigma + 2.0) * norm_lp_pow(u, 2.0 * sigma + 2.0);
}

inline ObservableRecord observe(const ComplexField& u, double t, double sigma, int lambda = 1) {
  ObservableRecord r;
  r.t = t;
  r.mass = norm_l2_sq(u);
  r.grad_sq = gradient_norm_sq(u);
  r.lp_pow = norm_lp_pow(u, 2.0 * sigma + 2.0);
  r.variance = weighted_x2_norm(u);
  r.momentum = momentum(u);
  r.energy = 0.5 * r.grad_sq - lambda / (2.0 * sigma + 2.0) * r.lp_pow;
  r.h_tilde = r.grad_sq - sigma * u.grid.dim() / (2.0 * sigma + 2.0) * r.lp_pow;
  r.boundary_mass = boundary_mass_fraction(u);
  return r;
}

/// (2/d) ||grad u|| ||x u|| - ||u||^2; non-negative by the Heisenberg inequality.
inline double uncertainty_gap(double mass, double grad_sq, double variance, int d) {
  return 2.0 / d * std::sqrt(grad_sq) * std::sqrt(variance) - mass;
}

inline double uncertainty_gap(const ObservableRecord& r, int d) {
  return uncertainty_gap(r.mass, r.grad_sq, r.variance, d);
}

inline double uncertainty_gap(const ComplexField& u, int d) {
  const double m = norm_l2_sq(u);
  if (m == 0.0) throw std::invalid_argument("uncertainty_gap: zero field");
  return uncertainty_gap(m, gradient_norm_sq(u), weighted_x2_norm(u), d);
}

/// ||u||_{2s+2}^{2s+2} / (C ||grad u||^{s d} ||u||^{2 + s(2 - d)}); at most 1 for the optimal C.
inline double gn_ratio(double lp_pow, double grad_sq, double mass, double sigma, int d, double gn_constant) {
  const double denom =
      gn_constant * std::pow(grad_sq, 0.5 * sigma * d) * std::pow(mass, 1.0 + 0.5 * sigma * (2.0 - d));
  return denom > 0.0 ? lp_pow / denom : 0.0;
}

/// e^{bt}-weighted energy, momentum and variance series.
struct ModifiedSeries {
  double rate = 0.0;
  std::vector<double> t, energy, momentum, variance;
};

inline ModifiedSeries modified_series(std::span<const ObservableRecord> log, double b) {
  ModifiedSeries s;
  s.rate = b;
  for (const auto& r : log) {
    const double w = std::exp(b * r.t);
    s.t.push_back(r.t);
    s.energy.push_back(w * r.energy);
    s.momentum.push_back(w * r.momentum);
    s.variance.push_back(w * r.variance);
  }
  return s;
}

namespace detail {

inline std::vector<ObservableRecord> subsample(std::span<const ObservableRecord> log, double dt_log) {
  if (log.size() < 3) throw std::invalid_argument("ODE check: log needs at least three records");
  const double native = log[1].t - log[0].t;
  if (!(native > 0.0)) throw std::invalid_argument("ODE check: log times must increase");
  std::size_t stride = 1;
  if (dt_log > 0.0) {
    const double r = dt_log / native;
    stride = std::size_t(std::llround(r));
    if (stride == 0 || std::abs(r - double(stride)) > 1e-6 * r)
      throw std::invalid_argument("ODE check: dt_log is not a multiple of the logging interval");
  }
  std::vector<ObservableRecord> out;
  for (std::size_t i = 0; i < log.size(); i += stride) out.push_back(log[i]);
  // Keep only the uniformly spaced prefix; the final record may be off-cadence.
  const double h = out.size() > 1 ? out[1].t - out[0].t : 0.0;
  while (out.size() > 2 && std::abs((out.back().t - out[out.size() - 2].t) - h) > 1e-9 * h) out.pop_back();
  if (out.size() < 3) throw std::invalid_argument("ODE check: log too short for the requested dt_log");
  return out;
}

// Max over interior points of |central difference of q - rhs| / scale.
template <class Q, class Rhs, class Scale>
double central_residual(const std::vector<ObservableRecord>& s, Q&& q, Rhs&& rhs, Scale&& scale) {
  double worst = 0.0, norm = 0.0;
  for (const auto& r : s) norm = std::max(norm, scale(r));
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double fd = (q(s[i + 1]) - q(s[i - 1])) / (s[i + 1].t - s[i - 1].t);
    worst = std::max(worst, std::abs(fd - rhs(s[i])));
  }
  return norm > 0.0 ? worst / norm : worst;
}

}  // namespace detail

/// Max relative residual of dV/dt = 4G - 2aV on a deterministic log.
///
/// The residual is normalized by the largest |dV/dt| bound 4||grad u|| ||x u|| + 2aV
/// along the log. `dt_log` > 0 subsamples the log at that interval.
inline double check_variance_ode(std::span<const ObservableRecord> log, double a, double dt_log = 0.0) {
  const auto s = detail::subsample(log, dt_log);
  return detail::central_residual(
      s, [](const ObservableRecord& r) { return r.variance; },
      [a](const ObservableRecord& r) { return 4.0 * r.momentum - 2.0 * a * r.variance; },
      [a](const ObservableRecord& r) { return 4.0 * std::sqrt(r.grad_sq * r.variance) + 2.0 * a * r.variance; });
}

/// Max relative residual of dG/dt = 4H - 2aG + (2 - sigma d)/(sigma + 1) ||u||_{2s+2}^{2s+2}.
inline double check_momentum_ode(std::span<const ObservableRecord> log, double a, double sigma, int d,
                                 double dt_log = 0.0) {
  const auto s = detail::subsample(log, dt_log);
  const double c = (2.0 - sigma * d) / (sigma + 1.0);
  return detail::central_residual(
      s, [](const ObservableRecord& r) { return r.momentum; },
      [=](const ObservableRecord& r) { return 4.0 * r.energy - 2.0 * a * r.momentum + c * r.lp_pow; },
      [=](const ObservableRecord& r) {
        return 2.0 * r.grad_sq + 4.0 * r.lp_pow / (2.0 * sigma + 2.0) + 2.0 * a * std::abs(r.momentum) +
               std::abs(c) * r.lp_pow;
      });
}

/// Max relative residual of d(e^{bt}V)/dt = b e^{bt} V + e^{bt}(4G - 2aV).
inline double check_modified_variance_ode(std::span<const ObservableRecord> log, double a, double b,
                                          double dt_log = 0.0) {
  const auto s = detail::subsample(log, dt_log);
  return detail::central_residual(
      s, [b](const ObservableRecord& r) { return std::exp(b * r.t) * r.variance; },
      [=](const ObservableRecord& r) {
        return std::exp(b * r.t) * (b * r.variance + 4.0 * r.momentum - 2.0 * a * r.variance);
      },
      [=](const ObservableRecord& r) {
        return std::exp(b * r.t) *
               (std::abs(b) * r.variance + 4.0 * std::sqrt(r.grad_sq * r.variance) + 2.0 * a * r.variance);
      });
}

}  // namespace snls
