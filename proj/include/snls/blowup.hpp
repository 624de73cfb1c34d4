#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "snls/integrator.hpp"

namespace snls {

/// Expectations of the initial functionals plus model parameters entering the
/// supercritical blow-up conditions.
struct BlowupCondition {
  double V0 = 0.0;  // E[V(u0)]
  double G0 = 0.0;  // E[G(u0)]
  double H0 = 0.0;  // E[H(u0)]
  double M0 = 0.0;  // E[||u0||^2]
  double fq = 0.0;  // ||f_Q||_{L^inf}
  double damping = 0.0;
  double sigma = 3.0;
  int dim = 1;
  double z = 0.0;  // auxiliary rate of the time-dependent condition
};

/// Standard errors of the four expectations (ensemble-estimated inputs).
struct ExpectationErrors {
  double V0 = 0.0, G0 = 0.0, H0 = 0.0, M0 = 0.0;
};

/// Lower bound 4 a sigma / (sigma d - 2) on z.
inline double z_floor(double damping, double sigma, int d) {
  return 4.0 * damping * sigma / (sigma * d - 2.0);
}

inline void validate_common(const BlowupCondition& c) {
  if (!(c.sigma * c.dim > 2.0)) throw std::invalid_argument("blow-up condition: requires sigma d > 2");
  if (!(c.fq >= 0.0)) throw std::invalid_argument("blow-up condition: ||f_Q||_inf must be >= 0");
  if (!(c.damping >= 0.0)) throw std::invalid_argument("blow-up condition: damping must be >= 0");
  if (!(c.V0 >= 0.0) || !(c.M0 >= 0.0))
    throw std::invalid_argument("blow-up condition: V0 and M0 must be non-negative");
}

/// V0 + 4y G0 + 16y^2 H0 + 8y^3 M0 fq, with b <= a(2 - 4 sigma/(sigma d - 2)) and 0 < y <= 1/(2a - b).
/// A negative value certifies blow-up with positive probability.
inline double condition_prop34(const BlowupCondition& c, double y, double b) {
  validate_common(c);
  const double b_max = c.damping * (2.0 - 4.0 * c.sigma / (c.sigma * c.dim - 2.0));
  if (b > b_max) throw std::invalid_argument("condition_prop34: b exceeds a(2 - 4 sigma/(sigma d - 2))");
  if (!(y > 0.0)) throw std::invalid_argument("condition_prop34: y must be positive");
  const double rate = 2.0 * c.damping - b;
  if (rate > 0.0 && y > 1.0 / rate) throw std::invalid_argument("condition_prop34: y exceeds 1/(2a - b)");
  return c.V0 + 4.0 * y * c.G0 + 16.0 * y * y * c.H0 + 8.0 * y * y * y * c.M0 * c.fq;
}

/// Coefficients of the time-dependent condition as a polynomial in t:
///   (V0, 4 G0, 8 H0, 8/3 z H0 + 4/3 fq M0, 4/3 z fq M0).
inline std::array<double, 5> thm36_coefficients(const BlowupCondition& c) {
  return {c.V0, 4.0 * c.G0, 8.0 * c.H0, 8.0 / 3.0 * c.z * c.H0 + 4.0 / 3.0 * c.fq * c.M0,
          4.0 / 3.0 * c.z * c.fq * c.M0};
}

/// V0 + 4t G0 + (8t^2 + 8/3 z t^3) H0 + (4/3 t^3 + 4/3 z t^4) M0 fq.
inline double condition_thm36(const BlowupCondition& c, double t) {
  validate_common(c);
  if (c.z < z_floor(c.damping, c.sigma, c.dim)) throw std::invalid_argument("condition_thm36: z below 4a sigma/(sigma d - 2)");
  if (!(t >= 0.0)) throw std::invalid_argument("condition_thm36: t must be >= 0");
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
  return c.V0 + 4.0 * t * c.G0 + (8.0 * t2 + 8.0 / 3.0 * c.z * t3) * c.H0 +
         (4.0 / 3.0 * t3 + 4.0 / 3.0 * c.z * t4) * c.M0 * c.fq;
}

/// The undamped (z = 0) form V0 + 4t G0 + 8t^2 H0 + 4/3 t^3 fq M0.
inline double condition_conservative(const BlowupCondition& c, double t) {
  return c.V0 + 4.0 * c.G0 * t + 8.0 * c.H0 * t * t + 4.0 / 3.0 * t * t * t * c.fq * c.M0;
}

namespace detail {

inline double poly_eval(const std::vector<double>& c, double t) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * t + *it;
  return v;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(double(i) * c[i]);
  return d;
}

inline void poly_trim(std::vector<double>& c) {
  while (!c.empty() && c.back() == 0.0) c.pop_back();
}

// Breakpoints lo < x1 < ... < hi between which p is monotone.
inline std::vector<double> monotone_breakpoints(std::vector<double> c, double lo, double hi);

// Real roots of p in (lo, hi) at sign changes, located by bisection.
inline std::vector<double> poly_roots(std::vector<double> c, double lo, double hi) {
  poly_trim(c);
  std::vector<double> roots;
  if (c.size() <= 1) return roots;
  const auto pts = monotone_breakpoints(c, lo, hi);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double a = pts[i], b = pts[i + 1];
    double fa = poly_eval(c, a), fb = poly_eval(c, b);
    if (fb == 0.0 && b < hi) {
      roots.push_back(b);
      continue;
    }
    if ((fa < 0.0) == (fb < 0.0) || fa == 0.0) continue;
    for (int it = 0; it < 400 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
      const double m = 0.5 * (a + b);
      const double fm = poly_eval(c, m);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  return roots;
}

inline std::vector<double> monotone_breakpoints(std::vector<double> c, double lo, double hi) {
  std::vector<double> pts{lo};
  auto d = poly_derivative(c);
  poly_trim(d);
  if (d.size() > 1)
    for (double r : poly_roots(d, lo, hi))
      if (r > pts.back() && r < hi) pts.push_back(r);
  pts.push_back(hi);
  return pts;
}

}  // namespace detail

/// Smallest t in (0, t_max] at which condition_thm36 becomes strictly negative,
/// located to 1e-10 relative accuracy; empty when it never does.
inline std::optional<double> minimal_certified_time(const BlowupCondition& c, double t_max = 1e3) {
  validate_common(c);
  if (c.z < z_floor(c.damping, c.sigma, c.dim)) throw std::invalid_argument("minimal_certified_time: z below its floor");
  const auto coeffs = thm36_coefficients(c);
  std::vector<double> p(coeffs.begin(), coeffs.end());
  detail::poly_trim(p);
  if (p.empty()) return std::nullopt;

  const auto pts = detail::monotone_breakpoints(p, 0.0, t_max);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double lo = pts[i], hi = pts[i + 1];
    if (detail::poly_eval(p, lo) < 0.0) return lo > 0.0 ? std::optional(lo) : std::nullopt;
    if (!(detail::poly_eval(p, hi) < 0.0)) continue;
    // p(lo) >= 0 > p(hi) on a monotone piece: bisect keeping p(hi) < 0.
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
      const double m = 0.5 * (lo + hi);
      if (detail::poly_eval(p, m) < 0.0)
        hi = m;
      else
        lo = m;
    }
    return hi;
  }
  return std::nullopt;
}

/// Point and worst-case (every expectation shifted by +2 stderr) verdicts.
struct CertificationVerdict {
  double point_value = 0.0;
  double worst_value = 0.0;
  bool point_certified = false;
  bool worst_certified = false;
  bool boundary = false;  // point value exactly zero
};

inline CertificationVerdict certify_thm36(const BlowupCondition& c, const ExpectationErrors& se, double t) {
  CertificationVerdict v;
  v.point_value = condition_thm36(c, t);
  BlowupCondition w = c;
  // Every coefficient multiplying an expectation is >= 0 for t >= 0, so +2 stderr is the adverse shift.
  w.V0 += 2.0 * se.V0;
  w.G0 += 2.0 * se.G0;
  w.H0 += 2.0 * se.H0;
  w.M0 += 2.0 * se.M0;
  v.worst_value = condition_thm36(w, t);
  v.point_certified = v.point_value < 0.0;
  v.worst_certified = v.worst_value < 0.0;
  v.boundary = v.point_value == 0.0;
  return v;
}

/// Detector verdict for one finished trajectory.
struct BlowupReport {
  bool blew_up = false;
  std::optional<double> tau;
  double threshold = 0.0;
  int points = 0;
  double dt = 0.0;
  double half_width = 0.0;
};

/// Re-reads a finished trajectory against an H^1 threshold B (B <= 0 keeps the
/// trajectory's own threshold). The estimate is the first logged time with
/// ||u||_{H^1} > B, or the detector time if that comes first.
inline BlowupReport classify_trajectory(const TrajectoryState& s, const SimParams& params, double B = 0.0) {
  BlowupReport r;
  r.threshold = B > 0.0 ? B : s.threshold;
  r.points = s.u.grid.points();
  r.half_width = s.u.grid.half_width();
  r.dt = params.dt;
  for (const auto& rec : s.log) {
    if (std::sqrt(rec.mass + rec.grad_sq) > r.threshold) {
      r.tau = rec.t;
      break;
    }
  }
  if (s.status == Status::blew_up && s.blowup_time && (!r.tau || *s.blowup_time < *r.tau)) {
    // A lower B than the run's own threshold can only fire earlier; a higher one
    // is still bounded by a non-finite state.
    const bool nonfinite = s.log.empty() || s.log.back().t < *s.blowup_time;
    if (r.threshold <= s.threshold || nonfinite) r.tau = s.blowup_time;
  }
  r.blew_up = r.tau.has_value();
  return r;
}

}  // namespace snls
