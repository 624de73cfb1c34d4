#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/grid.hpp"
#include "snls/noise.hpp"
#include "snls/norms.hpp"
#include "snls/observables.hpp"
#include "snls/spectral.hpp"

namespace snls {

/// Coefficients and discretization controls for
///   du = i (Laplace u + lambda |u|^{2 sigma} u) dt - a u dt + i u o dW.
struct SimParams {
  double sigma = 2.0;
  /// +1 focusing, -1 defocusing, 0 switches the nonlinearity off.
  int lambda = 1;
  double damping = 0.0;
  double dt = 1e-3;
  double horizon = 1.0;
  /// Absolute blow-up threshold on ||u||_{H^1}; <= 0 selects threshold_factor * ||u0||_{H^1}.
  double blowup_threshold = 0.0;
  double threshold_factor = 1e3;
  /// Boundary mass fraction above which a warning is recorded.
  double boundary_tolerance = 1e-6;
  /// Observables are logged every log_every steps, plus n = 0 and the final step.
  int log_every = 1;
  bool dealias = false;
};

inline void validate(const SimParams& p) {
  if (!(p.sigma > 0.0)) throw std::invalid_argument("params: sigma must be positive");
  if (p.lambda < -1 || p.lambda > 1) throw std::invalid_argument("params: lambda must be +1, -1 or 0 (linear)");
  if (!(p.damping >= 0.0)) throw std::invalid_argument("params: damping must be non-negative");
  if (!(p.dt > 0.0)) throw std::invalid_argument("params: dt must be positive");
  if (!(p.horizon > 0.0)) throw std::invalid_argument("params: horizon must be positive");
  if (p.log_every < 1) throw std::invalid_argument("params: log_every must be >= 1");
}

/// 2/d <= sigma < 2/(d-2)^+.
inline bool in_admissible_range(double sigma, int d) {
  if (sigma < 2.0 / d) return false;
  return d <= 2 || sigma < 2.0 / (d - 2);
}

/// Number of steps needed to reach the horizon.
inline long step_count(const SimParams& p) { return long(std::ceil(p.horizon / p.dt - 1e-9)); }

/// One Strang step: half dispersion, exact pointwise block, half dispersion.
///
/// The pointwise block is the exact flow of the nonlinear phase together with
/// damping, followed by the exact Stratonovich noise rotation exp(i dW(x)).
class Stepper {
public:
  Stepper(const Grid& grid, const SimParams& params) : grid_(grid), params_(params), half_(grid.size()) {
    validate(params);
    for (std::size_t i = 0; i < half_.size(); ++i)
      half_[i] = std::polar(1.0, -0.5 * params.dt * grid.wavenumber_sq(i));
    const double as2 = 2.0 * params.damping * params.sigma;
    damp_ = std::exp(-params.damping * params.dt);
    phase_time_ = as2 > 0.0 ? -std::expm1(-as2 * params.dt) / as2 : params.dt;
    if (params.dealias) {
      const int cutoff = grid.points() / 3;
      keep_.resize(grid.size());
      for (std::size_t i = 0; i < keep_.size(); ++i) {
        const auto idx = grid.axis_indices(i);
        bool keep = true;
        for (int a = 0; a < grid.dim(); ++a) {
          const int m = idx[a] < grid.points() / 2 ? idx[a] : grid.points() - idx[a];
          keep = keep && m <= cutoff;
        }
        keep_[i] = keep;
      }
    }
  }

  const SimParams& params() const { return params_; }

  /// Linear half step exp(-i dt/2 |k|^2) in place; `inverse` applies its adjoint.
  void half_dispersion(ComplexField& u, bool inverse = false) {
    auto& ws = workspace_for(grid_);
    ws.load(u.values);
    ws.forward();
    auto b = ws.buffer();
    const double inv_n = 1.0 / double(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] *= (inverse ? std::conj(half_[i]) : half_[i]) * inv_n;
    ws.backward();
    ws.store(u.values);
  }

  /// Exact pointwise block: damping, nonlinear phase and (optional) noise rotation.
  void pointwise(ComplexField& u, const RealField* dW) const {
    const double s = params_.sigma;
    const double lam_tau = params_.lambda * phase_time_;
    for (std::size_t i = 0; i < u.size(); ++i) {
      double phase = lam_tau * std::pow(std::norm(u[i]), s);
      if (dW) phase += (*dW)[i];
      u[i] *= damp_ * std::polar(1.0, phase);
    }
  }

  struct Norms {
    double mass = 0.0;
    double grad_sq = 0.0;
  };

  /// Advances u by one step using the noise increment dW (null for no noise).
  /// Returns ||u||^2 and ||grad u||^2 of the new state, read off its spectrum.
  Norms step(ComplexField& u, const RealField* dW) {
    half_dispersion(u);
    pointwise(u, dW);

    auto& ws = workspace_for(grid_);
    ws.load(u.values);
    ws.forward();
    auto b = ws.buffer();
    const double inv_n = 1.0 / double(b.size());
    Norms n;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!keep_.empty() && !keep_[i]) b[i] = 0.0;
      const double p = std::norm(b[i]);
      n.mass += p;
      n.grad_sq += grid_.wavenumber_sq(i) * p;
      b[i] *= half_[i] * inv_n;
    }
    ws.backward();
    ws.store(u.values);
    const double w = grid_.cell_volume() * inv_n;
    n.mass *= w;
    n.grad_sq *= w;
    return n;
  }

private:
  Grid grid_;
  SimParams params_;
  std::vector<Complex> half_;
  std::vector<bool> keep_;
  double damp_ = 1.0;
  double phase_time_ = 0.0;
};

enum class Status { running, completed, blew_up };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::running: return "running";
    case Status::completed: return "completed";
    case Status::blew_up: return "blew_up";
  }
  return "?";
}

struct TrajectoryState {
  double t = 0.0;
  long steps = 0;
  ComplexField u;
  Status status = Status::running;
  std::vector<ObservableRecord> log;
  /// First time the detector fired (threshold exceeded or non-finite state).
  std::optional<double> blowup_time;
  double threshold = 0.0;
  double initial_mass = 0.0;
  /// max_n |M(u_n) - e^{-2 a t_n} M(u_0)| / M(u_0) over finite states.
  double max_charge_deviation = 0.0;
  /// Mass removed by the optional dealiasing filter, relative to M(u_0).
  double dealias_mass_loss = 0.0;
  std::vector<std::string> warnings;
};

/// Resolves the detector threshold for initial data u0.
inline double detector_threshold(const SimParams& p, const ComplexField& u0) {
  if (p.blowup_threshold > 0.0) return p.blowup_threshold;
  const double h1 = std::sqrt(norm_h1_sq(u0));
  return h1 > 0.0 ? p.threshold_factor * h1 : std::numeric_limits<double>::infinity();
}

namespace detail {

inline void log_state(TrajectoryState& s, const SimParams& p) {
  s.log.push_back(observe(s.u, s.t, p.sigma, p.lambda));
  if (s.log.back().boundary_mass > p.boundary_tolerance && s.warnings.empty())
    s.warnings.push_back("boundary mass fraction " + std::to_string(s.log.back().boundary_mass) + " at t=" +
                         std::to_string(s.t) + " exceeds tolerance");
}

}  // namespace detail

/// Integrates from u0 until the horizon or the blow-up detector fires.
/// `sampler` may be null for the deterministic equation.
inline TrajectoryState evolve(const ComplexField& u0, const SimParams& params, QWienerSampler* sampler) {
  validate(params);
  require_finite(u0, "evolve");
  if (sampler && !(sampler->spec().grid() == u0.grid))
    throw std::invalid_argument("evolve: noise grid does not match field grid");

  TrajectoryState s{0.0, 0, u0, Status::running, {}, std::nullopt, detector_threshold(params, u0),
                    norm_l2_sq(u0), 0.0, 0.0, {}};
  Stepper stepper(u0.grid, params);
  const long n_steps = step_count(params);
  detail::log_state(s, params);

  for (long n = 1; n <= n_steps; ++n) {
    RealField dW;
    if (sampler && sampler->spec().mode_count() > 0) dW = sampler->sample_increment(params.dt);
    const auto norms = stepper.step(s.u, dW.empty() ? nullptr : &dW);
    s.steps = n;
    s.t = double(n) * params.dt;

    const double h1 = std::sqrt(norms.mass + norms.grad_sq);
    if (!std::isfinite(h1) || !s.u.all_finite()) {
      s.status = Status::blew_up;
      s.blowup_time = s.t;
      return s;
    }
    if (s.initial_mass > 0.0) {
      const double expected = std::exp(-2.0 * params.damping * s.t) * s.initial_mass;
      const double dev = std::abs(norm_l2_sq(s.u) - expected) / s.initial_mass;
      if (params.dealias)
        s.dealias_mass_loss = std::max(s.dealias_mass_loss, dev);
      else
        s.max_charge_deviation = std::max(s.max_charge_deviation, dev);
    }
    if (h1 > s.threshold) {
      s.status = Status::blew_up;
      s.blowup_time = s.t;
      detail::log_state(s, params);
      return s;
    }
    if (n % params.log_every == 0 || n == n_steps) detail::log_state(s, params);
  }
  s.status = Status::completed;
  return s;
}

}  // namespace snls
