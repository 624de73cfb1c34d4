#pragma once

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "snls/blowup.hpp"
#include "snls/integrator.hpp"
#include "snls/noise.hpp"
#include "snls/observables.hpp"

namespace snls {

/// Worker count from SNLS_WORKERS, else the hardware concurrency.
inline unsigned worker_count(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SNLS_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return unsigned(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// A trajectory worker failed; `index` identifies the trajectory.
class EnsembleError : public std::runtime_error {
public:
  EnsembleError(std::size_t index, const std::string& what)
      : std::runtime_error("trajectory " + std::to_string(index) + ": " + what), index(index) {}
  std::size_t index;
};

/// Runs fn(i) for i in [0, n) on `workers` threads. Results must be written to
/// per-index slots; the lowest failing index is rethrown as EnsembleError.
template <class Fn>
void parallel_for_index(std::size_t n, unsigned workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  workers = unsigned(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw EnsembleError(i, e.what());
    }
  }
}

/// Produces u0 for trajectory `index`; `rng` is a stream dedicated to initial data.
using InitialData = std::function<ComplexField(std::uint64_t index, std::mt19937_64& rng)>;

inline InitialData fixed_initial_data(ComplexField u0) {
  return [u0 = std::move(u0)](std::uint64_t, std::mt19937_64&) { return u0; };
}

struct EnsembleSpec {
  std::size_t trajectories = 1;
  std::uint64_t master_seed = 0;
  SimParams params;
  std::shared_ptr<const NoiseSpec> noise;  // null: deterministic
  InitialData initial;
  unsigned workers = 0;  // 0: worker_count()
};

/// Stream tags for derive_seed.
inline constexpr std::uint64_t kNoiseStream = 0;
inline constexpr std::uint64_t kInitialDataStream = 1;

struct TrajectoryResult {
  Status status = Status::running;
  std::optional<double> blowup_time;
  std::vector<ObservableRecord> log;
  double max_charge_deviation = 0.0;
  double min_uncertainty_gap = std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings;

  friend bool operator==(const TrajectoryResult&, const TrajectoryResult&) = default;
};

/// Exact binomial (Clopper-Pearson) confidence interval.
struct BinomialEstimate {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double p_hat = 0.0;
  double lower = 0.0;
  double upper = 1.0;

  friend bool operator==(const BinomialEstimate&, const BinomialEstimate&) = default;
};

inline BinomialEstimate clopper_pearson(std::size_t k, std::size_t n, double confidence = 0.95) {
  if (n == 0) throw std::invalid_argument("clopper_pearson: no trials");
  const double alpha = 1.0 - confidence;
  BinomialEstimate e{k, n, double(k) / double(n), 0.0, 1.0};
  using boost::math::beta_distribution;
  if (k > 0) e.lower = boost::math::quantile(beta_distribution<>(double(k), double(n - k + 1)), alpha / 2);
  if (k < n) e.upper = boost::math::quantile(beta_distribution<>(double(k + 1), double(n - k)), 1 - alpha / 2);
  return e;
}

struct EnsembleSummary {
  std::size_t trajectories = 0;
  std::vector<double> times;
  /// Field-wise ensemble means and standard errors of the observables at each
  /// log time over the trajectories still running there.
  std::vector<ObservableRecord> mean;
  std::vector<ObservableRecord> stderr_;
  std::vector<std::size_t> count;
  BinomialEstimate blowup;
  double max_charge_deviation = 0.0;
  double min_uncertainty_gap = std::numeric_limits<double>::infinity();
  std::vector<TrajectoryResult> results;

  friend bool operator==(const EnsembleSummary&, const EnsembleSummary&) = default;
};

namespace detail {

inline constexpr double ObservableRecord::*kObservableFields[] = {
    &ObservableRecord::mass,     &ObservableRecord::energy,  &ObservableRecord::variance,
    &ObservableRecord::momentum, &ObservableRecord::h_tilde, &ObservableRecord::grad_sq,
    &ObservableRecord::lp_pow,   &ObservableRecord::boundary_mass};

inline TrajectoryResult run_trajectory(const EnsembleSpec& spec, std::size_t index) {
  std::mt19937_64 init_rng(derive_seed(spec.master_seed, index, kInitialDataStream));
  const ComplexField u0 = spec.initial(index, init_rng);
  std::optional<QWienerSampler> sampler;
  if (spec.noise) sampler.emplace(spec.noise, derive_seed(spec.master_seed, index, kNoiseStream));
  auto state = evolve(u0, spec.params, sampler ? &*sampler : nullptr);

  TrajectoryResult r;
  r.status = state.status;
  r.blowup_time = state.blowup_time;
  r.max_charge_deviation = state.max_charge_deviation;
  r.warnings = state.warnings;
  for (const auto& rec : state.log)
    if (rec.mass > 0.0) r.min_uncertainty_gap = std::min(r.min_uncertainty_gap, uncertainty_gap(rec, u0.grid.dim()));
  r.log = std::move(state.log);
  return r;
}

}  // namespace detail

/// Runs every trajectory of the ensemble and reduces in index order, so the
/// summary depends only on the spec and the master seed.
inline EnsembleSummary run_ensemble(const EnsembleSpec& spec) {
  if (spec.trajectories < 1) throw std::invalid_argument("ensemble: needs at least one trajectory");
  if (!spec.initial) throw std::invalid_argument("ensemble: no initial data generator");
  validate(spec.params);

  EnsembleSummary s;
  s.trajectories = spec.trajectories;
  s.results.resize(spec.trajectories);
  parallel_for_index(spec.trajectories, worker_count(spec.workers),
                     [&](std::size_t i) { s.results[i] = detail::run_trajectory(spec, i); });

  std::size_t longest = 0, blown = 0;
  for (const auto& r : s.results) {
    longest = std::max(longest, r.log.size());
    blown += r.status == Status::blew_up;
    s.max_charge_deviation = std::max(s.max_charge_deviation, r.max_charge_deviation);
    s.min_uncertainty_gap = std::min(s.min_uncertainty_gap, r.min_uncertainty_gap);
  }
  s.blowup = clopper_pearson(blown, spec.trajectories);

  for (std::size_t k = 0; k < longest; ++k) {
    ObservableRecord mean, se;
    std::size_t n = 0;
    double t = 0.0;
    // Blown-up trajectories contribute only up to their last pre-blow-up record.
    auto usable = [&](const TrajectoryResult& r) {
      if (k >= r.log.size()) return false;
      return !(r.status == Status::blew_up && k + 1 == r.log.size() && r.blowup_time && r.log[k].t >= *r.blowup_time);
    };
    for (const auto& r : s.results) {
      if (!usable(r)) continue;
      ++n;
      t = r.log[k].t;
      for (auto f : detail::kObservableFields) mean.*f += r.log[k].*f;
    }
    if (n == 0) break;
    for (auto f : detail::kObservableFields) mean.*f /= double(n);
    for (const auto& r : s.results) {
      if (!usable(r)) continue;
      for (auto f : detail::kObservableFields) {
        const double d = r.log[k].*f - mean.*f;
        se.*f += d * d;
      }
    }
    for (auto f : detail::kObservableFields) se.*f = n > 1 ? std::sqrt(se.*f / double(n - 1) / double(n)) : 0.0;
    mean.t = se.t = t;
    s.times.push_back(t);
    s.mean.push_back(mean);
    s.stderr_.push_back(se);
    s.count.push_back(n);
  }
  return s;
}

/// Detector-based blow-up fraction over the horizon in spec.params.
inline BinomialEstimate estimate_blowup_probability(const EnsembleSpec& spec) { return run_ensemble(spec).blowup; }

/// Default rate for the exponential moment:
///   alpha = -2a + 2 a sigma / (c (sigma + 1)) ||u0||^{2 sigma} C + 4 / c^2 ||u0||^2 ||f_Q||_inf^2,
/// with c = 1 - ||u0||^{2 sigma} / ||R||^{2 sigma}.
inline double exp_moment_alpha_floor(double damping, double sigma, double gn_const, double mass_u0, double mass_R,
                                     double fq_sup) {
  const double c = 1.0 - std::pow(mass_u0 / mass_R, sigma);
  if (!(c > 0.0)) throw std::invalid_argument("exp moment: initial mass must be below the ground-state mass");
  return -2.0 * damping + 2.0 * damping * sigma / (c * (sigma + 1.0)) * std::pow(mass_u0, sigma) * gn_const +
         4.0 / (c * c) * mass_u0 * fq_sup * fq_sup;
}

struct ExpMomentSeries {
  double alpha = 0.0;
  std::vector<double> times, mean, stderr_;
  std::size_t excluded = 0;  // trajectories with overflow or blow-up
  std::size_t used = 0;
  /// max_t of mean(t) - mean(0) - 2 stderr(t); bounded when <= 0.
  double max_excess = 0.0;
  bool bounded = false;
  double max_charge_deviation = 0.0;
  double min_uncertainty_gap = std::numeric_limits<double>::infinity();
};

/// Ensemble mean of exp(||u(t)||_{H^1}^2 / e^{alpha t}) over the log times.
inline ExpMomentSeries exp_moment_estimate(const EnsembleSpec& spec, double alpha) {
  const auto summary = run_ensemble(spec);
  ExpMomentSeries out;
  out.alpha = alpha;
  out.max_charge_deviation = summary.max_charge_deviation;
  out.min_uncertainty_gap = summary.min_uncertainty_gap;
  std::vector<const TrajectoryResult*> kept;
  std::vector<std::vector<double>> values;
  for (const auto& r : summary.results) {
    if (r.status != Status::completed) {
      ++out.excluded;
      continue;
    }
    std::vector<double> v;
    bool overflow = false;
    for (const auto& rec : r.log) {
      v.push_back(std::exp((rec.mass + rec.grad_sq) / std::exp(alpha * rec.t)));
      overflow = overflow || !std::isfinite(v.back());
    }
    if (overflow) {
      ++out.excluded;
      continue;
    }
    kept.push_back(&r);
    values.push_back(std::move(v));
  }
  out.used = kept.size();
  if (kept.empty()) return out;
  const std::size_t len = values.front().size();
  for (std::size_t k = 0; k < len; ++k) {
    double m = 0.0;
    for (const auto& v : values) m += v[k];
    m /= double(values.size());
    double var = 0.0;
    for (const auto& v : values) var += (v[k] - m) * (v[k] - m);
    const double se = values.size() > 1 ? std::sqrt(var / double(values.size() - 1) / double(values.size())) : 0.0;
    out.times.push_back(kept.front()->log[k].t);
    out.mean.push_back(m);
    out.stderr_.push_back(se);
  }
  out.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < len; ++k)
    out.max_excess = std::max(out.max_excess, out.mean[k] - out.mean[0] - 2.0 * out.stderr_[k]);
  // Deterministic runs have zero stderr; allow roundoff at the t = 0 level.
  out.bounded = out.max_excess <= 1e-12 * out.mean[0];
  return out;
}

struct ContinuousDependence {
  double initial_distance_sq = 0.0;
  /// Ensemble mean and stderr of sup_t ||u - v||^2 / ||u0 - v0||^2.
  double ratio = 0.0;
  double ratio_stderr = 0.0;
  /// Ensemble mean of ||u(t) - v(t)||^2 / ||u0 - v0||^2 at each log time.
  std::vector<double> times, mean_ratio;
  std::size_t excluded = 0;
};

/// Integrates u0 and v0 driven by one shared noise path per trajectory.
inline ContinuousDependence continuous_dependence(const ComplexField& u0, const ComplexField& v0,
                                                  const EnsembleSpec& spec) {
  if (!(u0.grid == v0.grid)) throw std::invalid_argument("continuous_dependence: grids differ");
  validate(spec.params);
  ContinuousDependence out;
  out.initial_distance_sq = norm_l2_sq(u0 - v0);
  const double d0 = out.initial_distance_sq;
  const auto& p = spec.params;
  const long n_steps = step_count(p);
  const double Bu = detector_threshold(p, u0), Bv = detector_threshold(p, v0);

  struct PathResult {
    bool ok = true;
    double sup = 0.0;
    std::vector<double> t, series;
  };
  std::vector<PathResult> paths(spec.trajectories);
  parallel_for_index(spec.trajectories, worker_count(spec.workers), [&](std::size_t i) {
    std::optional<QWienerSampler> sampler;
    if (spec.noise && spec.noise->mode_count() > 0)
      sampler.emplace(spec.noise, derive_seed(spec.master_seed, i, kNoiseStream));
    Stepper stepper(u0.grid, p);
    ComplexField u = u0, v = v0;
    auto& r = paths[i];
    r.t.push_back(0.0);
    r.series.push_back(d0 > 0.0 ? 1.0 : 0.0);
    r.sup = r.series.back();
    for (long n = 1; n <= n_steps; ++n) {
      RealField dW;
      if (sampler) dW = sampler->sample_increment(p.dt);
      const auto nu = stepper.step(u, sampler ? &dW : nullptr);
      const auto nv = stepper.step(v, sampler ? &dW : nullptr);
      const double hu = std::sqrt(nu.mass + nu.grad_sq), hv = std::sqrt(nv.mass + nv.grad_sq);
      if (!std::isfinite(hu) || !std::isfinite(hv) || hu > Bu || hv > Bv) {
        r.ok = false;
        return;
      }
      const double q = d0 > 0.0 ? norm_l2_sq(u - v) / d0 : 0.0;
      r.sup = std::max(r.sup, q);
      if (n % p.log_every == 0 || n == n_steps) {
        r.t.push_back(double(n) * p.dt);
        r.series.push_back(q);
      }
    }
  });

  std::vector<const PathResult*> ok;
  for (const auto& r : paths) {
    if (r.ok)
      ok.push_back(&r);
    else
      ++out.excluded;
  }
  if (ok.empty()) return out;
  double m = 0.0;
  for (auto* r : ok) m += r->sup;
  m /= double(ok.size());
  double var = 0.0;
  for (auto* r : ok) var += (r->sup - m) * (r->sup - m);
  out.ratio = m;
  out.ratio_stderr = ok.size() > 1 ? std::sqrt(var / double(ok.size() - 1) / double(ok.size())) : 0.0;
  out.times = ok.front()->t;
  out.mean_ratio.assign(out.times.size(), 0.0);
  for (auto* r : ok)
    for (std::size_t k = 0; k < out.times.size(); ++k) out.mean_ratio[k] += r->series[k] / double(ok.size());
  return out;
}

struct RescaleComparison {
  /// max over trajectories and steps of ||u_direct - u_oracle|| / ||u_direct||.
  double max_deviation = 0.0;
  std::size_t trajectories = 0;
  /// Smallest uncertainty gap over direct states sampled every log_every steps.
  double min_uncertainty_gap = std::numeric_limits<double>::infinity();
};

/// Cross-checks the direct scheme against the transformed equation
///   dv = i Laplace v dt + i lambda e^{-2 a sigma t} |v|^{2 sigma} v dt,  u = e^{-a t + i W(t)} v,
/// valid when the noise is spatially constant. The oracle integrates v by
/// Strang splitting with the time-change factor taken at the step midpoint.
inline RescaleComparison rescale_oracle_compare(const ComplexField& u0, const EnsembleSpec& spec) {
  if (spec.noise && spec.noise->mode_count() > 0 && !spec.noise->space_independent())
    throw std::invalid_argument("rescale_oracle_compare: noise must be spatially constant");
  const auto& p = spec.params;
  validate(p);
  const long n_steps = step_count(p);
  const double gamma = spec.noise && spec.noise->mode_count() > 0 ? spec.noise->modes()[0][0] : 0.0;

  std::vector<double> worst(spec.trajectories, 0.0);
  std::vector<double> gaps(spec.trajectories, std::numeric_limits<double>::infinity());
  parallel_for_index(spec.trajectories, worker_count(spec.workers), [&](std::size_t i) {
    std::optional<QWienerSampler> sampler;
    if (gamma != 0.0) sampler.emplace(spec.noise, derive_seed(spec.master_seed, i, kNoiseStream));
    Stepper direct(u0.grid, p);
    SimParams linear = p;
    linear.damping = 0.0;
    Stepper oracle(u0.grid, linear);
    ComplexField u = u0, v = u0;
    const double two_as = 2.0 * p.damping * p.sigma;
    for (long n = 1; n <= n_steps; ++n) {
      const double t0 = double(n - 1) * p.dt;
      RealField dW;
      if (sampler) dW = sampler->sample_increment(p.dt);
      direct.step(u, sampler ? &dW : nullptr);

      oracle.half_dispersion(v);
      const double tau = p.lambda * std::exp(-two_as * (t0 + 0.5 * p.dt)) * p.dt;
      for (auto& x : v.values) x *= std::polar(1.0, tau * std::pow(std::norm(x), p.sigma));
      oracle.half_dispersion(v);

      const double t = double(n) * p.dt;
      const double W = sampler ? gamma * sampler->brownian()[0] : 0.0;
      const Complex back = std::exp(-p.damping * t) * std::polar(1.0, W);
      double diff = 0.0, ref = 0.0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        diff += std::norm(u[j] - back * v[j]);
        ref += std::norm(u[j]);
      }
      if (!std::isfinite(diff) || !std::isfinite(ref)) throw NumericalError("rescale oracle: non-finite state");
      if (ref > 0.0) worst[i] = std::max(worst[i], std::sqrt(diff / ref));
      if (ref > 0.0 && (n % p.log_every == 0 || n == 1)) gaps[i] = std::min(gaps[i], uncertainty_gap(u, u.grid.dim()));
    }
  });
  RescaleComparison out;
  out.trajectories = spec.trajectories;
  for (double w : worst) out.max_deviation = std::max(out.max_deviation, w);
  for (double g : gaps) out.min_uncertainty_gap = std::min(out.min_uncertainty_gap, g);
  return out;
}

}  // namespace snls
