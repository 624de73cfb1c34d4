#pragma once

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <boost/version.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "snls/blowup.hpp"
#include "snls/config.hpp"
#include "snls/field_io.hpp"
#include "snls/groundstate.hpp"
#include "snls/montecarlo.hpp"

namespace snls {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_config = 2, exit_numerical = 3, exit_blowup = 4 };

/// Everything an experiment produced, besides the files it wrote.
struct RunOutcome {
  int exit_code = exit_ok;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> files;
  std::vector<std::string> lines;  // human-readable verdicts for stdout
};

namespace exp_detail {

using nlohmann::json;
namespace fs = std::filesystem;

inline std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Collects artifact files so that the manifest can list them.
class Artifacts {
public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name, bool binary = false) {
    files_.push_back(name);
    std::ofstream os(dir_ / name, binary ? std::ios::binary : std::ios::out);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return os;
  }

  void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << "\n"; }

  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
    auto os = open(name);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

private:
  fs::path dir_;
  std::vector<std::string> files_;
};

inline Grid make_grid(const RunConfig& c) {
  try {
    return Grid(int(c.integer("grid.dim")), c.real("grid.half_width"), int(c.integer("grid.points")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "grid.points", e.what());
  }
}

inline SimParams make_params(const RunConfig& c) {
  SimParams p;
  p.sigma = c.real("model.sigma");
  p.lambda = int(c.integer("model.lambda"));
  p.damping = c.real("model.damping");
  p.dt = c.real("time.dt");
  p.horizon = c.real("time.horizon");
  p.log_every = int(c.integer("time.log_every"));
  p.threshold_factor = c.real("detector.factor");
  p.blowup_threshold = c.real("detector.threshold");
  p.boundary_tolerance = c.real("detector.boundary_tolerance");
  p.dealias = c.boolean("integrator.dealias");
  return p;
}

inline std::shared_ptr<const NoiseSpec> make_noise(const RunConfig& c, const Grid& g) {
  const auto& kind = c.string("noise.kind");
  if (kind == "none") return nullptr;
  if (kind == "constant") return std::make_shared<const NoiseSpec>(NoiseSpec::constant(g, c.real("noise.gamma")));
  return std::make_shared<const NoiseSpec>(
      NoiseSpec::fourier(g, int(c.integer("noise.modes")), c.real("noise.gamma"), c.real("noise.decay")));
}

inline ComplexField read_field_file(const std::string& path) {
  if (path.empty()) throw ConfigError(0, "initial.file", "required when initial.kind = file");
  const bool binary = fs::path(path).extension() == ".bin";
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw ConfigError(0, "initial.file", "cannot open '" + path + "'");
  return binary ? read_field_binary(is) : read_field_csv(is);
}

/// Deterministic initial field described by initial.* (before per-trajectory jitter).
inline ComplexField base_initial(const RunConfig& c, const Grid& g) {
  const auto& kind = c.string("initial.kind");
  const double amp = c.real("initial.amplitude"), chirp = c.real("initial.chirp"), vel = c.real("initial.velocity");
  if (kind == "file") {
    auto f = read_field_file(c.string("initial.file"));
    if (!(f.grid == g)) throw ConfigError(0, "initial.file", "field grid does not match grid.*");
    return Complex(amp) * f;
  }
  std::function<double(std::size_t)> envelope;
  if (kind == "ground_state") {
    if (g.dim() != 1) throw ConfigError(0, "initial.kind", "ground_state requires grid.dim = 1");
    GroundState gs = [&] {
      try {
        return ground_state_1d(c.real("model.sigma"), g);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(0, "grid.half_width", e.what());
      }
    }();
    envelope = [gs](std::size_t i) { return gs.profile[i].real(); };
  } else {
    const double w = c.real("initial.width");
    envelope = [&g, w](std::size_t i) { return std::exp(-g.radius_sq(i) / (w * w)); };
  }
  ComplexField u(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x0 = g.coordinate(g.axis_indices(i)[0]);
    u[i] = amp * envelope(i) * std::polar(1.0, chirp * g.radius_sq(i) + vel * x0);
  }
  return u;
}

inline InitialData make_initial(const RunConfig& c, const ComplexField& base) {
  const double eps = c.real("initial.randomize");
  if (eps == 0.0) return fixed_initial_data(base);
  return [base, eps](std::uint64_t, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return Complex(1.0 + eps * n(rng)) * base;
  };
}

inline EnsembleSpec make_spec(const RunConfig& c, const Grid& g, const ComplexField& base) {
  EnsembleSpec s;
  s.trajectories = std::size_t(c.integer("ensemble.trajectories"));
  s.master_seed = c.unsigned_integer("seed");
  s.params = make_params(c);
  s.noise = make_noise(c, g);
  s.initial = make_initial(c, base);
  return s;
}

inline double fq_sup(const std::shared_ptr<const NoiseSpec>& noise) { return noise ? compute_fQ_sup(*noise) : 0.0; }

inline const std::vector<std::string>& observable_names() {
  static const std::vector<std::string> n{"mass", "energy", "variance", "momentum", "h_tilde", "grad_sq", "lp_pow",
                                          "boundary_mass"};
  return n;
}

inline std::vector<std::string> record_row(const ObservableRecord& r) {
  std::vector<std::string> row{num(r.t)};
  for (auto f : detail::kObservableFields) row.push_back(num(r.*f));
  return row;
}

inline json record_json(const ObservableRecord& r) {
  json j;
  j["t"] = r.t;
  for (std::size_t k = 0; k < observable_names().size(); ++k) j[observable_names()[k]] = r.*detail::kObservableFields[k];
  return j;
}

inline json binomial_json(const BinomialEstimate& e) {
  return {{"successes", e.successes}, {"trials", e.trials}, {"p_hat", e.p_hat}, {"lower", e.lower}, {"upper", e.upper}};
}

inline double min_gap(const std::vector<ObservableRecord>& log, int d) {
  double g = std::numeric_limits<double>::infinity();
  for (const auto& r : log)
    if (r.mass > 0.0) g = std::min(g, uncertainty_gap(r, d));
  return g;
}

/// Expectations for the blow-up conditions from a deterministic field.
inline BlowupCondition condition_from(const ComplexField& u0, double sigma, double damping, double fq) {
  BlowupCondition c;
  c.V0 = variance(u0);
  c.G0 = momentum(u0);
  c.H0 = energy(u0, sigma);
  c.M0 = mass(u0);
  c.fq = fq;
  c.damping = damping;
  c.sigma = sigma;
  c.dim = u0.grid.dim();
  c.z = z_floor(damping, sigma, c.dim);
  return c;
}

// ODE residuals at the native log interval h and at 2h, 4h; null when the log is too short.
inline json ode_residuals(const std::vector<ObservableRecord>& log, const SimParams& p, int d) {
  json out = json::array();
  const double h = p.dt * p.log_every;
  for (int m : {1, 2, 4}) {
    json row;
    row["dt_log"] = m * h;
    try {
      row["variance"] = check_variance_ode(log, p.damping, m * h);
      row["momentum"] = check_momentum_ode(log, p.damping, p.sigma, d, m * h);
    } catch (const std::invalid_argument&) {
      row["variance"] = nullptr;
      row["momentum"] = nullptr;
    }
    out.push_back(row);
  }
  return out;
}

inline RunOutcome simulate(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  const auto base = base_initial(c, g);
  const auto spec = make_spec(c, g, base);
  std::mt19937_64 init_rng(derive_seed(spec.master_seed, 0, kInitialDataStream));
  const auto u0 = spec.initial(0, init_rng);
  std::optional<QWienerSampler> sampler;
  if (spec.noise) sampler.emplace(spec.noise, derive_seed(spec.master_seed, 0, kNoiseStream));
  const auto s = evolve(u0, spec.params, sampler ? &*sampler : nullptr);

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : s.log) rows.push_back(record_row(r));
  std::vector<std::string> header{"t"};
  for (const auto& n : observable_names()) header.push_back(n);
  art.write_csv("trajectory.csv", header, rows);
  {
    auto os = art.open("final_field.bin", true);
    write_field_binary(os, s.u);
  }

  // Identities are checked on the pre-detection part of the log.
  std::vector<ObservableRecord> clean = s.log;
  if (s.status == Status::blew_up && !clean.empty() && s.blowup_time && clean.back().t >= *s.blowup_time)
    clean.pop_back();
  double drift = 0.0;
  for (const auto& r : clean) drift = std::max(drift, std::abs(r.energy - clean.front().energy));

  json j;
  j["status"] = to_string(s.status);
  j["steps"] = s.steps;
  j["t_final"] = s.t;
  j["blowup_time"] = opt(s.blowup_time);
  j["threshold"] = finite_or_null(s.threshold);
  j["initial"] = record_json(s.log.front());
  j["max_charge_deviation"] = s.max_charge_deviation;
  j["dealias_mass_loss"] = s.dealias_mass_loss;
  j["max_energy_drift"] = drift;
  j["min_uncertainty_gap"] = finite_or_null(min_gap(s.log, g.dim()));
  j["ode_residuals"] = ode_residuals(clean, spec.params, g.dim());
  const double sd = spec.params.sigma * g.dim();
  if (sd > 2.0 && spec.params.lambda == 1) {
    const auto cond = condition_from(u0, spec.params.sigma, spec.params.damping, fq_sup(spec.noise));
    j["certified_time"] = opt(minimal_certified_time(cond, c.real("scan.t_max")));
  } else {
    j["certified_time"] = nullptr;
  }
  j["warnings"] = s.warnings;
  art.write_json("summary.json", j);

  RunOutcome out;
  out.summary = j;
  out.lines.push_back(std::string("status: ") + to_string(s.status) +
                      (s.blowup_time ? " at t=" + brief(*s.blowup_time) : std::string()));
  out.exit_code = s.status == Status::blew_up ? exit_blowup : exit_ok;
  return out;
}

inline void write_ensemble_csv(Artifacts& art, const std::string& name, const EnsembleSummary& s) {
  std::vector<std::string> header{"t", "count"};
  for (const auto& n : observable_names()) {
    header.push_back("mean_" + n);
    header.push_back("stderr_" + n);
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    std::vector<std::string> row{num(s.times[k]), std::to_string(s.count[k])};
    for (auto f : detail::kObservableFields) {
      row.push_back(num(s.mean[k].*f));
      row.push_back(num(s.stderr_[k].*f));
    }
    rows.push_back(row);
  }
  art.write_csv(name, header, rows);
}

inline RunOutcome ensemble(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  const auto spec = make_spec(c, g, base_initial(c, g));
  const auto s = run_ensemble(spec);
  write_ensemble_csv(art, "ensemble.csv", s);

  json j;
  j["trajectories"] = s.trajectories;
  j["blowup"] = binomial_json(s.blowup);
  json times = json::array();
  for (const auto& r : s.results) times.push_back(opt(r.blowup_time));
  j["blowup_times"] = times;
  j["max_charge_deviation"] = s.max_charge_deviation;
  j["min_uncertainty_gap"] = finite_or_null(s.min_uncertainty_gap);
  std::size_t warned = 0;
  for (const auto& r : s.results) warned += !r.warnings.empty();
  j["trajectories_with_warnings"] = warned;

  BlowupCondition cond;
  ExpectationErrors se;
  cond.V0 = s.mean[0].variance;
  cond.G0 = s.mean[0].momentum;
  cond.H0 = s.mean[0].energy;
  cond.M0 = s.mean[0].mass;
  se = {s.stderr_[0].variance, s.stderr_[0].momentum, s.stderr_[0].energy, s.stderr_[0].mass};
  j["initial_expectations"] = {{"V0", cond.V0}, {"G0", cond.G0}, {"H0", cond.H0}, {"M0", cond.M0},
                               {"V0_stderr", se.V0}, {"G0_stderr", se.G0}, {"H0_stderr", se.H0}, {"M0_stderr", se.M0}};
  const auto& p = spec.params;
  const double sd = p.sigma * g.dim();
  if (sd > 2.0 && p.lambda == 1) {
    cond.fq = fq_sup(spec.noise);
    cond.damping = p.damping;
    cond.sigma = p.sigma;
    cond.dim = g.dim();
    cond.z = z_floor(p.damping, p.sigma, g.dim());
    const auto t = minimal_certified_time(cond, c.real("scan.t_max"));
    j["certified_time"] = opt(t);
    if (t) {
      const auto v = certify_thm36(cond, se, *t);
      j["certification"] = {{"point_value", v.point_value}, {"worst_value", v.worst_value},
                            {"point_certified", v.point_certified}, {"worst_certified", v.worst_certified}};
    }
  }
  if (g.dim() == 1 && std::abs(sd - 2.0) < 1e-12) {
    // Empirical P(||u0|| >= ||R||), the upper bound on the blow-up probability.
    const double thr = threshold_mass(p.sigma, 1);
    std::size_t above = 0;
    for (const auto& r : s.results) above += std::sqrt(r.log.front().mass) >= thr;
    j["initial_above_threshold"] = binomial_json(clopper_pearson(above, s.trajectories));
  }
  art.write_json("summary.json", j);
  RunOutcome out;
  out.summary = j;
  out.lines.push_back("blow-up fraction " + brief(s.blowup.p_hat) + " [" + brief(s.blowup.lower) + ", " +
                      brief(s.blowup.upper) + "] over " + std::to_string(s.trajectories) + " trajectories");
  return out;
}

inline GroundState ground_state_for(const RunConfig& c, const Grid& g) {
  if (g.dim() != 1) throw ConfigError(0, "grid.dim", "ground states are computed in d = 1 only");
  try {
    return ground_state_1d(c.real("model.sigma"), g);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "grid.half_width", e.what());
  }
}

inline RunOutcome groundstate(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  const auto gs = ground_state_for(c, g);
  const double sigma = gs.sigma;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < g.size(); ++i) rows.push_back({num(g.coordinate(int(i))), num(gs.profile[i].real())});
  art.write_csv("profile.csv", {"x", "R"}, rows);

  json j;
  j["sigma"] = sigma;
  j["mass_sq"] = gs.mass_sq;
  j["mass_sq_exact"] = ground_state_mass_exact(sigma);
  j["gn_constant"] = gs.gn_constant;
  j["ode_residual"] = gs.ode_residual;
  j["energy"] = energy(gs.profile, sigma);
  j["gn_ratio"] = gn_ratio(norm_lp_pow(gs.profile, 2 * sigma + 2), gradient_norm_sq(gs.profile), gs.mass_sq, sigma, 1,
                           gs.gn_constant);
  j["threshold_mass"] = std::abs(sigma - 2.0) < 1e-12 ? json(threshold_mass(sigma, 1)) : json(nullptr);
  art.write_json("groundstate.json", j);
  RunOutcome out;
  out.summary = j;
  out.lines.push_back("||R||^2 = " + brief(gs.mass_sq) + ", C = " + brief(gs.gn_constant));
  return out;
}

inline RunOutcome blowup_scan(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  const auto u0 = base_initial(c, g);
  std::vector<std::vector<std::string>> rows;
  json cells = json::array();
  std::size_t certified = 0;
  for (double sigma : c.list("scan.sigma"))
    for (double a : c.list("scan.damping"))
      for (double fq : c.list("scan.fq")) {
        const auto cond = condition_from(u0, sigma, a, fq);
        std::optional<double> t;
        try {
          t = minimal_certified_time(cond, c.real("scan.t_max"));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(0, "scan.sigma", e.what());
        }
        // Prop 3.4 at the extreme admissible (b, y) when a > 0.
        std::optional<double> prop;
        if (a > 0.0) {
          const double b = a * (2.0 - 4.0 * sigma / (sigma * g.dim() - 2.0));
          prop = condition_prop34(cond, 1.0 / (2.0 * a - b), b);
        }
        certified += t.has_value();
        rows.push_back({num(sigma), num(a), num(fq), num(cond.z), num(cond.V0), num(cond.G0), num(cond.H0),
                        num(cond.M0), t ? num(*t) : "", prop ? num(*prop) : ""});
        cells.push_back({{"sigma", sigma}, {"damping", a}, {"fq", fq}, {"z", cond.z}, {"H0", cond.H0},
                         {"t_star", opt(t)}, {"prop34_value", opt(prop)}});
      }
  art.write_csv("scan.csv", {"sigma", "damping", "fq", "z", "V0", "G0", "H0", "M0", "t_star", "prop34_value"}, rows);
  json j;
  j["cells"] = cells;
  j["certified_cells"] = certified;
  art.write_json("summary.json", j);
  RunOutcome out;
  out.summary = j;
  out.lines.push_back(std::to_string(certified) + " of " + std::to_string(cells.size()) + " cells certified");
  return out;
}

inline RunOutcome threshold(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  const auto gs = ground_state_for(c, g);
  const SimParams p = make_params(c);
  double thr = 0.0;
  try {
    thr = threshold_mass(p.sigma, g.dim());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "model.sigma", e.what());
  }
  const auto noise = make_noise(c, g);
  const auto seed = c.unsigned_integer("seed");

  auto run_one = [&](const Grid& grid, const SimParams& params, double amp, std::size_t index) {
    const auto R = grid == g ? gs.profile : ground_state_1d(p.sigma, grid).profile;
    std::shared_ptr<const NoiseSpec> nz = noise;
    if (noise && !(grid == g)) nz = make_noise(c, grid);
    std::optional<QWienerSampler> sampler;
    if (nz) sampler.emplace(nz, derive_seed(seed, index, kNoiseStream));
    return evolve(Complex(amp) * R, params, sampler ? &*sampler : nullptr);
  };

  RunOutcome out;
  json rows_json = json::array();
  std::vector<std::vector<std::string>> rows;
  double gap = std::numeric_limits<double>::infinity();
  const auto& amps = c.list("threshold.amplitudes");
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double amp = amps[i];
    const auto u0 = Complex(amp) * gs.profile;
    const double norm = std::sqrt(mass(u0));
    const auto cls = classify_threshold(norm, thr);
    const auto s = run_one(g, p, amp, i);
    gap = std::min(gap, min_gap(s.log, 1));
    double grad_max = 0.0;
    for (const auto& r : s.log) grad_max = std::max(grad_max, r.grad_sq);
    const double grad_ratio = grad_max / s.log.front().grad_sq;

    json row{{"amplitude", amp}, {"norm", norm}, {"class", to_string(cls)}, {"energy", energy(u0, p.sigma, p.lambda)},
             {"status", to_string(s.status)}, {"tau", opt(s.blowup_time)}, {"sup_grad_ratio", grad_ratio},
             {"tau_refined", nullptr}, {"tau_rel_change", nullptr}};
    if (s.status == Status::blew_up && c.boolean("threshold.refine")) {
      const Grid fine(1, g.half_width(), 2 * g.points());
      SimParams pf = p;
      pf.dt = p.dt / 2;
      pf.log_every = 2 * p.log_every;
      const auto sf = run_one(fine, pf, amp, i);
      gap = std::min(gap, min_gap(sf.log, 1));
      row["tau_refined"] = opt(sf.blowup_time);
      if (sf.blowup_time) row["tau_rel_change"] = std::abs(*sf.blowup_time - *s.blowup_time) / *sf.blowup_time;
    }
    rows.push_back({num(amp), num(norm), to_string(cls), num(row["energy"].get<double>()), to_string(s.status),
                    s.blowup_time ? num(*s.blowup_time) : "", num(grad_ratio),
                    row["tau_refined"].is_null() ? "" : num(row["tau_refined"].get<double>())});
    rows_json.push_back(row);
    out.lines.push_back("amplitude " + brief(amp) + " (" + to_string(cls) + " threshold): " +
                        (s.status == Status::blew_up ? "blew_up at t=" + brief(*s.blowup_time) : std::string("global")));
  }
  art.write_csv("threshold.csv",
                {"amplitude", "norm", "class", "energy", "status", "tau", "sup_grad_ratio", "tau_refined"}, rows);
  json j;
  j["threshold_norm"] = thr;
  j["runs"] = rows_json;
  j["min_uncertainty_gap"] = finite_or_null(gap);
  art.write_json("summary.json", j);
  out.summary = j;
  return out;
}

inline RunOutcome rescale_check(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  auto spec = make_spec(c, g, base_initial(c, g));
  const auto u0 = base_initial(c, g);
  json runs = json::array();
  std::vector<std::vector<std::string>> rows;
  bool decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  const double dt0 = spec.params.dt;
  for (long k = 0; k <= c.integer("rescale.refinements"); ++k) {
    spec.params.dt = dt0 / double(1L << k);
    RescaleComparison r;
    try {
      r = rescale_oracle_compare(u0, spec);
    } catch (const EnsembleError& e) {
      throw NumericalError(e.what());
    }
    decreasing = decreasing && r.max_deviation < prev;
    prev = r.max_deviation;
    gap = std::min(gap, r.min_uncertainty_gap);
    runs.push_back({{"dt", spec.params.dt}, {"max_deviation", r.max_deviation}});
    rows.push_back({num(spec.params.dt), num(r.max_deviation)});
  }
  art.write_csv("rescale.csv", {"dt", "max_deviation"}, rows);
  json j;
  j["runs"] = runs;
  j["decreasing"] = decreasing;
  j["min_uncertainty_gap"] = finite_or_null(gap);
  j["trajectories"] = spec.trajectories;
  art.write_json("summary.json", j);
  RunOutcome out;
  out.summary = j;
  out.lines.push_back("max deviation at dt=" + brief(dt0) + ": " + brief(runs[0]["max_deviation"].get<double>()));
  return out;
}

inline RunOutcome exp_moment(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  const auto u0 = base_initial(c, g);
  const auto spec = make_spec(c, g, u0);
  const auto& p = spec.params;
  std::optional<double> floor;
  if (g.dim() == 1 && std::abs(p.sigma * g.dim() - 2.0) < 1e-12) {
    const double mR = ground_state_mass_exact(p.sigma);
    try {
      floor = exp_moment_alpha_floor(p.damping, p.sigma, gn_constant(p.sigma, 1, mR), mass(u0), mR, fq_sup(spec.noise));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(0, "initial.amplitude", e.what());
    }
  }
  const auto chosen = c.optional_real("expmoment.alpha");
  if (!chosen && !floor)
    throw ConfigError(0, "expmoment.alpha", "auto needs the mass-critical case sigma d = 2 with d = 1");
  const double alpha = chosen ? *chosen : *floor;
  const auto s = exp_moment_estimate(spec, alpha);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < s.times.size(); ++k) rows.push_back({num(s.times[k]), num(s.mean[k]), num(s.stderr_[k])});
  art.write_csv("expmoment.csv", {"t", "mean", "stderr"}, rows);
  json j;
  j["alpha"] = alpha;
  j["alpha_source"] = chosen ? "config" : "lower bound";
  j["alpha_floor"] = opt(floor);
  j["used"] = s.used;
  j["excluded"] = s.excluded;
  j["max_excess"] = finite_or_null(s.max_excess);
  j["bounded"] = s.bounded;
  j["initial_value"] = s.mean.empty() ? json(nullptr) : json(s.mean.front());
  j["max_charge_deviation"] = s.max_charge_deviation;
  j["min_uncertainty_gap"] = finite_or_null(s.min_uncertainty_gap);
  art.write_json("summary.json", j);
  RunOutcome out;
  out.summary = j;
  out.lines.push_back(std::string("exponential moment ") + (s.bounded ? "bounded" : "not bounded") +
                      " (alpha=" + brief(alpha) + ", used " + std::to_string(s.used) + ")");
  return out;
}

inline RunOutcome cont_dep(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  const auto u0 = base_initial(c, g);
  const auto spec = make_spec(c, g, u0);
  const double eps = c.real("contdep.epsilon");
  ComplexField v0 = u0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x0 = g.coordinate(g.axis_indices(i)[0]);
    v0[i] += eps * std::exp(-g.radius_sq(i)) * std::polar(1.0, x0);
  }
  const auto r = continuous_dependence(u0, v0, spec);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < r.times.size(); ++k) rows.push_back({num(r.times[k]), num(r.mean_ratio[k])});
  art.write_csv("contdep.csv", {"t", "mean_ratio"}, rows);
  json j;
  j["epsilon"] = eps;
  j["initial_distance_sq"] = r.initial_distance_sq;
  j["ratio"] = r.ratio;
  j["ratio_stderr"] = r.ratio_stderr;
  j["excluded"] = r.excluded;
  j["trajectories"] = spec.trajectories;
  art.write_json("summary.json", j);
  RunOutcome out;
  out.summary = j;
  out.lines.push_back("sup_t E||u-v||^2/||u0-v0||^2 = " + brief(r.ratio) + " +- " + brief(r.ratio_stderr));
  return out;
}

inline RunOutcome damping_sweep(const RunConfig& c, Artifacts& art) {
  const Grid g = make_grid(c);
  auto spec = make_spec(c, g, base_initial(c, g));
  std::vector<BinomialEstimate> est;
  std::vector<std::vector<std::string>> rows;
  json cells = json::array();
  double gap = std::numeric_limits<double>::infinity(), charge = 0.0;
  for (double a : c.list("sweep.damping")) {
    spec.params.damping = a;
    const auto s = run_ensemble(spec);
    est.push_back(s.blowup);
    gap = std::min(gap, s.min_uncertainty_gap);
    charge = std::max(charge, s.max_charge_deviation);
    rows.push_back({num(a), std::to_string(s.blowup.successes), std::to_string(s.blowup.trials), num(s.blowup.p_hat),
                    num(s.blowup.lower), num(s.blowup.upper)});
    json cell = binomial_json(s.blowup);
    cell["damping"] = a;
    cells.push_back(cell);
  }
  art.write_csv("sweep.csv", {"damping", "successes", "trials", "p_hat", "lower", "upper"}, rows);
  // Non-increasing up to CI overlap: no later estimate lies entirely above an earlier one.
  bool trend = true;
  for (std::size_t i = 0; i < est.size(); ++i)
    for (std::size_t j = i + 1; j < est.size(); ++j) trend = trend && est[j].lower <= est[i].upper;
  json j;
  j["cells"] = cells;
  j["nonincreasing_up_to_ci"] = trend;
  j["last_p_hat"] = est.back().p_hat;
  j["max_charge_deviation"] = charge;
  j["min_uncertainty_gap"] = finite_or_null(gap);
  art.write_json("summary.json", j);
  RunOutcome out;
  out.summary = j;
  for (std::size_t i = 0; i < est.size(); ++i)
    out.lines.push_back("a=" + brief(c.list("sweep.damping")[i]) + ": p_hat=" + brief(est[i].p_hat));
  return out;
}

inline nlohmann::json manifest(const RunConfig& c, const std::vector<std::string>& files, int exit_code) {
  json m;
  m["schema_version"] = kSchemaVersion;
  m["tool"] = "snls";
  m["version"] = kVersion;
  m["experiment"] = c.experiment();
  m["seed"] = c.unsigned_integer("seed");
  json cfg = json::object(), prov = json::object();
  for (const auto& e : config_detail::registry()) {
    cfg[e.key] = c.text(e.key);
    prov[e.key] = c.provenance(e.key);
  }
  m["config"] = cfg;
  m["provenance"] = prov;
  const auto L = c.real("grid.half_width");
  const auto N = c.integer("grid.points");
  m["grid"] = {{"dim", c.integer("grid.dim")}, {"points", N}, {"half_width", L}, {"spacing", 2.0 * L / double(N)}};
  m["libraries"] = {{"fftw", std::string(fftw_version)}, {"boost", std::string(BOOST_LIB_VERSION)}, {"compiler", std::string(__VERSION__)}};
  m["warnings"] = c.warnings();
  auto sorted = files;
  std::sort(sorted.begin(), sorted.end());
  m["outputs"] = sorted;
  m["exit_code"] = exit_code;
  return m;
}

}  // namespace exp_detail

/// Runs the configured experiment, writing artifacts and manifest.json under `out_dir`.
/// Throws ConfigError, std::invalid_argument, NumericalError or EnsembleError.
inline RunOutcome run(const RunConfig& c, const std::filesystem::path& out_dir) {
  using Fn = RunOutcome (*)(const RunConfig&, exp_detail::Artifacts&);
  static const std::map<std::string, Fn> table{
      {"simulate", exp_detail::simulate},      {"ensemble", exp_detail::ensemble},
      {"groundstate", exp_detail::groundstate}, {"blowup-scan", exp_detail::blowup_scan},
      {"threshold", exp_detail::threshold},    {"rescale-check", exp_detail::rescale_check},
      {"exp-moment", exp_detail::exp_moment},  {"cont-dep", exp_detail::cont_dep},
      {"damping-sweep", exp_detail::damping_sweep}};
  exp_detail::Artifacts art(out_dir);
  RunOutcome out = table.at(c.experiment())(c, art);
  {
    auto os = art.open("config.cfg");
    os << c.serialize();
  }
  out.files = art.files();
  out.files.push_back("manifest.json");
  std::ofstream(out_dir / "manifest.json") << exp_detail::manifest(c, out.files, out.exit_code).dump(2) << "\n";
  return out;
}

/// run() with failures mapped to exit codes; messages are appended to `err`.
inline int run_guarded(const RunConfig& c, const std::filesystem::path& out_dir, RunOutcome* outcome,
                       std::string& err) {
  try {
    auto r = run(c, out_dir);
    const int code = r.exit_code;
    if (outcome) *outcome = std::move(r);
    return code;
  } catch (const ConfigError& e) {
    err = std::string("config error: ") + e.what();
    return exit_config;
  } catch (const std::invalid_argument& e) {
    err = std::string("config error: ") + e.what();
    return exit_config;
  } catch (const NumericalError& e) {
    err = std::string("numerical failure: ") + e.what();
    return exit_numerical;
  } catch (const EnsembleError& e) {
    err = std::string("numerical failure: ") + e.what();
    return exit_numerical;
  }
}

}  // namespace snls
