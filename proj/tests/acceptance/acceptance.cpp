// Acceptance driver: `acceptance N` evaluates criterion N and prints one line.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "snls/experiments.hpp"

using namespace snls;
using nlohmann::json;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;
  double min_gap = kInf;

  void check(bool ok, const std::string& note) {
    pass = pass && ok;
    notes.push_back((ok ? "" : "FAILED ") + note);
  }
  void note(const std::string& s) { notes.push_back(s); }
  void gap(const json& j) {
    if (j.contains("min_uncertainty_gap") && j["min_uncertainty_gap"].is_number())
      min_gap = std::min(min_gap, j["min_uncertainty_gap"].get<double>());
  }
};

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("SNLS_ACCEPTANCE_DIR");
  const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "snls-acceptance";
  return root / name;
}

RunConfig load(const std::string& name) {
  std::ifstream is(fs::path(SNLS_SOURCE_DIR) / "configs" / "acceptance" / name);
  if (!is) throw std::runtime_error("missing config " + name);
  std::stringstream ss;
  ss << is.rdbuf();
  return RunConfig::parse(ss.str());
}

json run_config(const RunConfig& c, const std::string& tag) {
  std::string err;
  RunOutcome out;
  const int code = run_guarded(c, scratch(tag), &out, err);
  if (!err.empty()) throw std::runtime_error(tag + ": " + err);
  if (code != exit_ok && code != exit_blowup) throw std::runtime_error(tag + ": exit code " + std::to_string(code));
  return out.summary;
}

// 1. Charge law over damping, noise and exponent.
Verdict criterion1() {
  Verdict v;
  double worst = 0.0;
  for (double a : {0.0, 0.5, 2.0})
    for (const char* noise : {"none", "fourier"})
      for (double sigma : {2.0, 3.0}) {
        auto c = load("c01-charge.cfg");
        c.set("model.damping", fmt(a, "%.17g"));
        c.set("noise.kind", noise);
        c.set("model.sigma", fmt(sigma, "%.17g"));
        const auto j = run_config(c, "c01");
        worst = std::max(worst, j["max_charge_deviation"].get<double>());
        v.gap(j);
      }
  v.check(worst <= 1e-12, "max relative charge deviation " + fmt(worst, "%.3e") + " over 12 configs (<= 1e-12)");
  return v;
}

// 2. Ground-state constants and the Gagliardo-Nirenberg inequality.
Verdict criterion2() {
  Verdict v;
  const auto c = load("c02-groundstate.cfg");
  const auto j = run_config(c, "c02");
  const double mass_sq = j["mass_sq"].get<double>();
  const double C = j["gn_constant"].get<double>();
  v.check(std::abs(mass_sq - pi * std::sqrt(3.0)) <= 1e-6,
          "||R||^2 = " + fmt(mass_sq, "%.10f") + " vs pi sqrt(3) = " + fmt(pi * std::sqrt(3.0), "%.10f") +
              " (closed form sqrt(3) pi / 2 = " + fmt(std::sqrt(3.0) * pi / 2, "%.10f") + ")");
  v.check(std::abs(gn_constant(2.0, 1, pi * std::sqrt(3.0)) - 1.0 / (pi * pi)) <= 1e-9,
          "formula at ||R||^2 = pi sqrt(3) gives 1/pi^2");
  v.check(std::abs(C - gn_constant(2.0, 1, mass_sq)) <= 1e-9,
          "C from the run " + fmt(C, "%.10f") + " matches the formula at the computed mass (1/pi^2 = " +
              fmt(1.0 / (pi * pi), "%.10f") + ", 4/pi^2 = " + fmt(4.0 / (pi * pi), "%.10f") + ")");
  v.check(j["ode_residual"].get<double>() < 1e-8, "ODE residual " + fmt(j["ode_residual"].get<double>(), "%.3e"));
  v.check(std::abs(j["gn_ratio"].get<double>() - 1.0) <= 1e-6,
          "ratio at R = " + fmt(j["gn_ratio"].get<double>(), "%.10f"));

  const Grid g(1, c.real("grid.half_width"), int(c.integer("grid.points")));
  v.min_gap = std::min(v.min_gap, uncertainty_gap(ground_state_1d(2.0, g).profile, 1));
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int bumps = 1 + trial % 4;
    std::vector<std::array<double, 5>> p(static_cast<std::size_t>(bumps));
    for (auto& b : p) b = {5.0 * u(rng), 0.5 + 1.25 * (1.0 + u(rng)), u(rng), u(rng), 2.0 * u(rng)};
    const auto f = ComplexField::sample(g, [&](double x) {
      Complex s{};
      for (const auto& b : p) {
        const double y = (x - b[0]) / b[1];
        s += Complex(b[2], b[3]) * std::exp(-y * y) * std::polar(1.0, b[4] * x);
      }
      return s;
    });
    worst = std::max(worst, gn_ratio(norm_lp_pow(f, 6.0), gradient_norm_sq(f), norm_l2_sq(f), 2.0, 1, C));
    v.min_gap = std::min(v.min_gap, uncertainty_gap(f, 1));
  }
  v.check(worst <= 1.0 + 1e-9, "max GN ratio over 1000 random fields " + fmt(worst, "%.10f"));
  return v;
}

// 3. Second-order energy drift in the conservative case.
Verdict criterion3() {
  Verdict v;
  std::vector<double> drift;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    auto c = load("c03-strang.cfg");
    c.set("time.dt", fmt(dt, "%.17g"));
    const auto j = run_config(c, "c03");
    drift.push_back(j["max_energy_drift"].get<double>());
    v.gap(j);
  }
  for (std::size_t i = 0; i + 1 < drift.size(); ++i) {
    const double r = drift[i] / drift[i + 1];
    v.check(r >= 3.5 && r <= 4.5, "drift ratio " + fmt(r, "%.4f") + " (" + fmt(drift[i], "%.3e") + " -> " +
                                      fmt(drift[i + 1], "%.3e") + ")");
  }
  return v;
}

// 4. Critical threshold: 0.9 R stays bounded, 1.2 R blows up with a stable tau.
Verdict criterion4() {
  Verdict v;
  const auto c = load("c04-threshold.cfg");
  const auto j = run_config(c, "c04");
  v.gap(j);
  for (const auto& r : j["runs"]) {
    const double amp = r["amplitude"].get<double>();
    if (amp < 1.0) {
      const double ratio = r["sup_grad_ratio"].get<double>();
      v.check(r["status"] == "completed" && ratio < 10.0,
              fmt(amp) + "R " + r["status"].get<std::string>() + ", sup grad ratio " + fmt(ratio, "%.4f"));
    } else {
      const bool blew = r["status"] == "blew_up" && r["tau"].is_number() && r["tau"].get<double>() < 2.0;
      const bool stable = r["tau_rel_change"].is_number() && r["tau_rel_change"].get<double>() <= 0.1;
      v.check(blew && stable, fmt(amp) + "R tau " + (r["tau"].is_number() ? fmt(r["tau"].get<double>()) : "-") +
                                  ", refined " +
                                  (r["tau_refined"].is_number() ? fmt(r["tau_refined"].get<double>()) : "-") +
                                  ", change " +
                                  (r["tau_rel_change"].is_number() ? fmt(100 * r["tau_rel_change"].get<double>(), "%.2f%%") : "-"));
    }
  }
  // Detector sensitivity, reported only.
  std::string sens = "detector factor sensitivity:";
  for (double B : {5.0, 20.0}) {
    auto cb = c;
    cb.set("detector.factor", fmt(B, "%.17g"));
    cb.set("threshold.amplitudes", "1.2");
    cb.set("threshold.refine", "false");
    const auto jb = run_config(cb, "c04b");
    const auto& tau = jb["runs"][0]["tau"];
    sens += " B=" + fmt(B) + " tau=" + (tau.is_number() ? fmt(tau.get<double>()) : std::string("none"));
  }
  v.note(sens);
  return v;
}

// 5. Variance and momentum identities: second-order residual decay in the log interval.
Verdict criterion5() {
  Verdict v;
  const auto j = run_config(load("c05-virial.cfg"), "c05");
  v.gap(j);
  const auto& res = j["ode_residuals"];
  for (const char* key : {"variance", "momentum"})
    for (std::size_t i = 0; i + 1 < res.size(); ++i) {
      if (!res[i][key].is_number() || !res[i + 1][key].is_number()) {
        v.check(false, std::string(key) + " residual missing");
        continue;
      }
      const double r = res[i + 1][key].get<double>() / res[i][key].get<double>();
      v.check(r >= 3.0 && r <= 5.0, std::string(key) + " residual ratio " + fmt(r, "%.4f") + " at dt_log " +
                                        fmt(res[i]["dt_log"].get<double>()));
    }
  return v;
}

// 6. Blow-up condition algebra.
Verdict criterion6() {
  Verdict v;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  double worst_rel = 0.0;
  for (int i = 0; i < 10000; ++i) {
    BlowupCondition c;
    c.V0 = 10 * u(rng);
    c.G0 = 10 * (u(rng) - 0.5);
    c.H0 = 10 * (u(rng) - 0.5);
    c.M0 = 10 * u(rng);
    c.fq = 10 * u(rng);
    c.sigma = 2.5 + 2 * u(rng);
    const double t = 5 * u(rng);
    const double a = condition_thm36(c, t), b = condition_conservative(c, t);
    const double scale = std::abs(c.V0) + std::abs(4 * t * c.G0) + std::abs(8 * t * t * c.H0) +
                         std::abs(4.0 / 3.0 * t * t * t * c.fq * c.M0);
    worst_rel = std::max(worst_rel, std::abs(a - b) / scale);
  }
  v.check(worst_rel <= 1e-14, "z = 0 vs conservative form: max relative difference " + fmt(worst_rel, "%.2e") +
                                  " over 10^4 inputs (relative to the sum of term magnitudes)");

  double worst_root = 0.0;
  for (int i = 0; i < 1000; ++i) {
    BlowupCondition c;
    c.V0 = 0.01 + 10 * u(rng);
    c.H0 = -(0.01 + 10 * u(rng));
    c.M0 = u(rng);
    c.sigma = 3.0;
    for (double z : {0.0, 1e-12}) {
      c.z = z;
      const auto t = minimal_certified_time(c);
      const double exact = std::sqrt(c.V0 / (-8 * c.H0));
      worst_root = std::max(worst_root, t ? std::abs(*t - exact) / exact : kInf);
    }
  }
  v.check(worst_root <= 1e-9, "t* vs sqrt(V0/(-8 H0)): max relative error " + fmt(worst_root, "%.2e"));

  // First crossing on a 10 x 10 x 10 grid over (G0, H0, fq) with damping.
  int certified = 0, violations = 0;
  for (int ig = 0; ig < 10; ++ig)
    for (int ih = 0; ih < 10; ++ih)
      for (int iq = 0; iq < 10; ++iq) {
        BlowupCondition c;
        c.V0 = 1.0;
        c.G0 = -1.0 + 0.2 * ig;
        c.H0 = -2.0 + 0.25 * ih;
        c.M0 = 2.0;
        c.fq = 0.3 * iq;
        c.damping = 0.1;
        c.sigma = 3.0;
        c.z = z_floor(c.damping, c.sigma, 1);
        const auto t = minimal_certified_time(c, 100.0);
        if (t) {
          ++certified;
          const double at = condition_thm36(c, *t), before = condition_thm36(c, *t * (1 - 1e-6));
          bool ok = at <= 0.0 && at >= -1e-9 && before > 0.0;
          for (int k = 1; k < 2000 && ok; ++k) ok = condition_thm36(c, *t * k / 2000.0) > 0.0;
          violations += !ok;
        } else {
          bool ok = true;
          for (int k = 1; k <= 20000 && ok; ++k) ok = condition_thm36(c, 100.0 * k / 20000.0) >= 0.0;
          violations += !ok;
        }
      }
  v.check(violations == 0, "first-crossing property on 1000 grid points (" + std::to_string(certified) +
                               " certified, " + std::to_string(violations) + " violations)");
  return v;
}

// 7. Detected blow-up no later than 1.25 times the certified horizon.
Verdict criterion7() {
  Verdict v;
  const auto j = run_config(load("c07-certified.cfg"), "c07");
  v.gap(j);
  const auto& init = j["initial"];
  const double exact = std::sqrt(init["variance"].get<double>() / (-8 * init["energy"].get<double>()));
  const bool has = j["certified_time"].is_number();
  const double ts = has ? j["certified_time"].get<double>() : kInf;
  v.check(has && std::abs(ts - exact) <= 1e-9 * exact,
          "H(u0) = " + fmt(init["energy"].get<double>()) + ", certified t* = " + fmt(ts));
  const bool blew = j["status"] == "blew_up";
  const double tau = blew ? j["blowup_time"].get<double>() : kInf;
  v.check(blew && tau <= 1.25 * ts, "detected tau = " + fmt(tau) + " <= 1.25 t* = " + fmt(1.25 * ts));
  return v;
}

// 8. Direct scheme against the transformed equation.
Verdict criterion8() {
  Verdict v;
  const auto j = run_config(load("c08-rescale.cfg"), "c08");
  v.gap(j);
  const auto& runs = j["runs"];
  const double d0 = runs[0]["max_deviation"].get<double>();
  v.check(d0 < 1e-6, "max relative deviation " + fmt(d0, "%.3e") + " at dt " + fmt(runs[0]["dt"].get<double>()));
  std::string seq;
  for (const auto& r : runs) seq += " " + fmt(r["max_deviation"].get<double>(), "%.3e");
  v.check(j["decreasing"].get<bool>(), "decreasing under refinement:" + seq);
  return v;
}

// 9. Exponential moment stays bounded.
Verdict criterion9() {
  Verdict v;
  const auto j = run_config(load("c09-expmoment.cfg"), "c09");
  v.gap(j);
  v.check(j["bounded"].get<bool>() && j["excluded"].get<int>() == 0,
          "alpha " + fmt(j["alpha"].get<double>()) + " (" + j["alpha_source"].get<std::string>() + "), max excess " +
              fmt(j["max_excess"].get<double>(), "%.3e") + ", used " + std::to_string(j["used"].get<int>()) +
              ", excluded " + std::to_string(j["excluded"].get<int>()));
  return v;
}

// 10. Damping suppresses blow-up.
Verdict criterion10() {
  Verdict v;
  const auto j = run_config(load("c10-sweep.cfg"), "c10");
  v.gap(j);
  std::string cells;
  for (const auto& c : j["cells"])
    cells += " a=" + fmt(c["damping"].get<double>()) + ":" + std::to_string(c["successes"].get<int>()) + "/" +
             std::to_string(c["trials"].get<int>());
  v.check(j["nonincreasing_up_to_ci"].get<bool>(), "non-increasing up to CI overlap:" + cells);
  v.check(j["last_p_hat"].get<double>() == 0.0, "p_hat at the largest damping is 0");
  return v;
}

// 11. Uncertainty principle on every sampled state, equality on Gaussians.
Verdict criterion11();

// 12. Same seed, same bytes.
Verdict criterion12() {
  Verdict v;
  auto slurp = [](const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      std::ifstream is(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << is.rdbuf();
      files[e.path().filename().string()] = ss.str();
    }
    return files;
  };
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(fs::path(SNLS_SOURCE_DIR) / "configs" / "acceptance")) {
    const auto name = e.path().filename().string();
    const auto c = load(name);
    const auto dir = scratch("c12-" + e.path().stem().string());
    std::map<std::string, std::string> first;
    for (const char* workers : {"1", "2"}) {
      ::setenv("SNLS_WORKERS", workers, 1);
      fs::remove_all(dir);
      std::string err;
      run_guarded(c, dir, nullptr, err);
      if (!err.empty()) throw std::runtime_error(name + ": " + err);
      auto files = slurp(dir);
      if (first.empty()) {
        first = std::move(files);
      } else {
        v.check(files == first, name + " reproduced (" + std::to_string(files.size()) + " files)");
        ++compared;
      }
    }
  }
  ::unsetenv("SNLS_WORKERS");
  v.note(std::to_string(compared) + " configs rerun with 1 and 2 workers");
  return v;
}

const std::vector<std::function<Verdict()>>& criteria() {
  static const std::vector<std::function<Verdict()>> all{criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8,
                                                          criterion9, criterion10, criterion11, criterion12};
  return all;
}

Verdict criterion11() {
  Verdict v;
  for (std::size_t k = 0; k < 10; ++k) {
    const auto r = criteria()[k]();
    v.min_gap = std::min(v.min_gap, r.min_gap);
    if (r.min_gap < kInf) v.note("criterion " + std::to_string(k + 1) + " min gap " + fmt(r.min_gap, "%.3e"));
  }
  v.check(v.min_gap >= -1e-10, "min uncertainty gap over criteria 1-10: " + fmt(v.min_gap, "%.3e"));
  const Grid g1(1, 20.0, 512);
  const double gap1 = uncertainty_gap(ComplexField::sample(g1, [](double x) { return std::exp(-x * x); }), 1);
  const Grid g2(2, 10.0, 64);
  const double gap2 =
      uncertainty_gap(ComplexField::sample(g2, [](double x, double y) { return std::exp(-x * x - y * y); }), 2);
  v.check(std::abs(gap1) <= 1e-8 && std::abs(gap2) <= 1e-8,
          "Gaussian gaps " + fmt(gap1, "%.2e") + " (d=1), " + fmt(gap2, "%.2e") + " (d=2)");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <criterion 1-12>\n";
    return 2;
  }
  const int n = std::atoi(argv[1]);
  if (n < 1 || n > int(criteria().size())) {
    std::cerr << "unknown criterion " << argv[1] << "\n";
    return 2;
  }
  Verdict v;
  try {
    v = criteria()[std::size_t(n - 1)]();
  } catch (const std::exception& e) {
    v.check(false, std::string("error: ") + e.what());
  }
  std::string detail;
  for (const auto& s : v.notes) detail += (detail.empty() ? "" : "; ") + s;
  std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " (" << detail << ")\n";
  return v.pass ? 0 : 1;
}
