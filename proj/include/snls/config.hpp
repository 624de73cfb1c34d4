#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace snls {

/// Config problem with the offending line (0 when not tied to a line) and key.
class ConfigError : public std::runtime_error {
public:
  ConfigError(int line, std::string key, const std::string& what)
      : std::runtime_error(format(line, key, what)), line(line), key(std::move(key)) {}
  int line;
  std::string key;

private:
  static std::string format(int line, const std::string& key, const std::string& what) {
    std::string s = line > 0 ? "line " + std::to_string(line) + ": " : "";
    if (!key.empty()) s += key + ": ";
    return s + what;
  }
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"simulate",      "ensemble",   "groundstate", "blowup-scan", "threshold",
                                              "rescale-check", "exp-moment", "cont-dep",    "damping-sweep"};
  return names;
}

namespace config_detail {

enum class Kind { integer, unsigned_integer, real, optional_real, boolean, string, choice, real_list };

using Value = std::variant<long long, std::uint64_t, double, std::optional<double>, bool, std::string,
                           std::vector<double>>;

struct Entry {
  std::string key;
  Kind kind;
  std::string fallback;  // textual default, parsed like file input
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = false;
  std::vector<std::string> choices;
  std::string help;
};

inline constexpr double inf = std::numeric_limits<double>::infinity();

inline const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries{
      {"experiment", Kind::choice, "", -inf, inf, false, experiment_names(), "experiment to run"},
      {"seed", Kind::unsigned_integer, "0", 0, inf, false, {}, "master seed"},
      {"output", Kind::string, "out", -inf, inf, false, {}, "artifact directory"},
      {"grid.dim", Kind::integer, "1", 1, 2, false, {}, "spatial dimension"},
      {"grid.half_width", Kind::real, "20", 0, inf, true, {}, "box is [-L, L)^d"},
      {"grid.points", Kind::integer, "512", 8, 1 << 20, false, {}, "points per dimension (power of two)"},
      {"model.sigma", Kind::real, "2", 0, inf, true, {}, "nonlinearity exponent"},
      {"model.lambda", Kind::integer, "1", -1, 1, false, {}, "+1 focusing, -1 defocusing, 0 linear"},
      {"model.damping", Kind::real, "0", 0, inf, false, {}, "damping rate a"},
      {"time.dt", Kind::real, "1e-3", 0, inf, true, {}, "time step"},
      {"time.horizon", Kind::real, "1", 0, inf, true, {}, "final time T"},
      {"time.log_every", Kind::integer, "10", 1, inf, false, {}, "steps between observable records"},
      {"detector.factor", Kind::real, "1000", 0, inf, true, {}, "threshold = factor * ||u0||_H1"},
      {"detector.threshold", Kind::real, "0", 0, inf, false, {}, "absolute H1 threshold (0: use factor)"},
      {"detector.boundary_tolerance", Kind::real, "1e-6", 0, inf, false, {}, "boundary mass fraction warning"},
      {"integrator.dealias", Kind::boolean, "false", -inf, inf, false, {}, "2/3-rule filter after each step"},
      {"noise.kind", Kind::choice, "none", -inf, inf, false, {"none", "constant", "fourier"}, "noise covariance"},
      {"noise.modes", Kind::integer, "4", 1, inf, false, {}, "number of Fourier modes"},
      {"noise.gamma", Kind::real, "0.1", 0, inf, false, {}, "noise amplitude"},
      {"noise.decay", Kind::real, "2", 2, inf, false, {}, "mode amplitude decay exponent"},
      {"initial.kind", Kind::choice, "gaussian", -inf, inf, false, {"gaussian", "ground_state", "file"},
       "initial data family"},
      {"initial.amplitude", Kind::real, "1", -inf, inf, false, {}, "amplitude (multiple of R for ground_state)"},
      {"initial.width", Kind::real, "1", 0, inf, true, {}, "Gaussian width"},
      {"initial.chirp", Kind::real, "0", -inf, inf, false, {}, "quadratic phase coefficient"},
      {"initial.velocity", Kind::real, "0", -inf, inf, false, {}, "linear phase along the first axis"},
      {"initial.file", Kind::string, "", -inf, inf, false, {}, "field file for kind = file"},
      {"initial.randomize", Kind::real, "0", 0, inf, false, {}, "relative amplitude jitter per trajectory"},
      {"ensemble.trajectories", Kind::integer, "1", 1, inf, false, {}, "trajectory count"},
      {"threshold.amplitudes", Kind::real_list, "0.9,1.2", 0, inf, true, {}, "multiples of R to classify"},
      {"threshold.refine", Kind::boolean, "true", -inf, inf, false, {}, "repeat blow-ups at dt/2 and 2N"},
      {"scan.damping", Kind::real_list, "0", 0, inf, false, {}, "damping values"},
      {"scan.sigma", Kind::real_list, "3", 0, inf, true, {}, "exponents (sigma d > 2)"},
      {"scan.fq", Kind::real_list, "0", 0, inf, false, {}, "noise-gradient bounds ||f_Q||_inf"},
      {"scan.t_max", Kind::real, "1000", 0, inf, true, {}, "root search horizon"},
      {"expmoment.alpha", Kind::optional_real, "auto", -inf, inf, false, {}, "rate alpha (auto: lower bound)"},
      {"contdep.epsilon", Kind::real, "1e-2", 0, inf, true, {}, "size of the initial perturbation"},
      {"sweep.damping", Kind::real_list, "0,1,4,16,64", 0, inf, false, {}, "damping values"},
      {"rescale.refinements", Kind::integer, "2", 0, 10, false, {}, "dt halvings after the base run"},
  };
  return entries;
}

inline const Entry* find_entry(std::string_view key) {
  for (const auto& e : registry())
    if (e.key == key) return &e;
  return nullptr;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& s, int line, const std::string& key) {
  if (s == "inf") return inf;
  if (s == "-inf") return -inf;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || std::isnan(v))
    throw ConfigError(line, key, "expected a real number, got '" + s + "'");
  return v;
}

template <class T>
T parse_integral(const std::string& s, int line, const std::string& key) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ConfigError(line, key, "expected an integer, got '" + s + "'");
  return v;
}

inline void check_range(const Entry& e, double v, int line) {
  const bool low_bad = e.lo_open ? !(v > e.lo) : !(v >= e.lo);
  if (low_bad || !(v <= e.hi)) {
    std::string range = (e.lo_open ? "(" : "[") + format_real(e.lo) + ", " + format_real(e.hi) + "]";
    throw ConfigError(line, e.key, "value " + format_real(v) + " outside " + range);
  }
}

inline Value parse_value(const Entry& e, const std::string& text, int line) {
  switch (e.kind) {
    case Kind::integer: {
      const auto v = parse_integral<long long>(text, line, e.key);
      check_range(e, double(v), line);
      return v;
    }
    case Kind::unsigned_integer: return parse_integral<std::uint64_t>(text, line, e.key);
    case Kind::real: {
      const double v = parse_real(text, line, e.key);
      check_range(e, v, line);
      return v;
    }
    case Kind::optional_real: {
      if (text == "auto") return std::optional<double>{};
      const double v = parse_real(text, line, e.key);
      check_range(e, v, line);
      return std::optional<double>{v};
    }
    case Kind::boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      throw ConfigError(line, e.key, "expected true or false, got '" + text + "'");
    case Kind::string:
      if (text.find('#') != std::string::npos) throw ConfigError(line, e.key, "'#' is not allowed in values");
      return text;
    case Kind::choice: {
      if (text.empty() && e.key == "experiment") throw ConfigError(line, e.key, "required key is empty");
      if (std::find(e.choices.begin(), e.choices.end(), text) == e.choices.end()) {
        std::string allowed;
        for (const auto& c : e.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw ConfigError(line, e.key, "unknown value '" + text + "' (allowed: " + allowed + ")");
      }
      return text;
    }
    case Kind::real_list: {
      std::vector<double> out;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const double v = parse_real(trim(item), line, e.key);
        check_range(e, v, line);
        out.push_back(v);
      }
      if (out.empty()) throw ConfigError(line, e.key, "list must not be empty");
      return out;
    }
  }
  throw ConfigError(line, e.key, "unsupported kind");
}

inline std::string format_value(const Value& v) {
  struct Visitor {
    std::string operator()(long long x) const { return std::to_string(x); }
    std::string operator()(std::uint64_t x) const { return std::to_string(x); }
    std::string operator()(double x) const { return format_real(x); }
    std::string operator()(const std::optional<double>& x) const { return x ? format_real(*x) : "auto"; }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& x) const { return x; }
    std::string operator()(const std::vector<double>& x) const {
      std::string s;
      for (double d : x) s += (s.empty() ? "" : ",") + format_real(d);
      return s;
    }
  };
  return std::visit(Visitor{}, v);
}

}  // namespace config_detail

/// Validated run configuration: flat dotted keys with typed values, defaults and
/// per-key provenance ("default", "line N" or an override label).
class RunConfig {
public:
  /// Parses `key = value` lines; '#' starts a comment.
  static RunConfig parse(std::string_view text) {
    using namespace config_detail;
    RunConfig c;
    std::map<std::string, int> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = std::min(text.find('\n', pos), text.size());
      std::string_view raw = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      const std::string line = trim(raw);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(line_no, "", "expected 'key = value', got '" + line + "'");
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string val = trim(std::string_view(line).substr(eq + 1));
      const Entry* e = find_entry(key);
      if (!e) throw ConfigError(line_no, key, "unknown key");
      if (auto it = seen.find(key); it != seen.end())
        throw ConfigError(line_no, key, "duplicate key (first set on line " + std::to_string(it->second) + ")");
      seen[key] = line_no;
      c.values_[key] = parse_value(*e, val, line_no);
      c.provenance_[key] = "line " + std::to_string(line_no);
    }
    for (const auto& e : registry()) {
      if (c.values_.count(e.key)) continue;
      if (e.key == "experiment") throw ConfigError(0, "experiment", "required key is missing");
      c.values_[e.key] = parse_value(e, e.fallback, 0);
      c.provenance_[e.key] = "default";
    }
    c.check_regime();
    return c;
  }

  /// Sets one key from text, as if read from a file; `source` is recorded as provenance.
  void set(const std::string& key, const std::string& text, const std::string& source = "override") {
    const auto* e = config_detail::find_entry(key);
    if (!e) throw ConfigError(0, key, "unknown key");
    values_[key] = config_detail::parse_value(*e, text, 0);
    provenance_[key] = source;
    warnings_.clear();
    check_regime();
  }

  /// One `key = value` line per registered key, in registry order.
  std::string serialize() const {
    std::string out;
    for (const auto& e : config_detail::registry()) out += e.key + " = " + text(e.key) + "\n";
    return out;
  }

  std::string text(const std::string& key) const { return config_detail::format_value(at(key)); }
  const std::string& provenance(const std::string& key) const { return provenance_.at(key); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  long long integer(const std::string& key) const { return std::get<long long>(at(key)); }
  std::uint64_t unsigned_integer(const std::string& key) const { return std::get<std::uint64_t>(at(key)); }
  double real(const std::string& key) const { return std::get<double>(at(key)); }
  std::optional<double> optional_real(const std::string& key) const { return std::get<std::optional<double>>(at(key)); }
  bool boolean(const std::string& key) const { return std::get<bool>(at(key)); }
  const std::string& string(const std::string& key) const { return std::get<std::string>(at(key)); }
  const std::vector<double>& list(const std::string& key) const { return std::get<std::vector<double>>(at(key)); }

  const std::string& experiment() const { return string("experiment"); }

  friend bool operator==(const RunConfig& a, const RunConfig& b) { return a.values_ == b.values_; }

private:
  const config_detail::Value& at(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(0, key, "unknown key");
    return it->second;
  }

  // Paper-regime experiments assume 2/d <= sigma < 2/(d - 2)^+.
  void check_regime() {
    const auto& exp = experiment();
    const bool regime = exp == "threshold" || exp == "exp-moment" || exp == "blowup-scan" || exp == "damping-sweep" ||
                        exp == "cont-dep";
    if (!regime) return;
    const double d = double(integer("grid.dim"));
    auto check = [&](double sigma, const std::string& key) {
      const bool below = sigma < 2.0 / d;
      const bool above = d > 2.0 && sigma >= 2.0 / (d - 2.0);
      if (below || above)
        warnings_.push_back(key + " = " + config_detail::format_real(sigma) +
                            " is outside the admissible range 2/d <= sigma < 2/(d-2)^+ for d = " +
                            std::to_string(int(d)));
    };
    if (exp == "blowup-scan")
      for (double s : list("scan.sigma")) check(s, "scan.sigma");
    else
      check(real("model.sigma"), "model.sigma");
  }

  std::map<std::string, config_detail::Value> values_;
  std::map<std::string, std::string> provenance_;
  std::vector<std::string> warnings_;
};

}  // namespace snls
