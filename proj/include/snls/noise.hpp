#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "snls/grid.hpp"
#include "snls/spectral.hpp"

namespace snls {

/// Real covariance modes g_k = Q^{1/2} e_k sampled on a grid.
///
/// W(t, x) = sum_k g_k(x) beta_k(t) with independent real Brownian motions beta_k.
class NoiseSpec {
public:
  /// No noise.
  explicit NoiseSpec(const Grid& grid) : grid_(grid) {}

  /// Arbitrary real modes; each must have grid.size() samples.
  NoiseSpec(const Grid& grid, std::vector<RealField> modes) : grid_(grid), modes_(std::move(modes)) {
    for (const auto& m : modes_) {
      if (m.size() != grid_.size()) throw std::invalid_argument("noise: mode size does not match grid");
      for (double v : m)
        if (!std::isfinite(v)) throw std::invalid_argument("noise: non-finite mode value");
    }
    if (modes_.size() == 1) {
      const auto [lo, hi] = std::minmax_element(modes_[0].begin(), modes_[0].end());
      space_independent_ = *lo == *hi;
    }
  }

  /// Single spatially constant mode g_1 = gamma.
  static NoiseSpec constant(const Grid& grid, double gamma) {
    return NoiseSpec(grid, {RealField(grid.size(), gamma)});
  }

  /// Low-wavenumber real Fourier modes with amplitude gamma * k^{-decay}.
  ///
  /// In one dimension mode k uses wavenumber m = (k + 1) / 2 (integer division)
  /// and is sin(pi m x / L) for odd k, cos(pi m x / L) for even k. In two
  /// dimensions the lattice vectors (m1, m2) are enumerated by increasing
  /// |m|^2 over the half plane, each contributing a sin and a cos mode.
  static NoiseSpec fourier(const Grid& grid, int modes, double gamma, double decay) {
    if (modes < 0) throw std::invalid_argument("noise: mode count must be non-negative");
    if (decay < 2.0) throw std::invalid_argument("noise: amplitude decay exponent must be >= 2");
    const double L = grid.half_width();
    std::vector<std::array<int, 2>> lattice;
    if (grid.dim() == 1) {
      for (int m = 1; int(lattice.size()) * 2 < modes; ++m) lattice.push_back({m, 0});
    } else {
      const int reach = int(std::ceil(std::sqrt(double(modes)))) + 1;
      for (int m1 = 0; m1 <= reach; ++m1)
        for (int m2 = -reach; m2 <= reach; ++m2)
          if (m1 > 0 || m2 > 0) lattice.push_back({m1, m2});
      std::stable_sort(lattice.begin(), lattice.end(), [](const auto& a, const auto& b) {
        return a[0] * a[0] + a[1] * a[1] < b[0] * b[0] + b[1] * b[1];
      });
    }
    std::vector<RealField> out;
    for (int k = 1; k <= modes; ++k) {
      const auto m = lattice[std::size_t((k - 1) / 2)];
      const double amp = gamma * std::pow(double(k), -decay);
      RealField g(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto idx = grid.axis_indices(i);
        double phase = std::numbers::pi * m[0] * grid.coordinate(idx[0]) / L;
        if (grid.dim() == 2) phase += std::numbers::pi * m[1] * grid.coordinate(idx[1]) / L;
        g[i] = amp * (k % 2 == 1 ? std::sin(phase) : std::cos(phase));
      }
      out.push_back(std::move(g));
    }
    return NoiseSpec(grid, std::move(out));
  }

  const Grid& grid() const { return grid_; }
  std::size_t mode_count() const { return modes_.size(); }
  const std::vector<RealField>& modes() const { return modes_; }
  bool space_independent() const { return space_independent_; }

private:
  Grid grid_;
  std::vector<RealField> modes_;
  bool space_independent_ = false;
};

/// F_Q(x) = sum_k g_k(x)^2.
inline RealField compute_FQ(const NoiseSpec& spec) {
  RealField out(spec.grid().size(), 0.0);
  for (const auto& g : spec.modes())
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i] * g[i];
  return out;
}

/// Pointwise f_Q(x) = sum_k |grad g_k(x)|^2 using spectral gradients.
inline RealField compute_fQ(const NoiseSpec& spec) {
  RealField out(spec.grid().size(), 0.0);
  for (const auto& g : spec.modes()) {
    ComplexField f(spec.grid());
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = g[i];
    for (const auto& d : gradient(f))
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::norm(d[i]);
  }
  return out;
}

/// ||f_Q||_{L^inf}, the maximum of f_Q over the grid.
inline double compute_fQ_sup(const NoiseSpec& spec) {
  const auto f = compute_fQ(spec);
  return f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
}

/// SplitMix64 finalizer; used to derive independent per-trajectory seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream` of trajectory `index` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ index) ^ (stream * 0xd1b54a32d192ed03ULL));
}

/// Per-trajectory Brownian driver for a NoiseSpec.
class QWienerSampler {
public:
  QWienerSampler(std::shared_ptr<const NoiseSpec> spec, std::uint64_t seed)
      : spec_(std::move(spec)), rng_(seed), brownian_(spec_->mode_count(), 0.0) {}

  QWienerSampler(std::shared_ptr<const NoiseSpec> spec, std::uint64_t master_seed, std::uint64_t trajectory)
      : QWienerSampler(std::move(spec), derive_seed(master_seed, trajectory)) {}

  const NoiseSpec& spec() const { return *spec_; }
  double time() const { return time_; }
  /// beta_k(t) for every mode.
  const std::vector<double>& brownian() const { return brownian_; }

  /// Returns dW(x) = sum_k g_k(x) xi_k sqrt(dt) and advances the Brownian state.
  RealField sample_increment(double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample_increment: dt must be positive");
    const auto& modes = spec_->modes();
    RealField dW(spec_->grid().size(), 0.0);
    const double sq = std::sqrt(dt);
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const double db = normal_(rng_) * sq;
      brownian_[k] += db;
      const auto& g = modes[k];
      for (std::size_t i = 0; i < dW.size(); ++i) dW[i] += g[i] * db;
    }
    time_ += dt;
    return dW;
  }

  /// W(t, x) = sum_k g_k(x) beta_k(t) at the current time.
  RealField current_W() const {
    RealField W(spec_->grid().size(), 0.0);
    for (std::size_t k = 0; k < brownian_.size(); ++k)
      for (std::size_t i = 0; i < W.size(); ++i) W[i] += spec_->modes()[k][i] * brownian_[k];
    return W;
  }

private:
  std::shared_ptr<const NoiseSpec> spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::vector<double> brownian_;
  double time_ = 0.0;
};

}  // namespace snls
