#pragma once

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "snls/grid.hpp"

namespace snls {

namespace detail {
// The FFTW planner is not thread-safe; plan execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Owns FFTW buffers and forward/backward plans for one grid.
///
/// Transforms are unnormalized in both directions, so backward(forward(f))
/// returns size()*f. A workspace must not be shared between threads.
class SpectralWorkspace {
public:
  explicit SpectralWorkspace(const Grid& grid) : grid_(grid), n_(grid.size()) {
    buffer_ = fftw_alloc_complex(n_);
    std::lock_guard lock(detail::fftw_planner_mutex());
    int dims[2] = {grid.points(), grid.points()};
    // FFTW_ESTIMATE keeps the chosen algorithm, and hence the bits, identical across runs.
    forward_ = fftw_plan_dft(grid.dim(), dims, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft(grid.dim(), dims, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~SpectralWorkspace() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buffer_);
  }
  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return n_; }

  /// In-place view of the transform buffer.
  std::span<Complex> buffer() { return {reinterpret_cast<Complex*>(buffer_), n_}; }

  void load(std::span<const Complex> values) {
    auto b = buffer();
    for (std::size_t i = 0; i < n_; ++i) b[i] = values[i];
  }
  void store(std::span<Complex> values) {
    auto b = buffer();
    for (std::size_t i = 0; i < n_; ++i) values[i] = b[i];
  }

  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

private:
  Grid grid_;
  std::size_t n_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Per-thread cache of workspaces keyed by grid.
inline SpectralWorkspace& workspace_for(const Grid& grid) {
  using Key = std::tuple<int, double, int>;
  thread_local std::map<Key, std::unique_ptr<SpectralWorkspace>> cache;
  auto& slot = cache[Key{grid.dim(), grid.half_width(), grid.points()}];
  if (!slot) slot = std::make_unique<SpectralWorkspace>(grid);
  return *slot;
}

/// Forward transform coefficients of f (unnormalized).
inline std::vector<Complex> transform(const ComplexField& f) {
  auto& ws = workspace_for(f.grid);
  ws.load(f.values);
  ws.forward();
  auto b = ws.buffer();
  return {b.begin(), b.end()};
}

/// Applies a diagonal Fourier multiplier m(flat spectral index) to f.
template <class Multiplier>
ComplexField apply_multiplier(const ComplexField& f, Multiplier&& m) {
  auto& ws = workspace_for(f.grid);
  ws.load(f.values);
  ws.forward();
  auto b = ws.buffer();
  const double inv_n = 1.0 / double(ws.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] *= m(i) * inv_n;
  ws.backward();
  ComplexField out(f.grid);
  ws.store(out.values);
  return out;
}

/// Spectral Laplacian: inverse transform of -|k|^2 times the transform of f.
inline ComplexField laplacian(const ComplexField& f) {
  require_finite(f, "laplacian");
  const Grid& g = f.grid;
  return apply_multiplier(f, [&](std::size_t i) { return Complex(-g.wavenumber_sq(i)); });
}

/// Spectral first derivatives, one field per axis. The Nyquist bin of the
/// differentiated axis is zeroed so real input gives real output.
inline std::vector<ComplexField> gradient(const ComplexField& f) {
  require_finite(f, "gradient");
  const Grid& g = f.grid;
  std::vector<ComplexField> out;
  for (int axis = 0; axis < g.dim(); ++axis) {
    out.push_back(apply_multiplier(f, [&](std::size_t i) {
      const int j = g.axis_indices(i)[axis];
      if (g.is_nyquist(j)) return Complex{};
      return Complex(0.0, g.wavenumber(j));
    }));
  }
  return out;
}

/// ||grad f||^2 evaluated by Parseval from the transform of f.
///
/// Uses the same |k|^2 symbol as laplacian(), so ||grad f||^2 = -<f, laplacian f>.
inline double gradient_norm_sq(const ComplexField& f) {
  require_finite(f, "gradient_norm_sq");
  const Grid& g = f.grid;
  auto& ws = workspace_for(g);
  ws.load(f.values);
  ws.forward();
  auto b = ws.buffer();
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += g.wavenumber_sq(i) * std::norm(b[i]);
  return s * g.cell_volume() / double(b.size());
}

/// 2/3-rule filter: zeroes every bin with |m| > N/3 along any axis.
inline void dealias(ComplexField& f) {
  const Grid& g = f.grid;
  const int cutoff = g.points() / 3;
  f = apply_multiplier(f, [&](std::size_t i) {
    const auto idx = g.axis_indices(i);
    for (int a = 0; a < g.dim(); ++a) {
      const int m = idx[a] < g.points() / 2 ? idx[a] : g.points() - idx[a];
      if (m > cutoff) return Complex{};
    }
    return Complex(1.0);
  });
}

}  // namespace snls
