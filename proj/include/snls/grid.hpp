#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace snls {

using Complex = std::complex<double>;

/// Raised when a field or intermediate quantity is non-finite or otherwise
/// unusable for the requested numerical operation.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Uniform periodic grid on the box [-L, L)^d.
///
/// Points are stored row-major: for d = 2 the flat index is i0 * N + i1,
/// where i0 runs along the first axis.
class Grid {
public:
  Grid(int dim, double half_width, int points) : dim_(dim), half_width_(half_width), points_(points) {
    if (dim != 1 && dim != 2)
      throw std::invalid_argument("grid: dimension must be 1 or 2, got " + std::to_string(dim));
    if (!(half_width > 0.0) || !std::isfinite(half_width))
      throw std::invalid_argument("grid: half-width must be positive and finite");
    if (points < 8 || (points & (points - 1)) != 0)
      throw std::invalid_argument("grid: points per dimension must be a power of two >= 8, got " +
                                  std::to_string(points));
  }

  int dim() const { return dim_; }
  double half_width() const { return half_width_; }
  int points() const { return points_; }
  std::size_t size() const { return dim_ == 1 ? std::size_t(points_) : std::size_t(points_) * std::size_t(points_); }

  double spacing() const { return 2.0 * half_width_ / points_; }
  /// Quadrature weight dx^d.
  double cell_volume() const { return std::pow(spacing(), dim_); }

  /// Coordinate of the j-th point along one axis.
  double coordinate(int j) const { return -half_width_ + j * spacing(); }

  /// Physical wavenumber of the j-th FFT bin along one axis (standard FFT ordering).
  double wavenumber(int j) const {
    const int m = j < points_ / 2 ? j : j - points_;
    return std::numbers::pi * m / half_width_;
  }

  bool is_nyquist(int j) const { return j == points_ / 2; }

  /// Largest |k|^2 representable on the grid.
  double max_wavenumber_sq() const {
    const double k = std::numbers::pi * (points_ / 2) / half_width_;
    return dim_ * k * k;
  }

  /// Per-axis index of a flat point index.
  std::array<int, 2> axis_indices(std::size_t flat) const {
    if (dim_ == 1) return {int(flat), 0};
    return {int(flat / std::size_t(points_)), int(flat % std::size_t(points_))};
  }

  /// |x|^2 at a flat point index.
  double radius_sq(std::size_t flat) const {
    const auto idx = axis_indices(flat);
    double r2 = 0.0;
    for (int a = 0; a < dim_; ++a) {
      const double x = coordinate(idx[a]);
      r2 += x * x;
    }
    return r2;
  }

  /// |k|^2 at a flat spectral index.
  double wavenumber_sq(std::size_t flat) const {
    const auto idx = axis_indices(flat);
    double k2 = 0.0;
    for (int a = 0; a < dim_; ++a) {
      const double k = wavenumber(idx[a]);
      k2 += k * k;
    }
    return k2;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  int dim_;
  double half_width_;
  int points_;
};

/// Complex samples of a wave function on a Grid.
struct ComplexField {
  Grid grid;
  std::vector<Complex> values;

  explicit ComplexField(const Grid& g) : grid(g), values(g.size(), Complex{}) {}
  ComplexField(const Grid& g, std::vector<Complex> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw std::invalid_argument("field: value count does not match grid size");
  }

  /// Samples f(x) (d = 1) or f(x, y) (d = 2) at every grid point.
  template <class F>
  static ComplexField sample(const Grid& g, F&& f) {
    constexpr bool one_d = std::is_invocable_v<F&, double>;
    if (g.dim() != (one_d ? 1 : 2)) throw std::invalid_argument("field: sampler arity does not match grid dimension");
    ComplexField out(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto idx = g.axis_indices(i);
      if constexpr (one_d)
        out.values[i] = Complex(f(g.coordinate(idx[0])));
      else
        out.values[i] = Complex(f(g.coordinate(idx[0]), g.coordinate(idx[1])));
    }
    return out;
  }

  std::size_t size() const { return values.size(); }
  Complex& operator[](std::size_t i) { return values[i]; }
  const Complex& operator[](std::size_t i) const { return values[i]; }

  bool all_finite() const {
    for (const auto& v : values)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

  ComplexField& operator*=(Complex s) {
    for (auto& v : values) v *= s;
    return *this;
  }
  ComplexField& operator+=(const ComplexField& o) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  ComplexField& operator-=(const ComplexField& o) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  friend ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
  friend ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
  friend ComplexField operator*(Complex s, ComplexField a) { return a *= s; }
};

/// Real samples on a Grid (noise modes, F_Q, ...).
using RealField = std::vector<double>;

inline void require_finite(const ComplexField& f, const char* what) {
  if (!f.all_finite()) throw NumericalError(std::string(what) + ": non-finite field value");
}

}  // namespace snls
