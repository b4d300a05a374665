#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "gradflow/errors.hpp"

namespace gradflow {

/// Uniform periodic grid on the square (0, L)^2 with n nodes per side.
/// Node (i, j) sits at (i h, j h), h = L / n.
class Grid {
 public:
  Grid(std::size_t n, double length) : n_(n), length_(length) {
    if (n < 4 || (n & (n - 1)) != 0) {
      throw InvalidArgument("grid size must be a power of two >= 4, got " + std::to_string(n));
    }
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw InvalidArgument("grid length must be positive");
    }
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return n_ * n_; }
  double length() const noexcept { return length_; }
  double spacing() const noexcept { return length_ / static_cast<double>(n_); }
  double area() const noexcept { return length_ * length_; }
  double coord(std::size_t i) const noexcept { return static_cast<double>(i) * spacing(); }

  /// Signed integer frequency of FFT index p, in [-n/2, n/2).
  long frequency(std::size_t p) const noexcept {
    const auto n = static_cast<long>(n_);
    const auto pp = static_cast<long>(p);
    return pp < n / 2 ? pp : pp - n;
  }
  /// Wavenumber 2 pi m / L of FFT index p.
  double wavenumber(std::size_t p) const noexcept {
    return 2.0 * M_PI * static_cast<double>(frequency(p)) / length_;
  }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  std::size_t n_;
  double length_;
};

/// Grid-sampled real scalar field, row-major: value(i, j) at (x_i, y_j) is values[i n + j].
class RealField {
 public:
  explicit RealField(Grid grid, double fill = 0.0) : grid_(grid), values_(grid.size(), fill) {}

  RealField(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw SizeMismatch("field value count does not match grid");
    }
  }

  /// Samples f(x, y) at every node.
  template <class Fn>
  static RealField sample(const Grid& grid, Fn&& f) {
    RealField out(grid);
    const std::size_t n = grid.n();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out.values_[i * n + j] = f(grid.coord(i), grid.coord(j));
      }
    }
    return out;
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * grid_.n() + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return values_[i * grid_.n() + j];
  }
  double& operator[](std::size_t k) noexcept { return values_[k]; }
  double operator[](std::size_t k) const noexcept { return values_[k]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double sum() const noexcept { return std::accumulate(values_.begin(), values_.end(), 0.0); }
  double mean() const noexcept { return sum() / static_cast<double>(values_.size()); }
  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  RealField& operator+=(const RealField& o) {
    check_same(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  RealField& operator-=(const RealField& o) {
    check_same(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  RealField& operator*=(double s) noexcept {
    for (double& v : values_) v *= s;
    return *this;
  }
  /// this += s * o
  RealField& axpy(double s, const RealField& o) {
    check_same(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
    return *this;
  }

  friend RealField operator+(RealField a, const RealField& b) { return a += b; }
  friend RealField operator-(RealField a, const RealField& b) { return a -= b; }
  friend RealField operator*(double s, RealField a) { return a *= s; }
  friend RealField operator*(RealField a, double s) { return a *= s; }

  template <class Fn>
  RealField map(Fn&& f) const {
    RealField out(grid_);
    std::transform(values_.begin(), values_.end(), out.values_.begin(), f);
    return out;
  }

  void check_same(const RealField& o) const {
    if (!(grid_ == o.grid_)) throw SizeMismatch("fields live on different grids");
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Fourier coefficients of a real field. Only the half spectrum produced by a
/// real-to-complex transform is stored: index (p, q) with p in [0, n) and
/// q in [0, n/2]. The remaining coefficients follow from conjugate symmetry.
/// Convention: forward transform unnormalized, inverse divides by n^2.
class SpectralField {
 public:
  explicit SpectralField(Grid grid)
      : grid_(grid), coeffs_(grid.n() * half_width(grid)) {}

  static std::size_t half_width(const Grid& g) noexcept { return g.n() / 2 + 1; }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t width() const noexcept { return half_width(grid_); }

  std::complex<double>& half(std::size_t p, std::size_t q) noexcept {
    return coeffs_[p * width() + q];
  }
  const std::complex<double>& half(std::size_t p, std::size_t q) const noexcept {
    return coeffs_[p * width() + q];
  }

  /// Full-spectrum coefficient at FFT indices (p, q), both in [0, n).
  std::complex<double> at(std::size_t p, std::size_t q) const noexcept {
    const std::size_t n = grid_.n();
    if (q <= n / 2) return half(p, q);
    return std::conj(half((n - p) % n, n - q));
  }

  std::span<std::complex<double>> coefficients() noexcept { return coeffs_; }
  std::span<const std::complex<double>> coefficients() const noexcept { return coeffs_; }

 private:
  Grid grid_;
  std::vector<std::complex<double>> coeffs_;
};

}  // namespace gradflow
