#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "gradflow/fft.hpp"
#include "gradflow/grid.hpp"

namespace gradflow {

/// Constant-coefficient operators that are powers of -Laplacian.
enum class OperatorKind { NegLaplacian = 1, Bilaplacian = 2 };

/// Fourier symbol lambda(k) = |k|^(2p) of (-Laplacian)^p on a periodic grid.
/// Wavevectors use the integer frequencies in [-n/2, n/2), Nyquist included.
class OperatorSpectrum {
 public:
  static OperatorSpectrum laplacian_power(const Grid& grid, int power) {
    if (power < 0) throw InvalidArgument("operator power must be non-negative");
    OperatorSpectrum s(grid, power);
    const std::size_t n = grid.n();
    for (std::size_t p = 0; p < n; ++p) {
      const double kx = grid.wavenumber(p);
      for (std::size_t q = 0; q < n; ++q) {
        const double ky = grid.wavenumber(q);
        s.eigen_[p * n + q] = std::pow(kx * kx + ky * ky, power);
      }
    }
    return s;
  }
  static OperatorSpectrum of(const Grid& grid, OperatorKind kind) {
    return laplacian_power(grid, static_cast<int>(kind));
  }
  static OperatorSpectrum neg_laplacian(const Grid& grid) { return laplacian_power(grid, 1); }
  static OperatorSpectrum bilaplacian(const Grid& grid) { return laplacian_power(grid, 2); }

  const Grid& grid() const noexcept { return grid_; }
  int power() const noexcept { return power_; }
  OperatorKind kind() const {
    if (power_ == 1) return OperatorKind::NegLaplacian;
    if (power_ == 2) return OperatorKind::Bilaplacian;
    throw InvalidArgument("operator has no named kind");
  }
  /// lambda at full-spectrum FFT indices (p, q).
  double eigenvalue(std::size_t p, std::size_t q) const noexcept {
    return eigen_[p * grid_.n() + q];
  }

 private:
  OperatorSpectrum(const Grid& grid, int power)
      : grid_(grid), power_(power), eigen_(grid.size(), 0.0) {}

  Grid grid_;
  int power_;
  std::vector<double> eigen_;
};

namespace detail {

inline void check_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw SizeMismatch("grid mismatch");
}

/// Multiplicity of half-spectrum column q in a full-spectrum sum.
inline double column_weight(std::size_t q, std::size_t n) noexcept {
  return (q == 0 || q == n / 2) ? 1.0 : 2.0;
}

template <class Fn>
SpectralField scale_spectrum(SpectralField f, Fn&& factor) {
  const std::size_t n = f.grid().n();
  const std::size_t w = f.width();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < w; ++q) f.half(p, q) *= factor(p, q);
  }
  return f;
}

/// h^2/n^2 * sum_k weight(k) Re(F(k) conj(G(k))) over the full spectrum.
template <class Fn>
double spectral_dot(const SpectralField& f, const SpectralField& g, Fn&& weight) {
  const Grid& grid = f.grid();
  const std::size_t n = grid.n();
  const std::size_t w = f.width();
  double acc = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < w; ++q) {
      const double wk = weight(p, q);
      if (wk == 0.0) continue;
      const auto a = f.half(p, q);
      const auto b = g.half(p, q);
      acc += column_weight(q, n) * wk * (a.real() * b.real() + a.imag() * b.imag());
    }
  }
  const double h = grid.spacing();
  const double nn = static_cast<double>(grid.size());
  return acc * h * h / nn;
}

inline void check_mean_zero(const RealField& f, const char* name) {
  const double scale = f.max_abs();
  if (std::abs(f.mean()) > 1e-10 * scale) {
    throw MeanNotZero(std::string("H^-1 product needs a mean-zero ") + name);
  }
}

}  // namespace detail

inline SpectralField to_spectral(const RealField& f) {
  SpectralField out(f.grid());
  detail::fft_plan(f.grid().n()).forward(f, out);
  return out;
}

inline RealField from_spectral(const SpectralField& f) {
  RealField out(f.grid());
  detail::fft_plan(f.grid().n()).inverse(f, out);
  out *= 1.0 / static_cast<double>(f.grid().size());
  return out;
}

/// Returns A f, computed as lambda(k) f^(k).
inline RealField apply_operator(const RealField& f, const OperatorSpectrum& a) {
  detail::check_grid(f.grid(), a.grid());
  auto spec = detail::scale_spectrum(to_spectral(f),
                                     [&](std::size_t p, std::size_t q) { return a.eigenvalue(p, q); });
  return from_spectral(spec);
}

/// Solves (I + c A) u = rhs, c >= 0, diagonally in Fourier space.
inline RealField solve_shifted(const RealField& rhs, double c, const OperatorSpectrum& a) {
  detail::check_grid(rhs.grid(), a.grid());
  if (!(c >= 0.0)) throw InvalidArgument("solve_shifted needs c >= 0");
  if (c == 0.0) return rhs;
  auto spec = detail::scale_spectrum(to_spectral(rhs), [&](std::size_t p, std::size_t q) {
    return 1.0 / (1.0 + c * a.eigenvalue(p, q));
  });
  return from_spectral(spec);
}

/// Discrete L2 product h^2 sum f g.
inline double inner_L2(const RealField& f, const RealField& g) {
  f.check_same(g);
  const auto a = f.values();
  const auto b = g.values();
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  const double h = f.grid().spacing();
  return acc * h * h;
}

/// Quadratic form (f, A f) evaluated through Parseval, without an inverse transform.
inline double quadratic_form(const SpectralField& f, const OperatorSpectrum& a) {
  detail::check_grid(f.grid(), a.grid());
  return detail::spectral_dot(f, f, [&](std::size_t p, std::size_t q) { return a.eigenvalue(p, q); });
}

/// H^-1 product ((-Laplacian)^-1 f, g) of mean-zero fields; the zero mode is dropped.
inline double inner_Hm1(const RealField& f, const RealField& g) {
  f.check_same(g);
  detail::check_mean_zero(f, "first argument");
  detail::check_mean_zero(g, "second argument");
  const Grid& grid = f.grid();
  const auto lap = OperatorSpectrum::neg_laplacian(grid);
  const auto fs = to_spectral(f);
  const auto gs = to_spectral(g);
  return detail::spectral_dot(fs, gs, [&](std::size_t p, std::size_t q) {
    const double l = lap.eigenvalue(p, q);
    return l > 0.0 ? 1.0 / l : 0.0;
  });
}

/// Spectral first derivatives (d/dx, d/dy). The Nyquist coefficient of each
/// derivative is zeroed so the result stays real.
inline std::pair<RealField, RealField> gradient(const RealField& f) {
  const Grid& grid = f.grid();
  const std::size_t n = grid.n();
  const auto fs = to_spectral(f);
  const std::complex<double> i(0.0, 1.0);
  auto dx = detail::scale_spectrum(fs, [&](std::size_t p, std::size_t) {
    return p == n / 2 ? std::complex<double>(0.0) : i * grid.wavenumber(p);
  });
  auto dy = detail::scale_spectrum(fs, [&](std::size_t, std::size_t q) {
    return q == n / 2 ? std::complex<double>(0.0) : i * grid.wavenumber(q);
  });
  return {from_spectral(dx), from_spectral(dy)};
}

inline RealField divergence(const RealField& fx, const RealField& fy) {
  fx.check_same(fy);
  const Grid& grid = fx.grid();
  const std::size_t n = grid.n();
  const std::complex<double> i(0.0, 1.0);
  auto sx = to_spectral(fx);
  const auto sy = to_spectral(fy);
  for (std::size_t p = 0; p < n; ++p) {
    const auto ikx = p == n / 2 ? std::complex<double>(0.0) : i * grid.wavenumber(p);
    for (std::size_t q = 0; q < sx.width(); ++q) {
      const auto iky = q == n / 2 ? std::complex<double>(0.0) : i * grid.wavenumber(q);
      sx.half(p, q) = ikx * sx.half(p, q) + iky * sy.half(p, q);
    }
  }
  return from_spectral(sx);
}

/// 2/3-rule truncation: zeroes every mode with |m_x| > n/3 or |m_y| > n/3.
inline SpectralField dealias_two_thirds(SpectralField f) {
  const Grid& grid = f.grid();
  const long cutoff = static_cast<long>(grid.n()) / 3;
  return detail::scale_spectrum(std::move(f), [&](std::size_t p, std::size_t q) {
    const bool keep = std::abs(grid.frequency(p)) <= cutoff && std::abs(grid.frequency(q)) <= cutoff;
    return keep ? 1.0 : 0.0;
  });
}

inline RealField dealias_two_thirds(const RealField& f) {
  return from_spectral(dealias_two_thirds(to_spectral(f)));
}

}  // namespace gradflow
