// Copyright 2026 The shpsd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHPSD_SH_MATH_HPP_
#define SHPSD_SH_MATH_HPP_

// Special-function kernels for spherical-harmonic sound-field processing.
//
// Spherical harmonics are the orthonormal complex family with the
// Condon-Shortley phase:
//
//   Y_nm(theta, phi) = sqrt((2n+1)/(4 pi) (n-m)!/(n+m)!) P_n^m(cos theta) e^{i m phi}
//
// where P_n^m already carries the (-1)^m factor. Under this convention
// Y_{n,-m} = (-1)^m conj(Y_nm) and sum_m |Y_nm|^2 = (2n+1)/(4 pi).
//
// Modes are stored in ACN order: index(n, m) = n^2 + n + m.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace shpsd {

using cdouble = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cdouble kI{0.0, 1.0};

/// Direction on the unit sphere: colatitude theta in [0, pi], azimuth phi in
/// [0, 2 pi).
class SphericalDirection {
 public:
  SphericalDirection() = default;
  SphericalDirection(double theta, double phi) {
    if (!std::isfinite(theta) || !std::isfinite(phi)) {
      throw std::invalid_argument("SphericalDirection: non-finite angle");
    }
    if (theta < -1e-12 || theta > kPi + 1e-12) {
      throw std::invalid_argument("SphericalDirection: colatitude outside [0, pi]");
    }
    theta_ = std::clamp(theta, 0.0, kPi);
    phi_ = std::fmod(phi, 2.0 * kPi);
    if (phi_ < 0.0) phi_ += 2.0 * kPi;
    if (phi_ >= 2.0 * kPi) phi_ = 0.0;
  }

  static SphericalDirection FromDegrees(double theta_deg, double phi_deg) {
    return {theta_deg * kPi / 180.0, phi_deg * kPi / 180.0};
  }

  /// Direction of a (not necessarily unit) Cartesian vector.
  static SphericalDirection FromCartesian(double x, double y, double z) {
    const double r = std::sqrt(x * x + y * y + z * z);
    if (r == 0.0) throw std::invalid_argument("SphericalDirection: zero vector");
    return {std::acos(std::clamp(z / r, -1.0, 1.0)), std::atan2(y, x)};
  }

  double theta() const { return theta_; }
  double phi() const { return phi_; }
  double theta_deg() const { return theta_ * 180.0 / kPi; }
  double phi_deg() const { return phi_ * 180.0 / kPi; }

  std::array<double, 3> unit_vector() const {
    const double s = std::sin(theta_);
    return {s * std::cos(phi_), s * std::sin(phi_), std::cos(theta_)};
  }

  /// Cosine of the great-circle angle to another direction.
  double cos_angle_to(const SphericalDirection& other) const {
    const auto a = unit_vector();
    const auto b = other.unit_vector();
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  }

 private:
  double theta_ = 0.0;
  double phi_ = 0.0;
};

/// Spherical-harmonic mode (order n, degree m) with |m| <= n.
struct ModeIndex {
  int n = 0;
  int m = 0;

  ModeIndex() = default;
  ModeIndex(int order, int degree) : n(order), m(degree) {
    if (order < 0 || std::abs(degree) > order) {
      throw std::invalid_argument("ModeIndex: require n >= 0 and |m| <= n");
    }
  }

  std::size_t acn() const { return static_cast<std::size_t>(n * n + n + m); }

  static ModeIndex FromAcn(std::size_t index) {
    const int n = static_cast<int>(std::floor(std::sqrt(static_cast<double>(index))));
    return {n, static_cast<int>(index) - n * n - n};
  }

  friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

/// Number of modes up to and including order n: (n+1)^2.
constexpr std::size_t mode_count(int order) {
  return static_cast<std::size_t>((order + 1) * (order + 1));
}

/// i^n for integer n (any sign).
inline cdouble i_pow(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

/// All Y_nm for n <= order at one direction, in ACN order.
inline std::vector<cdouble> sph_harmonics(int order, const SphericalDirection& dir) {
  if (order < 0) throw std::invalid_argument("sph_harmonics: negative order");
  const double x = std::cos(dir.theta());
  const double s = std::sin(dir.theta());
  // Normalized associated Legendre values pbar[n][m], m >= 0, including the
  // Condon-Shortley phase and the sqrt((2n+1)/4pi (n-m)!/(n+m)!) factor.
  std::vector<std::vector<double>> pbar(order + 1);
  for (int n = 0; n <= order; ++n) pbar[n].assign(n + 1, 0.0);
  pbar[0][0] = 1.0 / std::sqrt(4.0 * kPi);
  for (int m = 1; m <= order; ++m) {
    pbar[m][m] = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pbar[m - 1][m - 1];
  }
  for (int m = 0; m < order; ++m) {
    pbar[m + 1][m] = x * std::sqrt(2.0 * m + 3.0) * pbar[m][m];
  }
  for (int m = 0; m <= order; ++m) {
    for (int n = m + 2; n <= order; ++n) {
      const double nn = n, mm = m;
      const double a = std::sqrt((4.0 * nn * nn - 1.0) / (nn * nn - mm * mm));
      const double b = std::sqrt(((nn - 1.0) * (nn - 1.0) - mm * mm) /
                                 (4.0 * (nn - 1.0) * (nn - 1.0) - 1.0));
      pbar[n][m] = a * (x * pbar[n - 1][m] - b * pbar[n - 2][m]);
    }
  }

  std::vector<cdouble> out(mode_count(order));
  for (int n = 0; n <= order; ++n) {
    for (int m = 0; m <= n; ++m) {
      const cdouble y = pbar[n][m] * std::polar(1.0, m * dir.phi());
      out[n * n + n + m] = y;
      if (m > 0) out[n * n + n - m] = ((m % 2) ? -1.0 : 1.0) * std::conj(y);
    }
  }
  return out;
}

/// Single Y_nm value.
inline cdouble sph_harmonic(const ModeIndex& idx, const SphericalDirection& dir) {
  if (idx.n < 0 || std::abs(idx.m) > idx.n) {
    throw std::invalid_argument("sph_harmonic: require |m| <= n");
  }
  return sph_harmonics(idx.n, dir)[idx.acn()];
}

namespace detail {

// j_n(x) for n = 0..order by Miller's downward recurrence, normalized with
// sum_k (2k+1) j_k^2 = 1.
inline std::vector<double> sph_bessel_j_downward(int order, double x) {
  const int start = order + 16 + static_cast<int>(std::ceil(x));
  std::vector<double> f(start + 2, 0.0);
  f[start + 1] = 0.0;
  f[start] = 1.0;
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    f[k - 1] = (2.0 * k + 1.0) / x * f[k] - f[k + 1];
    if (std::abs(f[k - 1]) > 1e100) {
      for (int j = k - 1; j <= start + 1; ++j) f[j] *= 1e-100;
    }
  }
  for (int k = 0; k <= start; ++k) norm += (2.0 * k + 1.0) * f[k] * f[k];
  double scale = 1.0 / std::sqrt(norm);
  // Fix the overall sign from j_0 or j_1 (whichever is far from a zero).
  const double j0 = std::sin(x) / x;
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  if (std::abs(j0) >= std::abs(j1)) {
    if ((j0 < 0.0) != (f[0] < 0.0)) scale = -scale;
  } else if ((j1 < 0.0) != (f[1] < 0.0)) {
    scale = -scale;
  }
  std::vector<double> out(order + 1);
  for (int k = 0; k <= order; ++k) out[k] = f[k] * scale;
  return out;
}

}  // namespace detail

/// Spherical Bessel functions j_0..j_order at x >= 0.
inline std::vector<double> sph_bessel_j_all(int order, double x) {
  if (x < 0.0 || !std::isfinite(x)) throw std::invalid_argument("sph_bessel_j: require x >= 0");
  std::vector<double> out(order + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (x < static_cast<double>(order) + 1.0) return detail::sph_bessel_j_downward(order, x);
  out[0] = std::sin(x) / x;
  if (order >= 1) out[1] = std::sin(x) / (x * x) - std::cos(x) / x;
  for (int n = 2; n <= order; ++n) {
    out[n] = (2.0 * n - 1.0) / x * out[n - 1] - out[n - 2];
  }
  return out;
}

inline double sph_bessel_j(int n, double x) {
  if (n < 0) throw std::invalid_argument("sph_bessel_j: negative order");
  return sph_bessel_j_all(n, x)[n];
}

/// Spherical Neumann functions y_0..y_order at x > 0 (upward recurrence).
inline std::vector<double> sph_bessel_y_all(int order, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error("sph_bessel_y: singular at x = 0");
  }
  std::vector<double> out(order + 1);
  out[0] = -std::cos(x) / x;
  if (order >= 1) out[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
  for (int n = 2; n <= order; ++n) {
    out[n] = (2.0 * n - 1.0) / x * out[n - 1] - out[n - 2];
  }
  return out;
}

inline double sph_bessel_y(int n, double x) {
  if (n < 0) throw std::invalid_argument("sph_bessel_y: negative order");
  return sph_bessel_y_all(n, x)[n];
}

/// First-kind spherical Hankel function h_n(x) = j_n(x) + i y_n(x), x > 0.
inline cdouble sph_hankel_h(int n, double x) {
  if (n < 0) throw std::invalid_argument("sph_hankel_h: negative order");
  if (!(x > 0.0)) throw std::domain_error("sph_hankel_h: singular at x = 0");
  return {sph_bessel_j(n, x), sph_bessel_y(n, x)};
}

/// Derivative of a spherical cylinder-function family from its values
/// f_0..f_{n}: f'_n = f_{n-1} - (n+1)/x f_n, f'_0 = -f_1. `values` must hold
/// order n+1 as well when n == 0.
template <typename T>
T sph_derivative(const std::vector<T>& values, int n, double x) {
  if (n == 0) return -values.at(1);
  return values.at(n - 1) - (static_cast<double>(n) + 1.0) / x * values.at(n);
}

inline double sph_bessel_j_prime(int n, double x) {
  if (x == 0.0) return n == 1 ? 1.0 / 3.0 : 0.0;
  const auto j = sph_bessel_j_all(std::max(n, 1), x);
  return sph_derivative(j, n, x);
}

inline double sph_bessel_y_prime(int n, double x) {
  const auto y = sph_bessel_y_all(std::max(n, 1), x);
  return sph_derivative(y, n, x);
}

enum class ArrayKind { kOpen, kRigid };

/// Mode strength b_n(kr) for open (j_n) or rigid (j_n - j'_n/h'_n h_n)
/// spheres.
inline cdouble mode_strength(int n, double kr, ArrayKind kind) {
  if (n < 0) throw std::invalid_argument("mode_strength: negative order");
  if (kr < 0.0 || !std::isfinite(kr)) throw std::invalid_argument("mode_strength: require kr >= 0");
  if (kind == ArrayKind::kOpen) return sph_bessel_j(n, kr);
  if (kr == 0.0) throw std::domain_error("mode_strength: rigid sphere undefined at kr = 0");
  const int top = std::max(n, 1);
  const auto j = sph_bessel_j_all(top, kr);
  const auto y = sph_bessel_y_all(top, kr);
  std::vector<cdouble> h(top + 1);
  for (int k = 0; k <= top; ++k) h[k] = {j[k], y[k]};
  const double jp = sph_derivative(j, n, kr);
  const cdouble hp = sph_derivative(h, n, kr);
  return j[n] - jp / hp * h[n];
}

/// b_0..b_order in one pass.
inline std::vector<cdouble> mode_strengths(int order, double kr, ArrayKind kind) {
  std::vector<cdouble> out(order + 1);
  if (kind == ArrayKind::kOpen) {
    const auto j = sph_bessel_j_all(order, kr);
    for (int n = 0; n <= order; ++n) out[n] = j[n];
    return out;
  }
  if (!(kr > 0.0)) throw std::domain_error("mode_strength: rigid sphere undefined at kr = 0");
  const int top = order + 1;
  const auto j = sph_bessel_j_all(top, kr);
  const auto y = sph_bessel_y_all(top, kr);
  std::vector<cdouble> h(top + 1);
  for (int k = 0; k <= top; ++k) h[k] = {j[k], y[k]};
  for (int n = 0; n <= order; ++n) {
    out[n] = j[n] - sph_derivative(j, n, kr) / sph_derivative(h, n, kr) * h[n];
  }
  return out;
}

namespace detail {

inline double factorial(int n) {
  static const std::array<double, 171> table = [] {
    std::array<double, 171> t{};
    t[0] = 1.0;
    for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] * static_cast<double>(i);
    return t;
  }();
  if (n < 0 || n > 170) throw std::out_of_range("factorial: argument out of range");
  return table[n];
}

}  // namespace detail

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3) by the Racah sum. Returns 0 when a
/// selection rule fails.
inline double wigner3j(int j1, int j2, int j3, int m1, int m2, int m3) {
  if (j1 < 0 || j2 < 0 || j3 < 0) return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3) return 0.0;
  if (m1 + m2 + m3 != 0) return 0.0;
  if (j3 < std::abs(j1 - j2) || j3 > j1 + j2) return 0.0;
  // (j1 j2 j3; 0 0 0) vanishes for odd j1 + j2 + j3.
  if (m1 == 0 && m2 == 0 && m3 == 0 && ((j1 + j2 + j3) % 2) != 0) return 0.0;

  using detail::factorial;
  const int kmin = std::max({0, j2 - j3 - m1, j1 - j3 + m2});
  const int kmax = std::min({j1 + j2 - j3, j1 - m1, j2 + m2});
  double sum = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    const double denom = factorial(k) * factorial(j3 - j2 + k + m1) * factorial(j3 - j1 + k - m2) *
                         factorial(j1 + j2 - j3 - k) * factorial(j1 - k - m1) *
                         factorial(j2 - k + m2);
    sum += ((k % 2) ? -1.0 : 1.0) / denom;
  }
  const double triangle = factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) *
                          factorial(-j1 + j2 + j3) / factorial(j1 + j2 + j3 + 1);
  const double moments = factorial(j1 + m1) * factorial(j1 - m1) * factorial(j2 + m2) *
                         factorial(j2 - m2) * factorial(j3 + m3) * factorial(j3 - m3);
  const int phase = j1 - j2 - m3;
  const double sign = (((phase % 2) + 2) % 2) ? -1.0 : 1.0;
  return sign * std::sqrt(triangle) * std::sqrt(moments) * sum;
}

/// Integral over the sphere of Y_vu conj(Y_nm) Y_n'm'.
inline double triple_harmonic_integral(int v, int n, int n_prime, int u, int m, int m_prime) {
  const double w12 = wigner3j(v, n, n_prime, 0, 0, 0) * wigner3j(v, n, n_prime, u, -m, m_prime);
  if (w12 == 0.0) return 0.0;
  const double sign = (std::abs(m) % 2) ? -1.0 : 1.0;
  return sign *
         std::sqrt((2.0 * v + 1.0) * (2.0 * n + 1.0) * (2.0 * n_prime + 1.0) / (4.0 * kPi)) * w12;
}

}  // namespace shpsd

#endif  // SHPSD_SH_MATH_HPP_
