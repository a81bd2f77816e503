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

#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>
#include <boost/math/special_functions/spherical_harmonic.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shpsd/sh_math.hpp"

namespace shpsd {
namespace {

TEST(SphericalDirection, NormalizesAngles) {
  const auto d = SphericalDirection::FromDegrees(90.0, -90.0);
  EXPECT_NEAR(d.phi(), 1.5 * kPi, 1e-15);
  EXPECT_NEAR(d.theta(), 0.5 * kPi, 1e-15);
  EXPECT_THROW(SphericalDirection::FromDegrees(181.0, 0.0), std::invalid_argument);
  const auto c = SphericalDirection::FromCartesian(0.0, 0.0, -2.0);
  EXPECT_NEAR(c.theta(), kPi, 1e-15);
}

TEST(ModeIndex, AcnRoundTrip) {
  for (std::size_t i = 0; i < 49; ++i) EXPECT_EQ(ModeIndex::FromAcn(i).acn(), i);
  EXPECT_EQ(ModeIndex(1, -1).acn(), 1u);
  EXPECT_EQ(ModeIndex(2, 2).acn(), 8u);
  EXPECT_THROW(ModeIndex(1, 2), std::invalid_argument);
}

TEST(SphHarmonic, KnownValues) {
  const auto any = SphericalDirection::FromDegrees(33.0, 271.0);
  EXPECT_NEAR(sph_harmonic({0, 0}, any).real(), 0.28209479177387814, 1e-15);
  EXPECT_NEAR(sph_harmonic({1, 0}, SphericalDirection(0.0, 0.0)).real(), 0.4886025119029199, 1e-15);
  const cdouble y11 = sph_harmonic({1, 1}, SphericalDirection(kPi / 2, 0.0));
  EXPECT_NEAR(y11.real(), -0.3454941494713355, 1e-15);
  EXPECT_NEAR(y11.imag(), 0.0, 1e-15);
  EXPECT_THROW(sph_harmonic({1, 2}, any), std::invalid_argument);
}

TEST(SphHarmonic, MatchesBoost) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> th(0.0, kPi), ph(0.0, 2 * kPi);
  for (int trial = 0; trial < 20; ++trial) {
    const SphericalDirection d(th(rng), ph(rng));
    const auto y = sph_harmonics(8, d);
    for (int n = 0; n <= 8; ++n) {
      for (int m = -n; m <= n; ++m) {
        const cdouble ref = boost::math::spherical_harmonic(n, m, d.theta(), d.phi());
        EXPECT_NEAR(std::abs(y[ModeIndex(n, m).acn()] - ref), 0.0, 1e-13) << n << " " << m;
      }
    }
  }
}

TEST(SphHarmonic, ConjugateSymmetry) {
  const SphericalDirection d(1.1, 4.0);
  for (int n = 0; n <= 6; ++n) {
    for (int m = 1; m <= n; ++m) {
      const cdouble a = sph_harmonic({n, -m}, d);
      const cdouble b = (m % 2 ? -1.0 : 1.0) * std::conj(sph_harmonic({n, m}, d));
      EXPECT_NEAR(std::abs(a - b), 0.0, 1e-14);
    }
  }
}

TEST(SphHarmonic, OrthonormalOnProductGrid) {
  const int order = 6;
  const auto grid = testing_oracles::product_grid(16, 32);
  const std::size_t modes = mode_count(order);
  std::vector<std::vector<cdouble>> ys;
  for (const auto& node : grid) ys.push_back(sph_harmonics(order, node.dir));
  for (std::size_t a = 0; a < modes; ++a) {
    for (std::size_t b = 0; b < modes; ++b) {
      cdouble s = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g) s += grid[g].weight * ys[g][a] * std::conj(ys[g][b]);
      EXPECT_NEAR(std::abs(s - (a == b ? 1.0 : 0.0)), 0.0, 1e-10) << a << " " << b;
    }
  }
}

TEST(SphHarmonic, AdditionTheorem) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> th(0.0, kPi), ph(0.0, 2 * kPi);
  for (int trial = 0; trial < 50; ++trial) {
    const auto y = sph_harmonics(6, SphericalDirection(th(rng), ph(rng)));
    for (int n = 0; n <= 6; ++n) {
      double s = 0.0;
      for (int m = -n; m <= n; ++m) s += std::norm(y[ModeIndex(n, m).acn()]);
      EXPECT_NEAR(s, (2 * n + 1) / (4 * kPi), 1e-12);
    }
  }
}

TEST(SphBessel, KnownValues) {
  EXPECT_DOUBLE_EQ(sph_bessel_j(0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sph_bessel_j(2, 0.0), 0.0);
  EXPECT_NEAR(sph_bessel_j(0, 1.0), std::sin(1.0), 1e-15);
  EXPECT_THROW(sph_bessel_j(0, -1.0), std::invalid_argument);
  EXPECT_THROW(sph_bessel_y(0, 0.0), std::domain_error);
}

TEST(SphBessel, MatchesBoostAcrossRegimes) {
  for (double x : {1e-3, 0.05, 0.3, 1.0, 2.5, 7.0, 19.0, 45.0}) {
    for (int n = 0; n <= 12; ++n) {
      const double j = boost::math::sph_bessel(static_cast<unsigned>(n), x);
      EXPECT_NEAR(sph_bessel_j(n, x), j, 1e-13 * std::max(1.0, std::abs(j)) + 1e-300) << n << " " << x;
      const double y = boost::math::sph_neumann(static_cast<unsigned>(n), x);
      EXPECT_NEAR(sph_bessel_y(n, x) / y, 1.0, 1e-11) << n << " " << x;
    }
  }
}

TEST(SphBessel, SmallArgumentDoesNotUnderflow) {
  // j_n(x) ~ x^n / (2n+1)!!
  EXPECT_NEAR(sph_bessel_j(6, 1e-3) / (1e-18 / 135135.0), 1.0, 1e-6);
}

TEST(SphBessel, Wronskian) {
  for (double x = 0.1; x <= 50.0; x *= 1.37) {
    for (int n = 0; n <= 6; ++n) {
      const double w = sph_bessel_j(n, x) * sph_bessel_y_prime(n, x) - sph_bessel_j_prime(n, x) * sph_bessel_y(n, x);
      EXPECT_NEAR(w * x * x, 1.0, 1e-10) << n << " " << x;
    }
  }
}

TEST(SphHankel, Values) {
  const cdouble h0 = sph_hankel_h(0, 1.0);
  EXPECT_NEAR(h0.real(), 0.8414709848078965, 1e-15);
  EXPECT_NEAR(h0.imag(), -0.5403023058681398, 1e-15);
  EXPECT_NEAR(sph_hankel_h(0, kPi / 2).imag(), 0.0, 1e-15);
  // Series oracle: j_1 = sin/x^2 - cos/x, y_1 = -cos/x^2 - sin/x
  const cdouble h1 = sph_hankel_h(1, 1.0);
  EXPECT_NEAR(h1.real(), std::sin(1.0) - std::cos(1.0), 1e-15);
  EXPECT_NEAR(h1.imag(), -std::cos(1.0) - std::sin(1.0), 1e-15);
  EXPECT_THROW(sph_hankel_h(1, 0.0), std::domain_error);
}

TEST(ModeStrength, Examples) {
  EXPECT_NEAR(std::abs(mode_strength(0, 1.0, ArrayKind::kOpen) - std::sin(1.0)), 0.0, 1e-15);
  EXPECT_GT(std::abs(mode_strength(0, kPi, ArrayKind::kRigid)), 0.1);
  EXPECT_NEAR(std::abs(mode_strength(0, kPi, ArrayKind::kOpen)), 0.0, 1e-15);
  EXPECT_EQ(mode_strength(3, 0.0, ArrayKind::kOpen), cdouble(0.0));
  EXPECT_THROW(mode_strength(0, 0.0, ArrayKind::kRigid), std::domain_error);
}

TEST(ModeStrength, RigidMatchesClosedForm) {
  // Rigid sphere: b_n = i / (x^2 h_n'(x)) by the Wronskian.
  for (double x : {0.1, 0.8, 2.0, 4.4}) {
    for (int n = 0; n <= 4; ++n) {
      const auto un = static_cast<unsigned>(n);
      const cdouble hp(boost::math::sph_bessel_prime(un, x), boost::math::sph_neumann_prime(un, x));
      const cdouble ref = kI / (x * x * hp);
      EXPECT_NEAR(std::abs(mode_strength(n, x, ArrayKind::kRigid) - ref), 0.0, 1e-12 * std::abs(ref));
    }
  }
}

TEST(ModeStrength, RigidBoundedAwayFromZeroInBand) {
  // 50 Hz .. 4 kHz at r = 4.2 cm
  for (double f = 50.0; f <= 4000.0; f += 31.25) {
    const double kr = 2 * kPi * f / 343.0 * 0.042;
    for (int n = 0; n <= 4; ++n) EXPECT_GT(std::abs(mode_strength(n, kr, ArrayKind::kRigid)), 1e-9);
  }
  const double kr = 2 * kPi * 500.0 / 343.0 * 0.042;
  for (int n = 0; n <= 2; ++n) EXPECT_GT(std::abs(mode_strength(n, kr, ArrayKind::kRigid)), 1e-3);
}

TEST(Wigner3j, Examples) {
  EXPECT_DOUBLE_EQ(wigner3j(0, 0, 0, 0, 0, 0), 1.0);
  EXPECT_NEAR(wigner3j(1, 1, 0, 0, 0, 0), -1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_EQ(wigner3j(1, 2, 4, 0, 0, 0), 0.0);
  EXPECT_EQ(wigner3j(1, 1, 1, 1, 1, 0), 0.0);
  EXPECT_EQ(wigner3j(2, 2, 2, 0, 0, 0) == 0.0, false);
  EXPECT_EQ(wigner3j(1, 1, 1, 0, 0, 0), 0.0);  // odd j-sum with zero m
}

TEST(Wigner3j, MatchesIndependentRacahSum) {
  for (int j1 = 0; j1 <= 4; ++j1)
    for (int j2 = 0; j2 <= 4; ++j2)
      for (int j3 = 0; j3 <= 8; ++j3)
        for (int m1 = -j1; m1 <= j1; ++m1)
          for (int m2 = -j2; m2 <= j2; ++m2) {
            const int m3 = -m1 - m2;
            if (std::abs(m3) > j3) continue;
            EXPECT_NEAR(wigner3j(j1, j2, j3, m1, m2, m3), testing_oracles::wigner3j_long_double(j1, j2, j3, m1, m2, m3),
                        1e-13);
          }
}

TEST(Wigner3j, PermutationSymmetry) {
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b)
      for (int c = std::abs(a - b); c <= a + b; ++c)
        for (int ma = -a; ma <= a; ++ma)
          for (int mb = -b; mb <= b; ++mb) {
            const int mc = -ma - mb;
            if (std::abs(mc) > c) continue;
            const double w = wigner3j(a, b, c, ma, mb, mc);
            const double sign = (a + b + c) % 2 ? -1.0 : 1.0;
            EXPECT_NEAR(wigner3j(b, c, a, mb, mc, ma), w, 1e-14);
            EXPECT_NEAR(wigner3j(c, a, b, mc, ma, mb), w, 1e-14);
            EXPECT_NEAR(wigner3j(b, a, c, mb, ma, mc), sign * w, 1e-14);
            EXPECT_NEAR(wigner3j(a, b, c, -ma, -mb, -mc), sign * w, 1e-14);
          }
}

TEST(TripleIntegral, Examples) {
  EXPECT_NEAR(triple_harmonic_integral(0, 0, 0, 0, 0, 0), 1.0 / std::sqrt(4 * kPi), 1e-15);
  for (int v = 0; v <= 4; ++v)
    for (int n = 0; n <= 4; ++n)
      for (int np = 0; np <= 4; ++np) {
        if ((v + n + np) % 2 == 0) continue;
        for (int m = -n; m <= n; ++m)
          for (int mp = -np; mp <= np; ++mp) {
            const int u = m - mp;  // the only degree allowed by the m selection rule
            if (std::abs(u) > v) continue;
            EXPECT_EQ(triple_harmonic_integral(v, n, np, u, m, mp), 0.0);
          }
      }
}

TEST(TripleIntegral, MatchesQuadratureForAllLowOrders) {
  const auto grid = testing_oracles::product_grid(16, 32);
  std::vector<std::vector<cdouble>> ys;
  for (const auto& node : grid) ys.push_back(sph_harmonics(4, node.dir));
  double worst = 0.0;
  for (int v = 0; v <= 4; ++v)
    for (int u = -v; u <= v; ++u)
      for (int n = 0; n <= 4; ++n)
        for (int m = -n; m <= n; ++m)
          for (int np = 0; np <= 4; ++np)
            for (int mp = -np; mp <= np; ++mp) {
              cdouble q = 0.0;
              const auto a = ModeIndex(v, u).acn(), b = ModeIndex(n, m).acn(), c = ModeIndex(np, mp).acn();
              for (std::size_t g = 0; g < grid.size(); ++g) q += grid[g].weight * ys[g][a] * std::conj(ys[g][b]) * ys[g][c];
              worst = std::max(worst, std::abs(q - triple_harmonic_integral(v, n, np, u, m, mp)));
            }
  EXPECT_LT(worst, 1e-8);
}

TEST(IPow, Cycle) {
  EXPECT_EQ(i_pow(0), cdouble(1.0));
  EXPECT_EQ(i_pow(1), kI);
  EXPECT_EQ(i_pow(-1), -kI);
  EXPECT_EQ(i_pow(6), cdouble(-1.0));
}

}  // namespace
}  // namespace shpsd
