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

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shpsd/scene.hpp"
#include "shpsd/sh_analysis.hpp"

namespace shpsd {
namespace {

// Spectrograms with one frame whose bins hold the given Q x bins pressures.
std::vector<Spectrogram> spectra_from(const Eigen::MatrixXcd& pressures, const StftConfig& cfg) {
  std::vector<Spectrogram> out;
  for (Eigen::Index q = 0; q < pressures.rows(); ++q) {
    Spectrogram s;
    s.config = cfg;
    s.frames = pressures.row(q);
    for (std::size_t b = 0; b < cfg.num_bins(); ++b) s.bin_freqs.push_back(cfg.bin_frequency(b));
    out.push_back(std::move(s));
  }
  return out;
}

TEST(EffectiveOrder, Examples) {
  const auto g = default_array_geometry();
  EXPECT_EQ(effective_order(3.2 / g.radius, g), 4);
  EXPECT_EQ(effective_order(9.0 / g.radius, g), 4);
  EXPECT_EQ(effective_order(0.3 / g.radius, g), 1);
  EXPECT_EQ(effective_order(0.0, g), 1);
  EXPECT_EQ(effective_order(2.0 / g.radius, g), 2);
  EXPECT_THROW(effective_order(-1.0, g), std::invalid_argument);
}

TEST(BinModes, OpenArrayDropsWeakModes) {
  ArrayGeometry g = default_array_geometry();
  g.kind = ArrayKind::kOpen;
  // j_0 has its first null at kr = pi, inside the band for r = 0.3 m.
  g.radius = 0.3;
  const double f = kPi / g.radius * kSpeedOfSound / (2 * kPi);
  const auto bm = bin_modes(f, g);
  EXPECT_FALSE(bm.mode_usable(0));
  EXPECT_TRUE(bm.mode_usable(1));
  const auto rigid = bin_modes(f, default_array_geometry());
  for (int n = 0; n <= rigid.order; ++n) EXPECT_TRUE(rigid.mode_usable(n));
}

TEST(BinModes, RigidStrengthBoundedOverBand) {
  const auto g = default_array_geometry();
  const StftConfig cfg;
  for (std::size_t b = 1; b < cfg.num_bins(); ++b) {
    const auto bm = bin_modes(cfg.bin_frequency(b), g);
    for (int n = 0; n <= bm.order; ++n) EXPECT_GT(std::abs(bm.mode_strength[n]), 1e-3) << b << " " << n;
  }
}

TEST(Extraction, ZeroSpectraGiveZeroCoefficients) {
  const auto g = default_array_geometry();
  const StftConfig cfg;
  const auto c = extract_coefficients(spectra_from(Eigen::MatrixXcd::Zero(32, 129), cfg), g);
  EXPECT_EQ(c.frames.front().coeffs.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Extraction, ExactRoundTripFromKnownCoefficients) {
  const auto g = default_array_geometry();
  const StftConfig cfg;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  const Eigen::MatrixXcd y = mic_sh_matrix(g, 4);
  Eigen::MatrixXcd alpha = Eigen::MatrixXcd::Zero(129, 25);
  Eigen::MatrixXcd p(32, 129);
  std::vector<BinModes> bms;
  for (std::size_t b = 0; b < 129; ++b) {
    const auto bm = bin_modes(cfg.bin_frequency(b), g);
    Eigen::VectorXcd a = Eigen::VectorXcd::Zero(25), weighted = Eigen::VectorXcd::Zero(25);
    for (int n = 0; n <= 4; ++n) {
      if (!bm.mode_usable(n)) continue;
      for (int m = -n; m <= n; ++m) {
        a(n * n + n + m) = cdouble(nd(rng), nd(rng));
        weighted(n * n + n + m) = a(n * n + n + m) * bm.mode_strength[n];
      }
    }
    alpha.row(static_cast<Eigen::Index>(b)) = a.transpose();
    p.col(static_cast<Eigen::Index>(b)) = y * weighted;
  }
  const auto c = extract_coefficients(spectra_from(p, cfg), g);
  EXPECT_LT((c.frames.front().coeffs - alpha).norm() / alpha.norm(), 1e-10);
}

TEST(Extraction, OpenArrayPlaneWaveMatchesAnalyticCoefficients) {
  ArrayGeometry g = default_array_geometry();
  g.kind = ArrayKind::kOpen;
  const StftConfig cfg;
  const auto src = SphericalDirection::FromDegrees(71.4, 313.7);
  Eigen::MatrixXcd p(32, 129);
  for (std::size_t b = 0; b < 129; ++b) p.col(static_cast<Eigen::Index>(b)) = plane_wave_pressure(src, g, wavenumber(cfg.bin_frequency(b)));
  const auto c = extract_coefficients(spectra_from(p, cfg), g);
  const Eigen::VectorXcd ref = testing_oracles::plane_wave_coefficients(src, 4);
  for (std::size_t b = 0; b < 129; ++b) {
    const double f = cfg.bin_frequency(b);
    if (f < 300.0 || f > 3500.0) continue;
    const auto& bm = c.bins[b];
    for (int n = 0; n <= bm.order; ++n) {
      if (!bm.mode_usable(n)) continue;
      double err = 0.0, nrm = 0.0;
      for (int m = -n; m <= n; ++m) {
        err += std::norm(c.frames.front().coeffs(static_cast<Eigen::Index>(b), n * n + n + m) - ref(n * n + n + m));
        nrm += std::norm(ref(n * n + n + m));
      }
      EXPECT_LT(std::sqrt(err / nrm), 0.02) << f << " n=" << n;
    }
  }
}

TEST(Extraction, ModesAboveEffectiveOrderAreZero) {
  const auto g = default_array_geometry();
  const StftConfig cfg;
  Eigen::MatrixXcd p(32, 129);
  const auto src = SphericalDirection::FromDegrees(40.0, 10.0);
  for (std::size_t b = 0; b < 129; ++b) p.col(static_cast<Eigen::Index>(b)) = plane_wave_pressure(src, g, wavenumber(cfg.bin_frequency(b)));
  const auto c = extract_coefficients(spectra_from(p, cfg), g);
  for (std::size_t b = 0; b < 129; ++b) {
    for (int i = static_cast<int>(mode_count(c.bins[b].order)); i < 25; ++i) {
      EXPECT_EQ(c.frames.front().coeffs(static_cast<Eigen::Index>(b), i), cdouble(0.0));
    }
  }
}

TEST(Extraction, Linearity) {
  const auto g = default_array_geometry();
  const StftConfig cfg;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd pa(32, 129), pb(32, 129);
  for (Eigen::Index i = 0; i < pa.size(); ++i) {
    pa(i) = cdouble(nd(rng), nd(rng));
    pb(i) = cdouble(nd(rng), nd(rng));
  }
  const auto ca = extract_coefficients(spectra_from(pa, cfg), g);
  const auto cb = extract_coefficients(spectra_from(pb, cfg), g);
  const auto cs = extract_coefficients(spectra_from(pa + 2.5 * pb, cfg), g);
  const Eigen::MatrixXcd expect = ca.frames[0].coeffs + 2.5 * cb.frames[0].coeffs;
  EXPECT_LT((cs.frames[0].coeffs - expect).norm(), 1e-10 * expect.norm());
}

TEST(Extraction, Errors) {
  const auto g = default_array_geometry();
  const StftConfig cfg;
  EXPECT_THROW(extract_coefficients(spectra_from(Eigen::MatrixXcd::Zero(30, 129), cfg), g), std::invalid_argument);
  ArrayGeometry ring = g;
  ring.mic_dirs.clear();
  for (int i = 0; i < 32; ++i) ring.mic_dirs.push_back(SphericalDirection::FromDegrees(90.0, i * 360.0 / 32));
  EXPECT_THROW(sh_encoder(ring), std::invalid_argument);
}

TEST(Extraction, SignalPathMatchesSceneRender) {
  // One anechoic source on an open array: the time-domain path reproduces
  // alpha times the source spectrum.
  SceneSpec spec;
  spec.geometry.kind = ArrayKind::kOpen;
  spec.duration = 1.0;
  SourceSpec s;
  s.direction = SphericalDirection::FromDegrees(78.01, 50.42);
  spec.sources.push_back(s);
  const auto rec = render_scene(spec);
  const auto c = extract_coefficients(rec.mic_signals, spec.geometry, spec.stft);
  const auto src = analyze(rec.ground_truth[0], spec.stft);
  const Eigen::VectorXcd ref = testing_oracles::plane_wave_coefficients(s.direction, 4);
  double err = 0.0, nrm = 0.0;
  for (std::size_t t = 4; t + 4 < c.frames.size(); ++t) {
    for (std::size_t b = 10; b < 110; ++b) {
      const auto& bm = c.bins[b];
      const cdouble sv = src.frames(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b));
      for (int i = 0; i < static_cast<int>(mode_count(bm.order)); ++i) {
        if (!bm.mode_usable(ModeIndex::FromAcn(static_cast<std::size_t>(i)).n)) continue;
        err += std::norm(c.frames[t].coeffs(static_cast<Eigen::Index>(b), i) - ref(i) * sv);
        nrm += std::norm(ref(i) * sv);
      }
    }
  }
  EXPECT_LT(std::sqrt(err / nrm), 0.02);
}

}  // namespace
}  // namespace shpsd
