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
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "shpsd/scene.hpp"

namespace shpsd {
namespace {

double energy(const std::vector<std::vector<double>>& ch) {
  double e = 0.0;
  for (const auto& c : ch)
    for (double x : c) e += x * x;
  return e;
}

SceneSpec small_scene(double t60) {
  SceneSpec s;
  s.duration = 0.5;
  s.seed = 9;
  s.room.t60 = t60;
  SourceSpec a;
  a.direction = SphericalDirection::FromDegrees(80.0, 30.0);
  s.sources.push_back(a);
  return s;
}

TEST(Geometry, PentakisDodecahedron) {
  const auto dirs = pentakis_dodecahedron_directions();
  ASSERT_EQ(dirs.size(), 32u);
  for (std::size_t a = 0; a < dirs.size(); ++a)
    for (std::size_t b = a + 1; b < dirs.size(); ++b) EXPECT_LT(dirs[a].cos_angle_to(dirs[b]), 0.95);
  EXPECT_NO_THROW(default_array_geometry().validate());
  ArrayGeometry g = default_array_geometry();
  g.mic_dirs.resize(20);
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = default_array_geometry();
  g.mic_dirs[3] = g.mic_dirs[4];
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(Geometry, CsvRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "shpsd_geom_test.csv";
  const auto dirs = pentakis_dodecahedron_directions();
  save_geometry_csv(path.string(), dirs);
  const auto back = load_geometry_csv(path.string());
  ASSERT_EQ(back.size(), dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) EXPECT_GT(back[i].cos_angle_to(dirs[i]), 1.0 - 1e-12);
  std::filesystem::remove(path);
  EXPECT_THROW(load_geometry_csv("/nonexistent/geometry.csv"), std::runtime_error);
}

TEST(ImageSources, AnechoicHasOnlyDirectPath) {
  RoomSpec room;
  const auto img = image_sources(room, {3.0, 5.5, 1.5}, room.array_position);
  ASSERT_EQ(img.size(), 1u);
  EXPECT_NEAR(img[0].distance, 2.0, 1e-12);
  EXPECT_NEAR(img[0].gain, 0.5, 1e-12);
  EXPECT_NEAR(img[0].delay, 2.0 / kSpeedOfSound, 1e-15);
}

TEST(ImageSources, FirstOrderShoeboxHasSevenPaths) {
  RoomSpec room;
  room.t60 = 0.4;
  room.max_image_order = 1;
  const auto img = image_sources(room, {2.0, 3.0, 2.5}, room.array_position);
  ASSERT_EQ(img.size(), 7u);
  EXPECT_EQ(img[0].reflections, 0);
  std::set<long> distances;
  for (std::size_t i = 1; i < img.size(); ++i) {
    EXPECT_EQ(img[i].reflections, 1);
    distances.insert(std::lround(img[i].distance * 1e6));
  }
  // Floor image of a source at height 2.5 seen from height 1.5: z' = -2.5.
  bool found_floor = false;
  for (const auto& p : img) {
    const auto u = p.direction.unit_vector();
    if (std::abs(u[2] * p.distance - (-2.5 - 1.5)) < 1e-9) found_floor = true;
  }
  EXPECT_TRUE(found_floor);
}

TEST(ImageSources, CountMatchesOctahedralNumber) {
  RoomSpec room;
  room.t60 = 0.3;
  for (int r = 0; r <= 5; ++r) {
    room.max_image_order = r;
    const auto n = image_sources(room, {2.0, 3.0, 2.5}, room.array_position).size();
    EXPECT_EQ(n, static_cast<std::size_t>((2 * r + 1) * (2 * r * r + 2 * r + 3) / 3));
  }
}

TEST(ImageSources, ReverberantEnergyGrowsWithT60) {
  double prev = -1.0;
  for (double t60 : {0.2, 0.3, 0.5, 0.8}) {
    RoomSpec room;
    room.t60 = t60;
    const auto img = image_sources(room, {2.0, 3.0, 2.5}, room.array_position);
    double e = 0.0;
    for (std::size_t i = 1; i < img.size(); ++i) e += img[i].gain * img[i].gain;
    const double ratio = e / (img[0].gain * img[0].gain);
    EXPECT_GT(ratio, prev);
    prev = ratio;
  }
}

TEST(ImageSources, RejectsPlacementOutsideRoom) {
  RoomSpec room;
  EXPECT_THROW(image_sources(room, {7.0, 1.0, 1.0}, room.array_position), std::invalid_argument);
  EXPECT_THROW(image_sources(room, {1.0, 1.0, 1.0}, {1.0, -1.0, 1.0}), std::invalid_argument);
}

TEST(ImageSources, EyringCoefficient) {
  const Vec3 dims{6.0, 7.0, 6.0};
  const double beta = eyring_reflection_coefficient(dims, 0.5);
  const double alpha = 1.0 - beta * beta;
  const double v = 252.0, s = 2.0 * (42.0 + 42.0 + 36.0);
  EXPECT_NEAR(24.0 * std::log(10.0) * v / (-kSpeedOfSound * s * std::log(1.0 - alpha)), 0.5, 1e-12);
  EXPECT_EQ(eyring_reflection_coefficient(dims, 0.0), 0.0);
  EXPECT_THROW(eyring_reflection_coefficient(dims, -0.1), std::invalid_argument);
}

TEST(PlaneWave, OpenArrayTruncationError) {
  ArrayGeometry g = default_array_geometry();
  g.kind = ArrayKind::kOpen;
  g.order = 8;
  const auto src = SphericalDirection::FromDegrees(63.0, 200.0);
  for (double f : {200.0, 900.0, 1800.0, 3000.0, 3900.0}) {
    const double k = 2 * kPi * f / kSpeedOfSound;
    const int n = static_cast<int>(std::ceil(k * g.radius)) + 2;
    const auto p = plane_wave_pressure(src, g, k, n);
    const auto exact = testing_oracles::open_plane_wave_exact(src, g.mic_dirs, k, g.radius);
    for (Eigen::Index q = 0; q < p.size(); ++q) EXPECT_LT(std::abs(p(q) - exact(q)), 0.01) << f;
  }
}

TEST(PlaneWave, LowFrequencyLimitIsUnity) {
  const auto g = default_array_geometry();
  const auto p = plane_wave_pressure(SphericalDirection::FromDegrees(10.0, 20.0), g, 0.0);
  for (Eigen::Index q = 0; q < p.size(); ++q) EXPECT_NEAR(std::abs(p(q) - 1.0), 0.0, 1e-14);
  const auto p2 = plane_wave_pressure(SphericalDirection::FromDegrees(10.0, 20.0), g, 1e-4);
  for (Eigen::Index q = 0; q < p2.size(); ++q) EXPECT_NEAR(std::abs(p2(q) - 1.0), 0.0, 1e-5);
}

TEST(PlaneWave, RigidArrayAtBesselNull) {
  auto g = default_array_geometry();
  const double k = kPi / g.radius;  // j_0(kr) = 0
  const auto p = plane_wave_pressure(SphericalDirection::FromDegrees(90.0, 0.0), g, k);
  EXPECT_GT(p.cwiseAbs().minCoeff(), 1e-3);
}

TEST(PlaneWave, FarFieldAgreesWithSphericalWave) {
  // Point source at 2 m on an open sphere of radius 4.2 cm: pressure relative
  // to the array centre versus the plane-wave model.
  ArrayGeometry g = default_array_geometry();
  const auto src = SphericalDirection::FromDegrees(76.0, 50.0);
  const auto y = src.unit_vector();
  const double dist = 2.0;
  for (double f = 100.0; f <= 4000.0; f += 300.0) {
    const double k = 2 * kPi * f / kSpeedOfSound;
    const auto plane = testing_oracles::open_plane_wave_exact(src, g.mic_dirs, k, g.radius);
    for (std::size_t q = 0; q < g.num_mics(); ++q) {
      const auto x = g.mic_dirs[q].unit_vector();
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += std::pow(dist * y[a] - g.radius * x[a], 2);
      const double d = std::sqrt(d2);
      const cdouble sph = dist / d * std::exp(cdouble(0.0, -k * (d - dist)));
      EXPECT_LT(std::abs(std::abs(sph) - std::abs(plane(static_cast<Eigen::Index>(q)))), 0.03);
    }
  }
}

TEST(RenderScene, ShapesAndGroundTruth) {
  const auto spec = small_scene(0.0);
  const auto rec = render_scene(spec);
  EXPECT_EQ(rec.mic_signals.size(), 32u);
  EXPECT_EQ(rec.ground_truth.size(), 1u);
  for (const auto& c : rec.mic_signals) EXPECT_EQ(c.size(), 4000u);
}

TEST(RenderScene, Deterministic) {
  const auto spec = small_scene(0.3);
  const auto a = render_scene(spec);
  const auto b = render_scene(spec);
  EXPECT_EQ(a.mic_signals, b.mic_signals);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
}

TEST(RenderScene, Linearity) {
  for (double t60 : {0.0, 0.3}) {
    for (auto mode : {ReverbRendering::kMultiplicative, ReverbRendering::kFrameLagged}) {
      SceneSpec spec = small_scene(t60);
      spec.rendering = mode;
      SourceSpec b;
      b.direction = SphericalDirection::FromDegrees(100.0, 210.0);  // antipodal to the first
      b.signal = SignalKind::kSpeechLike;
      spec.sources.push_back(b);
      const auto sig = source_signals(spec);
      const auto both = render_scene(spec, sig);
      SceneSpec sa = spec, sb = spec;
      sa.sources = {spec.sources[0]};
      sb.sources = {spec.sources[1]};
      const auto ra = render_scene(sa, {sig[0]});
      const auto rb = render_scene(sb, {sig[1]});
      double worst = 0.0;
      for (std::size_t q = 0; q < both.mic_signals.size(); ++q)
        for (std::size_t i = 0; i < both.mic_signals[q].size(); ++i)
          worst = std::max(worst, std::abs(both.mic_signals[q][i] - ra.mic_signals[q][i] - rb.mic_signals[q][i]));
      EXPECT_LT(worst, 1e-12);
    }
  }
}

TEST(RenderScene, EnergyGrowsWithT60) {
  for (auto mode : {ReverbRendering::kMultiplicative, ReverbRendering::kFrameLagged}) {
    double prev = 0.0;
    for (double t60 : {0.0, 0.2, 0.5}) {
      auto spec = small_scene(t60);
      spec.rendering = mode;
      const double e = energy(render_scene(spec).mic_signals);
      EXPECT_GT(e, prev) << t60;
      prev = e;
    }
  }
}

TEST(RenderScene, RenderingModesAgreeWithoutReverb) {
  auto a = small_scene(0.0);
  auto b = a;
  b.rendering = ReverbRendering::kFrameLagged;
  EXPECT_EQ(render_scene(a).mic_signals, render_scene(b).mic_signals);
}

TEST(RenderScene, FrameLaggedShiftsLateReflections) {
  // One reflection about 3 hops behind the direct path lands three frames later.
  RoomSpec room;
  room.t60 = 0.6;
  room.max_image_order = 1;
  SourceSpec src;
  src.direction = SphericalDirection::FromDegrees(90.0, 90.0);
  StftConfig cfg;
  const auto lagged = source_transfer_functions(src, room, default_array_geometry(), cfg, ReverbRendering::kFrameLagged);
  EXPECT_GT(lagged.per_lag.size(), 1u);
  const auto flat = source_transfer_functions(src, room, default_array_geometry(), cfg);
  EXPECT_EQ(flat.rows(), 129);
  EXPECT_EQ(flat.cols(), 32);
}

TEST(RenderScene, Errors) {
  SceneSpec empty;
  EXPECT_THROW(render_scene(empty), std::invalid_argument);
  auto spec = small_scene(0.0);
  EXPECT_THROW(render_scene(spec, {std::vector<double>(300, 0.0)}), std::invalid_argument);
  spec.sources[0].signal = SignalKind::kFile;
  spec.sources[0].wav_path = "/nonexistent/file.wav";
  EXPECT_THROW(render_scene(spec), std::runtime_error);
}

TEST(RenderScene, SampleRateMismatch) {
  const auto path = (std::filesystem::temp_directory_path() / "shpsd_sr_test.wav").string();
  WavData w;
  w.sample_rate = 16000.0;
  w.channels = {std::vector<double>(8000, 0.1)};
  write_wav(path, w);
  auto spec = small_scene(0.0);
  spec.sources[0].signal = SignalKind::kFile;
  spec.sources[0].wav_path = path;
  EXPECT_THROW(render_scene(spec), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST(Signals, SpeechLikeIsNormalizedAndGated) {
  std::mt19937_64 rng(1);
  const auto s = speech_like(32000, 8000.0, rng);
  double p = 0.0;
  std::size_t active = 0, silent = 0;
  for (double x : s) {
    if (x != 0.0) {
      p += x * x;
      ++active;
    } else {
      ++silent;
    }
  }
  EXPECT_NEAR(p / static_cast<double>(active), 1.0, 1e-9);
  EXPECT_GT(silent, 1000u);
}

}  // namespace
}  // namespace shpsd
