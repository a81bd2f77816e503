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

#ifndef SHPSD_PIPELINE_HPP_
#define SHPSD_PIPELINE_HPP_

// End-to-end processing: array recording -> coefficients -> PSD tracks ->
// beamformer + Wiener post-filter, plus the randomized benchmark scenes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "shpsd/metrics.hpp"
#include "shpsd/psd_estimator.hpp"
#include "shpsd/scene.hpp"
#include "shpsd/separator.hpp"
#include "shpsd/sh_analysis.hpp"
#include "shpsd/stft.hpp"

namespace shpsd {

struct PipelineConfig {
  StftConfig stft;
  AnalysisConfig analysis;
  EstimatorConfig estimator;
  SeparatorConfig separator;
};

struct PipelineResult {
  Coefficients coefficients;
  PsdTrack psd;
  SeparationOutput separation;
};

inline void check_recording(const std::vector<std::vector<double>>& mic_signals, const ArrayGeometry& geom) {
  if (mic_signals.size() != geom.num_mics()) {
    throw std::invalid_argument("recording has " + std::to_string(mic_signals.size()) +
                                " channels but the array geometry has " + std::to_string(geom.num_mics()) +
                                " microphones");
  }
}

/// PSD estimation only.
inline PipelineResult run_estimation(const std::vector<std::vector<double>>& mic_signals, const ArrayGeometry& geom,
                                     const std::vector<SphericalDirection>& dirs, const PipelineConfig& cfg) {
  check_recording(mic_signals, geom);
  PipelineResult r;
  r.coefficients = extract_coefficients(mic_signals, geom, cfg.stft, cfg.analysis);
  r.psd = estimate_psd_track(r.coefficients, dirs, cfg.estimator);
  return r;
}

/// Estimation followed by beamforming and Wiener post-filtering.
inline PipelineResult run_pipeline(const std::vector<std::vector<double>>& mic_signals, const ArrayGeometry& geom,
                                   const std::vector<SphericalDirection>& dirs, const PipelineConfig& cfg) {
  PipelineResult r = run_estimation(mic_signals, geom, dirs, cfg);
  auto z = beamform_all(r.coefficients, dirs, cfg.stft, mic_signals.front().size());
  r.separation = wiener_separate(std::move(z), r.psd, cfg.separator);
  return r;
}

/// Clean-source PSD references (EWMA periodograms) for every ground-truth
/// signal.
inline std::vector<Eigen::MatrixXd> reference_psds(const std::vector<std::vector<double>>& clean,
                                                   const StftConfig& stft, double beta) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& s : clean) out.push_back(smoothed_periodogram(analyze(s, stft), beta));
  return out;
}

struct BenchSceneOptions {
  std::size_t num_sources = 4;
  double t60 = 0.0;
  double duration = 4.0;
  double colatitude_deg = 76.0;       // all sources on one plane, near the equator
  double min_separation_deg = 20.0;   // minimum azimuth spacing between sources
  SignalKind signal = SignalKind::kSpeechLike;
  int max_image_order = -1;
  ReverbRendering rendering = ReverbRendering::kMultiplicative;
  ArrayGeometry geometry = default_array_geometry();
  StftConfig stft;
};

/// Random benchmark scene: sources at 2 m, uniform random azimuths with a
/// minimum spacing, one shared colatitude, 6 x 7 x 6 m room.
inline SceneSpec make_bench_scene(const BenchSceneOptions& opts, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> az(0.0, 360.0);
  std::vector<double> azimuths;
  for (int attempt = 0; azimuths.size() < opts.num_sources; ++attempt) {
    if (attempt > 100000) throw std::invalid_argument("make_bench_scene: cannot place sources with the requested spacing");
    const double cand = az(rng);
    bool ok = true;
    for (double a : azimuths) {
      double d = std::fmod(std::abs(a - cand), 360.0);
      d = std::min(d, 360.0 - d);
      if (d < opts.min_separation_deg) ok = false;
    }
    if (ok) azimuths.push_back(cand);
  }
  SceneSpec spec;
  spec.seed = seed;
  spec.duration = opts.duration;
  spec.geometry = opts.geometry;
  spec.stft = opts.stft;
  spec.room.t60 = opts.t60;
  spec.room.max_image_order = opts.max_image_order;
  spec.rendering = opts.rendering;
  for (double a : azimuths) {
    SourceSpec s;
    s.direction = SphericalDirection::FromDegrees(opts.colatitude_deg, a);
    s.signal = opts.signal;
    spec.sources.push_back(s);
  }
  return spec;
}

struct SceneScore {
  double mean_sir_db = 0.0;            // beamformer + Wiener post-filter
  double mean_sir_beamformer_db = 0.0; // beamformer only
  std::vector<double> sir_db;
  std::vector<double> sir_beamformer_db;
  double runtime_s = 0.0;
};

inline SceneScore score_scene(const SceneSpec& spec, const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const SceneRecording rec = render_scene(spec);
  std::vector<SphericalDirection> dirs;
  for (const auto& s : spec.sources) dirs.push_back(s.direction);
  const PipelineResult r = run_pipeline(rec.mic_signals, spec.geometry, dirs, cfg);
  SceneScore score;
  score.sir_db = sir(r.separation.waveforms, rec.ground_truth);
  score.sir_beamformer_db = sir(r.separation.beamformed_waveforms, rec.ground_truth);
  score.mean_sir_db = mean(score.sir_db);
  score.mean_sir_beamformer_db = mean(score.sir_beamformer_db);
  score.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return score;
}

struct BenchCell {
  std::size_t num_sources = 4;
  double t60 = 0.0;
  std::vector<SceneScore> runs;
  double mean_sir_db = 0.0;
  double mean_sir_beamformer_db = 0.0;
};

/// Runs `runs` random scenes for one (L, T60) cell. Run r uses seed + r.
inline BenchCell run_bench_cell(BenchSceneOptions opts, std::size_t runs, std::uint64_t seed,
                                const PipelineConfig& cfg) {
  BenchCell cell;
  cell.num_sources = opts.num_sources;
  cell.t60 = opts.t60;
  std::vector<double> final_sir, bf_sir;
  for (std::size_t r = 0; r < runs; ++r) {
    cell.runs.push_back(score_scene(make_bench_scene(opts, seed + r), cfg));
    final_sir.push_back(cell.runs.back().mean_sir_db);
    bf_sir.push_back(cell.runs.back().mean_sir_beamformer_db);
  }
  cell.mean_sir_db = mean(final_sir);
  cell.mean_sir_beamformer_db = mean(bf_sir);
  return cell;
}

}  // namespace shpsd

#endif  // SHPSD_PIPELINE_HPP_
