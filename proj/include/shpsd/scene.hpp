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

#ifndef SHPSD_SCENE_HPP_
#define SHPSD_SCENE_HPP_

// Synthetic spherical-array scenes: far-field sources in a shoebox room.
//
// Each source reaches the array through its direct path and a set of image
// sources. Reverberation is rendered in the STFT domain: each image path is
// a gain, a delay phase and the plane-wave array response per bin. Paths
// delayed by more than half a hop relative to the direct path are applied to
// earlier frames of the source (see ReverbRendering). All gains and delays are
// referenced to the direct path, so the direct component of every source
// arrives at the array centre with unit gain and zero delay; the clean source
// signal is therefore the ground truth.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "shpsd/array_geometry.hpp"
#include "shpsd/sh_math.hpp"
#include "shpsd/signals.hpp"
#include "shpsd/stft.hpp"
#include "shpsd/wav.hpp"

namespace shpsd {

using Vec3 = std::array<double, 3>;

struct SourceSpec {
  SphericalDirection direction;
  double distance = 2.0;
  SignalKind signal = SignalKind::kWhiteNoise;
  std::string wav_path;             // for SignalKind::kFile
  std::vector<double> samples;      // explicit samples override the generator
  double gain_db = 0.0;
};

struct RoomSpec {
  Vec3 dimensions{6.0, 7.0, 6.0};
  double t60 = 0.0;
  // Highest total reflection count; negative selects the order at which the
  // image energy has fallen 40 dB below the direct path.
  int max_image_order = -1;
  Vec3 array_position{3.0, 3.5, 1.5};
};

/// How image-source paths enter the STFT-domain rendering.
enum class ReverbRendering {
  // Every image is a per-bin multiplicative transfer on the current frame.
  kMultiplicative,
  // Each image delay is split into a whole number of hops (a frame lag) and
  // a residual phase of at most half a hop; paths delayed past a frame then
  // carry earlier frames of the source.
  kFrameLagged,
};

inline std::string to_string(ReverbRendering r) {
  return r == ReverbRendering::kMultiplicative ? "multiplicative" : "frame_lagged";
}

inline ReverbRendering parse_reverb_rendering(const std::string& s) {
  if (s == "multiplicative" || s == "mtf") return ReverbRendering::kMultiplicative;
  if (s == "frame_lagged" || s == "lagged") return ReverbRendering::kFrameLagged;
  throw std::invalid_argument("unknown reverb rendering '" + s + "' (expected multiplicative|frame_lagged)");
}

struct SceneSpec {
  std::vector<SourceSpec> sources;
  RoomSpec room;
  ArrayGeometry geometry = default_array_geometry();
  StftConfig stft;
  double duration = 4.0;  // seconds, for generated signals
  std::uint64_t seed = 1;
  ReverbRendering rendering = ReverbRendering::kMultiplicative;
};

struct SceneRecording {
  std::vector<std::vector<double>> mic_signals;   // Q x samples
  std::vector<std::vector<double>> ground_truth;  // L x samples
  SceneSpec spec;

  std::size_t num_samples() const { return mic_signals.empty() ? 0 : mic_signals.front().size(); }
};

struct ImagePath {
  SphericalDirection direction;  // from the array centre toward the image
  double gain = 1.0;             // reflection_coeff^reflections / distance
  double delay = 0.0;            // seconds
  double distance = 0.0;         // metres
  int reflections = 0;
};

/// Uniform wall reflection coefficient sqrt(1 - alpha) with alpha from
/// Eyring's formula T60 = 24 ln10 V / (-c S ln(1 - alpha)).
inline double eyring_reflection_coefficient(const Vec3& dims, double t60) {
  if (t60 < 0.0) throw std::invalid_argument("t60 must be >= 0");
  if (t60 == 0.0) return 0.0;
  const double volume = dims[0] * dims[1] * dims[2];
  const double surface = 2.0 * (dims[0] * dims[1] + dims[1] * dims[2] + dims[0] * dims[2]);
  return std::exp(-12.0 * std::log(10.0) * volume / (kSpeedOfSound * surface * t60));
}

inline int auto_image_order(double reflection_coeff) {
  if (reflection_coeff <= 0.0) return 0;
  if (reflection_coeff >= 1.0) return 40;
  const double order = std::log(1e-4) / (2.0 * std::log(reflection_coeff));
  return std::clamp(static_cast<int>(std::ceil(order)), 1, 40);
}

inline bool inside_room(const Vec3& p, const Vec3& dims) {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < dims[i])) return false;
  }
  return true;
}

/// Image sources of a shoebox room up to max_image_order total reflections,
/// direct path first. Along each axis, image index j places the image at
/// j*L + x (even j) or j*L + L - x (odd j) after |j| reflections.
inline std::vector<ImagePath> image_sources(const RoomSpec& room, const Vec3& source_pos, const Vec3& array_pos) {
  for (double d : room.dimensions) {
    if (!(d > 0.0)) throw std::invalid_argument("image_sources: room dimensions must be positive");
  }
  if (!inside_room(source_pos, room.dimensions)) {
    throw std::invalid_argument("image_sources: source position outside the room");
  }
  if (!inside_room(array_pos, room.dimensions)) {
    throw std::invalid_argument("image_sources: array position outside the room");
  }
  const double beta = eyring_reflection_coefficient(room.dimensions, room.t60);
  const int max_order = room.t60 == 0.0 ? 0 : (room.max_image_order < 0 ? auto_image_order(beta) : room.max_image_order);

  std::vector<ImagePath> out;
  auto emit = [&](int jx, int jy, int jz) {
    const std::array<int, 3> j{jx, jy, jz};
    Vec3 delta{};
    for (int a = 0; a < 3; ++a) {
      const double l = room.dimensions[a];
      const double img = (j[a] % 2 == 0) ? j[a] * l + source_pos[a] : j[a] * l + l - source_pos[a];
      delta[a] = img - array_pos[a];
    }
    const double dist = std::sqrt(delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]);
    const int refl = std::abs(jx) + std::abs(jy) + std::abs(jz);
    ImagePath p;
    p.direction = SphericalDirection::FromCartesian(delta[0], delta[1], delta[2]);
    p.gain = std::pow(beta, refl) / dist;
    p.delay = dist / kSpeedOfSound;
    p.distance = dist;
    p.reflections = refl;
    out.push_back(p);
  };
  emit(0, 0, 0);
  out.front().gain = 1.0 / out.front().distance;
  for (int jx = -max_order; jx <= max_order; ++jx) {
    for (int jy = -(max_order - std::abs(jx)); jy <= max_order - std::abs(jx); ++jy) {
      const int rest = max_order - std::abs(jx) - std::abs(jy);
      for (int jz = -rest; jz <= rest; ++jz) {
        if (jx == 0 && jy == 0 && jz == 0) continue;
        emit(jx, jy, jz);
      }
    }
  }
  return out;
}

/// SH order used when rendering at wavenumber k: min(ceil(kr) + 2, N_array).
inline int render_order(double k, const ArrayGeometry& geom) {
  return std::min(static_cast<int>(std::ceil(k * geom.radius)) + 2, geom.order);
}

/// b_0..b_order at kr, with the kr -> 0 limit (b_0 = 1, others 0) for any
/// array kind.
inline std::vector<cdouble> mode_strengths_or_dc(int order, double kr, ArrayKind kind) {
  if (kr <= 0.0) {
    std::vector<cdouble> out(order + 1, 0.0);
    out[0] = 1.0;
    return out;
  }
  return mode_strengths(order, kr, kind);
}

/// Microphone pressures for a unit-amplitude plane wave from `dir`, through
/// the SH expansion sum_nm 4 pi i^n conj(Y_nm(dir)) b_n(kr) Y_nm(mic).
/// `order` defaults to render_order(k, geom).
inline Eigen::VectorXcd plane_wave_pressure(const SphericalDirection& dir, const ArrayGeometry& geom, double k,
                                            std::optional<int> order = std::nullopt) {
  if (k < 0.0) throw std::invalid_argument("plane_wave_pressure: negative wavenumber");
  const int n_max = order.value_or(render_order(k, geom));
  const auto b = mode_strengths_or_dc(n_max, k * geom.radius, geom.kind);
  const auto y_src = sph_harmonics(n_max, dir);
  Eigen::VectorXcd p = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(geom.num_mics()));
  for (std::size_t q = 0; q < geom.num_mics(); ++q) {
    const auto y_mic = sph_harmonics(n_max, geom.mic_dirs[q]);
    cdouble acc = 0.0;
    for (int n = 0; n <= n_max; ++n) {
      cdouble inner = 0.0;
      for (int m = -n; m <= n; ++m) {
        const std::size_t i = static_cast<std::size_t>(n * n + n + m);
        inner += std::conj(y_src[i]) * y_mic[i];
      }
      acc += 4.0 * kPi * i_pow(n) * b[n] * inner;
    }
    p(static_cast<Eigen::Index>(q)) = acc;
  }
  return p;
}

inline Vec3 source_position(const SourceSpec& src, const RoomSpec& room) {
  const auto u = src.direction.unit_vector();
  return {room.array_position[0] + src.distance * u[0], room.array_position[1] + src.distance * u[1],
          room.array_position[2] + src.distance * u[2]};
}

/// Array transfer functions of one source, grouped by frame lag:
/// `per_lag[f]` is bins x Q and applies to S(tau - f, k).
struct LaggedTransfer {
  std::vector<Eigen::MatrixXcd> per_lag;
};

inline LaggedTransfer source_transfer_functions(const SourceSpec& src, const RoomSpec& room, const ArrayGeometry& geom,
                                                const StftConfig& cfg, ReverbRendering mode) {
  const auto images = image_sources(room, source_position(src, room), room.array_position);
  const int n_arr = geom.order;
  const auto modes = static_cast<Eigen::Index>(mode_count(n_arr));
  const auto bins = static_cast<Eigen::Index>(cfg.num_bins());
  const double direct_gain = images.front().gain;
  const double direct_dist = images.front().distance;
  const double hop_dist = static_cast<double>(cfg.hop) / cfg.sample_rate * kSpeedOfSound;
  const double dk = 2.0 * kPi * cfg.sample_rate / static_cast<double>(cfg.fft_size) / kSpeedOfSound;

  // Sound-field coefficients per lag and bin:
  // sum_i g_i e^{-ik r_i} 4 pi i^n conj(Y_nm(y_i)), r_i the residual path.
  std::vector<Eigen::MatrixXcd> fields;
  Eigen::VectorXcd y_conj(modes);
  for (const auto& img : images) {
    const double extra = img.distance - direct_dist;
    std::size_t lag = 0;
    double residual = extra;
    if (mode == ReverbRendering::kFrameLagged) {
      lag = static_cast<std::size_t>(std::llround(extra / hop_dist));
      residual = extra - static_cast<double>(lag) * hop_dist;
    }
    if (lag >= fields.size()) fields.resize(lag + 1, Eigen::MatrixXcd::Zero(bins, modes));
    const auto y = sph_harmonics(n_arr, img.direction);
    for (Eigen::Index i = 0; i < modes; ++i) y_conj(i) = std::conj(y[static_cast<std::size_t>(i)]);
    const double rel_gain = img.gain / direct_gain;
    for (Eigen::Index b = 0; b < bins; ++b) {
      const cdouble w = rel_gain * std::polar(1.0, -dk * static_cast<double>(b) * residual);
      fields[lag].row(b).noalias() += w * y_conj.transpose();
    }
  }

  Eigen::MatrixXcd y_mics(static_cast<Eigen::Index>(geom.num_mics()), modes);
  for (std::size_t q = 0; q < geom.num_mics(); ++q) {
    const auto y = sph_harmonics(n_arr, geom.mic_dirs[q]);
    for (Eigen::Index i = 0; i < modes; ++i) y_mics(static_cast<Eigen::Index>(q), i) = y[static_cast<std::size_t>(i)];
  }

  // Per-bin modal weights 4 pi i^n b_n(kr), truncated at the render order.
  Eigen::MatrixXcd modal = Eigen::MatrixXcd::Zero(bins, modes);
  for (Eigen::Index b = 0; b < bins; ++b) {
    const double k = 2.0 * kPi * cfg.bin_frequency(static_cast<std::size_t>(b)) / kSpeedOfSound;
    const int order = render_order(k, geom);
    const auto strength = mode_strengths_or_dc(n_arr, k * geom.radius, geom.kind);
    for (int n = 0; n <= order; ++n) {
      const cdouble scale = 4.0 * kPi * i_pow(n) * strength[n];
      for (int m = -n; m <= n; ++m) modal(b, n * n + n + m) = scale;
    }
  }

  LaggedTransfer out;
  for (const auto& field : fields) {
    if (field.isZero(0.0)) {
      out.per_lag.emplace_back();
      continue;
    }
    out.per_lag.push_back(field.cwiseProduct(modal) * y_mics.transpose());
  }
  return out;
}

/// Per-bin array transfer functions (bins x Q) with every image applied to
/// the current frame.
inline Eigen::MatrixXcd source_transfer_functions(const SourceSpec& src, const RoomSpec& room,
                                                  const ArrayGeometry& geom, const StftConfig& cfg) {
  return source_transfer_functions(src, room, geom, cfg, ReverbRendering::kMultiplicative).per_lag.front();
}

/// Materializes source waveforms: explicit samples, a WAV file, or the
/// seeded generator. All returned signals share the longest length.
inline std::vector<std::vector<double>> source_signals(const SceneSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const auto gen_len = static_cast<std::size_t>(std::llround(spec.duration * spec.stft.sample_rate));
  std::vector<std::vector<double>> out;
  for (const auto& src : spec.sources) {
    std::vector<double> s;
    if (!src.samples.empty()) {
      s = src.samples;
    } else if (src.signal == SignalKind::kFile) {
      if (src.wav_path.empty()) throw std::invalid_argument("file source without a WAV path");
      const WavData wav = read_wav(src.wav_path);
      if (std::abs(wav.sample_rate - spec.stft.sample_rate) > 1e-9) {
        throw std::invalid_argument("'" + src.wav_path + "' has sample rate " + std::to_string(wav.sample_rate) +
                                    ", scene expects " + std::to_string(spec.stft.sample_rate));
      }
      s = wav.channels.front();
    } else if (src.signal == SignalKind::kSpeechLike) {
      s = speech_like(gen_len, spec.stft.sample_rate, rng);
    } else {
      s = white_noise(gen_len, rng);
    }
    const double g = std::pow(10.0, src.gain_db / 20.0);
    for (auto& x : s) x *= g;
    out.push_back(std::move(s));
  }
  std::size_t len = 0;
  for (const auto& s : out) len = std::max(len, s.size());
  for (auto& s : out) s.resize(len, 0.0);
  return out;
}

/// Renders a scene from explicit source waveforms.
inline SceneRecording render_scene(const SceneSpec& spec, const std::vector<std::vector<double>>& signals) {
  if (spec.sources.empty()) throw std::invalid_argument("render_scene: at least one source required");
  if (signals.size() != spec.sources.size()) throw std::invalid_argument("render_scene: one signal per source");
  spec.geometry.validate();
  spec.stft.validate();
  if (spec.room.t60 < 0.0) throw std::invalid_argument("render_scene: t60 must be >= 0");
  const std::size_t len = signals.front().size();
  for (const auto& s : signals) {
    if (s.size() != len) throw std::invalid_argument("render_scene: source signals differ in length");
  }
  if (len < spec.stft.fft_size + 9 * spec.stft.hop) {
    throw std::invalid_argument("render_scene: signals must span at least 10 STFT frames");
  }

  const std::size_t q_count = spec.geometry.num_mics();
  std::vector<Spectrogram> mic_spec;
  for (std::size_t l = 0; l < spec.sources.size(); ++l) {
    const Spectrogram s = analyze(signals[l], spec.stft);
    const LaggedTransfer h = source_transfer_functions(spec.sources[l], spec.room, spec.geometry, spec.stft,
                                                       spec.rendering);
    if (mic_spec.empty()) {
      mic_spec.assign(q_count, s);
      for (auto& m : mic_spec) m.frames.setZero();
    }
    const Eigen::Index frames = s.frames.rows();
    for (std::size_t lag = 0; lag < h.per_lag.size(); ++lag) {
      const auto& hl = h.per_lag[lag];
      const auto shift = static_cast<Eigen::Index>(lag);
      if (hl.size() == 0 || shift >= frames) continue;
      const auto rows = frames - shift;
      for (std::size_t q = 0; q < q_count; ++q) {
        mic_spec[q].frames.bottomRows(rows) +=
            s.frames.topRows(rows) * hl.col(static_cast<Eigen::Index>(q)).asDiagonal();
      }
    }
  }

  SceneRecording rec;
  rec.spec = spec;
  rec.ground_truth = signals;
  rec.mic_signals.reserve(q_count);
  for (const auto& m : mic_spec) rec.mic_signals.push_back(synthesize(m, spec.stft));
  return rec;
}

/// Renders a scene, generating source signals from the spec and its seed.
inline SceneRecording render_scene(const SceneSpec& spec) { return render_scene(spec, source_signals(spec)); }

}  // namespace shpsd

#endif  // SHPSD_SCENE_HPP_
