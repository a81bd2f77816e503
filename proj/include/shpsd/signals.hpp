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

#ifndef SHPSD_SIGNALS_HPP_
#define SHPSD_SIGNALS_HPP_

// Test-signal generators for synthetic scenes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <array>
#include <string>
#include <vector>

#include "shpsd/sh_math.hpp"

namespace shpsd {

enum class SignalKind {
  kWhiteNoise,
  // Voiced harmonic bursts with a random pitch contour and syllabic gating.
  // Sparse in time-frequency, like speech.
  kSpeechLike,
  kFile,
};

inline std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::kWhiteNoise: return "white";
    case SignalKind::kSpeechLike: return "speech_like";
    case SignalKind::kFile: return "file";
  }
  return "?";
}

inline SignalKind parse_signal_kind(const std::string& s) {
  if (s == "white" || s == "white_noise" || s == "noise") return SignalKind::kWhiteNoise;
  if (s == "speech_like" || s == "speech") return SignalKind::kSpeechLike;
  if (s == "file" || s == "wav") return SignalKind::kFile;
  throw std::invalid_argument("unknown signal kind '" + s + "' (expected white|speech_like|file)");
}

inline std::vector<double> white_noise(std::size_t length, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(length);
  for (auto& x : out) x = dist(rng);
  return out;
}

inline std::vector<double> speech_like(std::size_t length, double sample_rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Syllabic gate: alternating voiced segments (120-320 ms) and pauses
  // (40-200 ms) with 10 ms raised-cosine ramps.
  std::vector<double> gate(length, 0.0);
  std::vector<int> syllable(length, 0);
  int syl = 0;
  const auto ramp = static_cast<std::size_t>(0.010 * sample_rate);
  std::size_t pos = static_cast<std::size_t>(unif(rng) * 0.1 * sample_rate);
  while (pos < length) {
    const auto on = static_cast<std::size_t>((0.12 + 0.20 * unif(rng)) * sample_rate);
    for (std::size_t i = 0; i < on && pos + i < length; ++i) {
      double g = 1.0;
      if (i < ramp) g = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(i) / static_cast<double>(ramp));
      if (on - i <= ramp) g = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(on - i) / static_cast<double>(ramp));
      gate[pos + i] = g;
      syllable[pos + i] = syl;
    }
    ++syl;
    pos += on + static_cast<std::size_t>((0.04 + 0.16 * unif(rng)) * sample_rate);
  }

  // Pitch contour: speaker-specific base with a slow random walk.
  const double base_f0 = 90.0 + 160.0 * unif(rng);
  double f0 = base_f0;
  double phase = 0.0;
  const double nyquist = sample_rate / 2.0;
  const auto max_harmonics = static_cast<int>(nyquist / 60.0);
  // Two vowel formants per syllable on a -6 dB/octave glottal slope.
  std::vector<std::array<double, 2>> formants(static_cast<std::size_t>(syl) + 1);
  for (auto& f : formants) f = {300.0 + 500.0 * unif(rng), 900.0 + 1600.0 * unif(rng)};
  auto harmonic_gain = [&](double freq, int s_idx) {
    const auto& f = formants[static_cast<std::size_t>(s_idx)];
    double g = 100.0 / std::max(freq, 100.0);
    for (double fc : f) {
      const double bw = 80.0 + 0.1 * fc;
      g *= 1.0 + 8.0 / (1.0 + std::pow((freq - fc) / bw, 2.0));
    }
    return g;
  };

  std::vector<double> out(length, 0.0);
  const std::size_t contour_step = static_cast<std::size_t>(0.005 * sample_rate) + 1;
  for (std::size_t i = 0; i < length; ++i) {
    if (i % contour_step == 0) {
      f0 += 2.0 * gauss(rng);
      f0 += 0.05 * (base_f0 - f0);
      f0 = std::clamp(f0, 60.0, 400.0);
    }
    phase += 2.0 * kPi * f0 / sample_rate;
    if (phase > 2.0 * kPi) phase -= 2.0 * kPi;
    if (gate[i] == 0.0) continue;
    double s = 0.0;
    for (int h = 1; h <= max_harmonics && h * f0 < nyquist; ++h) s += harmonic_gain(h * f0, syllable[i]) * std::sin(h * phase);
    out[i] = gate[i] * s;
  }
  // Unit mean power over the active part.
  double energy = 0.0;
  std::size_t active = 0;
  for (std::size_t i = 0; i < length; ++i) {
    if (gate[i] > 0.0) {
      energy += out[i] * out[i];
      ++active;
    }
  }
  if (energy > 0.0) {
    const double scale = std::sqrt(static_cast<double>(active) / energy);
    for (auto& x : out) x *= scale;
  }
  return out;
}

}  // namespace shpsd

#endif  // SHPSD_SIGNALS_HPP_
