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

#ifndef SHPSD_STFT_HPP_
#define SHPSD_STFT_HPP_

// One-sided short-time Fourier analysis/synthesis with a periodic Hann
// window and weighted overlap-add.
//
// Edge policy: the signal is zero-padded by fft_size/2 at the front, framed
// with floor(len/hop) + 1 frames, and trimmed back to its original length on
// synthesis. For 1 s at 8 kHz with hop 128 that is 63 frames.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "shpsd/sh_math.hpp"

namespace shpsd {

struct StftConfig {
  std::size_t fft_size = 256;
  std::size_t hop = 128;
  double sample_rate = 8000.0;

  std::size_t num_bins() const { return fft_size / 2 + 1; }

  double bin_frequency(std::size_t bin) const {
    return static_cast<double>(bin) * sample_rate / static_cast<double>(fft_size);
  }

  void validate() const {
    if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0) {
      throw std::invalid_argument("StftConfig: fft_size must be a power of two");
    }
    if (hop == 0 || fft_size % hop != 0 || hop > fft_size / 2) {
      throw std::invalid_argument("StftConfig: hop must divide fft_size and be at most fft_size/2");
    }
    if (!(sample_rate > 0.0)) throw std::invalid_argument("StftConfig: sample_rate must be positive");
  }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// One-sided spectra, frame-major: frames(tau, bin).
struct Spectrogram {
  Eigen::MatrixXcd frames;
  std::vector<double> bin_freqs;
  StftConfig config;
  std::size_t signal_length = 0;

  std::size_t num_frames() const { return static_cast<std::size_t>(frames.rows()); }
  std::size_t num_bins() const { return static_cast<std::size_t>(frames.cols()); }
};

/// Periodic Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

inline std::size_t stft_frame_count(std::size_t signal_length, const StftConfig& cfg) {
  return signal_length / cfg.hop + 1;
}

inline Spectrogram analyze(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.size() < cfg.fft_size) {
    throw std::invalid_argument("stft::analyze: signal shorter than one frame");
  }
  const std::size_t n = cfg.fft_size;
  const std::size_t half = n / 2;
  const std::size_t num_frames = stft_frame_count(signal.size(), cfg);
  const auto window = hann_window(n);

  Spectrogram out;
  out.config = cfg;
  out.signal_length = signal.size();
  out.frames.resize(static_cast<Eigen::Index>(num_frames), static_cast<Eigen::Index>(cfg.num_bins()));
  out.bin_freqs.resize(cfg.num_bins());
  for (std::size_t b = 0; b < cfg.num_bins(); ++b) out.bin_freqs[b] = cfg.bin_frequency(b);

  Eigen::FFT<double> fft;
  std::vector<double> buf(n);
  std::vector<cdouble> spec;
  for (std::size_t t = 0; t < num_frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * cfg.hop) - static_cast<std::ptrdiff_t>(half);
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t src = start + static_cast<std::ptrdiff_t>(i);
      const double x = (src >= 0 && src < static_cast<std::ptrdiff_t>(signal.size())) ? signal[src] : 0.0;
      buf[i] = x * window[i];
    }
    fft.fwd(spec, buf);
    for (std::size_t b = 0; b < cfg.num_bins(); ++b) out.frames(t, b) = spec[b];
  }
  return out;
}

/// Weighted overlap-add inverse: each frame is inverse transformed, multiplied
/// by the synthesis window and normalized by sum of squared windows.
inline std::vector<double> synthesize(const Spectrogram& spec, const StftConfig& cfg) {
  cfg.validate();
  if (!(spec.config == cfg)) throw std::invalid_argument("stft::synthesize: config mismatch");
  if (spec.num_bins() != cfg.num_bins()) throw std::invalid_argument("stft::synthesize: bin count mismatch");
  const std::size_t n = cfg.fft_size;
  const std::size_t half = n / 2;
  const std::size_t length = spec.signal_length;
  if (spec.num_frames() != stft_frame_count(length, cfg)) {
    throw std::invalid_argument("stft::synthesize: frame count does not match signal length");
  }
  const auto window = hann_window(n);

  const std::size_t padded = (spec.num_frames() - 1) * cfg.hop + n;
  std::vector<double> acc(padded, 0.0);
  std::vector<double> norm(padded, 0.0);
  Eigen::FFT<double> fft;
  std::vector<cdouble> full(n);
  std::vector<double> frame;
  for (std::size_t t = 0; t < spec.num_frames(); ++t) {
    for (std::size_t b = 0; b < cfg.num_bins(); ++b) full[b] = spec.frames(t, b);
    for (std::size_t b = cfg.num_bins(); b < n; ++b) full[b] = std::conj(full[n - b]);
    fft.inv(frame, full);
    for (std::size_t i = 0; i < n; ++i) {
      acc[t * cfg.hop + i] += frame[i] * window[i];
      norm[t * cfg.hop + i] += window[i] * window[i];
    }
  }
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double w = norm[i + half];
    out[i] = w > 1e-12 ? acc[i + half] / w : 0.0;
  }
  return out;
}

}  // namespace shpsd

#endif  // SHPSD_STFT_HPP_
