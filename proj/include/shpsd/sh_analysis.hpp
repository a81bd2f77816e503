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

#ifndef SHPSD_SH_ANALYSIS_HPP_
#define SHPSD_SH_ANALYSIS_HPP_

// Sound-field coefficient extraction from array spectra:
//
//   alpha_nm(tau, k) = (1 / b_n(kr)) sum_q w_{nm,q} P_q(tau, k)
//
// The weights w are the pseudo-inverse of the Q x (N+1)^2 matrix of
// Y_nm(mic_q); for geometries with uniform quadrature this reduces to
// (4 pi / Q) conj(Y_nm(mic_q)).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "shpsd/array_geometry.hpp"
#include "shpsd/sh_math.hpp"
#include "shpsd/stft.hpp"

namespace shpsd {

/// Which modes carry usable coefficients in one frequency bin.
struct BinModes {
  int order = 1;              // effective order N(k)
  std::vector<bool> usable;   // per order n = 0..N_array
  std::vector<cdouble> mode_strength;

  bool mode_usable(int n) const { return n <= order && usable[static_cast<std::size_t>(n)]; }
};

/// Coefficients of one STFT frame: coeffs(bin, acn). Entries of unusable
/// modes are zero.
struct CoefficientFrame {
  std::size_t tau = 0;
  Eigen::MatrixXcd coeffs;
};

struct Coefficients {
  int max_order = 4;
  std::vector<double> bin_freqs;
  std::vector<BinModes> bins;
  std::vector<CoefficientFrame> frames;

  std::size_t num_modes() const { return mode_count(max_order); }
  std::size_t num_bins() const { return bins.size(); }
};

struct AnalysisConfig {
  // Modes with |b_n| below this fraction of max_n |b_n| are dropped
  // (open arrays only).
  double reliability_threshold = 1e-2;
};

/// min(ceil(kr), N_array), floored at 1.
inline int effective_order(double k, const ArrayGeometry& geom) {
  if (k < 0.0) throw std::invalid_argument("effective_order: negative wavenumber");
  const double kr = k * geom.radius;
  const int ceil_kr = static_cast<int>(std::ceil(kr - 1e-12));
  return std::max(1, std::min(ceil_kr, geom.order));
}

inline double wavenumber(double freq_hz) { return 2.0 * kPi * freq_hz / kSpeedOfSound; }

inline BinModes bin_modes(double freq_hz, const ArrayGeometry& geom, const AnalysisConfig& cfg = {}) {
  BinModes bm;
  const double k = wavenumber(freq_hz);
  const double kr = k * geom.radius;
  bm.order = effective_order(k, geom);
  bm.usable.assign(static_cast<std::size_t>(geom.order) + 1, true);
  if (kr <= 0.0) {
    bm.mode_strength.assign(static_cast<std::size_t>(geom.order) + 1, 0.0);
    bm.mode_strength[0] = 1.0;
    std::fill(bm.usable.begin() + 1, bm.usable.end(), false);
    return bm;
  }
  bm.mode_strength = mode_strengths(geom.order, kr, geom.kind);
  if (geom.kind == ArrayKind::kOpen) {
    double peak = 0.0;
    for (int n = 0; n <= bm.order; ++n) peak = std::max(peak, std::abs(bm.mode_strength[n]));
    for (int n = 0; n <= geom.order; ++n) {
      bm.usable[n] = std::abs(bm.mode_strength[n]) >= cfg.reliability_threshold * peak;
    }
  }
  return bm;
}

/// Y matrix (Q x (N+1)^2) of the microphone directions.
inline Eigen::MatrixXcd mic_sh_matrix(const ArrayGeometry& geom, int order) {
  const auto modes = static_cast<Eigen::Index>(mode_count(order));
  Eigen::MatrixXcd y(static_cast<Eigen::Index>(geom.num_mics()), modes);
  for (std::size_t q = 0; q < geom.num_mics(); ++q) {
    const auto row = sph_harmonics(order, geom.mic_dirs[q]);
    for (Eigen::Index i = 0; i < modes; ++i) y(static_cast<Eigen::Index>(q), i) = row[static_cast<std::size_t>(i)];
  }
  return y;
}

/// Least-squares encoder ((N+1)^2 x Q) mapping mic pressures onto
/// coefficients of the pressure expansion sum_nm a_nm Y_nm(mic).
inline Eigen::MatrixXcd sh_encoder(const ArrayGeometry& geom) {
  const Eigen::MatrixXcd y = mic_sh_matrix(geom, geom.order);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) < 1e-8 * s(0)) {
    throw std::invalid_argument("sh_encoder: microphone layout cannot resolve the requested order");
  }
  return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
}

/// Extracts alpha_nm for every frame and bin. `mic_spectra` holds one
/// spectrogram per microphone, all with identical framing.
inline Coefficients extract_coefficients(const std::vector<Spectrogram>& mic_spectra, const ArrayGeometry& geom,
                                         const AnalysisConfig& cfg = {}) {
  geom.validate();
  if (mic_spectra.size() != geom.num_mics()) {
    throw std::invalid_argument("extract_coefficients: " + std::to_string(mic_spectra.size()) +
                                " channels for a " + std::to_string(geom.num_mics()) + "-microphone geometry");
  }
  const auto& first = mic_spectra.front();
  for (const auto& s : mic_spectra) {
    if (s.frames.rows() != first.frames.rows() || s.frames.cols() != first.frames.cols()) {
      throw std::invalid_argument("extract_coefficients: spectrograms differ in framing");
    }
  }
  const Eigen::MatrixXcd encoder = sh_encoder(geom);
  const std::size_t bins = first.num_bins();
  const auto modes = static_cast<Eigen::Index>(mode_count(geom.order));

  Coefficients out;
  out.max_order = geom.order;
  out.bin_freqs = first.bin_freqs;
  out.bins.reserve(bins);
  for (std::size_t b = 0; b < bins; ++b) out.bins.push_back(bin_modes(first.bin_freqs[b], geom, cfg));

  // Per-bin scaling 1/b_n for usable modes, 0 otherwise.
  Eigen::MatrixXcd scale = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(bins), modes);
  for (std::size_t b = 0; b < bins; ++b) {
    for (int n = 0; n <= geom.order; ++n) {
      if (!out.bins[b].mode_usable(n)) continue;
      for (int m = -n; m <= n; ++m) scale(static_cast<Eigen::Index>(b), n * n + n + m) = 1.0 / out.bins[b].mode_strength[n];
    }
  }

  const auto q_count = static_cast<Eigen::Index>(geom.num_mics());
  Eigen::MatrixXcd pressures(q_count, static_cast<Eigen::Index>(bins));
  out.frames.resize(first.num_frames());
  for (std::size_t t = 0; t < first.num_frames(); ++t) {
    for (Eigen::Index q = 0; q < q_count; ++q) pressures.row(q) = mic_spectra[static_cast<std::size_t>(q)].frames.row(t);
    CoefficientFrame& f = out.frames[t];
    f.tau = t;
    f.coeffs = (encoder * pressures).transpose().cwiseProduct(scale);
  }
  return out;
}

/// Convenience: STFT of every channel, then extraction.
inline Coefficients extract_coefficients(const std::vector<std::vector<double>>& mic_signals, const ArrayGeometry& geom,
                                         const StftConfig& stft, const AnalysisConfig& cfg = {}) {
  std::vector<Spectrogram> spectra;
  spectra.reserve(mic_signals.size());
  for (const auto& s : mic_signals) spectra.push_back(analyze(s, stft));
  return extract_coefficients(spectra, geom, cfg);
}

/// Debug dump: one CSV row per (frame, bin, mode) with real and imaginary parts.
inline void write_coefficients_csv(const std::string& path, const Coefficients& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.precision(10);
  out << "frame,bin_hz,n,m,re,im\n";
  for (const auto& f : c.frames) {
    for (std::size_t b = 0; b < c.num_bins(); ++b) {
      for (Eigen::Index i = 0; i < f.coeffs.cols(); ++i) {
        const ModeIndex mi = ModeIndex::FromAcn(static_cast<std::size_t>(i));
        if (!c.bins[b].mode_usable(mi.n)) continue;
        const cdouble a = f.coeffs(static_cast<Eigen::Index>(b), i);
        out << f.tau << ',' << c.bin_freqs[b] << ',' << mi.n << ',' << mi.m << ',' << a.real() << ',' << a.imag()
            << '\n';
      }
    }
  }
}

}  // namespace shpsd

#endif  // SHPSD_SH_ANALYSIS_HPP_
