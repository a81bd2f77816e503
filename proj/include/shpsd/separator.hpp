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

#ifndef SHPSD_SEPARATOR_HPP_
#define SHPSD_SEPARATOR_HPP_

// Source separation: a maximum-directivity beamformer in the SH domain,
//
//   Z_l = sum_nm i^-n / (N+1)^2 alpha_nm Y_nm(y_l),
//
// followed by a Wiener post-filter built from the estimated PSDs,
//
//   S_l = Z_l Phi_l / (sum_l' Phi_l' + Phi_r),   Phi_r = Gamma_00 / sqrt(4 pi).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "shpsd/psd_estimator.hpp"
#include "shpsd/sh_analysis.hpp"
#include "shpsd/sh_math.hpp"
#include "shpsd/stft.hpp"

namespace shpsd {

/// Max-DI beamformer output for one bin. Only modes usable in the bin
/// contribute; the normalization uses the bin's effective order.
inline cdouble beamform_bin(const Eigen::Ref<const Eigen::RowVectorXcd>& alpha, const BinModes& bm,
                            const std::vector<cdouble>& steering_y) {
  cdouble z = 0.0;
  for (int n = 0; n <= bm.order; ++n) {
    if (!bm.mode_usable(n)) continue;
    cdouble inner = 0.0;
    for (int m = -n; m <= n; ++m) {
      const auto i = static_cast<std::size_t>(n * n + n + m);
      inner += alpha(static_cast<Eigen::Index>(i)) * steering_y[i];
    }
    z += i_pow(-n) * inner;
  }
  const double norm = static_cast<double>((bm.order + 1) * (bm.order + 1));
  return z / norm;
}

/// Beamformer output for every bin of one frame.
inline Eigen::VectorXcd beamform(const CoefficientFrame& frame, const std::vector<BinModes>& bins,
                                 const SphericalDirection& dir) {
  if (static_cast<std::size_t>(frame.coeffs.rows()) != bins.size()) {
    throw std::invalid_argument("beamform: bin layout does not match the frame");
  }
  const int order = static_cast<int>(std::lround(std::sqrt(static_cast<double>(frame.coeffs.cols())))) - 1;
  const auto y = sph_harmonics(order, dir);
  Eigen::VectorXcd z(frame.coeffs.rows());
  for (Eigen::Index b = 0; b < frame.coeffs.rows(); ++b) {
    z(b) = beamform_bin(frame.coeffs.row(b), bins[static_cast<std::size_t>(b)], y);
  }
  return z;
}

/// Phi_r = Gamma_00 / sqrt(4 pi), clamped at zero.
inline double reverberant_power(double gamma00) { return std::max(0.0, gamma00) / std::sqrt(4.0 * kPi); }

inline double reverberant_power(const PsdEstimate& est) { return reverberant_power(est.gamma00); }

/// Wiener gains Phi_l / (sum Phi + Phi_r). All gains are zero when the
/// denominator is below `guard_floor`.
inline Eigen::VectorXd wiener_gains(const Eigen::Ref<const Eigen::VectorXd>& phi, double phi_r, double guard_floor = 0.0) {
  const double denom = phi.sum() + phi_r;
  if (!(denom > guard_floor) || !(denom > 0.0)) return Eigen::VectorXd::Zero(phi.size());
  return phi / denom;
}

struct SeparationOutput {
  std::vector<Spectrogram> beamformed;  // Z_l
  std::vector<Spectrogram> separated;   // S_l
  std::vector<std::vector<double>> beamformed_waveforms;
  std::vector<std::vector<double>> waveforms;
};

struct SeparatorConfig {
  // Gains are zeroed when sum Phi + Phi_r < relative_guard * frame power,
  // where frame power is the mean |Z_l|^2 of the bin.
  double relative_guard = 1e-12;
  bool synthesize_waveforms = true;
};

/// Beamformer spectrograms for each steering direction.
inline std::vector<Spectrogram> beamform_all(const Coefficients& coeffs, const std::vector<SphericalDirection>& dirs,
                                             const StftConfig& stft, std::size_t signal_length) {
  std::vector<Spectrogram> out;
  const auto frames = static_cast<Eigen::Index>(coeffs.frames.size());
  const auto bins = static_cast<Eigen::Index>(coeffs.num_bins());
  for (const auto& dir : dirs) {
    const auto y = sph_harmonics(coeffs.max_order, dir);
    Spectrogram s;
    s.config = stft;
    s.signal_length = signal_length;
    s.bin_freqs = coeffs.bin_freqs;
    s.frames.resize(frames, bins);
    for (Eigen::Index t = 0; t < frames; ++t) {
      for (Eigen::Index b = 0; b < bins; ++b) {
        s.frames(t, b) = beamform_bin(coeffs.frames[static_cast<std::size_t>(t)].coeffs.row(b),
                                      coeffs.bins[static_cast<std::size_t>(b)], y);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Applies the Wiener post-filter to beamformer outputs, frame by frame with
/// the PSD estimates of the same frame.
inline SeparationOutput wiener_separate(std::vector<Spectrogram> beamformed, const PsdTrack& track,
                                        const SeparatorConfig& cfg = {}) {
  if (beamformed.empty()) throw std::invalid_argument("wiener_separate: no beamformer outputs");
  if (beamformed.size() != track.num_sources()) {
    throw std::invalid_argument("wiener_separate: PSD track and beamformer outputs differ in source count");
  }
  const auto frames = static_cast<Eigen::Index>(beamformed.front().num_frames());
  const auto bins = static_cast<Eigen::Index>(beamformed.front().num_bins());
  if (static_cast<std::size_t>(frames) != track.num_frames() || static_cast<std::size_t>(bins) != track.num_bins()) {
    throw std::invalid_argument("wiener_separate: PSD track shape does not match the spectrograms");
  }
  const std::size_t l_count = beamformed.size();
  SeparationOutput out;
  out.separated = beamformed;
  Eigen::VectorXd phi(static_cast<Eigen::Index>(l_count));
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index b = 0; b < bins; ++b) {
      double power = 0.0;
      for (std::size_t l = 0; l < l_count; ++l) {
        phi(static_cast<Eigen::Index>(l)) = track.phi[l](t, b);
        power += std::norm(beamformed[l].frames(t, b));
      }
      power /= static_cast<double>(l_count);
      const Eigen::VectorXd g = wiener_gains(phi, reverberant_power(track.gamma00(t, b)), cfg.relative_guard * power);
      for (std::size_t l = 0; l < l_count; ++l) out.separated[l].frames(t, b) *= g(static_cast<Eigen::Index>(l));
    }
  }
  if (cfg.synthesize_waveforms) {
    for (const auto& s : beamformed) out.beamformed_waveforms.push_back(synthesize(s, s.config));
    for (const auto& s : out.separated) out.waveforms.push_back(synthesize(s, s.config));
  }
  out.beamformed = std::move(beamformed);
  return out;
}

}  // namespace shpsd

#endif  // SHPSD_SEPARATOR_HPP_
