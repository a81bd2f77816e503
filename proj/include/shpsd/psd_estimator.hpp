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

#ifndef SHPSD_PSD_ESTIMATOR_HPP_
#define SHPSD_PSD_ESTIMATOR_HPP_

// Source and reverberant PSD estimation from spatial cross-correlations of
// sound-field coefficients.
//
// For L uncorrelated far-field sources in a diffuse-ish reverberant field the
// correlation of coefficient pairs is linear in the unknown powers:
//
//   Lambda_nm^n'm' = E{alpha_nm conj(alpha_n'm')}
//                  = sum_l Phi_l Upsilon_nm^n'm'(y_l) + sum_vu Gamma_vu Psi_nn'v^mm'u
//
//   Upsilon_nm^n'm'(y) = C_nn' conj(Y_nm(y)) Y_n'm'(y)
//   Psi_nn'v^mm'u      = C_nn' int Y_vu conj(Y_nm) Y_n'm'
//   C_nn'              = 16 pi^2 i^n (-i)^n'
//
// Stacking every (nm, n'm') pair gives Lambda = T Theta with
// Theta = [Phi_1..Phi_L, Gamma_00..Gamma_VV]; Theta is recovered with a
// truncated-SVD pseudo-inverse and half-wave rectified.
//
// Lambda is stored row-major over mode pairs: index = acn(nm) * (N+1)^2 +
// acn(n'm'), i.e. Lambda_00^00, Lambda_00^1-1, ..., Lambda_NN^NN.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shpsd/sh_analysis.hpp"
#include "shpsd/sh_math.hpp"

namespace shpsd {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// EWMA estimate of the coefficient cross-correlation vector for one bin.
struct CorrelationState {
  Eigen::VectorXcd lambda;
  double beta = 0.4;
  std::size_t frame_count = 0;
  int order = 4;

  CorrelationState() = default;
  CorrelationState(int sh_order, double smoothing) : beta(smoothing), order(sh_order) {
    if (sh_order < 0) throw std::invalid_argument("CorrelationState: negative order");
    if (!(smoothing >= 0.0 && smoothing <= 1.0)) {
      throw std::invalid_argument("CorrelationState: beta must lie in [0, 1]");
    }
    const auto m = static_cast<Eigen::Index>(mode_count(sh_order));
    lambda = Eigen::VectorXcd::Zero(m * m);
  }

  std::size_t num_modes() const { return mode_count(order); }

  /// In-place EWMA step with one coefficient vector. The first frame
  /// initializes the state with its instantaneous outer product.
  void update(const Eigen::Ref<const Eigen::VectorXcd>& alpha) {
    const auto m = static_cast<Eigen::Index>(num_modes());
    if (alpha.size() != m) {
      throw std::invalid_argument("CorrelationState::update: expected " + std::to_string(m) + " coefficients, got " +
                                  std::to_string(alpha.size()));
    }
    const double keep = frame_count == 0 ? 0.0 : beta;
    const double take = frame_count == 0 ? 1.0 : 1.0 - beta;
    for (Eigen::Index i = 0; i < m; ++i) {
      const cdouble ai = take * alpha(i);
      cdouble* row = lambda.data() + i * m;
      for (Eigen::Index j = 0; j < m; ++j) row[j] = keep * row[j] + ai * std::conj(alpha(j));
    }
    ++frame_count;
  }

  cdouble at(std::size_t nm, std::size_t nm_prime) const {
    return lambda(static_cast<Eigen::Index>(nm * num_modes() + nm_prime));
  }
};

inline CorrelationState update_correlation(CorrelationState state, const Eigen::Ref<const Eigen::VectorXcd>& alpha) {
  state.update(alpha);
  return state;
}

/// C_nn' = 16 pi^2 i^n (-i)^n'.
inline cdouble correlation_prefactor(int n, int n_prime) {
  return 16.0 * kPi * kPi * i_pow(n) * i_pow(-n_prime);
}

struct TranslationMatrix {
  Eigen::MatrixXcd t;
  std::vector<SphericalDirection> source_dirs;
  int order = 4;
  int v_order = 2;

  std::size_t num_sources() const { return source_dirs.size(); }
  std::size_t num_reverb_terms() const { return mode_count(v_order); }
  Eigen::Index rows() const { return t.rows(); }
  Eigen::Index cols() const { return t.cols(); }
};

/// Upsilon column of one direction ((N+1)^4 entries).
inline Eigen::VectorXcd direct_path_column(const SphericalDirection& dir, int order) {
  const auto y = sph_harmonics(order, dir);
  const auto m = static_cast<Eigen::Index>(mode_count(order));
  Eigen::VectorXcd col(m * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int n = ModeIndex::FromAcn(static_cast<std::size_t>(i)).n;
    for (Eigen::Index j = 0; j < m; ++j) {
      const int n_prime = ModeIndex::FromAcn(static_cast<std::size_t>(j)).n;
      col(i * m + j) = correlation_prefactor(n, n_prime) * std::conj(y[static_cast<std::size_t>(i)]) *
                       y[static_cast<std::size_t>(j)];
    }
  }
  return col;
}

/// Psi column for reverberant mode (v, u).
inline Eigen::VectorXcd reverberant_column(int v, int u, int order) {
  const auto m = static_cast<Eigen::Index>(mode_count(order));
  Eigen::VectorXcd col(m * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const ModeIndex a = ModeIndex::FromAcn(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < m; ++j) {
      const ModeIndex b = ModeIndex::FromAcn(static_cast<std::size_t>(j));
      col(i * m + j) = correlation_prefactor(a.n, b.n) * triple_harmonic_integral(v, a.n, b.n, u, a.m, b.m);
    }
  }
  return col;
}

/// Builds T = [Upsilon(y_1) .. Upsilon(y_L) | Psi_00 .. Psi_VV]. The matrix is
/// frequency independent. `v_order` < 0 omits the reverberant columns.
inline TranslationMatrix build_translation_matrix(const std::vector<SphericalDirection>& dirs, int order, int v_order) {
  if (dirs.empty()) throw std::invalid_argument("build_translation_matrix: need at least one source direction");
  if (order < 0) throw std::invalid_argument("build_translation_matrix: negative order");
  for (std::size_t a = 0; a < dirs.size(); ++a) {
    for (std::size_t b = a + 1; b < dirs.size(); ++b) {
      if (dirs[a].cos_angle_to(dirs[b]) > 1.0 - 1e-12) {
        throw std::invalid_argument("build_translation_matrix: source directions " + std::to_string(a) + " and " +
                                    std::to_string(b) + " coincide");
      }
    }
  }
  const auto m = static_cast<Eigen::Index>(mode_count(order));
  const auto rows = m * m;
  const auto reverb = v_order < 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(mode_count(v_order));
  const auto cols = static_cast<Eigen::Index>(dirs.size()) + reverb;
  if (rows < cols) {
    throw std::invalid_argument("build_translation_matrix: underdetermined system, " + std::to_string(rows) +
                                " correlation rows for " + std::to_string(cols) + " unknowns (N=" +
                                std::to_string(order) + ", L=" + std::to_string(dirs.size()) +
                                ", V=" + std::to_string(v_order) + ")");
  }
  TranslationMatrix tm;
  tm.source_dirs = dirs;
  tm.order = order;
  tm.v_order = v_order;
  tm.t.resize(rows, cols);
  for (std::size_t l = 0; l < dirs.size(); ++l) tm.t.col(static_cast<Eigen::Index>(l)) = direct_path_column(dirs[l], order);
  for (int v = 0; v <= v_order; ++v) {
    for (int u = -v; u <= v; ++u) {
      tm.t.col(static_cast<Eigen::Index>(dirs.size()) + v * v + v + u) = reverberant_column(v, u, order);
    }
  }
  return tm;
}

/// Same matrix restricted to the L direct-path columns.
inline TranslationMatrix direct_only(const TranslationMatrix& tm) {
  TranslationMatrix out = tm;
  out.v_order = -1;
  out.t = tm.t.leftCols(static_cast<Eigen::Index>(tm.num_sources()));
  return out;
}

struct PsdEstimate {
  Eigen::VectorXd phi;     // L source PSDs, rectified
  Eigen::VectorXcd gamma;  // raw reverberant coefficients Gamma_vu (ACN order)
  double gamma00 = 0.0;    // rectified real part of Gamma_00
  double imag_residue = 0.0;  // largest discarded |Im| among Phi and Gamma_00
};

/// Truncated-SVD pseudo-inverse of a selection of rows/columns of T.
class PsdSolver {
 public:
  PsdSolver() = default;

  /// `rows`: indices into the full Lambda vector; `reverb_terms`: number of
  /// leading Psi columns kept (0 for the direct-only model).
  PsdSolver(const TranslationMatrix& tm, std::vector<Eigen::Index> rows, std::size_t reverb_terms,
            double tolerance = 1e-6)
      : rows_(std::move(rows)), num_sources_(tm.num_sources()), reverb_terms_(reverb_terms) {
    if (reverb_terms > tm.num_reverb_terms() && tm.v_order >= 0) {
      throw std::invalid_argument("PsdSolver: more reverberant terms than the matrix holds");
    }
    if (tm.v_order < 0 && reverb_terms > 0) throw std::invalid_argument("PsdSolver: matrix has no reverberant columns");
    const auto cols = static_cast<Eigen::Index>(num_sources_ + reverb_terms_);
    Eigen::MatrixXcd sub(static_cast<Eigen::Index>(rows_.size()), cols);
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r] < 0 || rows_[r] >= tm.rows()) throw std::out_of_range("PsdSolver: row index out of range");
      sub.row(static_cast<Eigen::Index>(r)) = tm.t.row(rows_[r]).leftCols(cols);
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sub, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    rank_ = 0;
    double smin_kept = smax;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (smax > 0.0 && s(i) >= tolerance * smax) {
        inv(i) = 1.0 / s(i);
        smin_kept = s(i);
        ++rank_;
      }
    }
    if (!std::isfinite(smax)) throw NumericalError("PsdSolver: non-finite singular values");
    condition_ = rank_ > 0 ? smax / smin_kept : std::numeric_limits<double>::infinity();
    full_rank_ = rank_ == cols;
    pinv_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
  }

  /// Solves for Theta from a full-length Lambda vector.
  PsdEstimate solve(const Eigen::Ref<const Eigen::VectorXcd>& lambda) const {
    Eigen::VectorXcd selected(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) selected(static_cast<Eigen::Index>(r)) = lambda(rows_[r]);
    return unpack(pinv_ * selected);
  }

  /// Solves from a Lambda vector that already holds only the selected rows.
  PsdEstimate solve_selected(const Eigen::Ref<const Eigen::VectorXcd>& selected) const {
    return unpack(pinv_ * selected);
  }

  const std::vector<Eigen::Index>& rows() const { return rows_; }
  double condition_number() const { return condition_; }
  Eigen::Index rank() const { return rank_; }
  bool full_rank() const { return full_rank_; }
  std::size_t num_sources() const { return num_sources_; }
  std::size_t reverb_terms() const { return reverb_terms_; }
  const Eigen::MatrixXcd& pseudo_inverse() const { return pinv_; }

 private:
  PsdEstimate unpack(const Eigen::VectorXcd& theta) const {
    PsdEstimate est;
    const auto l = static_cast<Eigen::Index>(num_sources_);
    est.phi.resize(l);
    double residue = 0.0;
    for (Eigen::Index i = 0; i < l; ++i) {
      est.phi(i) = std::max(0.0, theta(i).real());
      residue = std::max(residue, std::abs(theta(i).imag()));
    }
    est.gamma = theta.tail(static_cast<Eigen::Index>(reverb_terms_));
    if (reverb_terms_ > 0) {
      est.gamma00 = std::max(0.0, est.gamma(0).real());
      residue = std::max(residue, std::abs(est.gamma(0).imag()));
    }
    est.imag_residue = residue;
    return est;
  }

  std::vector<Eigen::Index> rows_;
  std::size_t num_sources_ = 0;
  std::size_t reverb_terms_ = 0;
  Eigen::MatrixXcd pinv_;
  double condition_ = 0.0;
  Eigen::Index rank_ = 0;
  bool full_rank_ = false;
};

inline std::vector<Eigen::Index> all_rows(const TranslationMatrix& tm) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(tm.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
  return rows;
}

/// Theta = pinv(T) Lambda with rectification, using every row of T.
inline PsdEstimate estimate_psds(const CorrelationState& state, const TranslationMatrix& tm, double tolerance = 1e-6) {
  if (state.order != tm.order || state.lambda.size() != tm.rows()) {
    throw std::invalid_argument("estimate_psds: correlation state and translation matrix differ in order");
  }
  const std::size_t reverb = tm.v_order < 0 ? 0 : tm.num_reverb_terms();
  return PsdSolver(tm, all_rows(tm), reverb, tolerance).solve(state.lambda);
}

/// Direct-path-only model: the Psi columns are discarded.
inline PsdEstimate estimate_psds_anechoic(const CorrelationState& state, const TranslationMatrix& tm,
                                          double tolerance = 1e-6) {
  return estimate_psds(state, direct_only(tm), tolerance);
}

struct EstimatorConfig {
  double beta = 0.4;
  int v_order = 2;
  bool reverb_model = true;
  double svd_tolerance = 1e-6;
  // Per-bin reverberant order is limited to 2 N(k) - reverb_order_slack.
  // At V >= 2 N(k) every direct-path column is a combination of Psi columns
  // and the source PSDs become unidentifiable. Negative disables the cap.
  int reverb_order_slack = 1;
};

/// PSD tracks over a whole recording: phi[l](tau, bin), gamma00(tau, bin).
struct PsdTrack {
  std::vector<Eigen::MatrixXd> phi;
  Eigen::MatrixXd gamma00;
  Eigen::MatrixXd imag_residue;
  std::vector<double> bin_freqs;
  std::vector<double> condition;  // per bin, after truncation
  std::vector<int> v_order_used;  // per bin, -1 for the direct-only model

  std::size_t num_sources() const { return phi.size(); }
  std::size_t num_frames() const { return static_cast<std::size_t>(gamma00.rows()); }
  std::size_t num_bins() const { return static_cast<std::size_t>(gamma00.cols()); }
};

/// Row indices of T whose two modes are both usable in this bin.
inline std::vector<Eigen::Index> usable_rows(const BinModes& bm, int order) {
  const auto m = static_cast<Eigen::Index>(mode_count(order));
  std::vector<bool> ok(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) ok[static_cast<std::size_t>(i)] = bm.mode_usable(ModeIndex::FromAcn(static_cast<std::size_t>(i)).n);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!ok[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (ok[static_cast<std::size_t>(j)]) rows.push_back(i * m + j);
    }
  }
  return rows;
}

/// Runs the per-bin EWMA and solve over every frame. Solvers are shared
/// between bins with the same usable-mode pattern.
inline PsdTrack estimate_psd_track(const Coefficients& coeffs, const std::vector<SphericalDirection>& dirs,
                                   const EstimatorConfig& cfg = {}) {
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw std::invalid_argument("estimator: beta must lie in [0, 1]");
  if (cfg.v_order < 0) throw std::invalid_argument("estimator: V must be >= 0");
  const int order = coeffs.max_order;
  const TranslationMatrix tm = build_translation_matrix(dirs, order, cfg.reverb_model ? cfg.v_order : -1);
  const std::size_t bins = coeffs.num_bins();
  const std::size_t frames = coeffs.frames.size();
  const std::size_t l_count = dirs.size();

  PsdTrack track;
  track.bin_freqs = coeffs.bin_freqs;
  track.phi.assign(l_count, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins)));
  track.gamma00 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  track.imag_residue = track.gamma00;
  track.condition.resize(bins);
  track.v_order_used.resize(bins);

  std::map<std::pair<std::vector<Eigen::Index>, int>, PsdSolver> cache;
  std::vector<const PsdSolver*> solvers(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const BinModes& bm = coeffs.bins[b];
    int v = -1;
    if (cfg.reverb_model) {
      v = cfg.v_order;
      if (cfg.reverb_order_slack >= 0) v = std::max(0, std::min(v, 2 * bm.order - cfg.reverb_order_slack));
    }
    auto rows = usable_rows(bm, order);
    auto key = std::make_pair(rows, v);
    auto it = cache.find(key);
    if (it == cache.end()) {
      const std::size_t terms = v < 0 ? 0 : mode_count(v);
      it = cache.emplace(std::move(key), PsdSolver(tm, std::move(rows), terms, cfg.svd_tolerance)).first;
    }
    solvers[b] = &it->second;
    track.condition[b] = it->second.condition_number();
    track.v_order_used[b] = v;
  }

  std::vector<CorrelationState> states(bins, CorrelationState(order, cfg.beta));
  for (std::size_t t = 0; t < frames; ++t) {
    const auto& frame = coeffs.frames[t].coeffs;
    for (std::size_t b = 0; b < bins; ++b) {
      states[b].update(frame.row(static_cast<Eigen::Index>(b)).transpose());
      const PsdEstimate est = solvers[b]->solve(states[b].lambda);
      for (std::size_t l = 0; l < l_count; ++l) {
        track.phi[l](static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) = est.phi(static_cast<Eigen::Index>(l));
      }
      track.gamma00(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) = est.gamma00;
      track.imag_residue(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) = est.imag_residue;
    }
  }
  return track;
}

}  // namespace shpsd

#endif  // SHPSD_PSD_ESTIMATOR_HPP_
