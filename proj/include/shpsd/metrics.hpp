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

#ifndef SHPSD_METRICS_HPP_
#define SHPSD_METRICS_HPP_

// Objective evaluation: signal-to-interference ratio and PSD log error.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "shpsd/stft.hpp"

namespace shpsd {

inline constexpr double kSirCapDb = 100.0;

/// SIR of each estimate against a set of references. Each estimate is
/// projected by least squares onto the span of all references (one gain per
/// reference); the coefficient of the matching reference is the target, the
/// rest is interference. Values are capped at +100 dB.
inline std::vector<double> sir(const std::vector<std::vector<double>>& estimates,
                               const std::vector<std::vector<double>>& references) {
  if (references.size() < 2) throw std::invalid_argument("sir: need at least two references");
  if (estimates.size() != references.size()) throw std::invalid_argument("sir: one estimate per reference");
  const std::size_t len = references.front().size();
  for (const auto& r : references) {
    if (r.size() != len) throw std::invalid_argument("sir: references differ in length");
  }
  for (const auto& e : estimates) {
    if (e.size() != len) throw std::invalid_argument("sir: estimates and references differ in length");
  }
  const auto l = static_cast<Eigen::Index>(references.size());
  Eigen::MatrixXd refs(static_cast<Eigen::Index>(len), l);
  for (Eigen::Index j = 0; j < l; ++j) {
    refs.col(j) = Eigen::Map<const Eigen::VectorXd>(references[static_cast<std::size_t>(j)].data(),
                                                    static_cast<Eigen::Index>(len));
    if (refs.col(j).squaredNorm() == 0.0) throw std::invalid_argument("sir: reference signal is all zero");
  }
  const Eigen::MatrixXd gram = refs.transpose() * refs;
  // Dependence test on the unit-diagonal Gram matrix.
  const Eigen::VectorXd inv_norm = gram.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd corr = inv_norm.asDiagonal() * gram * inv_norm.asDiagonal();
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(corr, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() < 1e-12) {
    throw std::invalid_argument("sir: references are linearly dependent");
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);

  std::vector<double> out;
  for (Eigen::Index i = 0; i < l; ++i) {
    const Eigen::Map<const Eigen::VectorXd> est(estimates[static_cast<std::size_t>(i)].data(),
                                                static_cast<Eigen::Index>(len));
    const Eigen::VectorXd c = ldlt.solve(refs.transpose() * est);
    const Eigen::VectorXd target = refs.col(i) * c(i);
    Eigen::VectorXd interference = refs * c - target;
    const double pt = target.squaredNorm();
    const double pi = interference.squaredNorm();
    double db = kSirCapDb;
    if (pt == 0.0) {
      db = -kSirCapDb;
    } else if (pi > 0.0) {
      db = std::clamp(10.0 * std::log10(pt / pi), -kSirCapDb, kSirCapDb);
    }
    out.push_back(db);
  }
  return out;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// EWMA-smoothed periodogram |X|^2, same recursion and initialization as the
/// correlation estimator.
inline Eigen::MatrixXd smoothed_periodogram(const Spectrogram& spec, double beta) {
  Eigen::MatrixXd out(spec.frames.rows(), spec.frames.cols());
  for (Eigen::Index t = 0; t < spec.frames.rows(); ++t) {
    const Eigen::RowVectorXd inst = spec.frames.row(t).cwiseAbs2();
    out.row(t) = t == 0 ? inst : Eigen::RowVectorXd(beta * out.row(t - 1) + (1.0 - beta) * inst);
  }
  return out;
}

struct PsdErrorOptions {
  // Entries whose reference lies more than floor_db below the reference peak
  // are inactive; estimates are clamped to the same floor.
  double floor_db = 40.0;
  std::size_t first_frame = 0;
};

/// Mean |10 log10(est / ref)| in dB over active time-frequency entries.
inline double psd_log_error(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& reference,
                            const PsdErrorOptions& opts = {}) {
  if (estimated.rows() != reference.rows() || estimated.cols() != reference.cols()) {
    throw std::invalid_argument("psd_log_error: shape mismatch");
  }
  if (opts.first_frame >= static_cast<std::size_t>(reference.rows())) {
    throw std::invalid_argument("psd_log_error: first_frame beyond the track");
  }
  const auto start = static_cast<Eigen::Index>(opts.first_frame);
  const Eigen::Index n = reference.rows() - start;
  const double peak = reference.bottomRows(n).maxCoeff();
  if (!(peak > 0.0)) throw std::invalid_argument("psd_log_error: reference is all zero");
  const double floor = peak * std::pow(10.0, -opts.floor_db / 10.0);
  double acc = 0.0;
  std::size_t count = 0;
  for (Eigen::Index t = start; t < reference.rows(); ++t) {
    for (Eigen::Index b = 0; b < reference.cols(); ++b) {
      const double ref = reference(t, b);
      if (ref <= floor) continue;
      acc += std::abs(10.0 * std::log10(std::max(estimated(t, b), floor) / ref));
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("psd_log_error: no active entries");
  return acc / static_cast<double>(count);
}

struct EvalReport {
  std::vector<double> sir_db;
  double mean_sir_db = 0.0;
  std::vector<double> psd_log_error_db;
  double runtime_s = 0.0;
};

}  // namespace shpsd

#endif  // SHPSD_METRICS_HPP_
