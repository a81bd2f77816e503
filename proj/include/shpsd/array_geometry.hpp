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

#ifndef SHPSD_ARRAY_GEOMETRY_HPP_
#define SHPSD_ARRAY_GEOMETRY_HPP_

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "shpsd/sh_math.hpp"

namespace shpsd {

inline constexpr double kSpeedOfSound = 343.0;

struct ArrayGeometry {
  double radius = 0.042;
  std::vector<SphericalDirection> mic_dirs;
  ArrayKind kind = ArrayKind::kRigid;
  int order = 4;

  std::size_t num_mics() const { return mic_dirs.size(); }

  void validate() const {
    if (!(radius > 0.0)) throw std::invalid_argument("ArrayGeometry: radius must be positive");
    if (order < 1) throw std::invalid_argument("ArrayGeometry: order must be >= 1");
    if (mic_dirs.size() < mode_count(order)) {
      throw std::invalid_argument("ArrayGeometry: need at least (order+1)^2 microphones, have " +
                                  std::to_string(mic_dirs.size()));
    }
    for (std::size_t a = 0; a < mic_dirs.size(); ++a) {
      for (std::size_t b = a + 1; b < mic_dirs.size(); ++b) {
        if (mic_dirs[a].cos_angle_to(mic_dirs[b]) > 1.0 - 1e-12) {
          throw std::invalid_argument("ArrayGeometry: duplicate microphone directions");
        }
      }
    }
  }
};

inline std::string to_string(ArrayKind kind) { return kind == ArrayKind::kOpen ? "open" : "rigid"; }

inline ArrayKind parse_array_kind(const std::string& s) {
  if (s == "open") return ArrayKind::kOpen;
  if (s == "rigid") return ArrayKind::kRigid;
  throw std::invalid_argument("unknown array kind '" + s + "' (expected open|rigid)");
}

/// 32 directions of a pentakis dodecahedron: the 12 icosahedron vertices
/// followed by the 20 dodecahedron vertices.
inline std::vector<SphericalDirection> pentakis_dodecahedron_directions() {
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<SphericalDirection> dirs;
  dirs.reserve(32);
  for (double s1 : {-1.0, 1.0}) {
    for (double s2 : {-1.0, 1.0}) {
      dirs.push_back(SphericalDirection::FromCartesian(0.0, s1, s2 * g));
      dirs.push_back(SphericalDirection::FromCartesian(s1, s2 * g, 0.0));
      dirs.push_back(SphericalDirection::FromCartesian(s2 * g, 0.0, s1));
    }
  }
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      for (double sz : {-1.0, 1.0}) dirs.push_back(SphericalDirection::FromCartesian(sx, sy, sz));
    }
  }
  for (double s1 : {-1.0, 1.0}) {
    for (double s2 : {-1.0, 1.0}) {
      dirs.push_back(SphericalDirection::FromCartesian(0.0, s1 * g, s2 / g));
      dirs.push_back(SphericalDirection::FromCartesian(s1 / g, 0.0, s2 * g));
      dirs.push_back(SphericalDirection::FromCartesian(s2 * g, s1 / g, 0.0));
    }
  }
  return dirs;
}

inline ArrayGeometry default_array_geometry() {
  ArrayGeometry geom;
  geom.mic_dirs = pentakis_dodecahedron_directions();
  return geom;
}

/// Reads (theta_deg, phi_deg) rows. Blank lines, '#' comments and a
/// non-numeric header row are skipped.
inline std::vector<SphericalDirection> load_geometry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open geometry file '" + path + "'");
  std::vector<SphericalDirection> dirs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream row(line);
    double theta = 0.0, phi = 0.0;
    if (!(row >> theta >> phi)) {
      if (dirs.empty() && line_no == 1) continue;  // header
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected theta_deg,phi_deg");
    }
    dirs.push_back(SphericalDirection::FromDegrees(theta, phi));
  }
  return dirs;
}

inline void save_geometry_csv(const std::string& path, const std::vector<SphericalDirection>& dirs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write geometry file '" + path + "'");
  out.precision(17);
  out << "theta_deg,phi_deg\n";
  for (const auto& d : dirs) out << d.theta_deg() << ',' << d.phi_deg() << '\n';
}

}  // namespace shpsd

#endif  // SHPSD_ARRAY_GEOMETRY_HPP_
