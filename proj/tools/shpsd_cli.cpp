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

// shpsd command line: simulate, estimate, separate, evaluate, bench.
// Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shpsd/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace shpsd;

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchConfig {
  std::size_t runs = 20;
  std::uint64_t seed = 1000;
  std::vector<std::size_t> source_counts{4, 6, 8};
  std::vector<double> t60s{0.2, 0.3, 0.5};
  std::size_t reverb_sources = 4;
  double colatitude_deg = 76.0;
  double min_separation_deg = 20.0;
  double duration = 4.0;
  SignalKind signal = SignalKind::kSpeechLike;
};

struct ExperimentConfig {
  PipelineConfig pipeline;
  SceneSpec scene;
  BenchConfig bench;
  SampleFormat wav_format = SampleFormat::kFloat32;
};

// ---- config loading -------------------------------------------------------

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = node.as_array()) {
    json j = json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  throw ConfigError("unsupported TOML value type (dates and times are not accepted)");
}

json read_config_file(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
  if (fs::path(path).extension() == ".json") {
    std::ifstream in(path);
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  try {
    return toml_to_json(toml::parse_file(path));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
}

// Reads section keys, rejecting unknown ones so typos do not pass silently.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("[" + name_ + "] must be a table");
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong value type");
    }
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) throw ConfigError("unknown key " + name_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

SourceSpec parse_source(const json& j, std::size_t idx, const fs::path& base) {
  Section s(j, "sources[" + std::to_string(idx) + "]");
  double theta = 90.0, phi = 0.0;
  std::string signal = "white", wav;
  SourceSpec src;
  s.get("theta_deg", theta);
  s.get("phi_deg", phi);
  s.get("distance", src.distance);
  s.get("signal", signal);
  s.get("wav", wav);
  s.get("gain_db", src.gain_db);
  s.finish();
  src.direction = SphericalDirection::FromDegrees(theta, phi);
  src.signal = parse_signal_kind(signal);
  if (!wav.empty()) {
    src.wav_path = (base / wav).string();
    src.signal = SignalKind::kFile;
  }
  if (!(src.distance > 0.0)) throw ConfigError("sources[" + std::to_string(idx) + "].distance must be positive");
  return src;
}

void apply_config(const json& root, ExperimentConfig& cfg, const fs::path& base) {
  if (!root.is_object()) throw ConfigError("config root must be a table");
  for (const auto& [k, v] : root.items()) {
    if (k == "stft") {
      Section s(v, k);
      s.get("fft_size", cfg.pipeline.stft.fft_size);
      s.get("hop", cfg.pipeline.stft.hop);
      s.get("sample_rate", cfg.pipeline.stft.sample_rate);
      s.finish();
    } else if (k == "array") {
      Section s(v, k);
      std::string kind = to_string(cfg.scene.geometry.kind), geometry;
      s.get("radius", cfg.scene.geometry.radius);
      s.get("kind", kind);
      s.get("order", cfg.scene.geometry.order);
      s.get("geometry", geometry);
      s.finish();
      cfg.scene.geometry.kind = parse_array_kind(kind);
      if (!geometry.empty()) cfg.scene.geometry.mic_dirs = load_geometry_csv((base / geometry).string());
    } else if (k == "analysis") {
      Section s(v, k);
      s.get("reliability_threshold", cfg.pipeline.analysis.reliability_threshold);
      s.finish();
    } else if (k == "estimator") {
      Section s(v, k);
      s.get("beta", cfg.pipeline.estimator.beta);
      s.get("v_order", cfg.pipeline.estimator.v_order);
      s.get("reverb_model", cfg.pipeline.estimator.reverb_model);
      s.get("svd_tolerance", cfg.pipeline.estimator.svd_tolerance);
      s.get("reverb_order_slack", cfg.pipeline.estimator.reverb_order_slack);
      s.finish();
    } else if (k == "separator") {
      Section s(v, k);
      s.get("relative_guard", cfg.pipeline.separator.relative_guard);
      s.finish();
    } else if (k == "scene") {
      Section s(v, k);
      std::vector<double> room, pos;
      std::string rendering = to_string(cfg.scene.rendering);
      s.get("duration", cfg.scene.duration);
      s.get("seed", cfg.scene.seed);
      s.get("t60", cfg.scene.room.t60);
      s.get("room", room);
      s.get("array_position", pos);
      s.get("max_image_order", cfg.scene.room.max_image_order);
      s.get("rendering", rendering);
      s.finish();
      if (!room.empty()) {
        if (room.size() != 3) throw ConfigError("scene.room needs three dimensions");
        cfg.scene.room.dimensions = {room[0], room[1], room[2]};
      }
      if (!pos.empty()) {
        if (pos.size() != 3) throw ConfigError("scene.array_position needs three coordinates");
        cfg.scene.room.array_position = {pos[0], pos[1], pos[2]};
      }
      cfg.scene.rendering = parse_reverb_rendering(rendering);
    } else if (k == "sources") {
      if (!v.is_array()) throw ConfigError("sources must be an array of tables");
      cfg.scene.sources.clear();
      for (std::size_t i = 0; i < v.size(); ++i) cfg.scene.sources.push_back(parse_source(v[i], i, base));
    } else if (k == "bench") {
      Section s(v, k);
      std::string signal = to_string(cfg.bench.signal);
      s.get("runs", cfg.bench.runs);
      s.get("seed", cfg.bench.seed);
      s.get("sources", cfg.bench.source_counts);
      s.get("t60", cfg.bench.t60s);
      s.get("reverb_sources", cfg.bench.reverb_sources);
      s.get("colatitude_deg", cfg.bench.colatitude_deg);
      s.get("min_separation_deg", cfg.bench.min_separation_deg);
      s.get("duration", cfg.bench.duration);
      s.get("signal", signal);
      s.finish();
      cfg.bench.signal = parse_signal_kind(signal);
    } else if (k == "output") {
      Section s(v, k);
      std::string format = "float32";
      s.get("wav_format", format);
      s.finish();
      cfg.wav_format = parse_sample_format(format);
    } else {
      throw ConfigError("unknown config section '" + k + "'");
    }
  }
}

// Command-line overrides for every config field. Unset options leave the
// file value alone.
struct Overrides {
  std::optional<std::size_t> fft_size, hop, runs, reverb_sources;
  std::optional<double> sample_rate, radius, threshold, beta, svd_tol, guard, duration, t60, colatitude, min_sep,
      bench_duration;
  std::optional<int> order, v_order, slack, max_image_order;
  std::optional<std::string> array_kind, geometry, rendering, wav_format, bench_signal;
  std::optional<std::uint64_t> seed, bench_seed;
  std::optional<std::vector<double>> room, array_position, bench_t60s;
  std::optional<std::vector<std::size_t>> bench_sources;
  bool no_reverb_model = false;

  void add_to(CLI::App& app) {
    auto* g = app.add_option_group("experiment", "Overrides for config file fields");
    g->add_option("--fft-size", fft_size, "STFT length");
    g->add_option("--hop", hop, "STFT hop");
    g->add_option("--sample-rate", sample_rate, "Sample rate in Hz");
    g->add_option("--radius", radius, "Array radius in m");
    g->add_option("--array-kind", array_kind, "open | rigid");
    g->add_option("--order", order, "Array SH order");
    g->add_option("--geometry", geometry, "Microphone directions CSV (theta_deg, phi_deg)");
    g->add_option("--reliability-threshold", threshold, "Open-array mode reliability threshold");
    g->add_option("--beta", beta, "EWMA smoothing factor");
    g->add_option("--v-order", v_order, "Reverberant field order V");
    g->add_flag("--no-reverb-model", no_reverb_model, "Direct-path-only translation matrix");
    g->add_option("--svd-tolerance", svd_tol, "Relative singular value cutoff");
    g->add_option("--reverb-order-slack", slack, "Per-bin V cap 2N(k) - slack; negative disables");
    g->add_option("--relative-guard", guard, "Wiener denominator guard relative to frame power");
    g->add_option("--duration", duration, "Generated signal length in s");
    g->add_option("--seed", seed, "Scene seed");
    g->add_option("--t60", t60, "Reverberation time in s (0 = anechoic)");
    g->add_option("--room", room, "Room dimensions in m")->expected(3);
    g->add_option("--array-position", array_position, "Array centre in m")->expected(3);
    g->add_option("--max-image-order", max_image_order, "Image order cap (negative = automatic)");
    g->add_option("--rendering", rendering, "multiplicative | frame_lagged");
    g->add_option("--wav-format", wav_format, "pcm16 | pcm24 | float32 | float64");
    g->add_option("--runs", runs, "Bench runs per cell");
    g->add_option("--bench-seed", bench_seed, "Bench base seed");
    g->add_option("--bench-sources", bench_sources, "Anechoic source counts");
    g->add_option("--bench-t60", bench_t60s, "Reverberant T60 values");
    g->add_option("--reverb-sources", reverb_sources, "Source count for reverberant cells");
    g->add_option("--colatitude", colatitude, "Bench source colatitude in degrees");
    g->add_option("--min-separation", min_sep, "Bench minimum azimuth spacing in degrees");
    g->add_option("--bench-duration", bench_duration, "Bench signal length in s");
    g->add_option("--bench-signal", bench_signal, "white | speech_like");
  }

  void apply(ExperimentConfig& c) const {
    if (fft_size) c.pipeline.stft.fft_size = *fft_size;
    if (hop) c.pipeline.stft.hop = *hop;
    if (sample_rate) c.pipeline.stft.sample_rate = *sample_rate;
    if (radius) c.scene.geometry.radius = *radius;
    if (array_kind) c.scene.geometry.kind = parse_array_kind(*array_kind);
    if (order) c.scene.geometry.order = *order;
    if (geometry) c.scene.geometry.mic_dirs = load_geometry_csv(*geometry);
    if (threshold) c.pipeline.analysis.reliability_threshold = *threshold;
    if (beta) c.pipeline.estimator.beta = *beta;
    if (v_order) c.pipeline.estimator.v_order = *v_order;
    if (no_reverb_model) c.pipeline.estimator.reverb_model = false;
    if (svd_tol) c.pipeline.estimator.svd_tolerance = *svd_tol;
    if (slack) c.pipeline.estimator.reverb_order_slack = *slack;
    if (guard) c.pipeline.separator.relative_guard = *guard;
    if (duration) c.scene.duration = *duration;
    if (seed) c.scene.seed = *seed;
    if (t60) c.scene.room.t60 = *t60;
    if (room) c.scene.room.dimensions = {(*room)[0], (*room)[1], (*room)[2]};
    if (array_position) c.scene.room.array_position = {(*array_position)[0], (*array_position)[1], (*array_position)[2]};
    if (max_image_order) c.scene.room.max_image_order = *max_image_order;
    if (rendering) c.scene.rendering = parse_reverb_rendering(*rendering);
    if (wav_format) c.wav_format = parse_sample_format(*wav_format);
    if (runs) c.bench.runs = *runs;
    if (bench_seed) c.bench.seed = *bench_seed;
    if (bench_sources) c.bench.source_counts = *bench_sources;
    if (bench_t60s) c.bench.t60s = *bench_t60s;
    if (reverb_sources) c.bench.reverb_sources = *reverb_sources;
    if (colatitude) c.bench.colatitude_deg = *colatitude;
    if (min_sep) c.bench.min_separation_deg = *min_sep;
    if (bench_duration) c.bench.duration = *bench_duration;
    if (bench_signal) c.bench.signal = parse_signal_kind(*bench_signal);
  }
};

ExperimentConfig load_experiment(const std::string& path, const Overrides& ov) {
  ExperimentConfig cfg;
  if (!path.empty()) apply_config(read_config_file(path), cfg, fs::path(path).parent_path());
  ov.apply(cfg);
  cfg.scene.stft = cfg.pipeline.stft;
  const auto& e = cfg.pipeline.estimator;
  if (!(e.beta >= 0.0 && e.beta <= 1.0)) throw ConfigError("estimator.beta must lie in [0, 1]");
  if (e.v_order < 0) throw ConfigError("estimator.v_order must be >= 0");
  if (!(e.svd_tolerance > 0.0 && e.svd_tolerance < 1.0)) throw ConfigError("estimator.svd_tolerance must lie in (0, 1)");
  if (!(cfg.pipeline.analysis.reliability_threshold >= 0.0)) throw ConfigError("analysis.reliability_threshold must be >= 0");
  if (!(cfg.pipeline.separator.relative_guard >= 0.0)) throw ConfigError("separator.relative_guard must be >= 0");
  if (!(cfg.scene.duration > 0.0)) throw ConfigError("scene.duration must be positive");
  if (!(cfg.scene.room.t60 >= 0.0)) throw ConfigError("scene.t60 must be >= 0");
  if (cfg.bench.runs == 0) throw ConfigError("bench.runs must be >= 1");
  cfg.pipeline.stft.validate();
  cfg.scene.geometry.validate();
  return cfg;
}

std::vector<SphericalDirection> source_directions(const ExperimentConfig& cfg) {
  if (cfg.scene.sources.empty()) throw ConfigError("no [[sources]] given; DOAs are required");
  std::vector<SphericalDirection> d;
  for (const auto& s : cfg.scene.sources) d.push_back(s.direction);
  return d;
}

// ---- file formats ---------------------------------------------------------

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void write_mono(const fs::path& path, const std::vector<double>& x, double fs_hz, SampleFormat fmt) {
  WavData w;
  w.sample_rate = fs_hz;
  w.channels = {x};
  write_wav(path.string(), w, fmt);
}

std::vector<std::vector<double>> read_recording(const std::string& path, const ExperimentConfig& cfg) {
  if (!fs::exists(path)) throw ConfigError("recording '" + path + "' does not exist");
  WavData w = read_wav(path);
  if (std::abs(w.sample_rate - cfg.pipeline.stft.sample_rate) > 1e-9) {
    throw ConfigError("recording sample rate " + std::to_string(w.sample_rate) + " Hz differs from the configured " +
                      std::to_string(cfg.pipeline.stft.sample_rate) + " Hz");
  }
  return std::move(w.channels);
}

void check_finite(const PsdTrack& t) {
  for (const auto& p : t.phi) {
    if (!p.allFinite()) throw NumericalError("non-finite source PSD estimate");
  }
  if (!t.gamma00.allFinite()) throw NumericalError("non-finite reverberant PSD estimate");
}

void write_psd_csv(const fs::path& path, const PsdTrack& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "frame,bin_hz";
  for (std::size_t l = 0; l < t.num_sources(); ++l) out << ",phi" << l + 1;
  out << ",gamma00\n";
  for (std::size_t f = 0; f < t.num_frames(); ++f) {
    for (std::size_t b = 0; b < t.num_bins(); ++b) {
      out << f << ',' << t.bin_freqs[b];
      for (const auto& p : t.phi) out << ',' << p(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b));
      out << ',' << t.gamma00(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) << '\n';
    }
  }
}

PsdTrack read_psd_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open PSD file '" + path + "'");
  std::string line;
  std::getline(in, line);
  const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 4) throw ConfigError(path + ": expected frame,bin_hz,phi1..phiL,gamma00");
  const std::size_t l_count = cols - 3;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    std::vector<double> r(cols);
    for (auto& x : r) {
      if (!(is >> x)) throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed row");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ConfigError(path + ": no data rows");
  const auto frames = static_cast<std::size_t>(rows.back()[0]) + 1;
  if (rows.size() % frames != 0) throw ConfigError(path + ": rows do not form a frame x bin grid");
  const std::size_t bins = rows.size() / frames;
  PsdTrack t;
  t.phi.assign(l_count, Eigen::MatrixXd(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins)));
  t.gamma00.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  t.imag_residue = Eigen::MatrixXd::Zero(t.gamma00.rows(), t.gamma00.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = static_cast<Eigen::Index>(i / bins), b = static_cast<Eigen::Index>(i % bins);
    if (static_cast<Eigen::Index>(rows[i][0]) != f) throw ConfigError(path + ": frames out of order");
    if (f == 0) t.bin_freqs.push_back(rows[i][1]);
    for (std::size_t l = 0; l < l_count; ++l) t.phi[l](f, b) = rows[i][2 + l];
    t.gamma00(f, b) = rows[i][cols - 1];
  }
  return t;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json config_summary(const ExperimentConfig& c) {
  json srcs = json::array();
  for (const auto& s : c.scene.sources) {
    srcs.push_back({{"theta_deg", s.direction.theta_deg()}, {"phi_deg", s.direction.phi_deg()},
                    {"distance", s.distance}, {"signal", to_string(s.signal)}, {"gain_db", s.gain_db}});
  }
  return {{"stft", {{"fft_size", c.pipeline.stft.fft_size}, {"hop", c.pipeline.stft.hop},
                    {"sample_rate", c.pipeline.stft.sample_rate}}},
          {"array", {{"radius", c.scene.geometry.radius}, {"kind", to_string(c.scene.geometry.kind)},
                     {"order", c.scene.geometry.order}, {"num_mics", c.scene.geometry.num_mics()}}},
          {"estimator", {{"beta", c.pipeline.estimator.beta}, {"v_order", c.pipeline.estimator.v_order},
                         {"reverb_model", c.pipeline.estimator.reverb_model},
                         {"svd_tolerance", c.pipeline.estimator.svd_tolerance},
                         {"reverb_order_slack", c.pipeline.estimator.reverb_order_slack}}},
          {"scene", {{"duration", c.scene.duration}, {"seed", c.scene.seed}, {"t60", c.scene.room.t60},
                     {"room", c.scene.room.dimensions}, {"array_position", c.scene.room.array_position},
                     {"max_image_order", c.scene.room.max_image_order},
                     {"rendering", to_string(c.scene.rendering)}}},
          {"sources", srcs}};
}

// ---- subcommands ----------------------------------------------------------

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& psd_check) {
  if (cfg.scene.sources.empty()) throw ConfigError("simulate: no [[sources]] in the config");
  const fs::path dir(out_dir);
  ensure_dir(dir);
  const SceneRecording rec = render_scene(cfg.scene);
  WavData mics;
  mics.sample_rate = cfg.pipeline.stft.sample_rate;
  mics.channels = rec.mic_signals;
  write_wav((dir / "mics.wav").string(), mics, cfg.wav_format);
  for (std::size_t l = 0; l < rec.ground_truth.size(); ++l) {
    write_mono(dir / ("source" + std::to_string(l + 1) + ".wav"), rec.ground_truth[l], mics.sample_rate, cfg.wav_format);
  }
  json meta = config_summary(cfg);
  meta["num_samples"] = rec.num_samples();
  if (cfg.scene.room.t60 > 0.0) {
    meta["reflection_coefficient"] = eyring_reflection_coefficient(cfg.scene.room.dimensions, cfg.scene.room.t60);
  }
  write_json(dir / "metadata.json", meta);
  if (!psd_check.empty()) {
    // In-process estimate from the in-memory recording, for comparing with
    // `estimate` run on the written files.
    const auto r = run_estimation(rec.mic_signals, cfg.scene.geometry, source_directions(cfg), cfg.pipeline);
    check_finite(r.psd);
    write_psd_csv(psd_check, r.psd);
  }
  std::printf("simulate: %zu sources, %zu mics, %zu samples -> %s\n", rec.ground_truth.size(), rec.mic_signals.size(),
              rec.num_samples(), dir.string().c_str());
  return 0;
}

int cmd_estimate(const ExperimentConfig& cfg, const std::string& recording, const std::string& out) {
  const auto mics = read_recording(recording, cfg);
  const auto r = run_estimation(mics, cfg.scene.geometry, source_directions(cfg), cfg.pipeline);
  check_finite(r.psd);
  write_psd_csv(out, r.psd);
  std::printf("estimate: %zu sources x %zu frames x %zu bins -> %s\n", r.psd.num_sources(), r.psd.num_frames(),
              r.psd.num_bins(), out.c_str());
  return 0;
}

int cmd_separate(const ExperimentConfig& cfg, const std::string& recording, const std::string& psd_path,
                 const std::string& out_dir) {
  const auto mics = read_recording(recording, cfg);
  const auto dirs = source_directions(cfg);
  check_recording(mics, cfg.scene.geometry);
  const Coefficients coeffs = extract_coefficients(mics, cfg.scene.geometry, cfg.pipeline.stft, cfg.pipeline.analysis);
  const PsdTrack track = psd_path.empty() ? estimate_psd_track(coeffs, dirs, cfg.pipeline.estimator)
                                          : read_psd_csv(psd_path);
  check_finite(track);
  auto z = beamform_all(coeffs, dirs, cfg.pipeline.stft, mics.front().size());
  const auto sep = wiener_separate(std::move(z), track, cfg.pipeline.separator);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  for (std::size_t l = 0; l < sep.waveforms.size(); ++l) {
    write_mono(dir / ("separated" + std::to_string(l + 1) + ".wav"), sep.waveforms[l], cfg.pipeline.stft.sample_rate,
               cfg.wav_format);
    write_mono(dir / ("beamformed" + std::to_string(l + 1) + ".wav"), sep.beamformed_waveforms[l],
               cfg.pipeline.stft.sample_rate, cfg.wav_format);
  }
  std::printf("separate: %zu sources -> %s\n", sep.waveforms.size(), dir.string().c_str());
  return 0;
}

std::vector<std::vector<double>> read_monos(const std::vector<std::string>& paths) {
  std::vector<std::vector<double>> out;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ConfigError("'" + p + "' does not exist");
    out.push_back(read_wav(p).channels.front());
  }
  return out;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::vector<std::string>& estimates,
                 const std::vector<std::string>& references, const std::vector<std::string>& baseline,
                 const std::string& psd_path, const std::string& report) {
  auto est = read_monos(estimates);
  auto ref = read_monos(references);
  std::size_t len = 0;
  for (const auto& r : ref) len = std::max(len, r.size());
  for (auto* set : {&est, &ref}) {
    for (auto& x : *set) x.resize(len, 0.0);
  }
  json j;
  const auto s = sir(est, ref);
  j["sir_db"] = s;
  j["mean_sir_db"] = mean(s);
  std::printf("%-8s %10s", "source", "SIR (dB)");
  std::vector<double> sb;
  if (!baseline.empty()) {
    auto base = read_monos(baseline);
    for (auto& x : base) x.resize(len, 0.0);
    sb = sir(base, ref);
    j["baseline_sir_db"] = sb;
    j["mean_baseline_sir_db"] = mean(sb);
    std::printf(" %14s", "baseline (dB)");
  }
  std::printf("\n");
  for (std::size_t l = 0; l < s.size(); ++l) {
    std::printf("%-8zu %10.2f", l + 1, s[l]);
    if (!sb.empty()) std::printf(" %14.2f", sb[l]);
    std::printf("\n");
  }
  std::printf("%-8s %10.2f", "mean", mean(s));
  if (!sb.empty()) std::printf(" %14.2f", mean(sb));
  std::printf("\n");
  if (!psd_path.empty()) {
    const PsdTrack t = read_psd_csv(psd_path);
    if (t.num_sources() != ref.size()) throw ConfigError("PSD file and references differ in source count");
    const auto refs = reference_psds(ref, cfg.pipeline.stft, cfg.pipeline.estimator.beta);
    std::vector<double> errs;
    for (std::size_t l = 0; l < refs.size(); ++l) errs.push_back(psd_log_error(t.phi[l], refs[l], {40.0, 20}));
    j["psd_log_error_db"] = errs;
    std::printf("mean PSD log error: %.2f dB (after frame 20)\n", mean(errs));
  }
  if (!report.empty()) write_json(report, j);
  return 0;
}

int cmd_bench(const ExperimentConfig& cfg, const std::string& report) {
  const auto t0 = std::chrono::steady_clock::now();
  BenchSceneOptions base;
  base.colatitude_deg = cfg.bench.colatitude_deg;
  base.min_separation_deg = cfg.bench.min_separation_deg;
  base.duration = cfg.bench.duration;
  base.signal = cfg.bench.signal;
  base.geometry = cfg.scene.geometry;
  base.stft = cfg.pipeline.stft;
  base.rendering = cfg.scene.rendering;
  base.max_image_order = cfg.scene.room.max_image_order;

  auto run_row = [&](bool reverberant) {
    std::vector<BenchCell> cells;
    const std::size_t n = reverberant ? cfg.bench.t60s.size() : cfg.bench.source_counts.size();
    for (std::size_t i = 0; i < n; ++i) {
      BenchSceneOptions o = base;
      o.num_sources = reverberant ? cfg.bench.reverb_sources : cfg.bench.source_counts[i];
      o.t60 = reverberant ? cfg.bench.t60s[i] : 0.0;
      cells.push_back(run_bench_cell(o, cfg.bench.runs, cfg.bench.seed + (reverberant ? 1000 : 0), cfg.pipeline));
      std::fprintf(stderr, "  %s cell %zu/%zu done\n", reverberant ? "reverberant" : "anechoic", i + 1, n);
    }
    return cells;
  };
  const auto anechoic = run_row(false);
  const auto reverb = run_row(true);

  auto decreasing = [](const std::vector<BenchCell>& c) {
    for (std::size_t i = 1; i < c.size(); ++i) {
      if (!(c[i].mean_sir_db < c[i - 1].mean_sir_db)) return false;
    }
    return true;
  };
  std::vector<std::string> lh, th;
  for (auto l : cfg.bench.source_counts) lh.push_back("L=" + std::to_string(l));
  for (double t : cfg.bench.t60s) {
    char b[32];
    std::snprintf(b, sizeof b, "T60=%.1fs", t);
    th.push_back(b);
  }
  const std::size_t width = std::max(lh.size(), th.size());
  const std::string rule = "+" + std::string(22, '-') + [&] {
    std::string r;
    for (std::size_t i = 0; i < width; ++i) r += "+" + std::string(10, '-');
    return r + "+";
  }();
  auto row = [&](const std::string& label, const std::vector<std::string>& cells) {
    std::printf("| %-20s |", label.c_str());
    for (std::size_t i = 0; i < width; ++i) std::printf(" %8s |", i < cells.size() ? cells[i].c_str() : "");
    std::printf("\n");
  };
  auto values = [](const std::vector<BenchCell>& c, bool bf) {
    std::vector<std::string> v;
    for (const auto& cell : c) {
      char b[32];
      std::snprintf(b, sizeof b, "%.2f", bf ? cell.mean_sir_beamformer_db : cell.mean_sir_db);
      v.push_back(b);
    }
    return v;
  };
  std::printf("Average SIR (dB) over %zu simulations per cell\n", cfg.bench.runs);
  std::printf("%s\n", rule.c_str());
  row("Non-reverberant", lh);
  row("  BF + Wiener", values(anechoic, false));
  row("  BF only", values(anechoic, true));
  std::printf("%s\n", rule.c_str());
  row("Reverberant (L=" + std::to_string(cfg.bench.reverb_sources) + ")", th);
  row("  BF + Wiener", values(reverb, false));
  row("  BF only", values(reverb, true));
  std::printf("%s\n", rule.c_str());
  const bool trend_a = decreasing(anechoic), trend_r = decreasing(reverb);
  std::printf("anechoic trend decreasing in L: %s\n", trend_a ? "PASS" : "FAIL");
  std::printf("reverberant trend decreasing in T60: %s\n", trend_r ? "PASS" : "FAIL");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("runtime %.1f s\n", secs);

  if (!report.empty()) {
    auto cell_json = [](const BenchCell& c) {
      json runs = json::array();
      for (const auto& r : c.runs) runs.push_back({{"sir_db", r.sir_db}, {"sir_beamformer_db", r.sir_beamformer_db}});
      return json{{"num_sources", c.num_sources}, {"t60", c.t60}, {"mean_sir_db", c.mean_sir_db},
                  {"mean_sir_beamformer_db", c.mean_sir_beamformer_db}, {"runs", runs}};
    };
    json j = config_summary(cfg);
    j["bench"] = {{"runs", cfg.bench.runs}, {"seed", cfg.bench.seed}, {"signal", to_string(cfg.bench.signal)},
                  {"colatitude_deg", cfg.bench.colatitude_deg}, {"min_separation_deg", cfg.bench.min_separation_deg}};
    j["anechoic"] = json::array();
    for (const auto& c : anechoic) j["anechoic"].push_back(cell_json(c));
    j["reverberant"] = json::array();
    for (const auto& c : reverb) j["reverberant"].push_back(cell_json(c));
    j["trend_anechoic"] = trend_a;
    j["trend_reverberant"] = trend_r;
    j["runtime_s"] = secs;
    write_json(report, j);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shpsd: source PSD estimation and separation with a spherical microphone array"};
  app.require_subcommand(1);
  std::string config;
  Overrides ov;

  auto* sim = app.add_subcommand("simulate", "Render a scene to a multichannel WAV");
  std::string sim_out = "out", sim_psd;
  sim->add_option("-c,--config", config, "TOML or JSON config");
  sim->add_option("-o,--out", sim_out, "Output directory");
  sim->add_option("--psd-check", sim_psd, "Also write the in-process PSD estimate to this CSV");
  ov.add_to(*sim);

  auto* est = app.add_subcommand("estimate", "Estimate source and reverberant PSDs");
  std::string est_rec, est_out = "psd.csv";
  est->add_option("-c,--config", config, "TOML or JSON config with [[sources]] DOAs")->required();
  est->add_option("-r,--recording", est_rec, "Multichannel WAV")->required();
  est->add_option("-o,--out", est_out, "PSD CSV");
  ov.add_to(*est);

  auto* sep = app.add_subcommand("separate", "Beamform and Wiener-filter each source");
  std::string sep_rec, sep_psd, sep_out = "separated";
  sep->add_option("-c,--config", config, "TOML or JSON config with [[sources]] DOAs")->required();
  sep->add_option("-r,--recording", sep_rec, "Multichannel WAV")->required();
  sep->add_option("-p,--psd", sep_psd, "PSD CSV from `estimate` (default: estimate jointly)");
  sep->add_option("-o,--out", sep_out, "Output directory");
  ov.add_to(*sep);

  auto* ev = app.add_subcommand("evaluate", "SIR and PSD error against references");
  std::vector<std::string> ev_est, ev_ref, ev_base;
  std::string ev_psd, ev_report;
  ev->add_option("-c,--config", config, "TOML or JSON config");
  ev->add_option("-e,--estimates", ev_est, "Estimated source WAVs")->required();
  ev->add_option("-R,--references", ev_ref, "Reference source WAVs")->required();
  ev->add_option("-b,--baseline", ev_base, "Baseline WAVs (e.g. beamformer only)");
  ev->add_option("-p,--psd", ev_psd, "PSD CSV to score against the references");
  ev->add_option("-j,--json", ev_report, "JSON report path");
  ov.add_to(*ev);

  auto* bench = app.add_subcommand("bench", "Average SIR table over seeded random scenes");
  std::string bench_report;
  bench->add_option("-c,--config", config, "TOML or JSON config");
  bench->add_option("-j,--json", bench_report, "JSON report path");
  ov.add_to(*bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig cfg = load_experiment(config, ov);
    if (*sim) return cmd_simulate(cfg, sim_out, sim_psd);
    if (*est) return cmd_estimate(cfg, est_rec, est_out);
    if (*sep) return cmd_separate(cfg, sep_rec, sep_psd, sep_out);
    if (*ev) return cmd_evaluate(cfg, ev_est, ev_ref, ev_base, ev_psd, ev_report);
    if (*bench) return cmd_bench(cfg, bench_report);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
