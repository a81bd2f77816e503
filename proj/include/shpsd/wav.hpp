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

#ifndef SHPSD_WAV_HPP_
#define SHPSD_WAV_HPP_

// Minimal RIFF/WAVE reader and writer. Reads PCM 16/24/32-bit and IEEE
// float 32/64-bit (plain or WAVE_FORMAT_EXTENSIBLE); writes PCM16, float32
// or float64. Samples are exchanged as doubles, channel-major.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace shpsd {

enum class SampleFormat { kPcm16, kPcm24, kFloat32, kFloat64 };

struct WavData {
  double sample_rate = 0.0;
  std::vector<std::vector<double>> channels;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t num_samples() const { return channels.empty() ? 0 : channels.front().size(); }
};

inline SampleFormat parse_sample_format(const std::string& s) {
  if (s == "pcm16" || s == "16") return SampleFormat::kPcm16;
  if (s == "pcm24" || s == "24") return SampleFormat::kPcm24;
  if (s == "float32" || s == "f32") return SampleFormat::kFloat32;
  if (s == "float64" || s == "f64") return SampleFormat::kFloat64;
  throw std::invalid_argument("unknown sample format '" + s + "' (expected pcm16|pcm24|float32|float64)");
}

namespace detail {

inline void put_u16(std::vector<char>& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::vector<char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline void write_wav(const std::string& path, const WavData& wav, SampleFormat format = SampleFormat::kFloat32) {
  if (wav.channels.empty()) throw std::invalid_argument("write_wav: no channels");
  const std::size_t frames = wav.num_samples();
  for (const auto& ch : wav.channels) {
    if (ch.size() != frames) throw std::invalid_argument("write_wav: channels differ in length");
  }
  const auto nch = static_cast<std::uint16_t>(wav.channels.size());
  std::uint16_t bits = 32, tag = 3;
  switch (format) {
    case SampleFormat::kPcm16: bits = 16; tag = 1; break;
    case SampleFormat::kPcm24: bits = 24; tag = 1; break;
    case SampleFormat::kFloat32: bits = 32; tag = 3; break;
    case SampleFormat::kFloat64: bits = 64; tag = 3; break;
  }
  const std::uint32_t block = nch * (bits / 8);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * block);
  const auto rate = static_cast<std::uint32_t>(std::lround(wav.sample_rate));

  std::vector<char> b;
  b.reserve(44 + data_bytes);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(b, 16);
  detail::put_u16(b, tag);
  detail::put_u16(b, nch);
  detail::put_u32(b, rate);
  detail::put_u32(b, rate * block);
  detail::put_u16(b, static_cast<std::uint16_t>(block));
  detail::put_u16(b, bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(b, data_bytes);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : wav.channels) {
      const double x = ch[i];
      if (format == SampleFormat::kFloat64) {
        char raw[8];
        std::memcpy(raw, &x, 8);
        b.insert(b.end(), raw, raw + 8);
      } else if (format == SampleFormat::kFloat32) {
        const auto f = static_cast<float>(x);
        char raw[4];
        std::memcpy(raw, &f, 4);
        b.insert(b.end(), raw, raw + 4);
      } else {
        const double full = format == SampleFormat::kPcm16 ? 32767.0 : 8388607.0;
        const auto q = static_cast<std::int32_t>(std::lround(std::clamp(x, -1.0, 1.0) * full));
        const int bytes = bits / 8;
        for (int k = 0; k < bytes; ++k) b.push_back(static_cast<char>((q >> (8 * k)) & 0xff));
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write WAV file '" + path + "'");
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file '" + path + "'");
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) { return std::runtime_error("'" + path + "': " + why); };
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::uint16_t tag = 0, nch = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const unsigned char* chunk = b.data() + pos;
    const std::uint32_t size = detail::get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > b.size()) throw fail("truncated fmt chunk");
      tag = detail::get_u16(b.data() + body);
      nch = detail::get_u16(b.data() + body + 2);
      rate = detail::get_u32(b.data() + body + 4);
      bits = detail::get_u16(b.data() + body + 14);
      if (tag == 0xFFFE && size >= 40) tag = detail::get_u16(b.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = b.data() + body;
      data_size = std::min<std::size_t>(size, b.size() - body);
    }
    pos = body + size + (size & 1);
  }
  if (nch == 0 || data == nullptr) throw fail("missing fmt or data chunk");
  const bool is_float = tag == 3;
  if (!(tag == 1 || tag == 3)) throw fail("unsupported sample encoding " + std::to_string(tag));
  if (is_float ? !(bits == 32 || bits == 64) : !(bits == 16 || bits == 24 || bits == 32)) {
    throw fail("unsupported bit depth " + std::to_string(bits));
  }
  const std::size_t bytes = bits / 8;
  const std::size_t frames = data_size / (bytes * nch);

  WavData wav;
  wav.sample_rate = rate;
  wav.channels.assign(nch, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < nch; ++c) {
      const unsigned char* p = data + (i * nch + c) * bytes;
      double x = 0.0;
      if (is_float && bits == 64) {
        std::memcpy(&x, p, 8);
      } else if (is_float) {
        float f;
        std::memcpy(&f, p, 4);
        x = f;
      } else if (bits == 16) {
        x = static_cast<std::int16_t>(detail::get_u16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
        if (v & 0x800000) v -= 0x1000000;
        x = v / 8388608.0;
      } else {
        x = static_cast<std::int32_t>(detail::get_u32(p)) / 2147483648.0;
      }
      wav.channels[c][i] = x;
    }
  }
  return wav;
}

}  // namespace shpsd

#endif  // SHPSD_WAV_HPP_
