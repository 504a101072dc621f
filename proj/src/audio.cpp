// Copyright 2026 The ttaug Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ttaug/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatIeeeFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t get_u16le(const uint8_t* p) {
  return static_cast<uint16_t>(p[0]) | (static_cast<uint16_t>(p[1]) << 8);
}

void put_u16le(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

[[noreturn]] void parse_fail(size_t offset, const std::string& what) {
  throw ParseError("wav: " + what + " at byte offset " +
                   std::to_string(offset));
}

}  // namespace

AudioBuffer parse_wav(const std::string& bytes) {
  const auto* p = reinterpret_cast<const uint8_t*>(bytes.data());
  size_t n = bytes.size();
  if (n < 12) parse_fail(0, "file too small for RIFF header");
  if (std::memcmp(p, "RIFF", 4) != 0) parse_fail(0, "missing RIFF tag");
  if (std::memcmp(p + 8, "WAVE", 4) != 0) parse_fail(8, "missing WAVE tag");

  uint16_t format_tag = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= n) {
    char chunk_id[5] = {0};
    std::memcpy(chunk_id, p + pos, 4);
    uint32_t chunk_size = get_u32le(p + pos + 4);
    size_t body = pos + 8;
    if (body + chunk_size > n) {
      parse_fail(pos, std::string("chunk '") + chunk_id +
                          "' overruns file (declares " +
                          std::to_string(chunk_size) + " bytes)");
    }
    if (std::memcmp(chunk_id, "fmt ", 4) == 0) {
      if (chunk_size < 16) parse_fail(body, "fmt chunk shorter than 16 bytes");
      format_tag = get_u16le(p + body);
      channels = get_u16le(p + body + 2);
      sample_rate = get_u32le(p + body + 4);
      bits = get_u16le(p + body + 14);
      if (format_tag == kFormatExtensible && chunk_size >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: the real tag leads the 16-byte GUID.
        format_tag = get_u16le(p + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk_id, "data", 4) == 0) {
      if (!have_fmt) parse_fail(pos, "data chunk before fmt chunk");
      if (channels == 0) parse_fail(body, "fmt declares zero channels");
      if (sample_rate == 0) parse_fail(body, "fmt declares zero sample rate");

      AudioBuffer out;
      out.sample_rate = static_cast<int>(sample_rate);

      size_t bytes_per_sample;
      if (format_tag == kFormatPcm && bits == 16) {
        out.format = WavFormat::kPcm16;
        bytes_per_sample = 2;
      } else if (format_tag == kFormatIeeeFloat && bits == 32) {
        out.format = WavFormat::kFloat32;
        bytes_per_sample = 4;
      } else {
        throw DataError("wav: unsupported format (tag " +
                        std::to_string(format_tag) + ", " +
                        std::to_string(bits) + "-bit); only PCM-16 and " +
                        "float-32 are readable");
      }

      size_t frame_bytes = bytes_per_sample * channels;
      if (chunk_size % frame_bytes != 0) {
        parse_fail(body, "data size not a multiple of the frame size");
      }
      size_t frames = chunk_size / frame_bytes;
      out.samples.resize(frames);
      for (size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (size_t c = 0; c < channels; ++c) {
          size_t off = body + f * frame_bytes + c * bytes_per_sample;
          if (out.format == WavFormat::kPcm16) {
            int16_t raw = static_cast<int16_t>(get_u16le(p + off));
            acc += static_cast<double>(raw) / 32768.0;
          } else {
            acc += static_cast<double>(get_f32le(p + off));
          }
        }
        out.samples[f] = static_cast<float>(acc / channels);
      }
      return out;
    }
    // Chunks are word-aligned; odd sizes carry a pad byte.
    pos = body + chunk_size + (chunk_size & 1);
  }
  if (!have_fmt) parse_fail(pos, "no fmt chunk found");
  parse_fail(pos, "no data chunk found");
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  return parse_wav(read_file(path));
}

std::string serialize_wav(const AudioBuffer& a) {
  const uint16_t channels = 1;
  const bool f32 = a.format == WavFormat::kFloat32;
  const uint16_t bits = f32 ? 32 : 16;
  const uint32_t byte_rate =
      static_cast<uint32_t>(a.sample_rate) * channels * bits / 8;
  const uint32_t data_size =
      static_cast<uint32_t>(a.samples.size()) * bits / 8;

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32le(out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  put_u32le(out, 16);
  put_u16le(out, f32 ? kFormatIeeeFloat : kFormatPcm);
  put_u16le(out, channels);
  put_u32le(out, static_cast<uint32_t>(a.sample_rate));
  put_u32le(out, byte_rate);
  put_u16le(out, static_cast<uint16_t>(channels * bits / 8));
  put_u16le(out, bits);
  out += "data";
  put_u32le(out, data_size);
  for (float s : a.samples) {
    if (f32) {
      put_f32le(out, s);
    } else {
      double clamped = std::clamp(static_cast<double>(s), -1.0, 1.0);
      auto raw = static_cast<int16_t>(
          std::clamp<int64_t>(round_away(clamped * 32768.0), -32768, 32767));
      put_u16le(out, static_cast<uint16_t>(raw));
    }
  }
  return out;
}

void save_wav(const AudioBuffer& a, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_wav(a));
}

SegmentResult truncate_midpoint(const AudioBuffer& a, const SegmentSpec& spec) {
  if (a.samples.empty()) {
    throw DegenerateInputError("truncate_midpoint: empty buffer");
  }
  if (spec.full) {
    return SegmentResult{a, false};
  }
  if (!(spec.duration_s > 0.0)) {
    throw DegenerateInputError("truncate_midpoint: non-positive duration");
  }
  const int64_t len = static_cast<int64_t>(a.samples.size());
  const int64_t want = round_away(spec.duration_s * a.sample_rate);
  if (want >= len) {
    return SegmentResult{a, want > len};
  }
  const int64_t mid = len / 2;
  int64_t start = spec.anchor == SegmentAnchor::kCentered ? mid - want / 2
                                                          : mid;
  start = std::clamp<int64_t>(start, 0, len - want);

  AudioBuffer out;
  out.sample_rate = a.sample_rate;
  out.format = a.format;
  out.samples.assign(a.samples.begin() + start,
                     a.samples.begin() + start + want);
  return SegmentResult{std::move(out), false};
}

AudioBuffer repeat_to_duration(const AudioBuffer& a, double target_s) {
  if (a.samples.empty()) {
    throw DegenerateInputError("repeat_to_duration: empty buffer");
  }
  if (!(target_s > 0.0)) {
    throw DegenerateInputError("repeat_to_duration: non-positive target");
  }
  const size_t want =
      static_cast<size_t>(round_away(target_s * a.sample_rate));
  AudioBuffer out;
  out.sample_rate = a.sample_rate;
  out.format = a.format;
  out.samples.resize(want);
  for (size_t i = 0; i < want; ++i) {
    out.samples[i] = a.samples[i % a.samples.size()];
  }
  return out;
}

}  // namespace ttaug
