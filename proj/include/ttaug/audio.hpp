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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ttaug {

/// Sample encoding of the source WAV; writers emit the same format they read.
enum class WavFormat { kPcm16, kFloat32 };

/// Mono PCM audio in [-1, 1].
struct AudioBuffer {
  int sample_rate = 16000;
  std::vector<float> samples;
  WavFormat format = WavFormat::kPcm16;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Where the truncation window sits relative to the utterance midpoint.
/// kCentered places the window symmetrically around the midpoint;
/// kFromMidpoint starts it at the midpoint. Both clamp to buffer bounds.
enum class SegmentAnchor { kCentered, kFromMidpoint };

/// Fixed-duration segment request. duration_s <= 0 (or full=true) means the
/// whole utterance.
struct SegmentSpec {
  double duration_s = 0.0;
  bool full = false;
  SegmentAnchor anchor = SegmentAnchor::kCentered;

  static SegmentSpec full_length() { return SegmentSpec{0.0, true}; }
  static SegmentSpec seconds(double s,
                             SegmentAnchor a = SegmentAnchor::kCentered) {
    return SegmentSpec{s, false, a};
  }
};

/// Truncation result; short_input marks buffers shorter than the requested
/// duration (the whole buffer is returned, never zero-padded).
struct SegmentResult {
  AudioBuffer audio;
  bool short_input = false;
};

/// Decodes a RIFF/WAVE file: PCM-16 or IEEE float-32, any sample rate.
/// Multichannel audio is averaged to mono. PCM-16 samples are scaled by
/// 1/32768. Throws ParseError (with byte offset) on malformed structure and
/// DataError on unsupported codecs.
AudioBuffer load_wav(const std::filesystem::path& path);

/// Parses WAV bytes already in memory (same contract as load_wav).
AudioBuffer parse_wav(const std::string& bytes);

/// Encodes the buffer in its recorded source format.
std::string serialize_wav(const AudioBuffer& a);

/// Writes atomically (temp file + rename).
void save_wav(const AudioBuffer& a, const std::filesystem::path& path);

/// Cuts a contiguous window of round(duration * sample_rate) samples anchored
/// on the buffer midpoint (clamped to bounds). A full spec returns the input
/// unchanged. Inputs shorter than the request come back whole and flagged.
/// Throws DegenerateInputError on an empty buffer.
SegmentResult truncate_midpoint(const AudioBuffer& a, const SegmentSpec& spec);

/// Tiles the buffer end-to-end, truncating the final copy, so the output is
/// exactly round(target_s * sample_rate) samples. Throws DegenerateInputError
/// on an empty buffer or non-positive target.
AudioBuffer repeat_to_duration(const AudioBuffer& a, double target_s);

}  // namespace ttaug
