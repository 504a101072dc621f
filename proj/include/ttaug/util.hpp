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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ttaug {

// ---------------------------------------------------------------------------
// Checksums and hashing
// ---------------------------------------------------------------------------

/// CRC-32 (IEEE 802.3 polynomial, as used by zip/png).
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

/// FNV-1a 64-bit hash of a byte range.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(std::string_view s);

/// FNV-1a 64-bit hash of a file's contents. Throws DataError on I/O failure.
uint64_t hash_file(const std::filesystem::path& path);

/// Lowercase 16-digit hex rendering of a 64-bit hash.
std::string hex64(uint64_t h);

// ---------------------------------------------------------------------------
// Deterministic, counter-based randomness
// ---------------------------------------------------------------------------
// All simulation and mock-backend randomness is derived from explicit keys so
// results are independent of evaluation order and thread scheduling.

/// splitmix64 finalizer; a good 64-bit mixer.
uint64_t mix64(uint64_t x);

/// Combines a running key with one more component.
uint64_t key_combine(uint64_t key, uint64_t v);

/// Sequential PRNG seeded from a key (splitmix64 stream).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_unit();
  /// Standard normal via Box-Muller.
  double next_gaussian();
  /// Uniform integer in [0, n).
  uint64_t next_below(uint64_t n);

  /// Fisher-Yates shuffle, deterministic for a fixed seed.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Little-endian binary I/O
// ---------------------------------------------------------------------------

void put_u32le(std::string& out, uint32_t v);
void put_f32le(std::string& out, float v);
uint32_t get_u32le(const uint8_t* p);
float get_f32le(const uint8_t* p);

// ---------------------------------------------------------------------------
// Files and formatting
// ---------------------------------------------------------------------------

/// Reads a whole file into a string. Throws DataError on failure.
std::string read_file(const std::filesystem::path& path);

/// Writes a file atomically: temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

/// Shortest decimal rendering of a float that parses back bit-identically.
std::string format_float(float v);

/// Round-trip rendering of a double.
std::string format_double(double v);

/// round-half-away-from-zero, the sample-count rounding rule.
int64_t round_away(double x);

/// Splits on any run of whitespace; no empty tokens.
std::vector<std::string> split_ws(std::string_view s);

}  // namespace ttaug
