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
#include <map>
#include <string>
#include <vector>

#include "ttaug/backends.hpp"
#include "ttaug/fusion.hpp"
#include "ttaug/sim.hpp"

namespace ttaug {

// ---------------------------------------------------------------------------
// Minimal TOML subset: [section], [[array-of-tables]], key = value with
// strings, integers, floats, booleans and (possibly mixed) arrays, plus #
// comments. Enough for the experiment config format; nested/dotted keys are
// rejected.
// ---------------------------------------------------------------------------

struct TomlValue {
  enum class Type { kString, kInt, kFloat, kBool, kArray };
  Type type = Type::kString;
  std::string str;
  int64_t integer = 0;
  double number = 0.0;
  bool boolean = false;
  std::vector<TomlValue> array;

  double as_number() const;  // int or float
};

struct TomlTable {
  std::map<std::string, TomlValue> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const TomlValue& at(const std::string& key) const;
};

struct TomlDoc {
  TomlTable root;
  std::map<std::string, TomlTable> tables;
  std::map<std::string, std::vector<TomlTable>> table_arrays;
};

TomlDoc parse_toml(const std::string& text);

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// A requested segment length; full-length keeps the utterance whole.
struct DurationSpec {
  double seconds = 0.0;
  bool full = false;

  std::string label() const;  // "0.5s", "2s", "full"
  static DurationSpec parse(const std::string& text);
};

/// One config drives segment -> synthesize -> embed -> fuse -> score ->
/// report. Sections: [dataset], [[backend]], [text], [fusion], [run], [sim].
struct ExperimentConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path trial_list;
  std::vector<DurationSpec> durations;
  std::vector<BackendEndpoint> backends;
  TextStrategy text;

  std::vector<FusionMethod> methods = {FusionMethod::kWeightedMean};
  std::vector<double> weights = {0.5};
  bool normalize_inputs = true;
  std::filesystem::path gate_checkpoint;
  double two_stage_inner = 0.5;
  bool include_rep15 = false;
  double rep15_target_s = 15.0;

  std::filesystem::path out_dir = "results";
  uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path cache_dir;  // empty: TTA_CACHE_DIR or out/cache

  SimConfig sim;

  /// FNV-1a hash (hex) of the raw config text; stamped into every output.
  std::string config_hash;

  /// Relative paths resolve against the config file's directory.
  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_toml(const std::string& text,
                                    const std::filesystem::path& base_dir);

  /// The embed endpoint (exactly one must be configured).
  const BackendEndpoint& embed_endpoint() const;
  std::vector<BackendEndpoint> tts_endpoints() const;

  /// Existence checks for dataset root / trial list / transcripts.
  void validate_paths() const;

  std::filesystem::path effective_cache_dir() const;
};

/// Lines "<utt_id> <transcript...>"; '#' comments allowed.
std::map<std::string, std::string> load_transcripts(
    const std::filesystem::path& path);

}  // namespace ttaug
