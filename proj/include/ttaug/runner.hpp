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
#include <map>
#include <string>
#include <vector>

#include "ttaug/config.hpp"
#include "ttaug/scoring.hpp"

namespace ttaug {

// Results tree produced by run_experiment:
//   <out>/manifest.json                 artifacts + (utt, condition) records
//   <out>/failures.json                 only when something failed
//   <out>/segments/<dur>/<utt>.wav
//   <out>/rep/<dur>/<utt>.wav           when rep15 is enabled
//   <out>/embeddings/<dur>.bin          conditions: orig, rep15,
//                                       tts:<backend>:<round>
//   <out>/scores/<dur>/<tag>.txt
//   <out>/reports/<dur>/<tag>.json
// Tags: baseline, tts_only__<b>__r<k>, <method>_w<w>__<b>__r<k>,
// multi_text_w<w>__<b>, two_stage_w<w>__<b1>+<b2>__r<k>, rep15_w<w>.
// Every output carries the config hash; re-running an unchanged config only
// refreshes the manifest timestamp.

struct RunFailure {
  std::string utt;
  std::string backend;
  std::string stage;  // segment | synthesize | embed | score
  std::string message;
};

struct RunSummary {
  std::filesystem::path out_dir;
  std::vector<RunFailure> failures;
  bool backend_failure = false;  // any failure raised by a backend call
  size_t cache_hits = 0;
  size_t cache_misses = 0;

  bool ok() const { return failures.empty(); }
};

/// Executes the full pipeline. Stage failures are recorded (and the failing
/// backend is retired for the rest of the run) rather than aborting, so
/// partial results survive; the caller turns !ok() into a nonzero exit.
/// Throws ConfigError up front for invalid configs or a results directory
/// holding a different config's outputs.
RunSummary run_experiment(const ExperimentConfig& cfg);

/// One grid cell: mean EER over rounds for a method row at one duration.
struct ReportGrid {
  std::vector<std::string> durations;  // column order
  std::vector<std::string> rows;       // row order, "baseline" first
  std::map<std::string, std::map<std::string, double>> eer;  // row -> dur -> %

  double at(const std::string& row, const std::string& duration) const;
};

struct ReportTables {
  ReportGrid grid;
  std::string table_csv;       // method x duration EER grid
  std::string reductions_csv;  // relative EER reduction vs the baseline row
  std::string config_hash;
};

/// Aggregates report JSONs under <results>/reports into the summary tables.
/// Throws DataError when the baseline row is missing or config hashes are
/// mixed, NotFoundError when no reports exist.
ReportTables build_report(const std::filesystem::path& results_dir);

/// Writes table.csv / reductions.csv under <results>/summary.
void write_report(const std::filesystem::path& results_dir,
                  const ReportTables& tables);

}  // namespace ttaug
