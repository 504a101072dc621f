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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ttaug/store.hpp"
#include "ttaug/types.hpp"

namespace ttaug {

struct ScoreRecord {
  Trial trial;
  double score = 0.0;  // cosine, in [-1, 1]
};

/// Verification metrics for one scored trial list. EER is a percentage.
struct EvalReport {
  double eer_percent = 0.0;
  double eer_threshold = 0.0;
  size_t n_target = 0;
  size_t n_nontarget = 0;
  std::optional<double> min_dcf;  // p_target=0.01, c_miss=c_fa=1

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

/// dot(e1, e2) / (||e1|| ||e2||), accumulated in double.
/// Throws DimMismatchError / DegenerateInputError (zero vector).
double cosine_score(const Embedding& e1, const Embedding& e2);
double cosine_score(const std::vector<float>& a, const std::vector<float>& b);

/// EER by single-pass ROC traversal over sorted scores. Accept rule is
/// score >= threshold; tied scores share one threshold. The reported rate
/// and threshold are linearly interpolated between the adjacent ROC points
/// where FAR - FRR changes sign. Throws DataError unless both classes are
/// non-empty. minDCF (p_target=0.01, c_miss=c_fa=1, min-normalized) rides
/// along as auxiliary output.
EvalReport compute_eer(const std::vector<ScoreRecord>& records);
EvalReport compute_eer(const std::vector<double>& target_scores,
                       const std::vector<double>& nontarget_scores);

/// 100 * (baseline - system) / baseline. Throws DataError when the baseline
/// is not positive.
double relative_reduction(double baseline_eer, double system_eer);

/// One EER per fusion weight, fusing base_condition with tts_condition on
/// both trial sides via the weighted mean. w=1 and w=0 rows reuse the plain
/// scoring path on the raw condition embeddings, so they match the baseline
/// and TTS-only reports exactly.
struct SweepRow {
  double w = 0.0;
  double eer_percent = 0.0;
};
std::vector<SweepRow> weight_sweep(const std::vector<Trial>& trials,
                                   const EmbeddingStore& store,
                                   const std::string& base_condition,
                                   const std::string& tts_condition,
                                   const std::vector<double>& weights);

/// Scores every trial with the given per-side embedding lookup.
/// Missing embeddings surface as NotFoundError naming the key.
std::vector<ScoreRecord> score_trials(
    const std::vector<Trial>& trials, const EmbeddingStore& store,
    const std::string& enroll_condition, const std::string& test_condition);

/// Scores trials through an arbitrary embedding source (used for fusion).
std::vector<ScoreRecord> score_trials_with(
    const std::vector<Trial>& trials,
    const std::function<std::vector<float>(const std::string&)>& embed_of);

// Trial list: lines "<label> <enroll utt> <test utt>", label 1=target
// 0=nontarget. Score files: lines "<enroll> <test> <score>". '#' lines are
// comments in both.
std::vector<Trial> parse_trials(const std::string& text);
std::vector<Trial> load_trials(const std::filesystem::path& path);
std::string serialize_trials(const std::vector<Trial>& trials);

std::string serialize_scores(const std::vector<ScoreRecord>& records,
                             const std::string& header_comment = "");
std::vector<ScoreRecord> parse_scores(const std::string& text,
                                      const std::vector<Trial>& trials);
/// Score file without trial labels; joins labels from the trial list by
/// (enroll, test) key.
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path,
                                     const std::vector<Trial>& trials);

/// CSV "w,eer_percent" with an optional '#' header comment.
std::string serialize_sweep_csv(const std::vector<SweepRow>& rows,
                                const std::string& header_comment = "");

}  // namespace ttaug
