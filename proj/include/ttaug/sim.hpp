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
#include <string>
#include <vector>

#include "ttaug/fusion.hpp"
#include "ttaug/scoring.hpp"
#include "ttaug/store.hpp"
#include "ttaug/types.hpp"

namespace ttaug {

/// Generative model of speaker embeddings under duration-dependent noise and
/// imperfect TTS cloning. Observation noise follows sigma(T) = sigma0/sqrt(T)
/// (more speech, more stable embedding); TTS fidelity follows
/// alpha(T) = alpha * (1 - exp(-T)) of the prompt duration. All randomness is
/// counter-keyed by (seed, role, speaker, utt, duration, round), so
/// generation order never matters.
struct SimConfig {
  int num_speakers = 20;
  int utts_per_speaker = 10;
  int dim = kDefaultEmbeddingDim;
  /// Base observation-noise scale. The default keeps desk-scale baseline
  /// EERs in roughly the 2-30% band across 0.5 s - 8 s.
  double sigma0 = 2.2;
  /// TTS speaker fidelity in [0, 1].
  double alpha = 0.9;
  /// Strength of the per-backend bias direction.
  double beta = 0.2;
  std::vector<double> durations = {0.5, 1.0, 2.0, 8.0};
  uint64_t seed = 0;
  /// Scale of the clone's identity error. Unlike observation noise it does
  /// not shrink with duration: the synthesized speech is long but renders a
  /// somewhat-wrong speaker, so TTS-only scoring tracks the baseline rather
  /// than beating it.
  double tts_noise = 1.2;
  /// Correlation in [0,1] between the clone's identity error and the
  /// prompt's own observation noise (the clone is conditioned on the noisy
  /// prompt). Nonzero correlation keeps the fusion benefit moderate.
  double prompt_noise_corr = 0.5;
  std::vector<std::string> backend_names = {"simtts"};

  void validate() const;
};

/// num_speakers unit centroids, uniform on the sphere, per-seed determinate.
std::vector<std::vector<double>> gen_speakers(const SimConfig& cfg);

/// Bona-fide observation of a speaker at the given duration:
/// normalize(centroid + sigma(T) * g / sqrt(dim)).
Embedding gen_observation(const std::vector<double>& centroid,
                          double duration_s, const SimConfig& cfg, int speaker,
                          int utt);

/// Fixed random unit direction per backend name (seeded by name only), the
/// shared bias every clone from that backend leans toward.
std::vector<double> backend_bias(const SimConfig& cfg,
                                 const std::string& backend_name);

/// TTS clone embedding given a prompt of the given duration:
/// normalize(alpha(T) * centroid + beta * bias + noise).
Embedding gen_tts_embedding(const std::vector<double>& centroid,
                            double prompt_duration_s,
                            const std::vector<double>& bias,
                            const SimConfig& cfg, int speaker, int utt,
                            int round = 0);

/// Utterance id "s<speaker>_u<utt>".
std::string sim_utt_id(int speaker, int utt);

/// All same-speaker pairs as targets plus an equal number of sampled
/// cross-speaker nontargets, deterministic per seed.
std::vector<Trial> sim_trials(const SimConfig& cfg);

/// Embedding store for one duration: "orig" plus "tts:<backend>:<round>"
/// conditions for every utterance.
EmbeddingStore sim_store(const SimConfig& cfg, double duration_s, int rounds);

struct SimExperimentRow {
  double duration_s = 0.0;
  std::string method;  // "baseline", "tts_only:<b>", "<method>:<b>", ...
  double w = 0.0;
  double eer_percent = 0.0;
};

struct SimGrid {
  std::vector<FusionMethod> methods = {FusionMethod::kWeightedMean};
  std::vector<double> weights = {0.3, 0.5, 0.7};
  double two_stage_inner = 0.5;
};

/// Scores baseline, TTS-only, and every grid cell per duration. Weighted-mean
/// rows run through weight_sweep, so w=1 would reproduce the baseline row
/// exactly. Output order is deterministic.
std::vector<SimExperimentRow> run_sim_experiment(const SimConfig& cfg,
                                                 const SimGrid& grid);

/// CSV "duration_s,method,w,eer_percent" with optional '#' header comment.
std::string sim_rows_csv(const std::vector<SimExperimentRow>& rows,
                         const std::string& header_comment = "");

}  // namespace ttaug
