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
#include <string>
#include <vector>

#include "ttaug/fusion.hpp"
#include "ttaug/store.hpp"
#include "ttaug/types.hpp"

namespace ttaug {

/// Additive-angular-margin softmax classifier head:
/// logit_y = s * cos(theta_y + m), logit_j = s * cos(theta_j) otherwise.
/// Rows stay unit-norm within 1e-6 after every optimizer step.
struct AamClassifier {
  int dim = 0;
  int num_speakers = 0;
  std::vector<double> weights;  // num_speakers x dim, row-major
  double margin = 0.2;
  double scale = 30.0;

  /// Rows from normalized per-class means of the given embeddings.
  static AamClassifier from_class_means(
      const std::vector<std::vector<float>>& embeddings,
      const std::vector<int>& labels, int num_speakers, double margin = 0.2,
      double scale = 30.0);

  /// Rows loaded from an embedding-format store file; speaker_names[i] keys
  /// row i by utt_id (exactly one record per name must exist).
  static AamClassifier from_store_file(
      const std::filesystem::path& path,
      const std::vector<std::string>& speaker_names, double margin = 0.2,
      double scale = 30.0);

  /// Re-unit-normalizes every row. Rows already unit within 1e-12 are left
  /// bit-untouched, so a zero-step update is a true no-op.
  void renormalize_rows();

  double row_norm(int row) const;
};

struct AamLossResult {
  double loss = 0.0;
  std::vector<double> grad_embedding;  // dL/d e_s
  std::vector<double> grad_weights;    // dL/dW, num_speakers x dim row-major
  int predicted = -1;                  // argmax class before the margin
};

/// Loss and analytic gradients for one sample. Throws DegenerateInputError
/// on a zero embedding, DataError on a label out of range.
AamLossResult aam_loss(const std::vector<double>& e_s, int label,
                       const AamClassifier& clf);

struct TrainPair {
  std::vector<float> bona;  // e_b
  std::vector<float> gen;   // e_g
  int label = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 128;
  uint64_t seed = 0;
  double momentum = 0.0;  // 0 = plain SGD; 0.9 is the usual alternative
  double holdout_fraction = 0.1;
  bool normalize_inputs = true;
  int gate_hidden = kDefaultGateHidden;
  double margin = 0.2;
  double scale = 30.0;
};

struct TrainResult {
  GateNetwork net;
  AamClassifier classifier;
  /// CSV log, "epoch,split,loss,accuracy" per line.
  std::string log_csv;
  double best_holdout_loss = 0.0;
  int best_epoch = -1;
};

/// Trains gate + classifier by SGD on the AAM loss over fused embeddings.
/// Deterministic for a fixed seed: fixed init, fixed shuffle order, single
/// update thread. Returns the parameters with the best held-out loss.
/// Throws DataError when fewer than two speakers are present.
/// init_classifier, when given, overrides the class-mean initialization.
TrainResult train_gate(const std::vector<TrainPair>& pairs,
                       const TrainConfig& cfg,
                       const AamClassifier* init_classifier = nullptr);

struct GradCheckSample {
  std::vector<double> bona;
  std::vector<double> gen;
  int label = 0;
};

/// End-to-end gradient check through gate forward and the AAM loss versus
/// central finite differences (h = 1e-4) on every parameter tensor
/// (W1, b1, W2, b2, classifier weights). Returns the worst per-tensor
/// relative error: linf(analytic - numeric) / max(linf norms, 1e-8).
double grad_check(const GateNetwork& net, const AamClassifier& clf,
                  const GradCheckSample& sample);

/// grad_check with the analytic W2 gradient sign-flipped; proves the checker
/// flags wrong gradients.
double grad_check_negative_control(const GateNetwork& net,
                                   const AamClassifier& clf,
                                   const GradCheckSample& sample);

/// Checkpoint: the GATE1 block, then the classifier in the same tensor
/// layout: magic "AAMC1", u32 num_speakers, u32 dim, f32 margin, f32 scale,
/// weights as little-endian float32 row-major, u32 CRC32 of the classifier
/// payload (everything after its magic).
void save_checkpoint(const std::filesystem::path& path, const GateNetwork& net,
                     const AamClassifier& clf);
std::string serialize_checkpoint(const GateNetwork& net,
                                 const AamClassifier& clf);
std::pair<GateNetwork, AamClassifier> parse_checkpoint(
    const std::string& bytes);
std::pair<GateNetwork, AamClassifier> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace ttaug
