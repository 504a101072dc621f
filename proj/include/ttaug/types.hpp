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

#include <string>
#include <vector>

namespace ttaug {

/// Default speaker-embedding dimensionality (ECAPA-TDNN convention).
inline constexpr int kDefaultEmbeddingDim = 192;

/// A fixed-dimension speaker embedding tied to an utterance and a condition
/// tag. Reserved condition prefixes: "orig", "tts:<backend>", "rep15",
/// "fused:<method>". Values are stored raw, exactly as the producer emitted
/// them; normalization happens at fusion/scoring time.
struct Embedding {
  std::string utt_id;
  std::string condition;
  std::vector<float> values;

  int dim() const { return static_cast<int>(values.size()); }

  bool operator==(const Embedding&) const = default;
};

/// One verification decision: same-speaker (target) or not.
struct Trial {
  bool target = false;
  std::string enroll_id;
  std::string test_id;

  bool operator==(const Trial&) const = default;
};

/// Returns v / ||v||. Accumulates in double; the result has unit Euclidean
/// norm within 1e-6. Throws DegenerateInputError on the zero vector rather
/// than emitting NaN.
std::vector<float> l2_normalize(const std::vector<float>& v);

/// Euclidean norm, accumulated in double.
double l2_norm(const std::vector<float>& v);

}  // namespace ttaug
