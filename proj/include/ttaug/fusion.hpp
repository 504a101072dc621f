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

#include "ttaug/types.hpp"

namespace ttaug {

enum class FusionMethod {
  kAddition,
  kConcatenation,
  kWeightedMean,
  kAttentionGate,
  kTwoStage,
  kMultiText,
};

std::string fusion_method_name(FusionMethod m);
FusionMethod fusion_method_from_name(const std::string& name);

/// Default bona-fide weight for the outer stage of two-stage fusion.
inline constexpr double kDefaultTwoStageOuterWeight = 0.6;
inline constexpr int kDefaultGateHidden = 256;

struct FusionConfig {
  FusionMethod method = FusionMethod::kWeightedMean;
  /// Weight on the bona-fide embedding for the weighted mean.
  double weight = 0.5;
  /// Unit-normalize inputs before combining, so weights carry the same
  /// geometric meaning regardless of backend output scale.
  bool normalize_inputs = true;
};

/// Two-layer feedforward gate: [e_b; e_g] -> hidden (tanh) -> d (sigmoid).
/// Parameters live in double; the checkpoint stores float32.
///
/// Checkpoint layout: magic "GATE1", u32 d, u32 hidden, then W1 (hidden x 2d),
/// b1 (hidden), W2 (d x hidden), b2 (d) as little-endian float32 row-major,
/// then u32 CRC32 over everything after the magic. All integers little-endian.
class GateNetwork {
 public:
  GateNetwork() = default;
  /// All-zero parameters (gate 0.5 everywhere).
  GateNetwork(int dim, int hidden);
  /// Scaled-uniform random init, deterministic per seed.
  static GateNetwork random_init(int dim, int hidden, uint64_t seed);

  int dim() const { return dim_; }
  int hidden() const { return hidden_; }

  std::vector<double> w1, b1, w2, b2;  // row-major

  std::string serialize() const;
  static GateNetwork parse(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static GateNetwork load(const std::filesystem::path& path);

  bool operator==(const GateNetwork& other) const;

 private:
  int dim_ = 0;
  int hidden_ = 0;
};

/// Elementwise sum of the (optionally normalized) pair; condition
/// "fused:add". Exact cancellation yields the zero vector, which downstream
/// scoring rejects as degenerate.
Embedding fuse_addition(const Embedding& e_b, const Embedding& e_g,
                        const FusionConfig& cfg = {});

/// [e_b, e_g] stacking into a 2d vector; each half independently normalized
/// when normalize_inputs. Condition "fused:concat".
Embedding fuse_concat(const Embedding& e_b, const Embedding& e_g,
                      const FusionConfig& cfg = {});

/// w * e_b + (1 - w) * e_g on the (optionally normalized) pair. Throws on
/// w outside [0,1] and on exact cancellation. Condition "fused:wmean".
Embedding fuse_weighted(const Embedding& e_b, const Embedding& e_g, double w,
                        const FusionConfig& cfg = {});

struct GateResult {
  std::vector<double> gate;  // z, every component in (0, 1)
  Embedding fused;           // condition "fused:gate"
};

/// z = sigmoid(W2 tanh(W1 [e_b; e_g] + b1) + b2);
/// e_s = z (.) e_b + (1 - z) (.) e_g.
GateResult gate_forward(const GateNetwork& net, const Embedding& e_b,
                        const Embedding& e_g, const FusionConfig& cfg = {});

/// Combines two TTS embeddings first (w_inner on e_g1), then blends the
/// bona-fide embedding in (w_outer on e_b). Condition "fused:two_stage".
Embedding two_stage_fuse(const Embedding& e_g1, const Embedding& e_g2,
                         const Embedding& e_b, double w_inner = 0.5,
                         double w_outer = kDefaultTwoStageOuterWeight,
                         const FusionConfig& cfg = {});

/// Normalized mean of the generated embeddings, then fuse_weighted with e_b.
/// Condition "fused:multi". Throws on an empty list.
Embedding fuse_multi_text(const Embedding& e_b,
                          const std::vector<Embedding>& gens, double w,
                          const FusionConfig& cfg = {});

}  // namespace ttaug
