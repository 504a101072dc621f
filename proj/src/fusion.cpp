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

#include "ttaug/fusion.hpp"

#include <cmath>
#include <cstring>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

constexpr char kGateMagic[5] = {'G', 'A', 'T', 'E', '1'};

std::vector<float> maybe_normalize(const std::vector<float>& v,
                                   const FusionConfig& cfg) {
  return cfg.normalize_inputs ? l2_normalize(v) : v;
}

void check_dims(const Embedding& a, const Embedding& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw DimMismatchError(std::string(op) + ": dims " +
                           std::to_string(a.dim()) + " vs " +
                           std::to_string(b.dim()));
  }
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string fusion_method_name(FusionMethod m) {
  switch (m) {
    case FusionMethod::kAddition: return "addition";
    case FusionMethod::kConcatenation: return "concatenation";
    case FusionMethod::kWeightedMean: return "weighted_mean";
    case FusionMethod::kAttentionGate: return "attention_gate";
    case FusionMethod::kTwoStage: return "two_stage";
    case FusionMethod::kMultiText: return "multi_text";
  }
  throw ConfigError("unknown fusion method");
}

FusionMethod fusion_method_from_name(const std::string& name) {
  if (name == "addition") return FusionMethod::kAddition;
  if (name == "concatenation" || name == "concat")
    return FusionMethod::kConcatenation;
  if (name == "weighted_mean") return FusionMethod::kWeightedMean;
  if (name == "attention_gate" || name == "attention")
    return FusionMethod::kAttentionGate;
  if (name == "two_stage") return FusionMethod::kTwoStage;
  if (name == "multi_text") return FusionMethod::kMultiText;
  throw ConfigError("unknown fusion method '" + name + "'");
}

Embedding fuse_addition(const Embedding& e_b, const Embedding& e_g,
                        const FusionConfig& cfg) {
  check_dims(e_b, e_g, "fuse_addition");
  if (e_b.utt_id != e_g.utt_id) {
    throw DataError("fuse_addition: utterance ids differ ('" + e_b.utt_id +
                    "' vs '" + e_g.utt_id + "')");
  }
  std::vector<float> b = maybe_normalize(e_b.values, cfg);
  std::vector<float> g = maybe_normalize(e_g.values, cfg);
  Embedding out;
  out.utt_id = e_b.utt_id;
  out.condition = "fused:add";
  out.values.resize(b.size());
  for (size_t i = 0; i < b.size(); ++i) {
    out.values[i] = static_cast<float>(static_cast<double>(b[i]) +
                                       static_cast<double>(g[i]));
  }
  return out;
}

Embedding fuse_concat(const Embedding& e_b, const Embedding& e_g,
                      const FusionConfig& cfg) {
  check_dims(e_b, e_g, "fuse_concat");
  std::vector<float> b = maybe_normalize(e_b.values, cfg);
  std::vector<float> g = maybe_normalize(e_g.values, cfg);
  Embedding out;
  out.utt_id = e_b.utt_id;
  out.condition = "fused:concat";
  out.values.reserve(b.size() + g.size());
  out.values.insert(out.values.end(), b.begin(), b.end());
  out.values.insert(out.values.end(), g.begin(), g.end());
  return out;
}

Embedding fuse_weighted(const Embedding& e_b, const Embedding& e_g, double w,
                        const FusionConfig& cfg) {
  check_dims(e_b, e_g, "fuse_weighted");
  if (!(w >= 0.0 && w <= 1.0)) {
    throw DataError("fuse_weighted: weight " + std::to_string(w) +
                    " outside [0,1]");
  }
  std::vector<float> b = maybe_normalize(e_b.values, cfg);
  std::vector<float> g = maybe_normalize(e_g.values, cfg);
  Embedding out;
  out.utt_id = e_b.utt_id;
  out.condition = "fused:wmean";
  out.values.resize(b.size());
  const double cw = 1.0 - w;
  bool all_zero = true;
  for (size_t i = 0; i < b.size(); ++i) {
    double v = w * static_cast<double>(b[i]) + cw * static_cast<double>(g[i]);
    out.values[i] = static_cast<float>(v);
    if (out.values[i] != 0.0f) all_zero = false;
  }
  if (all_zero) {
    throw DegenerateInputError("fuse_weighted: inputs cancel to the zero "
                               "vector for '" + e_b.utt_id + "'");
  }
  return out;
}

GateNetwork::GateNetwork(int dim, int hidden) : dim_(dim), hidden_(hidden) {
  if (dim <= 0 || hidden <= 0) {
    throw DataError("gate network: non-positive shape");
  }
  w1.assign(static_cast<size_t>(hidden) * 2 * dim, 0.0);
  b1.assign(static_cast<size_t>(hidden), 0.0);
  w2.assign(static_cast<size_t>(dim) * hidden, 0.0);
  b2.assign(static_cast<size_t>(dim), 0.0);
}

GateNetwork GateNetwork::random_init(int dim, int hidden, uint64_t seed) {
  GateNetwork net(dim, hidden);
  Rng rng(key_combine(seed, fnv1a64("gate-init")));
  const double s1 = 1.0 / std::sqrt(2.0 * dim);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : net.w1) v = s1 * (2.0 * rng.next_unit() - 1.0);
  for (double& v : net.w2) v = s2 * (2.0 * rng.next_unit() - 1.0);
  return net;
}

bool GateNetwork::operator==(const GateNetwork& other) const {
  return dim_ == other.dim_ && hidden_ == other.hidden_ && w1 == other.w1 &&
         b1 == other.b1 && w2 == other.w2 && b2 == other.b2;
}

std::string GateNetwork::serialize() const {
  std::string payload;
  put_u32le(payload, static_cast<uint32_t>(dim_));
  put_u32le(payload, static_cast<uint32_t>(hidden_));
  auto put_tensor = [&payload](const std::vector<double>& t) {
    for (double v : t) put_f32le(payload, static_cast<float>(v));
  };
  put_tensor(w1);
  put_tensor(b1);
  put_tensor(w2);
  put_tensor(b2);
  std::string out(kGateMagic, sizeof(kGateMagic));
  out += payload;
  put_u32le(out, crc32(payload.data(), payload.size()));
  return out;
}

GateNetwork GateNetwork::parse(const std::string& bytes) {
  if (bytes.size() < sizeof(kGateMagic) + 12 ||
      std::memcmp(bytes.data(), kGateMagic, sizeof(kGateMagic)) != 0) {
    throw CorruptionError("gate checkpoint: missing GATE1 magic");
  }
  const auto* p = reinterpret_cast<const uint8_t*>(bytes.data());
  size_t pos = sizeof(kGateMagic);
  uint32_t d = get_u32le(p + pos);
  uint32_t hidden = get_u32le(p + pos + 4);
  pos += 8;
  if (d == 0 || hidden == 0 || d > (1u << 20) || hidden > (1u << 20)) {
    throw CorruptionError("gate checkpoint: implausible shape");
  }
  size_t n_params = static_cast<size_t>(hidden) * 2 * d + hidden +
                    static_cast<size_t>(d) * hidden + d;
  size_t payload_size = 8 + n_params * 4;
  if (bytes.size() != sizeof(kGateMagic) + payload_size + 4) {
    throw CorruptionError("gate checkpoint: truncated (want " +
                          std::to_string(sizeof(kGateMagic) + payload_size +
                                         4) +
                          " bytes, have " + std::to_string(bytes.size()) +
                          ")");
  }
  uint32_t want_crc = crc32(bytes.data() + sizeof(kGateMagic), payload_size);
  uint32_t got_crc = get_u32le(p + sizeof(kGateMagic) + payload_size);
  if (want_crc != got_crc) {
    throw CorruptionError("gate checkpoint: checksum mismatch");
  }
  GateNetwork net(static_cast<int>(d), static_cast<int>(hidden));
  auto read_tensor = [&](std::vector<double>& t) {
    for (double& v : t) {
      v = static_cast<double>(get_f32le(p + pos));
      pos += 4;
    }
  };
  read_tensor(net.w1);
  read_tensor(net.b1);
  read_tensor(net.w2);
  read_tensor(net.b2);
  return net;
}

void GateNetwork::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

GateNetwork GateNetwork::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

GateResult gate_forward(const GateNetwork& net, const Embedding& e_b,
                        const Embedding& e_g, const FusionConfig& cfg) {
  check_dims(e_b, e_g, "gate_forward");
  if (e_b.dim() != net.dim()) {
    throw DimMismatchError("gate_forward: embedding dim " +
                           std::to_string(e_b.dim()) +
                           " vs network dim " + std::to_string(net.dim()));
  }
  const int d = net.dim();
  const int hidden = net.hidden();
  std::vector<float> b = maybe_normalize(e_b.values, cfg);
  std::vector<float> g = maybe_normalize(e_g.values, cfg);

  std::vector<double> x(2 * static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    x[static_cast<size_t>(i)] = b[static_cast<size_t>(i)];
    x[static_cast<size_t>(d + i)] = g[static_cast<size_t>(i)];
  }
  std::vector<double> h(static_cast<size_t>(hidden));
  for (int j = 0; j < hidden; ++j) {
    double acc = net.b1[static_cast<size_t>(j)];
    const double* row = net.w1.data() + static_cast<size_t>(j) * 2 * d;
    for (int i = 0; i < 2 * d; ++i) acc += row[i] * x[static_cast<size_t>(i)];
    h[static_cast<size_t>(j)] = std::tanh(acc);
  }
  GateResult out;
  out.gate.resize(static_cast<size_t>(d));
  out.fused.utt_id = e_b.utt_id;
  out.fused.condition = "fused:gate";
  out.fused.values.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    double acc = net.b2[static_cast<size_t>(i)];
    const double* row = net.w2.data() + static_cast<size_t>(i) * hidden;
    for (int j = 0; j < hidden; ++j) acc += row[j] * h[static_cast<size_t>(j)];
    double z = sigmoid(acc);
    out.gate[static_cast<size_t>(i)] = z;
    out.fused.values[static_cast<size_t>(i)] = static_cast<float>(
        z * static_cast<double>(b[static_cast<size_t>(i)]) +
        (1.0 - z) * static_cast<double>(g[static_cast<size_t>(i)]));
  }
  return out;
}

Embedding two_stage_fuse(const Embedding& e_g1, const Embedding& e_g2,
                         const Embedding& e_b, double w_inner, double w_outer,
                         const FusionConfig& cfg) {
  Embedding inner = fuse_weighted(e_g1, e_g2, w_inner, cfg);
  inner.utt_id = e_b.utt_id;
  Embedding out = fuse_weighted(e_b, inner, w_outer, cfg);
  out.condition = "fused:two_stage";
  return out;
}

Embedding fuse_multi_text(const Embedding& e_b,
                          const std::vector<Embedding>& gens, double w,
                          const FusionConfig& cfg) {
  if (gens.empty()) {
    throw DataError("fuse_multi_text: empty generated-embedding list");
  }
  const int d = e_b.dim();
  std::vector<double> mean(static_cast<size_t>(d), 0.0);
  for (const Embedding& g : gens) {
    if (g.dim() != d) {
      throw DimMismatchError("fuse_multi_text: dims " + std::to_string(d) +
                             " vs " + std::to_string(g.dim()));
    }
    std::vector<float> gv = maybe_normalize(g.values, cfg);
    for (int i = 0; i < d; ++i) {
      mean[static_cast<size_t>(i)] += gv[static_cast<size_t>(i)];
    }
  }
  Embedding rep;
  rep.utt_id = e_b.utt_id;
  rep.condition = "tts:multi-mean";
  rep.values.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    rep.values[static_cast<size_t>(i)] =
        static_cast<float>(mean[static_cast<size_t>(i)] /
                           static_cast<double>(gens.size()));
  }
  // l2_normalize rejects an exactly cancelled mean.
  rep.values = l2_normalize(rep.values);
  Embedding out = fuse_weighted(e_b, rep, w, cfg);
  out.condition = "fused:multi";
  return out;
}

}  // namespace ttaug
