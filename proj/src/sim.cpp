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

#include "ttaug/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

uint64_t duration_key(double duration_s) {
  return std::bit_cast<uint64_t>(duration_s);
}

uint64_t sim_key(const SimConfig& cfg, std::string_view role, int speaker,
                 int utt, double duration_s, int round) {
  uint64_t k = key_combine(cfg.seed, fnv1a64(role));
  k = key_combine(k, static_cast<uint64_t>(speaker));
  k = key_combine(k, static_cast<uint64_t>(utt));
  k = key_combine(k, duration_key(duration_s));
  k = key_combine(k, static_cast<uint64_t>(round));
  return k;
}

std::vector<double> unit_gaussian_direction(Rng& rng, int dim) {
  std::vector<double> v(static_cast<size_t>(dim));
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.next_gaussian();
      norm2 += x * x;
    }
  } while (!(norm2 > 0.0));
  double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

Embedding to_embedding(const std::vector<double>& raw, int speaker, int utt,
                       const std::string& condition) {
  std::vector<float> v(raw.size());
  double norm2 = 0.0;
  for (double x : raw) norm2 += x * x;
  if (!(norm2 > 0.0)) {
    throw DegenerateInputError("sim: generated a zero embedding");
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (size_t i = 0; i < raw.size(); ++i) {
    v[i] = static_cast<float>(raw[i] * inv);
  }
  Embedding e;
  e.utt_id = sim_utt_id(speaker, utt);
  e.condition = condition;
  e.values = std::move(v);
  return e;
}

}  // namespace

void SimConfig::validate() const {
  if (num_speakers < 2) throw ConfigError("sim: need at least 2 speakers");
  if (utts_per_speaker < 2) {
    throw ConfigError("sim: need at least 2 utterances per speaker");
  }
  if (dim <= 0) throw ConfigError("sim: non-positive dim");
  if (!(sigma0 > 0.0)) throw ConfigError("sim: sigma0 must be positive");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("sim: alpha outside [0,1]");
  if (beta < 0.0) throw ConfigError("sim: beta must be nonnegative");
  if (durations.empty()) throw ConfigError("sim: no durations");
  for (double d : durations) {
    if (!(d > 0.0)) throw ConfigError("sim: non-positive duration");
  }
  if (tts_noise < 0.0) {
    throw ConfigError("sim: tts_noise must be nonnegative");
  }
  if (prompt_noise_corr < 0.0 || prompt_noise_corr > 1.0) {
    throw ConfigError("sim: prompt_noise_corr outside [0,1]");
  }
  if (backend_names.empty()) throw ConfigError("sim: no backend names");
}

std::string sim_utt_id(int speaker, int utt) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%03d_u%03d", speaker, utt);
  return std::string(buf);
}

std::vector<std::vector<double>> gen_speakers(const SimConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<size_t>(cfg.num_speakers));
  for (int s = 0; s < cfg.num_speakers; ++s) {
    Rng rng(sim_key(cfg, "speaker", s, 0, 0.0, 0));
    centroids.push_back(unit_gaussian_direction(rng, cfg.dim));
  }
  return centroids;
}

Embedding gen_observation(const std::vector<double>& centroid,
                          double duration_s, const SimConfig& cfg, int speaker,
                          int utt) {
  if (!(duration_s > 0.0)) {
    throw DataError("gen_observation: non-positive duration");
  }
  const double sigma = cfg.sigma0 / std::sqrt(duration_s);
  const double noise_scale = sigma / std::sqrt(static_cast<double>(cfg.dim));
  Rng rng(sim_key(cfg, "obs", speaker, utt, duration_s, 0));
  std::vector<double> raw(centroid);
  for (double& x : raw) x += noise_scale * rng.next_gaussian();
  return to_embedding(raw, speaker, utt, "orig");
}

std::vector<double> backend_bias(const SimConfig& cfg,
                                 const std::string& backend_name) {
  Rng rng(key_combine(fnv1a64("backend-bias"), fnv1a64(backend_name)));
  return unit_gaussian_direction(rng, cfg.dim);
}

Embedding gen_tts_embedding(const std::vector<double>& centroid,
                            double prompt_duration_s,
                            const std::vector<double>& bias,
                            const SimConfig& cfg, int speaker, int utt,
                            int round) {
  if (!(prompt_duration_s > 0.0)) {
    throw DataError("gen_tts_embedding: non-positive prompt duration");
  }
  if (bias.size() != static_cast<size_t>(cfg.dim)) {
    throw DimMismatchError("gen_tts_embedding: bias dim mismatch");
  }
  const double fidelity = cfg.alpha * (1.0 - std::exp(-prompt_duration_s));
  const double noise_scale =
      cfg.tts_noise / std::sqrt(static_cast<double>(cfg.dim));
  // The identity error partially reuses the prompt's observation noise
  // draw (same key as gen_observation), so bona-fide and clone errors are
  // correlated the way a prompt-conditioned system's are.
  const double rho = cfg.prompt_noise_corr;
  const double ind = std::sqrt(1.0 - rho * rho);
  Rng prompt_rng(sim_key(cfg, "obs", speaker, utt, prompt_duration_s, 0));
  Rng rng(sim_key(cfg, "tts", speaker, utt, prompt_duration_s, round));
  std::vector<double> raw(static_cast<size_t>(cfg.dim));
  for (int i = 0; i < cfg.dim; ++i) {
    double noise = rho * prompt_rng.next_gaussian() + ind * rng.next_gaussian();
    raw[static_cast<size_t>(i)] = fidelity * centroid[static_cast<size_t>(i)] +
                                  cfg.beta * bias[static_cast<size_t>(i)] +
                                  noise_scale * noise;
  }
  return to_embedding(raw, speaker, utt, "tts");
}

std::vector<Trial> sim_trials(const SimConfig& cfg) {
  cfg.validate();
  std::vector<Trial> trials;
  for (int s = 0; s < cfg.num_speakers; ++s) {
    for (int i = 0; i < cfg.utts_per_speaker; ++i) {
      for (int j = i + 1; j < cfg.utts_per_speaker; ++j) {
        trials.push_back(Trial{true, sim_utt_id(s, i), sim_utt_id(s, j)});
      }
    }
  }
  const size_t n_target = trials.size();
  Rng rng(key_combine(cfg.seed, fnv1a64("nontarget-trials")));
  std::set<std::pair<std::string, std::string>> seen;
  size_t made = 0;
  while (made < n_target) {
    int sa = static_cast<int>(rng.next_below(static_cast<uint64_t>(cfg.num_speakers)));
    int sb = static_cast<int>(rng.next_below(static_cast<uint64_t>(cfg.num_speakers)));
    if (sa == sb) continue;
    int ua = static_cast<int>(rng.next_below(static_cast<uint64_t>(cfg.utts_per_speaker)));
    int ub = static_cast<int>(rng.next_below(static_cast<uint64_t>(cfg.utts_per_speaker)));
    auto key = std::make_pair(sim_utt_id(sa, ua), sim_utt_id(sb, ub));
    if (!seen.insert(key).second) continue;
    trials.push_back(Trial{false, key.first, key.second});
    ++made;
  }
  return trials;
}

EmbeddingStore sim_store(const SimConfig& cfg, double duration_s, int rounds) {
  cfg.validate();
  auto centroids = gen_speakers(cfg);
  std::vector<std::vector<double>> biases;
  biases.reserve(cfg.backend_names.size());
  for (const std::string& name : cfg.backend_names) {
    biases.push_back(backend_bias(cfg, name));
  }
  EmbeddingStore store(cfg.dim);
  for (int s = 0; s < cfg.num_speakers; ++s) {
    for (int u = 0; u < cfg.utts_per_speaker; ++u) {
      store.put(gen_observation(centroids[static_cast<size_t>(s)], duration_s,
                                cfg, s, u));
      for (size_t b = 0; b < cfg.backend_names.size(); ++b) {
        for (int r = 0; r < rounds; ++r) {
          Embedding e = gen_tts_embedding(centroids[static_cast<size_t>(s)],
                                          duration_s, biases[b], cfg, s, u, r);
          e.condition = "tts:" + cfg.backend_names[b] + ":" + std::to_string(r);
          store.put(std::move(e));
        }
      }
    }
  }
  return store;
}

std::vector<SimExperimentRow> run_sim_experiment(const SimConfig& cfg,
                                                 const SimGrid& grid) {
  cfg.validate();
  const bool want_multi =
      std::count(grid.methods.begin(), grid.methods.end(),
                 FusionMethod::kMultiText) > 0;
  const int rounds = want_multi ? 3 : 1;
  std::vector<Trial> trials = sim_trials(cfg);
  std::vector<SimExperimentRow> rows;

  FusionConfig fcfg;
  for (double duration : cfg.durations) {
    EmbeddingStore store = sim_store(cfg, duration, rounds);
    auto tts_cond = [&](size_t b, int r = 0) {
      return "tts:" + cfg.backend_names[b] + ":" + std::to_string(r);
    };

    double baseline_eer =
        compute_eer(score_trials(trials, store, "orig", "orig")).eer_percent;
    rows.push_back(SimExperimentRow{duration, "baseline", 1.0, baseline_eer});

    for (size_t b = 0; b < cfg.backend_names.size(); ++b) {
      const std::string cond = tts_cond(b);
      double tts_eer =
          compute_eer(score_trials(trials, store, cond, cond)).eer_percent;
      rows.push_back(SimExperimentRow{
          duration, "tts_only:" + cfg.backend_names[b], 0.0, tts_eer});
    }

    for (FusionMethod method : grid.methods) {
      switch (method) {
        case FusionMethod::kWeightedMean: {
          for (size_t b = 0; b < cfg.backend_names.size(); ++b) {
            auto sweep =
                weight_sweep(trials, store, "orig", tts_cond(b), grid.weights);
            for (const SweepRow& r : sweep) {
              rows.push_back(SimExperimentRow{
                  duration, "weighted_mean:" + cfg.backend_names[b], r.w,
                  r.eer_percent});
            }
          }
          break;
        }
        case FusionMethod::kAddition:
        case FusionMethod::kConcatenation: {
          for (size_t b = 0; b < cfg.backend_names.size(); ++b) {
            auto fused = [&](const std::string& utt) {
              const Embedding& e_b = store.get(utt, "orig");
              const Embedding& e_g = store.get(utt, tts_cond(b));
              return method == FusionMethod::kAddition
                         ? fuse_addition(e_b, e_g, fcfg).values
                         : fuse_concat(e_b, e_g, fcfg).values;
            };
            double eer =
                compute_eer(score_trials_with(trials, fused)).eer_percent;
            rows.push_back(SimExperimentRow{
                duration, fusion_method_name(method) + ":" +
                              cfg.backend_names[b],
                0.5, eer});
          }
          break;
        }
        case FusionMethod::kTwoStage: {
          if (cfg.backend_names.size() < 2) {
            throw ConfigError("sim: two_stage needs two backends");
          }
          for (double w : grid.weights) {
            auto fused = [&](const std::string& utt) {
              const Embedding& e_b = store.get(utt, "orig");
              const Embedding& g1 = store.get(utt, tts_cond(0));
              const Embedding& g2 = store.get(utt, tts_cond(1));
              return two_stage_fuse(g1, g2, e_b, grid.two_stage_inner, w,
                                    fcfg)
                  .values;
            };
            double eer =
                compute_eer(score_trials_with(trials, fused)).eer_percent;
            rows.push_back(SimExperimentRow{
                duration,
                "two_stage:" + cfg.backend_names[0] + "+" +
                    cfg.backend_names[1],
                w, eer});
          }
          break;
        }
        case FusionMethod::kMultiText: {
          for (size_t b = 0; b < cfg.backend_names.size(); ++b) {
            for (double w : grid.weights) {
              auto fused = [&](const std::string& utt) {
                const Embedding& e_b = store.get(utt, "orig");
                std::vector<Embedding> gens;
                for (int r = 0; r < rounds; ++r) {
                  gens.push_back(store.get(utt, tts_cond(b, r)));
                }
                return fuse_multi_text(e_b, gens, w, fcfg).values;
              };
              double eer =
                  compute_eer(score_trials_with(trials, fused)).eer_percent;
              rows.push_back(SimExperimentRow{
                  duration, "multi_text:" + cfg.backend_names[b], w, eer});
            }
          }
          break;
        }
        case FusionMethod::kAttentionGate:
          throw ConfigError(
              "sim: attention_gate rows need a trained checkpoint; "
              "use the train-gate and score stages instead");
      }
    }
  }
  return rows;
}

std::string sim_rows_csv(const std::vector<SimExperimentRow>& rows,
                         const std::string& header_comment) {
  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  out += "duration_s,method,w,eer_percent\n";
  for (const SimExperimentRow& r : rows) {
    out += format_double(r.duration_s);
    out += ',';
    out += r.method;
    out += ',';
    out += format_double(r.w);
    out += ',';
    out += format_double(r.eer_percent);
    out += '\n';
  }
  return out;
}

}  // namespace ttaug
