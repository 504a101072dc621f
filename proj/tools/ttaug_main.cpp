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

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ttaug/audio.hpp"
#include "ttaug/backends.hpp"
#include "ttaug/config.hpp"
#include "ttaug/errors.hpp"
#include "ttaug/fusion.hpp"
#include "ttaug/phoneme.hpp"
#include "ttaug/runner.hpp"
#include "ttaug/scoring.hpp"
#include "ttaug/sim.hpp"
#include "ttaug/store.hpp"
#include "ttaug/training.hpp"
#include "ttaug/util.hpp"

namespace fs = std::filesystem;
using namespace ttaug;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitData = 4;

BackendEndpoint endpoint_from_flags(const std::string& name,
                                    const std::string& transport,
                                    const std::string& address, double timeout,
                                    int dim, BackendKind kind) {
  BackendEndpoint ep;
  ep.name = name;
  ep.kind = kind;
  ep.transport = transport_from_name(transport);
  ep.address = address;
  ep.timeout_s = timeout;
  ep.dim = dim;
  return ep;
}

std::vector<double> parse_weight_list(const std::string& csv) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(csv);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    char* end = nullptr;
    double w = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) {
      throw ConfigError("bad weight '" + token + "'");
    }
    out.push_back(w);
  }
  if (out.empty()) throw ConfigError("empty weight list");
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

struct SegmentArgs {
  std::string in, out, duration = "full", anchor = "centered";
};

int cmd_segment(const SegmentArgs& a) {
  DurationSpec dur = DurationSpec::parse(a.duration);
  SegmentSpec spec = dur.full ? SegmentSpec::full_length()
                              : SegmentSpec::seconds(dur.seconds);
  if (a.anchor == "from-midpoint") {
    spec.anchor = SegmentAnchor::kFromMidpoint;
  } else if (a.anchor != "centered") {
    throw ConfigError("anchor must be centered or from-midpoint");
  }
  SegmentResult result = truncate_midpoint(load_wav(a.in), spec);
  save_wav(result.audio, a.out);
  if (result.short_input) {
    std::cerr << "note: input shorter than requested duration; "
                 "wrote the whole utterance\n";
  }
  std::cout << a.out << " " << format_double(result.audio.duration_s())
            << "s\n";
  return kExitOk;
}

struct SynthArgs {
  std::string name = "tts", transport = "mock", address, prompt, text, out;
  std::string cache_dir;
  double timeout = 30.0;
  int round = 0;
};

int cmd_synthesize(const SynthArgs& a) {
  BackendClient client(endpoint_from_flags(a.name, a.transport, a.address,
                                           a.timeout, 0, BackendKind::kTts));
  TtsResult r;
  if (!a.cache_dir.empty()) {
    bool hit = false;
    r = request_tts_cached(client, a.prompt, a.text, a.round, a.cache_dir,
                           &hit);
    if (!a.out.empty() && fs::path(a.out) != r.out_path) {
      fs::create_directories(fs::path(a.out).parent_path());
      fs::copy_file(r.out_path, a.out, fs::copy_options::overwrite_existing);
      r.out_path = a.out;
    }
    std::cerr << (hit ? "cache hit\n" : "cache miss\n");
  } else {
    r = client.request_tts(a.prompt, a.text, a.out);
  }
  std::cout << r.out_path.string() << " " << format_double(r.duration_s)
            << "s\n";
  return kExitOk;
}

struct EmbedArgs {
  std::string name = "embed", transport = "mock", address, audio, utt,
              condition = "orig", store;
  double timeout = 30.0;
  int dim = kDefaultEmbeddingDim;
};

int cmd_embed(const EmbedArgs& a) {
  BackendClient client(endpoint_from_flags(a.name, a.transport, a.address,
                                           a.timeout, a.dim,
                                           BackendKind::kEmbed));
  Embedding e = client.request_embedding(a.audio);
  e.utt_id = a.utt.empty() ? fs::path(a.audio).stem().string() : a.utt;
  e.condition = a.condition;
  EmbeddingStore store;
  if (fs::exists(a.store)) store = EmbeddingStore::load(a.store);
  store.put(std::move(e));
  store.save(a.store);
  std::cout << a.store << " now holds " << store.size() << " records\n";
  return kExitOk;
}

struct FuseArgs {
  std::string store, out_store, utt, method = "weighted_mean";
  std::string cond_a = "orig", cond_b, gens, checkpoint;
  double w = 0.5, w_inner = 0.5;
  bool no_normalize = false;
};

int cmd_fuse(const FuseArgs& a) {
  EmbeddingStore store = EmbeddingStore::load(a.store);
  FusionConfig fcfg;
  fcfg.normalize_inputs = !a.no_normalize;
  FusionMethod method = fusion_method_from_name(a.method);

  std::vector<std::string> utts;
  if (a.utt == "all") {
    std::set<std::string> seen;
    for (const auto& [utt, cond] : store.keys()) seen.insert(utt);
    utts.assign(seen.begin(), seen.end());
  } else {
    utts.push_back(a.utt);
  }

  EmbeddingStore out_store;
  if (fs::exists(a.out_store) && a.out_store != a.store) {
    out_store = EmbeddingStore::load(a.out_store);
  } else if (a.out_store == a.store) {
    out_store = store;
  }

  GateNetwork gate;
  if (method == FusionMethod::kAttentionGate) {
    if (a.checkpoint.empty()) {
      throw ConfigError("fuse: attention_gate needs --checkpoint");
    }
    gate = load_checkpoint(a.checkpoint).first;
  }

  for (const std::string& utt : utts) {
    const Embedding& e_b = store.get(utt, a.cond_a);
    Embedding fused;
    switch (method) {
      case FusionMethod::kAddition:
        fused = fuse_addition(e_b, store.get(utt, a.cond_b), fcfg);
        break;
      case FusionMethod::kConcatenation:
        fused = fuse_concat(e_b, store.get(utt, a.cond_b), fcfg);
        break;
      case FusionMethod::kWeightedMean:
        fused = fuse_weighted(e_b, store.get(utt, a.cond_b), a.w, fcfg);
        break;
      case FusionMethod::kAttentionGate:
        fused = gate_forward(gate, e_b, store.get(utt, a.cond_b), fcfg).fused;
        break;
      case FusionMethod::kTwoStage: {
        std::vector<std::string> conds = split_ws(a.gens);
        if (conds.size() != 2) {
          throw ConfigError("fuse: two_stage needs --gens \"<cond1> <cond2>\"");
        }
        fused = two_stage_fuse(store.get(utt, conds[0]),
                               store.get(utt, conds[1]), e_b, a.w_inner, a.w,
                               fcfg);
        break;
      }
      case FusionMethod::kMultiText: {
        std::vector<std::string> conds = split_ws(a.gens);
        if (conds.empty()) {
          throw ConfigError("fuse: multi_text needs --gens conditions");
        }
        std::vector<Embedding> gens;
        for (const std::string& c : conds) gens.push_back(store.get(utt, c));
        fused = fuse_multi_text(e_b, gens, a.w, fcfg);
        break;
      }
    }
    if (!out_store.contains(fused.utt_id, fused.condition)) {
      out_store.put(std::move(fused));
    }
  }
  out_store.save(a.out_store);
  std::cout << a.out_store << " now holds " << out_store.size()
            << " records\n";
  return kExitOk;
}

struct ScoreArgs {
  std::string store, trials, enroll_cond = "orig", test_cond = "orig", out;
};

int cmd_score(const ScoreArgs& a) {
  EmbeddingStore store = EmbeddingStore::load(a.store);
  std::vector<Trial> trials = load_trials(a.trials);
  std::vector<ScoreRecord> records =
      score_trials(trials, store, a.enroll_cond, a.test_cond);
  std::string text = serialize_scores(records);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(a.out, text);
    std::cout << "wrote " << records.size() << " scores to " << a.out << "\n";
  }
  return kExitOk;
}

struct EerArgs {
  std::string scores, trials, out;
};

int cmd_eer(const EerArgs& a) {
  std::vector<Trial> trials = load_trials(a.trials);
  std::vector<ScoreRecord> records = load_scores(a.scores, trials);
  EvalReport report = compute_eer(records);
  std::string j = report.to_json();
  if (!a.out.empty()) write_file_atomic(a.out, j);
  std::cout << j;
  return kExitOk;
}

struct SweepArgs {
  std::string store, trials, base_cond = "orig", tts_cond, weights, out;
};

int cmd_sweep(const SweepArgs& a) {
  EmbeddingStore store = EmbeddingStore::load(a.store);
  std::vector<Trial> trials = load_trials(a.trials);
  std::vector<double> weights =
      a.weights.empty()
          ? std::vector<double>{0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0}
          : parse_weight_list(a.weights);
  auto rows = weight_sweep(trials, store, a.base_cond, a.tts_cond, weights);
  std::string csv = serialize_sweep_csv(rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(a.out, csv);
    std::cout << "wrote " << rows.size() << " rows to " << a.out << "\n";
  }
  return kExitOk;
}

struct PhonemeArgs {
  std::string dict, text, out;
};

int cmd_phoneme_report(const PhonemeArgs& a) {
  PronDict dict = load_cmudict(a.dict);
  // --text names either a file or a literal string.
  std::string text = fs::is_regular_file(a.text) ? read_file(a.text) : a.text;
  PhonemeReport report = phoneme_set(text, dict);
  std::string j = report.to_json();
  if (!a.out.empty()) write_file_atomic(a.out, j);
  std::cout << j;
  return kExitOk;
}

struct SimulateArgs {
  std::string config, out;
  std::optional<uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
  ExperimentConfig cfg = ExperimentConfig::from_file(a.config);
  if (a.seed) cfg.sim.seed = *a.seed;
  SimGrid grid;
  grid.methods = cfg.methods;
  grid.weights = cfg.weights;
  grid.two_stage_inner = cfg.two_stage_inner;
  auto rows = run_sim_experiment(cfg.sim, grid);
  std::string csv = sim_rows_csv(rows, "config_hash=" + cfg.config_hash);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(a.out, csv);
    std::cout << "wrote " << rows.size() << " rows to " << a.out << "\n";
  }
  return kExitOk;
}

struct TrainArgs {
  std::string store, pairs, out, log, init_rows;
  std::string bona_cond = "orig", gen_cond;
  double lr = 1e-3, momentum = 0.0;
  int epochs = 20, batch = 128, hidden = kDefaultGateHidden;
  uint64_t seed = 0;
};

int cmd_train_gate(const TrainArgs& a) {
  EmbeddingStore store = EmbeddingStore::load(a.store);
  if (a.gen_cond.empty()) {
    throw ConfigError("train-gate: --gen-cond is required");
  }
  // Pairs file: "<utt_id> <integer speaker label>" per line.
  std::vector<TrainPair> pairs;
  std::istringstream in(read_file(a.pairs));
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_ws(line);
    if (fields.size() != 2) {
      throw ParseError("pairs line " + std::to_string(line_no) +
                       ": expected '<utt_id> <label>'");
    }
    TrainPair p;
    p.bona = store.get(fields[0], a.bona_cond).values;
    p.gen = store.get(fields[0], a.gen_cond).values;
    p.label = std::stoi(fields[1]);
    pairs.push_back(std::move(p));
  }
  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.momentum = a.momentum;
  cfg.gate_hidden = a.hidden;
  TrainResult result;
  if (!a.init_rows.empty()) {
    // Pretrained classifier rows from an embedding-format file, one record
    // per speaker keyed by the label index.
    int num_speakers = 0;
    for (const TrainPair& p : pairs) {
      num_speakers = std::max(num_speakers, p.label + 1);
    }
    std::vector<std::string> names;
    for (int i = 0; i < num_speakers; ++i) names.push_back(std::to_string(i));
    AamClassifier init = AamClassifier::from_store_file(a.init_rows, names,
                                                        cfg.margin, cfg.scale);
    result = train_gate(pairs, cfg, &init);
  } else {
    result = train_gate(pairs, cfg);
  }
  save_checkpoint(a.out, result.net, result.classifier);
  if (!a.log.empty()) write_file_atomic(a.log, result.log_csv);
  std::cout << "best holdout loss " << format_double(result.best_holdout_loss)
            << " at epoch " << result.best_epoch << "; checkpoint " << a.out
            << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string config, out, duration;
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
};

int cmd_run(const RunArgs& a) {
  ExperimentConfig cfg = ExperimentConfig::from_file(a.config);
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.seed) cfg.seed = *a.seed;
  if (a.jobs) cfg.jobs = *a.jobs;
  if (!a.duration.empty()) {
    cfg.durations = {DurationSpec::parse(a.duration)};
  }
  RunSummary summary = run_experiment(cfg);
  if (!summary.ok()) {
    std::cerr << summary.failures.size() << " failure(s); see "
              << (summary.out_dir / "failures.json").string() << "\n";
    return summary.backend_failure ? kExitBackend : kExitData;
  }
  std::cout << "run complete: " << summary.out_dir.string() << " ("
            << summary.cache_hits << " cache hits, " << summary.cache_misses
            << " misses)\n";
  return kExitOk;
}

struct ReportArgs {
  std::string results;
};

int cmd_report(const ReportArgs& a) {
  ReportTables tables = build_report(a.results);
  write_report(a.results, tables);
  std::cout << tables.table_csv << "\n" << tables.reductions_csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"test-time TTS augmentation toolkit for speaker verification"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "midpoint-truncate a WAV");
  c_seg->add_option("--in", seg.in)->required();
  c_seg->add_option("--out", seg.out)->required();
  c_seg->add_option("--duration", seg.duration, "seconds or 'full'");
  c_seg->add_option("--anchor", seg.anchor, "centered | from-midpoint");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synthesize", "run a TTS backend");
  c_synth->add_option("--name", synth.name);
  c_synth->add_option("--transport", synth.transport, "mock|http|subprocess");
  c_synth->add_option("--address", synth.address);
  c_synth->add_option("--prompt", synth.prompt)->required();
  c_synth->add_option("--text", synth.text)->required();
  c_synth->add_option("--out", synth.out);
  c_synth->add_option("--round", synth.round);
  c_synth->add_option("--cache-dir", synth.cache_dir);
  c_synth->add_option("--timeout", synth.timeout);

  EmbedArgs emb;
  auto* c_emb = app.add_subcommand("embed", "extract one embedding");
  c_emb->add_option("--name", emb.name);
  c_emb->add_option("--transport", emb.transport);
  c_emb->add_option("--address", emb.address);
  c_emb->add_option("--audio", emb.audio)->required();
  c_emb->add_option("--utt", emb.utt);
  c_emb->add_option("--condition", emb.condition);
  c_emb->add_option("--store", emb.store)->required();
  c_emb->add_option("--dim", emb.dim);
  c_emb->add_option("--timeout", emb.timeout);

  FuseArgs fuse;
  auto* c_fuse = app.add_subcommand("fuse", "fuse stored embeddings");
  c_fuse->add_option("--store", fuse.store)->required();
  c_fuse->add_option("--out-store", fuse.out_store)->required();
  c_fuse->add_option("--utt", fuse.utt, "utterance id or 'all'")->required();
  c_fuse->add_option("--method", fuse.method);
  c_fuse->add_option("--a", fuse.cond_a, "first condition (bona fide)");
  c_fuse->add_option("--b", fuse.cond_b, "second condition (generated)");
  c_fuse->add_option("--gens", fuse.gens,
                     "space-separated generated conditions "
                     "(two_stage / multi_text)");
  c_fuse->add_option("--w", fuse.w);
  c_fuse->add_option("--w-inner", fuse.w_inner);
  c_fuse->add_option("--checkpoint", fuse.checkpoint);
  c_fuse->add_flag("--no-normalize", fuse.no_normalize);

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "cosine-score a trial list");
  c_score->add_option("--store", score.store)->required();
  c_score->add_option("--trials", score.trials)->required();
  c_score->add_option("--enroll-cond", score.enroll_cond);
  c_score->add_option("--test-cond", score.test_cond);
  c_score->add_option("--out", score.out);

  EerArgs eer;
  auto* c_eer = app.add_subcommand("eer", "EER report from a score file");
  c_eer->add_option("--scores", eer.scores)->required();
  c_eer->add_option("--trials", eer.trials)->required();
  c_eer->add_option("--out", eer.out);

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "EER over fusion weights");
  c_sweep->add_option("--store", sweep.store)->required();
  c_sweep->add_option("--trials", sweep.trials)->required();
  c_sweep->add_option("--base-cond", sweep.base_cond);
  c_sweep->add_option("--tts-cond", sweep.tts_cond)->required();
  c_sweep->add_option("--weights", sweep.weights, "comma-separated");
  c_sweep->add_option("--out", sweep.out);

  PhonemeArgs phon;
  auto* c_phon = app.add_subcommand("phoneme-report",
                                    "phoneme coverage of a text");
  c_phon->add_option("--dict", phon.dict)->required();
  c_phon->add_option("--text", phon.text, "path or literal text")->required();
  c_phon->add_option("--out", phon.out);

  SimulateArgs simu;
  auto* c_sim = app.add_subcommand("simulate", "synthetic-embedding study");
  c_sim->add_option("--config", simu.config)->required();
  c_sim->add_option("--out", simu.out);
  uint64_t sim_seed = 0;
  auto* sim_seed_opt = c_sim->add_option("--seed", sim_seed);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train-gate", "train the gated fusion");
  c_train->add_option("--store", train.store)->required();
  c_train->add_option("--pairs", train.pairs)->required();
  c_train->add_option("--out", train.out)->required();
  c_train->add_option("--log", train.log);
  c_train->add_option("--init-rows", train.init_rows,
                      "embedding-format file with one classifier row per "
                      "speaker, keyed by label index");
  c_train->add_option("--bona-cond", train.bona_cond);
  c_train->add_option("--gen-cond", train.gen_cond)->required();
  c_train->add_option("--lr", train.lr);
  c_train->add_option("--momentum", train.momentum);
  c_train->add_option("--epochs", train.epochs);
  c_train->add_option("--batch", train.batch);
  c_train->add_option("--hidden", train.hidden);
  c_train->add_option("--seed", train.seed);

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "full pipeline from a config");
  c_run->add_option("--config", run.config)->required();
  c_run->add_option("--out", run.out);
  c_run->add_option("--duration", run.duration, "restrict to one duration");
  uint64_t run_seed = 0;
  auto* run_seed_opt = c_run->add_option("--seed", run_seed);
  int run_jobs = 0;
  auto* run_jobs_opt = c_run->add_option("--jobs", run_jobs);

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "summary tables from results");
  c_rep->add_option("--results", rep.results)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_seg->parsed()) return cmd_segment(seg);
    if (c_synth->parsed()) return cmd_synthesize(synth);
    if (c_emb->parsed()) return cmd_embed(emb);
    if (c_fuse->parsed()) return cmd_fuse(fuse);
    if (c_score->parsed()) return cmd_score(score);
    if (c_eer->parsed()) return cmd_eer(eer);
    if (c_sweep->parsed()) return cmd_sweep(sweep);
    if (c_phon->parsed()) return cmd_phoneme_report(phon);
    if (c_sim->parsed()) {
      if (*sim_seed_opt) simu.seed = sim_seed;
      return cmd_simulate(simu);
    }
    if (c_train->parsed()) return cmd_train_gate(train);
    if (c_run->parsed()) {
      if (*run_seed_opt) run.seed = run_seed;
      if (*run_jobs_opt) run.jobs = run_jobs;
      return cmd_run(run);
    }
    if (c_rep->parsed()) return cmd_report(rep);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
