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

#include "ttaug/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "ttaug/audio.hpp"
#include "ttaug/backends.hpp"
#include "ttaug/errors.hpp"
#include "ttaug/fusion.hpp"
#include "ttaug/training.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

using nlohmann::json;

// Bounded-parallelism loop; exceptions are funneled to on_error with the
// item index. Order of side effects is made irrelevant by keying all outputs
// on the item.
void parallel_for(size_t n, int jobs,
                  const std::function<void(size_t)>& body,
                  const std::function<void(size_t, std::exception_ptr)>&
                      on_error) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        on_error(i, std::current_exception());
      }
    }
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        on_error(i, std::current_exception());
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(jobs));
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
}

std::string weight_tag(double w) {
  std::string s = format_double(w);
  return "w" + s;
}

std::string round_tag(int round) { return "r" + std::to_string(round); }

bool file_nonempty(const std::filesystem::path& p) {
  std::error_code ec;
  return std::filesystem::is_regular_file(p, ec) &&
         std::filesystem::file_size(p, ec) > 0;
}

std::vector<std::string> collect_utts(const std::vector<Trial>& trials) {
  std::set<std::string> utts;
  for (const Trial& t : trials) {
    utts.insert(t.enroll_id);
    utts.insert(t.test_id);
  }
  return {utts.begin(), utts.end()};
}

struct FailureSink {
  std::mutex mu;
  std::vector<RunFailure> failures;
  std::set<std::string> dead_backends;
  bool backend_failure = false;

  void record(const std::string& utt, const std::string& backend,
              const std::string& stage, const std::exception& e,
              bool is_backend) {
    std::lock_guard<std::mutex> lock(mu);
    failures.push_back(RunFailure{utt, backend, stage, e.what()});
    if (is_backend) backend_failure = true;
    if (is_backend && !backend.empty()) dead_backends.insert(backend);
  }

  bool dead(const std::string& backend) {
    std::lock_guard<std::mutex> lock(mu);
    return dead_backends.count(backend) > 0;
  }
};

// Per-utterance artifacts produced by the parallel phase.
struct UttArtifacts {
  std::vector<Embedding> embeddings;
  size_t cache_hits = 0;
  size_t cache_misses = 0;
};

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate_paths();
  const BackendEndpoint& embed_ep = cfg.embed_endpoint();
  std::vector<BackendEndpoint> tts_eps = cfg.tts_endpoints();
  if (tts_eps.empty()) {
    throw ConfigError("run: no tts backend configured");
  }
  const bool want_attention =
      std::count(cfg.methods.begin(), cfg.methods.end(),
                 FusionMethod::kAttentionGate) > 0;
  if (want_attention && cfg.gate_checkpoint.empty()) {
    throw ConfigError("run: attention_gate requires fusion.gate_checkpoint");
  }
  const bool want_two_stage =
      std::count(cfg.methods.begin(), cfg.methods.end(),
                 FusionMethod::kTwoStage) > 0;
  if (want_two_stage && tts_eps.size() < 2) {
    throw ConfigError("run: two_stage requires two tts backends");
  }
  const bool want_multi =
      std::count(cfg.methods.begin(), cfg.methods.end(),
                 FusionMethod::kMultiText) > 0;
  if (want_multi && cfg.text.mode != TextStrategy::Mode::kFixed) {
    throw ConfigError("run: multi_text requires the fixed-text strategy");
  }

  const std::filesystem::path out = cfg.out_dir;
  std::filesystem::create_directories(out);

  // A results directory belongs to exactly one config.
  const std::filesystem::path manifest_path = out / "manifest.json";
  if (file_nonempty(manifest_path)) {
    json old = json::parse(read_file(manifest_path), nullptr, false);
    if (old.is_discarded() || !old.contains("config_hash")) {
      throw DataError("run: existing manifest is unreadable: " +
                      manifest_path.string());
    }
    if (old["config_hash"].get<std::string>() != cfg.config_hash) {
      throw ConfigError("run: results directory " + out.string() +
                        " holds outputs for a different config (hash " +
                        old["config_hash"].get<std::string>() + " vs " +
                        cfg.config_hash + ")");
    }
  }

  GateNetwork gate;
  if (want_attention) {
    gate = load_checkpoint(cfg.gate_checkpoint).first;
  }

  std::vector<Trial> trials = load_trials(cfg.trial_list);
  if (trials.empty()) throw DataError("run: empty trial list");
  std::vector<std::string> utts = collect_utts(trials);
  const int rounds = cfg.text.rounds();
  const std::filesystem::path cache_root = cfg.effective_cache_dir();

  FusionConfig fusion_cfg;
  fusion_cfg.normalize_inputs = cfg.normalize_inputs;

  RunSummary summary;
  summary.out_dir = out;
  FailureSink sink;

  BackendClient embed_client{embed_ep};
  std::vector<std::unique_ptr<BackendClient>> tts_clients;
  for (const BackendEndpoint& ep : tts_eps) {
    tts_clients.push_back(std::make_unique<BackendClient>(ep));
  }

  json manifest_records = json::object();
  std::vector<std::filesystem::path> artifacts;
  std::mutex artifacts_mu;
  auto note_artifact = [&](const std::filesystem::path& p) {
    std::lock_guard<std::mutex> lock(artifacts_mu);
    artifacts.push_back(p);
  };

  for (const DurationSpec& dur : cfg.durations) {
    const std::string dlabel = dur.label();
    const std::filesystem::path seg_dir = out / "segments" / dlabel;
    const std::filesystem::path rep_dir = out / "rep" / dlabel;
    const std::filesystem::path store_path =
        out / "embeddings" / (dlabel + ".bin");

    EmbeddingStore store;
    if (file_nonempty(store_path)) {
      store = EmbeddingStore::load(store_path);
    }

    std::vector<UttArtifacts> results(utts.size());
    std::mutex store_mu;  // find() during the parallel phase

    auto process_utt = [&](size_t idx) {
      const std::string& utt = utts[idx];
      UttArtifacts& art = results[idx];

      auto have = [&](const std::string& condition) {
        std::lock_guard<std::mutex> lock(store_mu);
        return store.contains(utt, condition);
      };

      // segment
      const std::filesystem::path seg_path = seg_dir / (utt + ".wav");
      SegmentSpec spec = dur.full ? SegmentSpec::full_length()
                                  : SegmentSpec::seconds(dur.seconds);
      if (!file_nonempty(seg_path)) {
        AudioBuffer audio = load_wav(cfg.dataset_root / (utt + ".wav"));
        save_wav(truncate_midpoint(audio, spec).audio, seg_path);
      }
      note_artifact(seg_path);

      // embed the bona-fide segment
      if (!have("orig")) {
        Embedding e = embed_client.request_embedding(seg_path);
        e.utt_id = utt;
        e.condition = "orig";
        art.embeddings.push_back(std::move(e));
      }

      // repeated-audio control
      if (cfg.include_rep15) {
        const std::filesystem::path rep_path = rep_dir / (utt + ".wav");
        if (!file_nonempty(rep_path)) {
          AudioBuffer seg = load_wav(seg_path);
          save_wav(repeat_to_duration(seg, cfg.rep15_target_s), rep_path);
        }
        note_artifact(rep_path);
        if (!have("rep15")) {
          Embedding e = embed_client.request_embedding(rep_path);
          e.utt_id = utt;
          e.condition = "rep15";
          art.embeddings.push_back(std::move(e));
        }
      }

      // synthesize + embed per backend and round
      for (size_t b = 0; b < tts_clients.size(); ++b) {
        const std::string& bname = tts_eps[b].name;
        if (sink.dead(bname)) continue;
        for (int r = 0; r < rounds; ++r) {
          const std::string condition =
              "tts:" + bname + ":" + std::to_string(r);
          if (have(condition)) continue;
          std::string text = resolve_text(cfg.text, utt, r);
          try {
            bool hit = false;
            TtsResult synth = request_tts_cached(*tts_clients[b], seg_path,
                                                 text, r, cache_root, &hit);
            (hit ? art.cache_hits : art.cache_misses) += 1;
            Embedding e = embed_client.request_embedding(synth.out_path);
            e.utt_id = utt;
            e.condition = condition;
            art.embeddings.push_back(std::move(e));
          } catch (const BackendError& e) {
            sink.record(utt, bname, "synthesize", e, true);
            break;  // backend retired; move on to the next one
          } catch (const std::exception& e) {
            sink.record(utt, bname, "synthesize", e, false);
          }
        }
      }
    };

    parallel_for(
        utts.size(), cfg.jobs, process_utt,
        [&](size_t idx, std::exception_ptr ep) {
          try {
            std::rethrow_exception(ep);
          } catch (const BackendError& e) {
            sink.record(utts[idx], embed_ep.name, "embed", e, true);
          } catch (const std::exception& e) {
            sink.record(utts[idx], "", "segment", e, false);
          }
        });

    // Single-writer phase: fold per-utterance results into the store.
    for (UttArtifacts& art : results) {
      summary.cache_hits += art.cache_hits;
      summary.cache_misses += art.cache_misses;
      for (Embedding& e : art.embeddings) {
        if (!store.contains(e.utt_id, e.condition)) store.put(std::move(e));
      }
    }
    if (!store.empty()) {
      store.save_binary(store_path);
      note_artifact(store_path);
    }

    json record_list = json::array();
    for (const auto& [utt, condition] : store.keys()) {
      record_list.push_back(utt + "|" + condition);
    }
    manifest_records[dlabel] = std::move(record_list);

    // ----- scoring -----
    const std::filesystem::path scores_dir = out / "scores" / dlabel;
    const std::filesystem::path reports_dir = out / "reports" / dlabel;

    auto emit = [&](const std::string& tag,
                    const std::function<std::vector<ScoreRecord>()>& make) {
      const std::filesystem::path score_path = scores_dir / (tag + ".txt");
      const std::filesystem::path report_path = reports_dir / (tag + ".json");
      if (file_nonempty(score_path) && file_nonempty(report_path)) {
        note_artifact(score_path);
        note_artifact(report_path);
        return;
      }
      std::vector<ScoreRecord> records;
      try {
        records = make();
      } catch (const std::exception& e) {
        sink.record("", "", "score:" + tag, e, false);
        return;
      }
      EvalReport report = compute_eer(records);
      write_file_atomic(score_path,
                        serialize_scores(records,
                                         "config_hash=" + cfg.config_hash));
      json j;
      j["config_hash"] = cfg.config_hash;
      j["duration"] = dlabel;
      j["tag"] = tag;
      j["eer_percent"] = report.eer_percent;
      j["eer_threshold"] = report.eer_threshold;
      j["n_target"] = report.n_target;
      j["n_nontarget"] = report.n_nontarget;
      if (report.min_dcf) j["min_dcf"] = *report.min_dcf;
      write_file_atomic(report_path, j.dump(2) + "\n");
      note_artifact(score_path);
      note_artifact(report_path);
    };

    auto tts_cond = [&](size_t b, int r) {
      return "tts:" + tts_eps[b].name + ":" + std::to_string(r);
    };
    auto backend_ok = [&](size_t b) {
      if (sink.dead(tts_eps[b].name)) return false;
      for (const std::string& utt : utts) {
        for (int r = 0; r < rounds; ++r) {
          if (!store.contains(utt, tts_cond(b, r))) return false;
        }
      }
      return true;
    };
    bool orig_ok = true;
    for (const std::string& utt : utts) {
      if (!store.contains(utt, "orig")) {
        orig_ok = false;
        break;
      }
    }
    if (!orig_ok) continue;  // failures already recorded

    emit("baseline",
         [&] { return score_trials(trials, store, "orig", "orig"); });

    for (size_t b = 0; b < tts_eps.size(); ++b) {
      if (!backend_ok(b)) continue;
      for (int r = 0; r < rounds; ++r) {
        const std::string cond = tts_cond(b, r);
        emit("tts_only__" + tts_eps[b].name + "__" + round_tag(r),
             [&] { return score_trials(trials, store, cond, cond); });
      }
    }

    for (FusionMethod method : cfg.methods) {
      switch (method) {
        case FusionMethod::kWeightedMean: {
          for (size_t b = 0; b < tts_eps.size(); ++b) {
            if (!backend_ok(b)) continue;
            for (int r = 0; r < rounds; ++r) {
              for (double w : cfg.weights) {
                const std::string cond = tts_cond(b, r);
                emit("weighted_mean_" + weight_tag(w) + "__" +
                         tts_eps[b].name + "__" + round_tag(r),
                     [&] {
                       // Boundary weights reuse the plain scoring path, the
                       // same rule weight_sweep applies.
                       if (w == 1.0) {
                         return score_trials(trials, store, "orig", "orig");
                       }
                       if (w == 0.0) {
                         return score_trials(trials, store, cond, cond);
                       }
                       return score_trials_with(
                           trials, [&](const std::string& utt) {
                             return fuse_weighted(store.get(utt, "orig"),
                                                  store.get(utt, cond), w,
                                                  fusion_cfg)
                                 .values;
                           });
                     });
              }
            }
          }
          break;
        }
        case FusionMethod::kAddition:
        case FusionMethod::kConcatenation: {
          for (size_t b = 0; b < tts_eps.size(); ++b) {
            if (!backend_ok(b)) continue;
            for (int r = 0; r < rounds; ++r) {
              const std::string cond = tts_cond(b, r);
              emit(fusion_method_name(method) + "__" + tts_eps[b].name +
                       "__" + round_tag(r),
                   [&] {
                     return score_trials_with(
                         trials, [&](const std::string& utt) {
                           const Embedding& e_b = store.get(utt, "orig");
                           const Embedding& e_g = store.get(utt, cond);
                           return method == FusionMethod::kAddition
                                      ? fuse_addition(e_b, e_g, fusion_cfg)
                                            .values
                                      : fuse_concat(e_b, e_g, fusion_cfg)
                                            .values;
                         });
                   });
            }
          }
          break;
        }
        case FusionMethod::kAttentionGate: {
          for (size_t b = 0; b < tts_eps.size(); ++b) {
            if (!backend_ok(b)) continue;
            for (int r = 0; r < rounds; ++r) {
              const std::string cond = tts_cond(b, r);
              emit("attention_gate__" + tts_eps[b].name + "__" + round_tag(r),
                   [&] {
                     return score_trials_with(
                         trials, [&](const std::string& utt) {
                           return gate_forward(gate, store.get(utt, "orig"),
                                               store.get(utt, cond),
                                               fusion_cfg)
                               .fused.values;
                         });
                   });
            }
          }
          break;
        }
        case FusionMethod::kTwoStage: {
          if (!backend_ok(0) || !backend_ok(1)) break;
          for (int r = 0; r < rounds; ++r) {
            for (double w : cfg.weights) {
              const std::string c1 = tts_cond(0, r), c2 = tts_cond(1, r);
              emit("two_stage_" + weight_tag(w) + "__" + tts_eps[0].name +
                       "+" + tts_eps[1].name + "__" + round_tag(r),
                   [&] {
                     return score_trials_with(
                         trials, [&](const std::string& utt) {
                           return two_stage_fuse(store.get(utt, c1),
                                                 store.get(utt, c2),
                                                 store.get(utt, "orig"),
                                                 cfg.two_stage_inner, w,
                                                 fusion_cfg)
                               .values;
                         });
                   });
            }
          }
          break;
        }
        case FusionMethod::kMultiText: {
          for (size_t b = 0; b < tts_eps.size(); ++b) {
            if (!backend_ok(b)) continue;
            for (double w : cfg.weights) {
              emit("multi_text_" + weight_tag(w) + "__" + tts_eps[b].name,
                   [&] {
                     return score_trials_with(
                         trials, [&](const std::string& utt) {
                           std::vector<Embedding> gens;
                           for (int r = 0; r < rounds; ++r) {
                             gens.push_back(store.get(utt, tts_cond(b, r)));
                           }
                           return fuse_multi_text(store.get(utt, "orig"),
                                                  gens, w, fusion_cfg)
                               .values;
                         });
                   });
            }
          }
          break;
        }
      }
    }

    if (cfg.include_rep15) {
      bool rep_ok = true;
      for (const std::string& utt : utts) {
        if (!store.contains(utt, "rep15")) {
          rep_ok = false;
          break;
        }
      }
      if (rep_ok) {
        for (double w : cfg.weights) {
          emit("rep15_" + weight_tag(w), [&] {
            if (w == 1.0) {
              return score_trials(trials, store, "orig", "orig");
            }
            if (w == 0.0) {
              return score_trials(trials, store, "rep15", "rep15");
            }
            return score_trials_with(trials, [&](const std::string& utt) {
              return fuse_weighted(store.get(utt, "orig"),
                                   store.get(utt, "rep15"), w, fusion_cfg)
                  .values;
            });
          });
        }
      }
    }
  }

  {
    std::lock_guard<std::mutex> lock(sink.mu);
    summary.failures = sink.failures;
    summary.backend_failure = sink.backend_failure;
  }

  if (!summary.failures.empty()) {
    json j;
    j["config_hash"] = cfg.config_hash;
    json list = json::array();
    for (const RunFailure& f : summary.failures) {
      list.push_back(json{{"utt", f.utt},
                          {"backend", f.backend},
                          {"stage", f.stage},
                          {"error", f.message}});
    }
    j["failures"] = std::move(list);
    write_file_atomic(out / "failures.json", j.dump(2) + "\n");
  } else {
    std::error_code ec;
    std::filesystem::remove(out / "failures.json", ec);
  }

  // Manifest: config hash, timestamp, every artifact with a content hash,
  // and the (utt, condition) records per duration.
  {
    std::sort(artifacts.begin(), artifacts.end());
    artifacts.erase(std::unique(artifacts.begin(), artifacts.end()),
                    artifacts.end());
    json j;
    j["config_hash"] = cfg.config_hash;
    j["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    json arts = json::array();
    for (const std::filesystem::path& p : artifacts) {
      if (!file_nonempty(p)) continue;
      arts.push_back(json{
          {"path", std::filesystem::relative(p, out).generic_string()},
          {"fnv64", hex64(hash_file(p))}});
    }
    j["artifacts"] = std::move(arts);
    j["records"] = std::move(manifest_records);
    write_file_atomic(manifest_path, j.dump(2) + "\n");
  }

  return summary;
}

double ReportGrid::at(const std::string& row,
                      const std::string& duration) const {
  auto rit = eer.find(row);
  if (rit == eer.end()) {
    throw NotFoundError("report grid: no row '" + row + "'");
  }
  auto cit = rit->second.find(duration);
  if (cit == rit->second.end()) {
    throw NotFoundError("report grid: row '" + row + "' has no duration '" +
                        duration + "'");
  }
  return cit->second;
}

namespace {

// "weighted_mean_w0.5__mockb__r1" -> row "weighted_mean_w0.5__mockb",
// averaging over rounds happens per row.
std::string row_of_tag(const std::string& tag) {
  size_t pos = tag.rfind("__r");
  if (pos == std::string::npos) return tag;
  for (size_t i = pos + 3; i < tag.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(tag[i]))) return tag;
  }
  return pos + 3 < tag.size() ? tag.substr(0, pos) : tag;
}

double duration_sort_key(const std::string& label) {
  if (label == "full") return std::numeric_limits<double>::infinity();
  return std::strtod(label.c_str(), nullptr);
}

}  // namespace

ReportTables build_report(const std::filesystem::path& results_dir) {
  const std::filesystem::path reports_root = results_dir / "reports";
  if (!std::filesystem::is_directory(reports_root)) {
    throw NotFoundError("report: no reports directory under " +
                        results_dir.string());
  }

  struct Cell {
    double sum = 0.0;
    int count = 0;
  };
  std::map<std::string, std::map<std::string, Cell>> cells;
  std::set<std::string> durations;
  std::string config_hash;

  size_t n_reports = 0;
  for (const auto& dur_entry :
       std::filesystem::directory_iterator(reports_root)) {
    if (!dur_entry.is_directory()) continue;
    const std::string dlabel = dur_entry.path().filename().string();
    for (const auto& entry :
         std::filesystem::directory_iterator(dur_entry.path())) {
      if (entry.path().extension() != ".json") continue;
      json j = json::parse(read_file(entry.path()), nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        throw ParseError("report: unreadable JSON: " + entry.path().string());
      }
      const std::string hash = j.value("config_hash", std::string());
      if (config_hash.empty()) {
        config_hash = hash;
      } else if (hash != config_hash) {
        throw DataError("report: mixed config hashes in " +
                        results_dir.string() + " (" + config_hash + " vs " +
                        hash + ")");
      }
      const std::string tag = j.at("tag").get<std::string>();
      Cell& cell = cells[row_of_tag(tag)][dlabel];
      cell.sum += j.at("eer_percent").get<double>();
      cell.count += 1;
      durations.insert(dlabel);
      ++n_reports;
    }
  }
  if (n_reports == 0) {
    throw NotFoundError("report: no report files under " +
                        reports_root.string());
  }
  if (!cells.count("baseline")) {
    throw DataError("report: baseline row missing from " +
                    results_dir.string());
  }

  ReportTables out;
  out.config_hash = config_hash;
  out.grid.durations.assign(durations.begin(), durations.end());
  std::sort(out.grid.durations.begin(), out.grid.durations.end(),
            [](const std::string& a, const std::string& b) {
              return duration_sort_key(a) < duration_sort_key(b);
            });
  out.grid.rows.push_back("baseline");
  for (const auto& [row, _] : cells) {
    if (row != "baseline") out.grid.rows.push_back(row);
  }
  for (const auto& [row, per_dur] : cells) {
    for (const auto& [dlabel, cell] : per_dur) {
      out.grid.eer[row][dlabel] = cell.sum / cell.count;
    }
  }

  auto csv_cell = [&](const std::string& row, const std::string& dur,
                      bool reduction) -> std::string {
    auto rit = out.grid.eer.find(row);
    if (rit == out.grid.eer.end()) return "";
    auto cit = rit->second.find(dur);
    if (cit == rit->second.end()) return "";
    if (!reduction) return format_double(cit->second);
    double base = out.grid.at("baseline", dur);
    return format_double(relative_reduction(base, cit->second));
  };

  auto build_csv = [&](bool reduction) {
    std::string csv = "# config_hash=" + config_hash + "\n";
    csv += "method";
    for (const std::string& d : out.grid.durations) csv += "," + d;
    csv += '\n';
    for (const std::string& row : out.grid.rows) {
      if (reduction && row == "baseline") continue;
      csv += row;
      for (const std::string& d : out.grid.durations) {
        csv += ',';
        csv += csv_cell(row, d, reduction);
      }
      csv += '\n';
    }
    return csv;
  };
  out.table_csv = build_csv(false);
  out.reductions_csv = build_csv(true);
  return out;
}

void write_report(const std::filesystem::path& results_dir,
                  const ReportTables& tables) {
  write_file_atomic(results_dir / "summary" / "table.csv", tables.table_csv);
  write_file_atomic(results_dir / "summary" / "reductions.csv",
                    tables.reductions_csv);
}

}  // namespace ttaug
