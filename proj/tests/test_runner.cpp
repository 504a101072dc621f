#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "ttaug/audio.hpp"
#include "ttaug/config.hpp"
#include "ttaug/errors.hpp"
#include "ttaug/runner.hpp"
#include "ttaug/scoring.hpp"
#include "ttaug/sim.hpp"
#include "ttaug/store.hpp"
#include "ttaug/training.hpp"
#include "ttaug/util.hpp"

using namespace ttaug;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MiniDataset {
  fs::path root;
  fs::path wav_dir;
  fs::path trials;
  std::vector<std::string> utts;
};

MiniDataset make_dataset(const std::string& name, int n_utts) {
  MiniDataset d;
  d.root = fs::temp_directory_path() / name;
  fs::remove_all(d.root);
  d.wav_dir = d.root / "wavs";
  fs::create_directories(d.wav_dir);
  for (int i = 0; i < n_utts; ++i) {
    std::string utt = "utt" + std::to_string(i);
    d.utts.push_back(utt);
    AudioBuffer a;
    a.sample_rate = 16000;
    a.samples.resize(16000 + 400 * i);
    for (size_t k = 0; k < a.samples.size(); ++k) {
      a.samples[k] = 0.3f * static_cast<float>(
                                std::sin(2.0 * M_PI * (150.0 + 40.0 * i) * k /
                                         16000.0));
    }
    save_wav(a, d.wav_dir / (utt + ".wav"));
  }
  std::string trial_text;
  for (int i = 0; i + 1 < n_utts; ++i) {
    trial_text += (i % 2 == 0 ? "1 " : "0 ");
    trial_text += d.utts[i] + " " + d.utts[i + 1] + "\n";
  }
  d.trials = d.root / "trials.txt";
  write_file_atomic(d.trials, trial_text);
  return d;
}

std::string runner_config(const MiniDataset& d, const std::string& out_name,
                          const std::string& extra_backend = "") {
  std::string toml;
  toml += "[dataset]\n";
  toml += "root = \"" + d.wav_dir.string() + "\"\n";
  toml += "trials = \"" + d.trials.string() + "\"\n";
  toml += "durations = [0.5, \"full\"]\n";
  toml += "[[backend]]\n";
  toml += "name = \"emb\"\nkind = \"embed\"\ntransport = \"mock\"\ndim = 32\n";
  toml += "[[backend]]\n";
  toml += "name = \"mocka\"\nkind = \"tts\"\ntransport = \"mock\"\n";
  toml += extra_backend;
  toml += "[text]\n";
  toml += "mode = \"fixed\"\n";
  toml += "texts = [\"zero one two\", \"three four\", \"five six seven\"]\n";
  toml += "[fusion]\n";
  toml += "methods = [\"weighted_mean\", \"addition\"]\n";
  toml += "weights = [0.5]\n";
  toml += "[run]\n";
  toml += "out = \"" + (d.root / out_name).string() + "\"\n";
  toml += "jobs = 2\n";
  return toml;
}

}  // namespace

TEST_CASE("run_experiment end to end with mock backends") {
  MiniDataset d = make_dataset("ttaug_runner_e2e", 6);
  std::string toml = runner_config(d, "out");
  ExperimentConfig cfg = ExperimentConfig::from_toml(toml, "");
  RunSummary summary = run_experiment(cfg);
  REQUIRE(summary.ok());
  CHECK(summary.cache_misses > 0);

  // manifest covers every (utt, condition) pair per duration
  json manifest = json::parse(read_file(cfg.out_dir / "manifest.json"));
  CHECK(manifest["config_hash"] == cfg.config_hash);
  for (const std::string& dur : {std::string("0.5s"), std::string("full")}) {
    std::set<std::string> records;
    for (const auto& r : manifest["records"][dur]) {
      records.insert(r.get<std::string>());
    }
    for (const std::string& utt : d.utts) {
      CHECK(records.count(utt + "|orig"));
      for (int r = 0; r < 3; ++r) {
        CHECK(records.count(utt + "|tts:mocka:" + std::to_string(r)));
      }
    }
  }

  // reports exist and the baseline EER is recomputable from the store
  EmbeddingStore store =
      EmbeddingStore::load(cfg.out_dir / "embeddings" / "0.5s.bin");
  std::vector<Trial> trials = load_trials(d.trials);
  double independent =
      compute_eer(score_trials(trials, store, "orig", "orig")).eer_percent;
  json baseline = json::parse(
      read_file(cfg.out_dir / "reports" / "0.5s" / "baseline.json"));
  CHECK(baseline["eer_percent"].get<double>() == independent);

  // rerun: value-identical reports, cache hits only
  std::string before = read_file(cfg.out_dir / "reports" / "0.5s" /
                                 "weighted_mean_w0.5__mocka__r0.json");
  RunSummary again = run_experiment(cfg);
  REQUIRE(again.ok());
  CHECK(again.cache_misses == 0);
  std::string after = read_file(cfg.out_dir / "reports" / "0.5s" /
                                "weighted_mean_w0.5__mocka__r0.json");
  CHECK(after == before);

  // report tables
  ReportTables tables = build_report(cfg.out_dir);
  CHECK(tables.config_hash == cfg.config_hash);
  CHECK(tables.grid.rows.front() == "baseline");
  CHECK(tables.grid.at("baseline", "0.5s") == independent);
  // round-averaged weighted-mean row exists at both durations
  CHECK(tables.grid.eer.count("weighted_mean_w0.5__mocka"));
  CHECK(tables.grid.at("weighted_mean_w0.5__mocka", "full") >= 0.0);
  write_report(cfg.out_dir, tables);
  CHECK(fs::exists(cfg.out_dir / "summary" / "table.csv"));
  CHECK(fs::exists(cfg.out_dir / "summary" / "reductions.csv"));

  fs::remove_all(d.root);
}

TEST_CASE("run_experiment: two-stage, multi-text, rep15, attention rows") {
  MiniDataset d = make_dataset("ttaug_runner_methods", 4);

  // a trained gate checkpoint at the pipeline's embedding dim
  fs::path ckpt = d.root / "gate.ckpt";
  {
    SimConfig sim;
    sim.num_speakers = 3;
    sim.utts_per_speaker = 6;
    sim.dim = 32;
    sim.seed = 2;
    auto centroids = gen_speakers(sim);
    auto bias = backend_bias(sim, "t");
    std::vector<TrainPair> pairs;
    for (int s = 0; s < 3; ++s) {
      for (int u = 0; u < 6; ++u) {
        TrainPair p;
        p.bona = gen_observation(centroids[s], 1.0, sim, s, u).values;
        p.gen = gen_tts_embedding(centroids[s], 1.0, bias, sim, s, u).values;
        p.label = s;
        pairs.push_back(std::move(p));
      }
    }
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.batch_size = 6;
    tcfg.gate_hidden = 8;
    tcfg.seed = 3;
    TrainResult result = train_gate(pairs, tcfg);
    save_checkpoint(ckpt, result.net, result.classifier);
  }

  std::string toml;
  toml += "[dataset]\n";
  toml += "root = \"" + d.wav_dir.string() + "\"\n";
  toml += "trials = \"" + d.trials.string() + "\"\n";
  toml += "durations = [0.5]\n";
  toml += "[[backend]]\n";
  toml += "name = \"emb\"\nkind = \"embed\"\ntransport = \"mock\"\ndim = 32\n";
  toml += "[[backend]]\n";
  toml += "name = \"mocka\"\nkind = \"tts\"\ntransport = \"mock\"\n";
  toml += "[[backend]]\n";
  toml += "name = \"mockb\"\nkind = \"tts\"\ntransport = \"mock\"\n";
  toml += "[text]\n";
  toml += "mode = \"fixed\"\n";
  toml += "texts = [\"one two\", \"three four five\", \"six seven\"]\n";
  toml += "[fusion]\n";
  toml += "methods = [\"weighted_mean\", \"two_stage\", \"multi_text\", "
          "\"attention_gate\"]\n";
  toml += "weights = [0.6]\n";
  toml += "gate_checkpoint = \"" + ckpt.string() + "\"\n";
  toml += "include_rep15 = true\n";
  toml += "[run]\n";
  toml += "out = \"" + (d.root / "out").string() + "\"\n";
  ExperimentConfig cfg = ExperimentConfig::from_toml(toml, "");
  RunSummary summary = run_experiment(cfg);
  REQUIRE(summary.ok());

  fs::path reports = cfg.out_dir / "reports" / "0.5s";
  CHECK(fs::exists(reports / "baseline.json"));
  CHECK(fs::exists(reports / "weighted_mean_w0.6__mocka__r1.json"));
  CHECK(fs::exists(reports / "two_stage_w0.6__mocka+mockb__r0.json"));
  CHECK(fs::exists(reports / "multi_text_w0.6__mockb.json"));
  CHECK(fs::exists(reports / "attention_gate__mocka__r2.json"));
  CHECK(fs::exists(reports / "rep15_w0.6.json"));
  CHECK(fs::exists(cfg.out_dir / "rep" / "0.5s" / "utt0.wav"));

  // rep15 control: the repeated segment is exactly 15 s
  AudioBuffer rep = load_wav(cfg.out_dir / "rep" / "0.5s" / "utt0.wav");
  CHECK(rep.duration_s() == doctest::Approx(15.0).epsilon(1e-6));

  // the grid aggregates every method row
  ReportTables tables = build_report(cfg.out_dir);
  CHECK(tables.grid.eer.count("two_stage_w0.6__mocka+mockb"));
  CHECK(tables.grid.eer.count("multi_text_w0.6__mockb"));
  CHECK(tables.grid.eer.count("attention_gate__mocka"));
  CHECK(tables.grid.eer.count("rep15_w0.6"));
  fs::remove_all(d.root);
}

TEST_CASE("attention_gate without a checkpoint is a config error") {
  MiniDataset d = make_dataset("ttaug_runner_nockpt", 4);
  std::string toml = runner_config(d, "out");
  toml.replace(toml.find("[\"weighted_mean\", \"addition\"]"),
               std::string("[\"weighted_mean\", \"addition\"]").size(),
               "[\"attention_gate\"]");
  ExperimentConfig cfg = ExperimentConfig::from_toml(toml, "");
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  fs::remove_all(d.root);
}

TEST_CASE("run_experiment rejects a results dir from another config") {
  MiniDataset d = make_dataset("ttaug_runner_mixed", 4);
  ExperimentConfig cfg =
      ExperimentConfig::from_toml(runner_config(d, "out"), "");
  REQUIRE(run_experiment(cfg).ok());

  std::string other_toml = runner_config(d, "out") + "\n# changed\n";
  ExperimentConfig other = ExperimentConfig::from_toml(other_toml, "");
  CHECK(other.config_hash != cfg.config_hash);
  CHECK_THROWS_AS(run_experiment(other), ConfigError);
  fs::remove_all(d.root);
}

TEST_CASE("run_experiment records failures and preserves partial results") {
  MiniDataset d = make_dataset("ttaug_runner_fail", 4);
  std::string extra =
      "[[backend]]\n"
      "name = \"deadtts\"\nkind = \"tts\"\ntransport = \"subprocess\"\n"
      "address = \"/bin/false\"\nmax_retries = 0\n";
  ExperimentConfig cfg =
      ExperimentConfig::from_toml(runner_config(d, "out", extra), "");
  RunSummary summary = run_experiment(cfg);
  CHECK(!summary.ok());
  CHECK(summary.backend_failure);

  json failures = json::parse(read_file(cfg.out_dir / "failures.json"));
  REQUIRE(failures["failures"].size() >= 1);
  const auto& f = failures["failures"][0];
  CHECK(f["backend"] == "deadtts");
  CHECK(f["stage"] == "synthesize");
  CHECK(!f["utt"].get<std::string>().empty());

  // healthy backend results survived
  CHECK(fs::exists(cfg.out_dir / "reports" / "0.5s" / "baseline.json"));
  CHECK(fs::exists(cfg.out_dir / "reports" / "0.5s" /
                   "tts_only__mocka__r0.json"));
  fs::remove_all(d.root);
}

TEST_CASE("build_report needs reports and a baseline") {
  fs::path dir = fs::temp_directory_path() / "ttaug_report_err";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK_THROWS_AS(build_report(dir), NotFoundError);

  fs::create_directories(dir / "reports" / "1s");
  CHECK_THROWS_AS(build_report(dir), NotFoundError);

  json j;
  j["config_hash"] = "cafe";
  j["duration"] = "1s";
  j["tag"] = "tts_only__x__r0";
  j["eer_percent"] = 12.0;
  write_file_atomic(dir / "reports" / "1s" / "tts_only__x__r0.json",
                    j.dump() + "\n");
  CHECK_THROWS_AS(build_report(dir), DataError);  // baseline missing

  j["tag"] = "baseline";
  write_file_atomic(dir / "reports" / "1s" / "baseline.json", j.dump() + "\n");
  ReportTables tables = build_report(dir);
  CHECK(tables.grid.at("baseline", "1s") == doctest::Approx(12.0));

  // mixed hashes rejected
  j["config_hash"] = "beef";
  j["tag"] = "tts_only__y__r0";
  write_file_atomic(dir / "reports" / "1s" / "tts_only__y__r0.json",
                    j.dump() + "\n");
  CHECK_THROWS_AS(build_report(dir), DataError);
  fs::remove_all(dir);
}

TEST_CASE("cli stages compose through the filesystem") {
  const char* cli_env = std::getenv("TTAUG_CLI");
  REQUIRE_MESSAGE(cli_env != nullptr, "TTAUG_CLI must point at the binary");
  const std::string cli = cli_env;
  fs::path dir = fs::temp_directory_path() / "ttaug_cli_pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto sh = [&](const std::string& cmd) {
    std::string full = cmd + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(full.c_str()));
  };

  // two synthetic "speakers", two utterances each
  std::vector<std::string> utts = {"s0u0", "s0u1", "s1u0", "s1u1"};
  for (size_t i = 0; i < utts.size(); ++i) {
    AudioBuffer a;
    a.sample_rate = 16000;
    a.samples.resize(32000);
    double freq = i < 2 ? 210.0 : 340.0;
    for (size_t k = 0; k < a.samples.size(); ++k) {
      a.samples[k] = 0.3f * static_cast<float>(
          std::sin(2.0 * M_PI * freq * k / 16000.0) +
          0.1 * std::sin(2.0 * M_PI * (freq * 1.7 + 13 * i) * k / 16000.0));
    }
    save_wav(a, dir / (utts[i] + ".wav"));
  }
  write_file_atomic(dir / "trials.txt",
                    "1 s0u0 s0u1\n1 s1u0 s1u1\n0 s0u0 s1u0\n0 s0u1 s1u1\n");

  fs::path store = dir / "emb.bin";
  for (const std::string& utt : utts) {
    fs::path seg = dir / (utt + ".seg.wav");
    CHECK(sh(cli + " segment --in " + (dir / (utt + ".wav")).string() +
             " --out " + seg.string() + " --duration 1.0") == 0);
    AudioBuffer cut = load_wav(seg);
    CHECK(cut.duration_s() == doctest::Approx(1.0));

    fs::path synth = dir / (utt + ".tts.wav");
    CHECK(sh(cli + " synthesize --transport mock --prompt " + seg.string() +
             " --text \"purple monkeys dishwasher\" --out " + synth.string()) ==
          0);
    CHECK(sh(cli + " embed --transport mock --dim 48 --audio " + seg.string() +
             " --utt " + utt + " --condition orig --store " + store.string()) ==
          0);
    CHECK(sh(cli + " embed --transport mock --dim 48 --audio " +
             synth.string() + " --utt " + utt +
             " --condition tts:mock:0 --store " + store.string()) == 0);
    CHECK(sh(cli + " fuse --store " + store.string() + " --out-store " +
             store.string() + " --utt " + utt +
             " --method weighted_mean --a orig --b tts:mock:0 --w 0.5") == 0);
  }

  EmbeddingStore loaded = EmbeddingStore::load(store);
  CHECK(loaded.size() == 12);  // orig + tts + fused per utterance
  CHECK(loaded.contains("s0u0", "fused:wmean"));

  fs::path scores = dir / "fused.scores";
  CHECK(sh(cli + " score --store " + store.string() + " --trials " +
           (dir / "trials.txt").string() +
           " --enroll-cond fused:wmean --test-cond fused:wmean --out " +
           scores.string()) == 0);
  CHECK(sh(cli + " eer --scores " + scores.string() + " --trials " +
           (dir / "trials.txt").string() + " --out " +
           (dir / "report.json").string()) == 0);
  EvalReport report =
      EvalReport::from_json(read_file(dir / "report.json"));
  CHECK(report.n_target == 2);
  CHECK(report.n_nontarget == 2);

  fs::path sweep_csv = dir / "sweep.csv";
  CHECK(sh(cli + " sweep --store " + store.string() + " --trials " +
           (dir / "trials.txt").string() +
           " --tts-cond tts:mock:0 --weights 0,0.5,1 --out " +
           sweep_csv.string()) == 0);
  std::string csv = read_file(sweep_csv);
  CHECK(csv.find("w,eer_percent") != std::string::npos);

  // train-gate consumes the same store via a pairs file
  write_file_atomic(dir / "pairs.txt",
                    "s0u0 0\ns0u1 0\ns1u0 1\ns1u1 1\n");
  CHECK(sh(cli + " train-gate --store " + store.string() + " --pairs " +
           (dir / "pairs.txt").string() + " --gen-cond tts:mock:0 --out " +
           (dir / "gate.ckpt").string() +
           " --epochs 2 --batch 2 --hidden 4 --log " +
           (dir / "train.csv").string()) == 0);
  auto [net, clf] = load_checkpoint(dir / "gate.ckpt");
  CHECK(net.dim() == 48);
  CHECK(clf.num_speakers == 2);
  CHECK(read_file(dir / "train.csv").rfind("epoch,split,loss,accuracy", 0) ==
        0);

  fs::remove_all(dir);
}

TEST_CASE("cli binary: eer, phoneme-report, config error exit codes") {
  const char* cli = std::getenv("TTAUG_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "TTAUG_CLI must point at the ttaug binary");
  fs::path dir = fs::temp_directory_path() / "ttaug_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  write_file_atomic(dir / "trials.txt", "1 a b\n0 a c\n1 d e\n0 d f\n");
  write_file_atomic(dir / "scores.txt",
                    "a b 0.9\na c 0.1\nd e 0.8\nd f 0.2\n");
  std::string eer_cmd = std::string(cli) + " eer --scores " +
                        (dir / "scores.txt").string() + " --trials " +
                        (dir / "trials.txt").string() + " --out " +
                        (dir / "report.json").string() + " > /dev/null";
  CHECK(std::system(eer_cmd.c_str()) == 0);
  EvalReport r = EvalReport::from_json(read_file(dir / "report.json"));
  CHECK(r.eer_percent == doctest::Approx(0.0));

  std::string phon_cmd = std::string(cli) + " phoneme-report --dict " +
                         (fs::path(TTAUG_DATA_DIR) / "cmudict_fixture.txt")
                             .string() +
                         " --text \"the cat\" > " +
                         (dir / "phon.json").string();
  CHECK(std::system(phon_cmd.c_str()) == 0);
  CHECK(read_file(dir / "phon.json").find("\"distinct_count\": 5") !=
        std::string::npos);

  write_file_atomic(dir / "bad.toml", "[run]\njobs = 0\n");
  std::string bad_cmd = std::string(cli) + " run --config " +
                        (dir / "bad.toml").string() + " 2> /dev/null";
  int rc = std::system(bad_cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);

  std::string missing_cmd = std::string(cli) + " eer --scores /no/file" +
                            " --trials /no/trials 2> /dev/null";
  rc = std::system(missing_cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 4);

  fs::remove_all(dir);
}
