#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "ttaug/errors.hpp"
#include "ttaug/scoring.hpp"
#include "ttaug/sim.hpp"

using namespace ttaug;

namespace {

SimConfig small_cfg() {
  SimConfig cfg;
  cfg.num_speakers = 6;
  cfg.utts_per_speaker = 6;
  cfg.dim = 64;
  cfg.sigma0 = 1.5;
  cfg.alpha = 0.9;
  cfg.beta = 0.2;
  cfg.durations = {0.5, 2.0};
  cfg.seed = 11;
  return cfg;
}

double mean_cos_to_centroid(const SimConfig& cfg, double duration,
                            int n_draws) {
  auto centroids = gen_speakers(cfg);
  double acc = 0.0;
  int made = 0;
  for (int u = 0; u < n_draws; ++u) {
    int s = u % cfg.num_speakers;
    Embedding e = gen_observation(centroids[s], duration, cfg, s, u);
    std::vector<float> c(cfg.dim);
    for (int i = 0; i < cfg.dim; ++i) c[i] = static_cast<float>(centroids[s][i]);
    acc += cosine_score(e.values, c);
    ++made;
  }
  return acc / made;
}

}  // namespace

TEST_CASE("gen_speakers: deterministic unit centroids, near-orthogonal") {
  SimConfig cfg;
  cfg.num_speakers = 40;
  cfg.utts_per_speaker = 2;
  cfg.dim = 192;
  cfg.seed = 123;
  auto a = gen_speakers(cfg);
  auto b = gen_speakers(cfg);
  REQUIRE(a.size() == 40);
  CHECK(a == b);
  for (const auto& c : a) {
    double norm2 = 0.0;
    for (double x : c) norm2 += x * x;
    CHECK(std::abs(std::sqrt(norm2) - 1.0) < 1e-6);
  }
  int high = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = i + 1; j < a.size(); ++j) {
      double dot = 0.0;
      for (int k = 0; k < cfg.dim; ++k) dot += a[i][k] * a[j][k];
      if (std::abs(dot) >= 0.5) ++high;
    }
  }
  CHECK(high == 0);

  SimConfig other = cfg;
  other.seed = 124;
  CHECK(gen_speakers(other) != a);
}

TEST_CASE("gen_observation: noiseless limit recovers the centroid") {
  SimConfig cfg = small_cfg();
  cfg.sigma0 = 1e-9;
  auto centroids = gen_speakers(cfg);
  Embedding e = gen_observation(centroids[0], 1.0, cfg, 0, 0);
  std::vector<float> c(cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) c[i] = static_cast<float>(centroids[0][i]);
  CHECK(cosine_score(e.values, c) > 0.9999);
}

TEST_CASE("gen_observation: cosine to centroid grows with duration") {
  SimConfig cfg = small_cfg();
  double short_cos = mean_cos_to_centroid(cfg, 0.5, 600);
  double mid_cos = mean_cos_to_centroid(cfg, 2.0, 600);
  double long_cos = mean_cos_to_centroid(cfg, 8.0, 600);
  CHECK(short_cos < mid_cos);
  CHECK(mid_cos < long_cos);
}

TEST_CASE("gen_observation: distinct utterances, same distribution") {
  SimConfig cfg = small_cfg();
  auto centroids = gen_speakers(cfg);
  Embedding u0 = gen_observation(centroids[0], 1.0, cfg, 0, 0);
  Embedding u1 = gen_observation(centroids[0], 1.0, cfg, 0, 1);
  CHECK(u0.values != u1.values);
  Embedding again = gen_observation(centroids[0], 1.0, cfg, 0, 0);
  CHECK(u0.values == again.values);
}

TEST_CASE("gen_tts_embedding fidelity limits") {
  SimConfig cfg = small_cfg();
  cfg.tts_noise = 1e-6;
  cfg.beta = 0.0;
  cfg.alpha = 1.0;
  auto centroids = gen_speakers(cfg);
  auto bias = backend_bias(cfg, "x");
  std::vector<float> c(cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) c[i] = static_cast<float>(centroids[0][i]);

  // long prompt, perfect fidelity, tiny noise -> clone of the centroid
  Embedding good = gen_tts_embedding(centroids[0], 20.0, bias, cfg, 0, 0);
  CHECK(cosine_score(good.values, c) > 0.999);

  // alpha = 0: no speaker information at all
  SimConfig blind = small_cfg();
  blind.alpha = 0.0;
  blind.beta = 0.3;
  auto blind_centroids = gen_speakers(blind);
  double acc = 0.0;
  for (int s = 0; s < blind.num_speakers; ++s) {
    Embedding e = gen_tts_embedding(blind_centroids[s], 2.0, bias, blind, s, 0);
    std::vector<float> cs(blind.dim);
    for (int i = 0; i < blind.dim; ++i) {
      cs[i] = static_cast<float>(blind_centroids[s][i]);
    }
    acc += cosine_score(e.values, cs);
  }
  CHECK(std::abs(acc / blind.num_speakers) < 0.15);
}

TEST_CASE("gen_tts_embedding: fidelity increases with prompt duration") {
  SimConfig cfg = small_cfg();
  auto centroids = gen_speakers(cfg);
  auto bias = backend_bias(cfg, "x");
  std::vector<float> c(cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) c[i] = static_cast<float>(centroids[0][i]);
  double short_acc = 0.0, long_acc = 0.0;
  for (int u = 0; u < 200; ++u) {
    short_acc += cosine_score(
        gen_tts_embedding(centroids[0], 0.5, bias, cfg, 0, u).values, c);
    long_acc += cosine_score(
        gen_tts_embedding(centroids[0], 2.0, bias, cfg, 0, u).values, c);
  }
  CHECK(short_acc < long_acc);
}

TEST_CASE("sim_trials: balanced, deterministic, cross-speaker nontargets") {
  SimConfig cfg = small_cfg();
  auto trials = sim_trials(cfg);
  size_t targets = 0, nontargets = 0;
  for (const Trial& t : trials) (t.target ? targets : nontargets)++;
  CHECK(targets == 6 * 15);  // C(6,2) per speaker
  CHECK(targets == nontargets);
  for (const Trial& t : trials) {
    if (!t.target) {
      CHECK(t.enroll_id.substr(0, 4) != t.test_id.substr(0, 4));
    }
  }
  CHECK(sim_trials(cfg) == std::vector<Trial>(trials));
}

TEST_CASE("run_sim_experiment: deterministic CSV, boundary consistency") {
  SimConfig cfg = small_cfg();
  SimGrid grid;
  grid.weights = {0.5, 1.0};
  auto rows = run_sim_experiment(cfg, grid);
  auto rows2 = run_sim_experiment(cfg, grid);
  CHECK(sim_rows_csv(rows) == sim_rows_csv(rows2));

  std::map<std::pair<double, std::string>, double> by_key;
  std::map<std::pair<double, double>, double> weighted;
  for (const auto& r : rows) {
    if (r.method == "baseline") by_key[{r.duration_s, "baseline"}] = r.eer_percent;
    if (r.method == "weighted_mean:simtts") {
      weighted[{r.duration_s, r.w}] = r.eer_percent;
    }
  }
  for (double d : cfg.durations) {
    REQUIRE(by_key.count({d, "baseline"}));
    REQUIRE(weighted.count({d, 1.0}));
    // w = 1 row equals the baseline row exactly (shared code path)
    CHECK(weighted[{d, 1.0}] == by_key[{d, "baseline"}]);
  }
}

TEST_CASE("run_sim_experiment: tts-only EER is nonincreasing in alpha") {
  // fidelity ordering over alpha grid, one inversion tolerated per seed
  for (uint64_t seed : {21ull, 22ull, 23ull}) {
    std::vector<double> eers;
    for (double alpha : {0.0, 0.3, 0.6, 0.9}) {
      SimConfig cfg = small_cfg();
      cfg.seed = seed;
      cfg.alpha = alpha;
      cfg.durations = {1.0};
      SimGrid grid;
      grid.methods = {};
      auto rows = run_sim_experiment(cfg, grid);
      for (const auto& r : rows) {
        if (r.method == "tts_only:simtts") eers.push_back(r.eer_percent);
      }
    }
    REQUIRE(eers.size() == 4);
    int inversions = 0;
    for (size_t i = 0; i + 1 < eers.size(); ++i) {
      if (eers[i + 1] > eers[i] + 1e-9) ++inversions;
    }
    CHECK(inversions <= 1);
  }
}

TEST_CASE("run_sim_experiment: uninformative TTS never beats baseline") {
  SimConfig cfg = small_cfg();
  cfg.num_speakers = 10;
  cfg.utts_per_speaker = 8;
  cfg.alpha = 0.0;
  cfg.beta = 0.3;
  cfg.durations = {1.0};
  cfg.seed = 501;
  SimGrid grid;
  grid.weights = {0.25, 0.5, 0.75};
  auto rows = run_sim_experiment(cfg, grid);
  double baseline = -1.0;
  for (const auto& r : rows) {
    if (r.method == "baseline") baseline = r.eer_percent;
  }
  REQUIRE(baseline >= 0.0);
  for (const auto& r : rows) {
    if (r.method == "weighted_mean:simtts" && r.w < 1.0) {
      CHECK(r.eer_percent >= baseline - 1e-9);
    }
    if (r.method == "tts_only:simtts") {
      CHECK(r.eer_percent >= baseline - 1e-9);
    }
  }
}

TEST_CASE("weight sweep on high-fidelity sim data bottoms out inside (0,1)") {
  SimConfig cfg;
  cfg.num_speakers = 30;
  cfg.utts_per_speaker = 12;
  cfg.alpha = 0.9;
  cfg.seed = 42;
  cfg.durations = {0.5};
  EmbeddingStore store = sim_store(cfg, 0.5, 1);
  std::vector<Trial> trials = sim_trials(cfg);
  auto rows = weight_sweep(trials, store, "orig", "tts:simtts:0",
                           {0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0});
  size_t best = 0;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].eer_percent < rows[best].eer_percent) best = i;
  }
  CHECK(rows[best].w > 0.0);
  CHECK(rows[best].w < 1.0);
  CHECK(rows[best].eer_percent < rows.front().eer_percent);
  CHECK(rows[best].eer_percent < rows.back().eer_percent);
}

TEST_CASE("run_sim_experiment covers the full method grid") {
  SimConfig cfg = small_cfg();
  cfg.backend_names = {"tts_a", "tts_b"};
  cfg.durations = {1.0};
  SimGrid grid;
  grid.methods = {FusionMethod::kWeightedMean, FusionMethod::kAddition,
                  FusionMethod::kConcatenation, FusionMethod::kTwoStage,
                  FusionMethod::kMultiText};
  grid.weights = {0.6};
  auto rows = run_sim_experiment(cfg, grid);
  std::set<std::string> methods;
  for (const auto& r : rows) methods.insert(r.method);
  CHECK(methods.count("baseline"));
  CHECK(methods.count("tts_only:tts_a"));
  CHECK(methods.count("tts_only:tts_b"));
  CHECK(methods.count("weighted_mean:tts_a"));
  CHECK(methods.count("addition:tts_a"));
  CHECK(methods.count("concatenation:tts_b"));
  CHECK(methods.count("two_stage:tts_a+tts_b"));
  CHECK(methods.count("multi_text:tts_a"));
}

TEST_CASE("sim config validation") {
  SimConfig cfg = small_cfg();
  cfg.num_speakers = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.sigma0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.durations = {};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.prompt_noise_corr = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.tts_noise = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
