#include <doctest.h>

#include <cmath>

#include "ttaug/errors.hpp"
#include "ttaug/fusion.hpp"
#include "ttaug/scoring.hpp"
#include "ttaug/util.hpp"

using namespace ttaug;

namespace {

Embedding emb(std::vector<float> v, const std::string& utt = "u1") {
  return Embedding{utt, "orig", std::move(v)};
}

Embedding random_emb(Rng& rng, int dim, const std::string& utt = "u1") {
  std::vector<float> v(static_cast<size_t>(dim));
  for (float& x : v) x = static_cast<float>(rng.next_gaussian());
  return emb(std::move(v), utt);
}

}  // namespace

TEST_CASE("fuse_addition: collinear, orthogonal, cancellation") {
  Embedding u = emb({1.0f, 0.0f});
  Embedding sum = fuse_addition(u, u);
  CHECK(sum.condition == "fused:add");
  CHECK(cosine_score(sum.values, u.values) == doctest::Approx(1.0));

  Embedding a = emb({1.0f, 0.0f});
  Embedding b = emb({0.0f, 1.0f});
  Embedding ab = fuse_addition(a, b);
  CHECK(cosine_score(ab.values, a.values) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

  Embedding neg = emb({-1.0f, 0.0f});
  Embedding zero = fuse_addition(a, neg);
  // cancellation passes through; scoring rejects the zero vector
  CHECK_THROWS_AS(cosine_score(zero.values, a.values), DegenerateInputError);

  CHECK_THROWS_AS(fuse_addition(a, emb({1.0f, 2.0f, 3.0f})),
                  DimMismatchError);
  CHECK_THROWS_AS(fuse_addition(a, emb({0.0f, 1.0f}, "other-utt")),
                  DataError);
}

TEST_CASE("fuse_concat: layout and self/half-cancellation scores") {
  Embedding a = emb({1.0f, 0.0f});
  Embedding b = emb({0.0f, 1.0f});
  Embedding cat = fuse_concat(a, b);
  CHECK(cat.dim() == 4);
  CHECK(cat.condition == "fused:concat");
  CHECK(l2_norm(cat.values) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(cat.values[0] == doctest::Approx(1.0f));
  CHECK(cat.values[3] == doctest::Approx(1.0f));

  CHECK(cosine_score(cat.values, cat.values) == doctest::Approx(1.0));

  Embedding negb = emb({0.0f, -1.0f});
  Embedding cat2 = fuse_concat(a, negb);
  CHECK(cosine_score(cat.values, cat2.values) ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("concatenation scoring identity on random pairs") {
  Rng rng(41);
  for (int it = 0; it < 30; ++it) {
    Embedding a = random_emb(rng, 48), b = random_emb(rng, 48);
    Embedding a2 = random_emb(rng, 48), b2 = random_emb(rng, 48);
    double lhs = cosine_score(fuse_concat(a, b).values,
                              fuse_concat(a2, b2).values);
    double rhs = 0.5 * (cosine_score(l2_normalize(a.values),
                                     l2_normalize(a2.values)) +
                        cosine_score(l2_normalize(b.values),
                                     l2_normalize(b2.values)));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("fuse_weighted boundaries and analytic midpoint") {
  Rng rng(42);
  Embedding b = random_emb(rng, 32);
  Embedding g = random_emb(rng, 32);
  Embedding probe = random_emb(rng, 32, "probe");

  Embedding at1 = fuse_weighted(b, g, 1.0);
  CHECK(cosine_score(at1.values, probe.values) ==
        doctest::Approx(cosine_score(b.values, probe.values)).epsilon(1e-6));
  Embedding at0 = fuse_weighted(b, g, 0.0);
  CHECK(cosine_score(at0.values, probe.values) ==
        doctest::Approx(cosine_score(g.values, probe.values)).epsilon(1e-6));

  Embedding ax = emb({1.0f, 0.0f});
  Embedding ay = emb({0.0f, 1.0f});
  Embedding mid = fuse_weighted(ax, ay, 0.5);
  CHECK(cosine_score(mid.values, ax.values) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

  CHECK_THROWS_AS(fuse_weighted(b, g, 1.5), DataError);
  CHECK_THROWS_AS(fuse_weighted(b, g, -0.1), DataError);
  Embedding negx = emb({-1.0f, 0.0f});
  CHECK_THROWS_AS(fuse_weighted(ax, negx, 0.5), DegenerateInputError);
}

TEST_CASE("fuse_weighted exchange symmetry is exact on dyadic weights") {
  Rng rng(43);
  for (int it = 0; it < 40; ++it) {
    Embedding a = random_emb(rng, 24);
    Embedding b = random_emb(rng, 24);
    double w = static_cast<double>(rng.next_below(257)) / 256.0;
    Embedding lhs = fuse_weighted(a, b, w);
    Embedding rhs = fuse_weighted(b, a, 1.0 - w);
    CHECK(lhs.values == rhs.values);
  }
}

TEST_CASE("addition and weighted(0.5) agree under cosine") {
  Rng rng(44);
  for (int it = 0; it < 30; ++it) {
    Embedding a = random_emb(rng, 64);
    Embedding b = random_emb(rng, 64);
    Embedding probe = random_emb(rng, 64, "p");
    double s_add = cosine_score(fuse_addition(a, b).values, probe.values);
    double s_mid = cosine_score(fuse_weighted(a, b, 0.5).values, probe.values);
    CHECK(s_add == doctest::Approx(s_mid).epsilon(1e-6));
  }
}

TEST_CASE("scaling inputs never moves fused cosine scores") {
  Rng rng(45);
  FusionConfig cfg;  // normalize_inputs = true
  for (int it = 0; it < 20; ++it) {
    Embedding a = random_emb(rng, 32);
    Embedding b = random_emb(rng, 32);
    Embedding probe = random_emb(rng, 32, "p");
    Embedding a_scaled = a;
    float c = static_cast<float>(0.01 + 50.0 * rng.next_unit());
    for (float& v : a_scaled.values) v *= c;

    for (double w : {0.25, 0.5, 0.75}) {
      double s1 =
          cosine_score(fuse_weighted(a, b, w, cfg).values, probe.values);
      double s2 = cosine_score(fuse_weighted(a_scaled, b, w, cfg).values,
                               probe.values);
      CHECK(s1 == doctest::Approx(s2).epsilon(1e-6));
    }
    double add1 = cosine_score(fuse_addition(a, b, cfg).values, probe.values);
    double add2 =
        cosine_score(fuse_addition(a_scaled, b, cfg).values, probe.values);
    CHECK(add1 == doctest::Approx(add2).epsilon(1e-6));
  }
}

TEST_CASE("gate_forward: zero parameters give the exact midpoint") {
  Rng rng(46);
  GateNetwork net(16, 8);  // all-zero
  Embedding b = random_emb(rng, 16);
  Embedding g = random_emb(rng, 16);
  GateResult r = gate_forward(net, b, g);
  for (double z : r.gate) CHECK(z == doctest::Approx(0.5).epsilon(1e-12));
  Embedding mid = fuse_weighted(b, g, 0.5);
  for (int i = 0; i < 16; ++i) {
    CHECK(r.fused.values[i] ==
          doctest::Approx(mid.values[i]).epsilon(1e-6));
  }
  CHECK(r.fused.condition == "fused:gate");
}

TEST_CASE("gate_forward: identical inputs pass through any gate") {
  Rng rng(47);
  GateNetwork net = GateNetwork::random_init(12, 6, 99);
  Embedding v = random_emb(rng, 12);
  GateResult r = gate_forward(net, v, v);
  std::vector<float> expect = l2_normalize(v.values);
  for (int i = 0; i < 12; ++i) {
    CHECK(r.fused.values[i] == doctest::Approx(expect[i]).epsilon(1e-6));
  }
  for (double z : r.gate) {
    CHECK(z > 0.0);
    CHECK(z < 1.0);
  }
}

TEST_CASE("gate_forward: saturated bias selects the bona-fide side") {
  Rng rng(48);
  GateNetwork net(8, 4);
  for (double& v : net.b2) v = 40.0;  // sigmoid ~ 1
  Embedding b = random_emb(rng, 8);
  Embedding g = random_emb(rng, 8);
  GateResult r = gate_forward(net, b, g);
  std::vector<float> expect = l2_normalize(b.values);
  for (int i = 0; i < 8; ++i) {
    CHECK(r.fused.values[i] == doctest::Approx(expect[i]).epsilon(1e-6));
  }
}

TEST_CASE("gate_forward shape checks") {
  GateNetwork net(8, 4);
  Rng rng(49);
  Embedding b = random_emb(rng, 8);
  Embedding wrong = random_emb(rng, 10);
  CHECK_THROWS_AS(gate_forward(net, b, wrong), DimMismatchError);
  CHECK_THROWS_AS(gate_forward(net, wrong, wrong), DimMismatchError);
}

TEST_CASE("two_stage_fuse boundaries and degenerate inner") {
  Rng rng(50);
  Embedding g1 = random_emb(rng, 16);
  Embedding g2 = random_emb(rng, 16);
  Embedding b = random_emb(rng, 16);
  Embedding probe = random_emb(rng, 16, "p");

  Embedding all_b = two_stage_fuse(g1, g2, b, 0.5, 1.0);
  CHECK(all_b.condition == "fused:two_stage");
  CHECK(cosine_score(all_b.values, probe.values) ==
        doctest::Approx(cosine_score(b.values, probe.values)).epsilon(1e-6));

  // identical generators reduce to a single weighted fuse
  Embedding same = two_stage_fuse(g1, g1, b, 0.3, 0.6);
  Embedding direct = fuse_weighted(b, g1, 0.6);
  CHECK(cosine_score(same.values, probe.values) ==
        doctest::Approx(cosine_score(direct.values, probe.values))
            .epsilon(1e-6));

  CHECK(kDefaultTwoStageOuterWeight == doctest::Approx(0.6));
  Embedding defaults = two_stage_fuse(g1, g2, b);
  Embedding explicit_args = two_stage_fuse(g1, g2, b, 0.5, 0.6);
  CHECK(defaults.values == explicit_args.values);
}

TEST_CASE("fuse_multi_text means the generators") {
  Rng rng(51);
  Embedding b = random_emb(rng, 16);
  Embedding g = random_emb(rng, 16);
  Embedding probe = random_emb(rng, 16, "p");

  Embedding one = fuse_multi_text(b, {g}, 0.6);
  Embedding direct = fuse_weighted(b, g, 0.6);
  CHECK(one.condition == "fused:multi");
  CHECK(cosine_score(one.values, probe.values) ==
        doctest::Approx(cosine_score(direct.values, probe.values))
            .epsilon(1e-6));

  Embedding three = fuse_multi_text(b, {g, g, g}, 0.6);
  CHECK(cosine_score(three.values, probe.values) ==
        doctest::Approx(cosine_score(direct.values, probe.values))
            .epsilon(1e-6));

  // {g, -g, g}: the mean keeps direction g; normalization restores it
  Embedding neg = g;
  for (float& v : neg.values) v = -v;
  Embedding mixed = fuse_multi_text(b, {g, neg, g}, 0.6);
  CHECK(cosine_score(mixed.values, probe.values) ==
        doctest::Approx(cosine_score(direct.values, probe.values))
            .epsilon(1e-6));

  CHECK_THROWS_AS(fuse_multi_text(b, {}, 0.5), DataError);
}

TEST_CASE("gate checkpoint serialization round trips") {
  GateNetwork net = GateNetwork::random_init(12, 6, 1234);
  std::string bytes = net.serialize();
  GateNetwork back = GateNetwork::parse(bytes);
  // parse yields float-valued parameters; a second serialize is identical
  CHECK(back.serialize() == bytes);
  CHECK(back.dim() == 12);
  CHECK(back.hidden() == 6);

  std::string corrupt = bytes;
  corrupt[corrupt.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(GateNetwork::parse(corrupt), CorruptionError);
  CHECK_THROWS_AS(GateNetwork::parse(bytes.substr(0, bytes.size() - 3)),
                  CorruptionError);
  CHECK_THROWS_AS(GateNetwork::parse("JUNK"), CorruptionError);
}

TEST_CASE("fusion method names round trip") {
  for (FusionMethod m :
       {FusionMethod::kAddition, FusionMethod::kConcatenation,
        FusionMethod::kWeightedMean, FusionMethod::kAttentionGate,
        FusionMethod::kTwoStage, FusionMethod::kMultiText}) {
    CHECK(fusion_method_from_name(fusion_method_name(m)) == m);
  }
  CHECK_THROWS_AS(fusion_method_from_name("bogus"), ConfigError);
}
