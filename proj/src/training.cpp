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

#include "ttaug/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

constexpr char kAamMagic[5] = {'A', 'A', 'M', 'C', '1'};
constexpr double kSinFloor = 1e-12;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Double-precision gate forward with all intermediates kept for backprop.
struct GateTape {
  std::vector<double> x;   // [e_b; e_g], 2d
  std::vector<double> h;   // tanh layer, hidden
  std::vector<double> z;   // sigmoid gate, d
  std::vector<double> es;  // fused embedding, d
};

GateTape gate_forward_tape(const GateNetwork& net,
                           const std::vector<double>& e_b,
                           const std::vector<double>& e_g) {
  const int d = net.dim();
  const int hidden = net.hidden();
  if (static_cast<int>(e_b.size()) != d ||
      static_cast<int>(e_g.size()) != d) {
    throw DimMismatchError("gate training: embedding dim mismatch");
  }
  GateTape t;
  t.x.resize(2 * static_cast<size_t>(d));
  std::copy(e_b.begin(), e_b.end(), t.x.begin());
  std::copy(e_g.begin(), e_g.end(), t.x.begin() + d);
  t.h.resize(static_cast<size_t>(hidden));
  for (int j = 0; j < hidden; ++j) {
    double acc = net.b1[static_cast<size_t>(j)];
    const double* row = net.w1.data() + static_cast<size_t>(j) * 2 * d;
    for (int i = 0; i < 2 * d; ++i) acc += row[i] * t.x[static_cast<size_t>(i)];
    t.h[static_cast<size_t>(j)] = std::tanh(acc);
  }
  t.z.resize(static_cast<size_t>(d));
  t.es.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    double acc = net.b2[static_cast<size_t>(i)];
    const double* row = net.w2.data() + static_cast<size_t>(i) * hidden;
    for (int j = 0; j < hidden; ++j) acc += row[j] * t.h[static_cast<size_t>(j)];
    double z = sigmoid(acc);
    t.z[static_cast<size_t>(i)] = z;
    t.es[static_cast<size_t>(i)] =
        z * e_b[static_cast<size_t>(i)] + (1.0 - z) * e_g[static_cast<size_t>(i)];
  }
  return t;
}

struct GateGrads {
  std::vector<double> w1, b1, w2, b2;

  explicit GateGrads(const GateNetwork& net)
      : w1(net.w1.size(), 0.0),
        b1(net.b1.size(), 0.0),
        w2(net.w2.size(), 0.0),
        b2(net.b2.size(), 0.0) {}

  void accumulate(const GateGrads& other) {
    for (size_t i = 0; i < w1.size(); ++i) w1[i] += other.w1[i];
    for (size_t i = 0; i < b1.size(); ++i) b1[i] += other.b1[i];
    for (size_t i = 0; i < w2.size(); ++i) w2[i] += other.w2[i];
    for (size_t i = 0; i < b2.size(); ++i) b2[i] += other.b2[i];
  }
};

// Backprop dL/d e_s through the gated blend and the gate MLP.
GateGrads gate_backward(const GateNetwork& net, const GateTape& t,
                        const std::vector<double>& e_b,
                        const std::vector<double>& e_g,
                        const std::vector<double>& grad_es) {
  const int d = net.dim();
  const int hidden = net.hidden();
  GateGrads g(net);
  // dL/da2 where z = sigmoid(a2)
  std::vector<double> d_a2(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    double dz = grad_es[static_cast<size_t>(i)] *
                (e_b[static_cast<size_t>(i)] - e_g[static_cast<size_t>(i)]);
    double z = t.z[static_cast<size_t>(i)];
    d_a2[static_cast<size_t>(i)] = dz * z * (1.0 - z);
  }
  std::vector<double> d_h(static_cast<size_t>(hidden), 0.0);
  for (int i = 0; i < d; ++i) {
    const double di = d_a2[static_cast<size_t>(i)];
    double* w2row = g.w2.data() + static_cast<size_t>(i) * hidden;
    const double* w2net = net.w2.data() + static_cast<size_t>(i) * hidden;
    for (int j = 0; j < hidden; ++j) {
      w2row[j] += di * t.h[static_cast<size_t>(j)];
      d_h[static_cast<size_t>(j)] += di * w2net[j];
    }
    g.b2[static_cast<size_t>(i)] = di;
  }
  for (int j = 0; j < hidden; ++j) {
    double h = t.h[static_cast<size_t>(j)];
    double d_a1 = d_h[static_cast<size_t>(j)] * (1.0 - h * h);
    g.b1[static_cast<size_t>(j)] = d_a1;
    double* w1row = g.w1.data() + static_cast<size_t>(j) * 2 * d;
    for (int i = 0; i < 2 * d; ++i) {
      w1row[i] += d_a1 * t.x[static_cast<size_t>(i)];
    }
  }
  return g;
}

double linf(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double tensor_rel_error(const std::vector<double>& analytic,
                        const std::vector<double>& numeric) {
  std::vector<double> diff(analytic.size());
  for (size_t i = 0; i < analytic.size(); ++i) {
    diff[i] = analytic[i] - numeric[i];
  }
  double denom = std::max({linf(analytic), linf(numeric), 1e-8});
  return linf(diff) / denom;
}

}  // namespace

AamClassifier AamClassifier::from_class_means(
    const std::vector<std::vector<float>>& embeddings,
    const std::vector<int>& labels, int num_speakers, double margin,
    double scale) {
  if (embeddings.empty() || embeddings.size() != labels.size()) {
    throw DataError("classifier init: empty or mismatched inputs");
  }
  const int d = static_cast<int>(embeddings.front().size());
  AamClassifier clf;
  clf.dim = d;
  clf.num_speakers = num_speakers;
  clf.margin = margin;
  clf.scale = scale;
  clf.weights.assign(static_cast<size_t>(num_speakers) * d, 0.0);
  std::vector<int> counts(static_cast<size_t>(num_speakers), 0);
  for (size_t k = 0; k < embeddings.size(); ++k) {
    int y = labels[k];
    if (y < 0 || y >= num_speakers) {
      throw DataError("classifier init: label out of range");
    }
    if (static_cast<int>(embeddings[k].size()) != d) {
      throw DimMismatchError("classifier init: embedding dim mismatch");
    }
    double* row = clf.weights.data() + static_cast<size_t>(y) * d;
    for (int i = 0; i < d; ++i) row[i] += embeddings[k][static_cast<size_t>(i)];
    ++counts[static_cast<size_t>(y)];
  }
  for (int y = 0; y < num_speakers; ++y) {
    if (counts[static_cast<size_t>(y)] == 0) {
      throw DataError("classifier init: speaker " + std::to_string(y) +
                      " has no embeddings");
    }
  }
  clf.renormalize_rows();
  return clf;
}

AamClassifier AamClassifier::from_store_file(
    const std::filesystem::path& path,
    const std::vector<std::string>& speaker_names, double margin,
    double scale) {
  EmbeddingStore store = EmbeddingStore::load(path);
  AamClassifier clf;
  clf.dim = store.dim();
  clf.num_speakers = static_cast<int>(speaker_names.size());
  clf.margin = margin;
  clf.scale = scale;
  clf.weights.assign(static_cast<size_t>(clf.num_speakers) * clf.dim, 0.0);
  auto keys = store.keys();
  for (int y = 0; y < clf.num_speakers; ++y) {
    const std::string& name = speaker_names[static_cast<size_t>(y)];
    const Embedding* found = nullptr;
    for (const auto& [utt, cond] : keys) {
      if (utt != name) continue;
      if (found != nullptr) {
        throw DataError("classifier init: multiple records for speaker '" +
                        name + "' in " + path.string());
      }
      found = &store.get(utt, cond);
    }
    if (found == nullptr) {
      throw NotFoundError("classifier init: no record for speaker '" + name +
                          "' in " + path.string());
    }
    double* row = clf.weights.data() + static_cast<size_t>(y) * clf.dim;
    for (int i = 0; i < clf.dim; ++i) {
      row[i] = static_cast<double>(found->values[static_cast<size_t>(i)]);
    }
  }
  clf.renormalize_rows();
  return clf;
}

double AamClassifier::row_norm(int row) const {
  const double* r = weights.data() + static_cast<size_t>(row) * dim;
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) acc += r[i] * r[i];
  return std::sqrt(acc);
}

void AamClassifier::renormalize_rows() {
  for (int y = 0; y < num_speakers; ++y) {
    double* row = weights.data() + static_cast<size_t>(y) * dim;
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) acc += row[i] * row[i];
    if (!(acc > 0.0)) {
      throw DegenerateInputError("classifier: zero row " + std::to_string(y));
    }
    // Already unit: leave bits alone so zero-lr steps are true no-ops.
    if (std::abs(acc - 1.0) < 1e-12) continue;
    double inv = 1.0 / std::sqrt(acc);
    for (int i = 0; i < dim; ++i) row[i] *= inv;
  }
}

AamLossResult aam_loss(const std::vector<double>& e_s, int label,
                       const AamClassifier& clf) {
  const int d = clf.dim;
  const int S = clf.num_speakers;
  if (static_cast<int>(e_s.size()) != d) {
    throw DimMismatchError("aam_loss: embedding dim " +
                           std::to_string(e_s.size()) + " vs classifier dim " +
                           std::to_string(d));
  }
  if (label < 0 || label >= S) {
    throw DataError("aam_loss: label " + std::to_string(label) +
                    " out of range [0, " + std::to_string(S) + ")");
  }
  double e_norm2 = 0.0;
  for (double v : e_s) e_norm2 += v * v;
  if (!(e_norm2 > 0.0)) {
    throw DegenerateInputError("aam_loss: zero embedding");
  }
  const double e_norm = std::sqrt(e_norm2);

  std::vector<double> cosines(static_cast<size_t>(S));
  std::vector<double> w_norms(static_cast<size_t>(S));
  std::vector<double> logits(static_cast<size_t>(S));
  int predicted = 0;
  for (int j = 0; j < S; ++j) {
    const double* row = clf.weights.data() + static_cast<size_t>(j) * d;
    double dot = 0.0, wn2 = 0.0;
    for (int i = 0; i < d; ++i) {
      dot += row[i] * e_s[static_cast<size_t>(i)];
      wn2 += row[i] * row[i];
    }
    double wn = std::sqrt(wn2);
    w_norms[static_cast<size_t>(j)] = wn;
    double c = std::clamp(dot / (wn * e_norm), -1.0, 1.0);
    cosines[static_cast<size_t>(j)] = c;
    logits[static_cast<size_t>(j)] = clf.scale * c;
    if (c > cosines[static_cast<size_t>(predicted)]) predicted = j;
  }
  const double cos_y = cosines[static_cast<size_t>(label)];
  const double sin_y = std::sqrt(std::max(0.0, 1.0 - cos_y * cos_y));
  const double cos_m = std::cos(clf.margin);
  const double sin_m = std::sin(clf.margin);
  logits[static_cast<size_t>(label)] =
      clf.scale * (cos_y * cos_m - sin_y * sin_m);

  double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - max_logit);
  const double log_sum = std::log(sum) + max_logit;

  AamLossResult out;
  out.loss = log_sum - logits[static_cast<size_t>(label)];
  out.predicted = predicted;
  out.grad_embedding.assign(static_cast<size_t>(d), 0.0);
  out.grad_weights.assign(static_cast<size_t>(S) * d, 0.0);

  // d cos(theta_y + m) / d cos(theta_y) = cos m + sin m * cos / sin
  const double margin_slope =
      cos_m + sin_m * cos_y / std::max(sin_y, kSinFloor);
  for (int j = 0; j < S; ++j) {
    double p = std::exp(logits[static_cast<size_t>(j)] - log_sum);
    double dlogit = p - (j == label ? 1.0 : 0.0);
    double dcos = dlogit * clf.scale * (j == label ? margin_slope : 1.0);
    const double* row = clf.weights.data() + static_cast<size_t>(j) * d;
    const double wn = w_norms[static_cast<size_t>(j)];
    const double c = cosines[static_cast<size_t>(j)];
    double* gw = out.grad_weights.data() + static_cast<size_t>(j) * d;
    for (int i = 0; i < d; ++i) {
      double e_i = e_s[static_cast<size_t>(i)];
      out.grad_embedding[static_cast<size_t>(i)] +=
          dcos * (row[i] / (wn * e_norm) - c * e_i / e_norm2);
      gw[i] = dcos * (e_i / (wn * e_norm) - c * row[i] / (wn * wn));
    }
  }
  return out;
}

namespace {

struct ForwardLoss {
  double loss;
  AamLossResult aam;
  GateTape tape;
};

ForwardLoss forward_loss(const GateNetwork& net, const AamClassifier& clf,
                         const std::vector<double>& e_b,
                         const std::vector<double>& e_g, int label) {
  ForwardLoss out{0.0, {}, gate_forward_tape(net, e_b, e_g)};
  out.aam = aam_loss(out.tape.es, label, clf);
  out.loss = out.aam.loss;
  return out;
}

}  // namespace

namespace {

double grad_check_impl(const GateNetwork& net, const AamClassifier& clf,
                       const GradCheckSample& sample, bool corrupt_w2) {
  const double h = 1e-4;
  GateNetwork n = net;
  AamClassifier c = clf;

  ForwardLoss fl = forward_loss(n, c, sample.bona, sample.gen, sample.label);
  GateGrads analytic =
      gate_backward(n, fl.tape, sample.bona, sample.gen,
                    fl.aam.grad_embedding);
  if (corrupt_w2) {
    for (double& g : analytic.w2) g = -g;
  }

  auto loss_at = [&]() {
    return forward_loss(n, c, sample.bona, sample.gen, sample.label).loss;
  };
  auto numeric_for = [&](std::vector<double>& params) {
    std::vector<double> numeric(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      double saved = params[i];
      params[i] = saved + h;
      double up = loss_at();
      params[i] = saved - h;
      double down = loss_at();
      params[i] = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    return numeric;
  };

  double worst = 0.0;
  worst = std::max(worst, tensor_rel_error(analytic.w1, numeric_for(n.w1)));
  worst = std::max(worst, tensor_rel_error(analytic.b1, numeric_for(n.b1)));
  worst = std::max(worst, tensor_rel_error(analytic.w2, numeric_for(n.w2)));
  worst = std::max(worst, tensor_rel_error(analytic.b2, numeric_for(n.b2)));
  worst = std::max(
      worst, tensor_rel_error(fl.aam.grad_weights, numeric_for(c.weights)));
  return worst;
}

}  // namespace

double grad_check(const GateNetwork& net, const AamClassifier& clf,
                  const GradCheckSample& sample) {
  return grad_check_impl(net, clf, sample, false);
}

double grad_check_negative_control(const GateNetwork& net,
                                   const AamClassifier& clf,
                                   const GradCheckSample& sample) {
  return grad_check_impl(net, clf, sample, true);
}

TrainResult train_gate(const std::vector<TrainPair>& pairs,
                       const TrainConfig& cfg,
                       const AamClassifier* init_classifier) {
  if (pairs.size() < 2) {
    throw DataError("train_gate: need at least two pairs");
  }
  if (!(cfg.learning_rate >= 0.0) || cfg.epochs <= 0 || cfg.batch_size <= 0) {
    throw ConfigError("train_gate: invalid training configuration");
  }
  const int d = static_cast<int>(pairs.front().bona.size());
  int num_speakers = 0;
  for (const TrainPair& p : pairs) {
    if (static_cast<int>(p.bona.size()) != d ||
        static_cast<int>(p.gen.size()) != d) {
      throw DimMismatchError("train_gate: inconsistent embedding dims");
    }
    if (p.label < 0) throw DataError("train_gate: negative label");
    num_speakers = std::max(num_speakers, p.label + 1);
  }
  {
    std::vector<bool> seen(static_cast<size_t>(num_speakers), false);
    for (const TrainPair& p : pairs) seen[static_cast<size_t>(p.label)] = true;
    int distinct = static_cast<int>(std::count(seen.begin(), seen.end(), true));
    if (distinct < 2) {
      throw DataError("train_gate: need at least two speakers, got " +
                      std::to_string(distinct));
    }
  }

  // Preprocess once: the gate consumes (optionally) unit-normalized inputs.
  std::vector<std::vector<double>> bona(pairs.size()), gen(pairs.size());
  std::vector<std::vector<float>> bona_f(pairs.size());
  std::vector<int> labels(pairs.size());
  for (size_t k = 0; k < pairs.size(); ++k) {
    std::vector<float> b =
        cfg.normalize_inputs ? l2_normalize(pairs[k].bona) : pairs[k].bona;
    std::vector<float> g =
        cfg.normalize_inputs ? l2_normalize(pairs[k].gen) : pairs[k].gen;
    bona_f[k] = b;
    bona[k].assign(b.begin(), b.end());
    gen[k].assign(g.begin(), g.end());
    labels[k] = pairs[k].label;
  }

  // Deterministic holdout split.
  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(key_combine(cfg.seed, fnv1a64("train-split")));
  split_rng.shuffle(order);
  size_t n_holdout = static_cast<size_t>(
      round_away(cfg.holdout_fraction * static_cast<double>(pairs.size())));
  n_holdout = std::clamp<size_t>(n_holdout, 1, pairs.size() - 1);
  std::vector<size_t> holdout(order.begin(), order.begin() + n_holdout);
  std::vector<size_t> train(order.begin() + n_holdout, order.end());

  GateNetwork net =
      GateNetwork::random_init(d, cfg.gate_hidden, cfg.seed);
  AamClassifier clf;
  if (init_classifier != nullptr) {
    clf = *init_classifier;
    if (clf.dim != d) {
      throw DimMismatchError("train_gate: classifier dim mismatch");
    }
    clf.margin = cfg.margin;
    clf.scale = cfg.scale;
  } else {
    std::vector<std::vector<float>> train_emb;
    std::vector<int> train_lab;
    for (size_t k : train) {
      train_emb.push_back(bona_f[k]);
      train_lab.push_back(labels[k]);
    }
    // Holdout-only speakers still need a row; fall back to all pairs.
    try {
      clf = AamClassifier::from_class_means(train_emb, train_lab, num_speakers,
                                            cfg.margin, cfg.scale);
    } catch (const DataError&) {
      clf = AamClassifier::from_class_means(bona_f, labels, num_speakers,
                                            cfg.margin, cfg.scale);
    }
  }

  auto evaluate = [&](const std::vector<size_t>& idx, double* loss_out,
                      double* acc_out) {
    double loss = 0.0;
    size_t correct = 0;
    for (size_t k : idx) {
      ForwardLoss fl = forward_loss(net, clf, bona[k], gen[k], labels[k]);
      loss += fl.loss;
      if (fl.aam.predicted == labels[k]) ++correct;
    }
    *loss_out = loss / static_cast<double>(idx.size());
    *acc_out = static_cast<double>(correct) / static_cast<double>(idx.size());
  };

  TrainResult result;
  result.log_csv = "epoch,split,loss,accuracy\n";
  auto log_row = [&](int epoch, const char* split, double loss, double acc) {
    result.log_csv += std::to_string(epoch);
    result.log_csv += ',';
    result.log_csv += split;
    result.log_csv += ',';
    result.log_csv += format_double(loss);
    result.log_csv += ',';
    result.log_csv += format_double(acc);
    result.log_csv += '\n';
  };

  double best_loss = 0.0, best_acc = 0.0;
  evaluate(holdout, &best_loss, &best_acc);
  log_row(0, "holdout", best_loss, best_acc);
  GateNetwork best_net = net;
  AamClassifier best_clf = clf;
  int best_epoch = 0;

  GateGrads vel_gate(net);
  std::vector<double> vel_clf(clf.weights.size(), 0.0);

  Rng epoch_rng(key_combine(cfg.seed, fnv1a64("train-epochs")));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    epoch_rng.shuffle(train);
    double train_loss = 0.0;
    size_t train_correct = 0;
    for (size_t start = 0; start < train.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(train.size(),
                            start + static_cast<size_t>(cfg.batch_size));
      GateGrads batch_gate(net);
      std::vector<double> batch_clf(clf.weights.size(), 0.0);
      for (size_t bi = start; bi < end; ++bi) {
        size_t k = train[bi];
        ForwardLoss fl = forward_loss(net, clf, bona[k], gen[k], labels[k]);
        train_loss += fl.loss;
        if (fl.aam.predicted == labels[k]) ++train_correct;
        GateGrads g = gate_backward(net, fl.tape, bona[k], gen[k],
                                    fl.aam.grad_embedding);
        batch_gate.accumulate(g);
        for (size_t i = 0; i < batch_clf.size(); ++i) {
          batch_clf[i] += fl.aam.grad_weights[i];
        }
      }
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      auto step = [&](std::vector<double>& params, std::vector<double>& vel,
                      const std::vector<double>& grad) {
        for (size_t i = 0; i < params.size(); ++i) {
          vel[i] = cfg.momentum * vel[i] -
                   cfg.learning_rate * grad[i] * inv_batch;
          params[i] += vel[i];
        }
      };
      step(net.w1, vel_gate.w1, batch_gate.w1);
      step(net.b1, vel_gate.b1, batch_gate.b1);
      step(net.w2, vel_gate.w2, batch_gate.w2);
      step(net.b2, vel_gate.b2, batch_gate.b2);
      step(clf.weights, vel_clf, batch_clf);
      clf.renormalize_rows();
    }
    double holdout_loss = 0.0, holdout_acc = 0.0;
    evaluate(holdout, &holdout_loss, &holdout_acc);
    log_row(epoch, "train", train_loss / static_cast<double>(train.size()),
            static_cast<double>(train_correct) /
                static_cast<double>(train.size()));
    log_row(epoch, "holdout", holdout_loss, holdout_acc);
    if (holdout_loss < best_loss) {
      best_loss = holdout_loss;
      best_net = net;
      best_clf = clf;
      best_epoch = epoch;
    }
  }

  result.net = std::move(best_net);
  result.classifier = std::move(best_clf);
  result.best_holdout_loss = best_loss;
  result.best_epoch = best_epoch;
  return result;
}

std::string serialize_checkpoint(const GateNetwork& net,
                                 const AamClassifier& clf) {
  std::string out = net.serialize();
  std::string payload;
  put_u32le(payload, static_cast<uint32_t>(clf.num_speakers));
  put_u32le(payload, static_cast<uint32_t>(clf.dim));
  put_f32le(payload, static_cast<float>(clf.margin));
  put_f32le(payload, static_cast<float>(clf.scale));
  for (double v : clf.weights) put_f32le(payload, static_cast<float>(v));
  out.append(kAamMagic, sizeof(kAamMagic));
  out += payload;
  put_u32le(out, crc32(payload.data(), payload.size()));
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const GateNetwork& net,
                     const AamClassifier& clf) {
  write_file_atomic(path, serialize_checkpoint(net, clf));
}

std::pair<GateNetwork, AamClassifier> parse_checkpoint(
    const std::string& bytes) {
  GateNetwork net = [&] {
    // The gate parser knows its exact block size; find it by shape.
    if (bytes.size() < 13 || bytes.compare(0, 5, "GATE1") != 0) {
      throw CorruptionError("checkpoint: missing GATE1 block");
    }
    const auto* p = reinterpret_cast<const uint8_t*>(bytes.data());
    uint32_t d = get_u32le(p + 5);
    uint32_t hidden = get_u32le(p + 9);
    if (d == 0 || hidden == 0 || d > (1u << 20) || hidden > (1u << 20)) {
      throw CorruptionError("checkpoint: implausible gate shape");
    }
    size_t n_params = static_cast<size_t>(hidden) * 2 * d + hidden +
                      static_cast<size_t>(d) * hidden + d;
    size_t gate_size = 5 + 8 + n_params * 4 + 4;
    if (bytes.size() < gate_size) {
      throw CorruptionError("checkpoint: truncated gate block");
    }
    return GateNetwork::parse(bytes.substr(0, gate_size));
  }();

  size_t n_params = static_cast<size_t>(net.hidden()) * 2 * net.dim() +
                    net.hidden() +
                    static_cast<size_t>(net.dim()) * net.hidden() + net.dim();
  size_t pos = 5 + 8 + n_params * 4 + 4;
  if (bytes.size() < pos + sizeof(kAamMagic) + 16 + 4 ||
      std::memcmp(bytes.data() + pos, kAamMagic, sizeof(kAamMagic)) != 0) {
    throw CorruptionError("checkpoint: missing AAMC1 classifier block");
  }
  pos += sizeof(kAamMagic);
  const auto* p = reinterpret_cast<const uint8_t*>(bytes.data());
  uint32_t num_speakers = get_u32le(p + pos);
  uint32_t d = get_u32le(p + pos + 4);
  if (num_speakers == 0 || d == 0 || num_speakers > (1u << 24) ||
      d > (1u << 20)) {
    throw CorruptionError("checkpoint: implausible classifier shape");
  }
  size_t payload_size = 16 + static_cast<size_t>(num_speakers) * d * 4;
  if (bytes.size() != pos + payload_size + 4) {
    throw CorruptionError("checkpoint: truncated classifier block");
  }
  uint32_t want_crc = crc32(bytes.data() + pos, payload_size);
  uint32_t got_crc = get_u32le(p + pos + payload_size);
  if (want_crc != got_crc) {
    throw CorruptionError("checkpoint: classifier checksum mismatch");
  }
  AamClassifier clf;
  clf.num_speakers = static_cast<int>(num_speakers);
  clf.dim = static_cast<int>(d);
  clf.margin = static_cast<double>(get_f32le(p + pos + 8));
  clf.scale = static_cast<double>(get_f32le(p + pos + 12));
  clf.weights.resize(static_cast<size_t>(num_speakers) * d);
  size_t off = pos + 16;
  for (double& v : clf.weights) {
    v = static_cast<double>(get_f32le(p + off));
    off += 4;
  }
  return {std::move(net), std::move(clf)};
}

std::pair<GateNetwork, AamClassifier> load_checkpoint(
    const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace ttaug
