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

#include "ttaug/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ttaug/errors.hpp"
#include "ttaug/fusion.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

double cosine_score(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) {
    throw DimMismatchError("cosine: dims " + std::to_string(a.size()) +
                           " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw DegenerateInputError("cosine: zero vector");
  }
  double score = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(score, -1.0, 1.0);
}

double cosine_score(const Embedding& e1, const Embedding& e2) {
  return cosine_score(e1.values, e2.values);
}

namespace {

// (FAR, FRR) for accept-if-score>=t, plus the threshold itself. The ROC walk
// and the EER interpolation both operate on these points.
struct RocPoint {
  double threshold;
  double far;
  double frr;
};

// One ROC point per distinct observed score, ascending, followed by a
// virtual point above the maximum (FAR=0, FRR=1). Single pass over the
// jointly sorted score list.
std::vector<RocPoint> roc_points(std::vector<double> targets,
                                 std::vector<double> nontargets) {
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  const double nt = static_cast<double>(targets.size());
  const double nn = static_cast<double>(nontargets.size());

  std::vector<double> thresholds;
  thresholds.reserve(targets.size() + nontargets.size());
  std::merge(targets.begin(), targets.end(), nontargets.begin(),
             nontargets.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<RocPoint> points;
  points.reserve(thresholds.size() + 1);
  size_t ti = 0, ni = 0;
  for (double t : thresholds) {
    while (ti < targets.size() && targets[ti] < t) ++ti;
    while (ni < nontargets.size() && nontargets[ni] < t) ++ni;
    // ti targets below t are rejected; nontargets.size()-ni are >= t.
    points.push_back(RocPoint{t, (nontargets.size() - ni) / nn, ti / nt});
  }
  points.push_back(RocPoint{thresholds.back() + 1.0, 0.0, 1.0});
  return points;
}

// Crossing of FAR - FRR along the ROC point list, linearly interpolated.
void eer_from_roc(const std::vector<RocPoint>& points, double* eer,
                  double* threshold) {
  for (size_t i = 0; i + 1 < points.size(); ++i) {
    double d0 = points[i].far - points[i].frr;
    double d1 = points[i + 1].far - points[i + 1].frr;
    if (d0 == 0.0) {
      *eer = points[i].far;
      *threshold = points[i].threshold;
      return;
    }
    if (d0 > 0.0 && d1 <= 0.0) {
      double lambda = d0 / (d0 - d1);
      *eer = points[i].far + lambda * (points[i + 1].far - points[i].far);
      *threshold = points[i].threshold +
                   lambda * (points[i + 1].threshold - points[i].threshold);
      return;
    }
  }
  // FAR starts at 1 and FRR at 0, so the sign change always exists; the
  // final virtual point (FAR=0, FRR=1) is the backstop.
  const RocPoint& last = points.back();
  *eer = last.far;
  *threshold = last.threshold;
}

double min_dcf_from_roc(const std::vector<RocPoint>& points) {
  constexpr double p_target = 0.01;
  constexpr double c_miss = 1.0, c_fa = 1.0;
  const double norm =
      std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  double best = c_miss * p_target;  // threshold below all scores: FRR=0, FAR=1
  best = std::min(best, c_fa * (1.0 - p_target));
  for (const RocPoint& pt : points) {
    double dcf = c_miss * pt.frr * p_target + c_fa * pt.far * (1.0 - p_target);
    best = std::min(best, dcf);
  }
  return best / norm;
}

}  // namespace

EvalReport compute_eer(const std::vector<double>& target_scores,
                       const std::vector<double>& nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty()) {
    throw DataError("compute_eer: need at least one target and one "
                    "nontarget score");
  }
  for (double s : target_scores) {
    if (!std::isfinite(s)) throw DataError("compute_eer: non-finite score");
  }
  for (double s : nontarget_scores) {
    if (!std::isfinite(s)) throw DataError("compute_eer: non-finite score");
  }
  std::vector<RocPoint> points = roc_points(target_scores, nontarget_scores);
  EvalReport report;
  double eer = 0.0;
  eer_from_roc(points, &eer, &report.eer_threshold);
  report.eer_percent = 100.0 * eer;
  report.n_target = target_scores.size();
  report.n_nontarget = nontarget_scores.size();
  report.min_dcf = min_dcf_from_roc(points);
  return report;
}

EvalReport compute_eer(const std::vector<ScoreRecord>& records) {
  std::vector<double> targets, nontargets;
  for (const ScoreRecord& r : records) {
    (r.trial.target ? targets : nontargets).push_back(r.score);
  }
  return compute_eer(targets, nontargets);
}

double relative_reduction(double baseline_eer, double system_eer) {
  if (!(baseline_eer > 0.0)) {
    throw DataError("relative_reduction: baseline EER must be positive");
  }
  return 100.0 * (baseline_eer - system_eer) / baseline_eer;
}

std::vector<ScoreRecord> score_trials(const std::vector<Trial>& trials,
                                      const EmbeddingStore& store,
                                      const std::string& enroll_condition,
                                      const std::string& test_condition) {
  std::vector<ScoreRecord> out;
  out.reserve(trials.size());
  for (const Trial& t : trials) {
    const Embedding& e1 = store.get(t.enroll_id, enroll_condition);
    const Embedding& e2 = store.get(t.test_id, test_condition);
    out.push_back(ScoreRecord{t, cosine_score(e1, e2)});
  }
  return out;
}

std::vector<ScoreRecord> score_trials_with(
    const std::vector<Trial>& trials,
    const std::function<std::vector<float>(const std::string&)>& embed_of) {
  // Each utterance is embedded once; trial lists reuse utterances heavily.
  std::map<std::string, std::vector<float>> cache;
  auto lookup = [&](const std::string& utt) -> const std::vector<float>& {
    auto it = cache.find(utt);
    if (it == cache.end()) {
      it = cache.emplace(utt, embed_of(utt)).first;
    }
    return it->second;
  };
  std::vector<ScoreRecord> out;
  out.reserve(trials.size());
  for (const Trial& t : trials) {
    out.push_back(
        ScoreRecord{t, cosine_score(lookup(t.enroll_id), lookup(t.test_id))});
  }
  return out;
}

std::vector<SweepRow> weight_sweep(const std::vector<Trial>& trials,
                                   const EmbeddingStore& store,
                                   const std::string& base_condition,
                                   const std::string& tts_condition,
                                   const std::vector<double>& weights) {
  std::vector<SweepRow> rows;
  rows.reserve(weights.size());
  FusionConfig cfg;
  cfg.method = FusionMethod::kWeightedMean;
  for (double w : weights) {
    if (w < 0.0 || w > 1.0) {
      throw DataError("weight_sweep: weight outside [0,1]");
    }
    std::vector<ScoreRecord> scored;
    if (w == 1.0) {
      // Boundary rows share the plain scoring path so they match the
      // baseline / TTS-only reports exactly.
      scored = score_trials(trials, store, base_condition, base_condition);
    } else if (w == 0.0) {
      scored = score_trials(trials, store, tts_condition, tts_condition);
    } else {
      cfg.weight = w;
      scored = score_trials_with(trials, [&](const std::string& utt) {
        const Embedding& e_b = store.get(utt, base_condition);
        const Embedding& e_g = store.get(utt, tts_condition);
        return fuse_weighted(e_b, e_g, w, cfg).values;
      });
    }
    rows.push_back(SweepRow{w, compute_eer(scored).eer_percent});
  }
  return rows;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["eer_percent"] = eer_percent;
  j["eer_threshold"] = eer_threshold;
  j["n_target"] = n_target;
  j["n_nontarget"] = n_nontarget;
  if (min_dcf) j["min_dcf"] = *min_dcf;
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError("eval report: invalid JSON");
  }
  EvalReport r;
  r.eer_percent = j.at("eer_percent").get<double>();
  r.eer_threshold = j.at("eer_threshold").get<double>();
  r.n_target = j.at("n_target").get<size_t>();
  r.n_nontarget = j.at("n_nontarget").get<size_t>();
  if (j.contains("min_dcf")) r.min_dcf = j["min_dcf"].get<double>();
  return r;
}

std::vector<Trial> parse_trials(const std::string& text) {
  std::vector<Trial> out;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 3) {
      throw ParseError("trial list line " + std::to_string(line_no) +
                       ": expected '<label> <enroll> <test>'");
    }
    Trial t;
    if (fields[0] == "1") {
      t.target = true;
    } else if (fields[0] == "0") {
      t.target = false;
    } else {
      throw ParseError("trial list line " + std::to_string(line_no) +
                       ": label must be 0 or 1, got '" + fields[0] + "'");
    }
    t.enroll_id = fields[1];
    t.test_id = fields[2];
    if (t.enroll_id.empty() || t.test_id.empty()) {
      throw ParseError("trial list line " + std::to_string(line_no) +
                       ": empty utterance id");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Trial> load_trials(const std::filesystem::path& path) {
  return parse_trials(read_file(path));
}

std::string serialize_trials(const std::vector<Trial>& trials) {
  std::string out;
  for (const Trial& t : trials) {
    out += t.target ? '1' : '0';
    out += ' ';
    out += t.enroll_id;
    out += ' ';
    out += t.test_id;
    out += '\n';
  }
  return out;
}

std::string serialize_scores(const std::vector<ScoreRecord>& records,
                             const std::string& header_comment) {
  std::string out;
  if (!header_comment.empty()) {
    out += "# " + header_comment + "\n";
  }
  for (const ScoreRecord& r : records) {
    out += r.trial.enroll_id;
    out += ' ';
    out += r.trial.test_id;
    out += ' ';
    out += format_double(r.score);
    out += '\n';
  }
  return out;
}

std::vector<ScoreRecord> parse_scores(const std::string& text,
                                      const std::vector<Trial>& trials) {
  std::map<std::pair<std::string, std::string>, bool> labels;
  for (const Trial& t : trials) {
    labels[{t.enroll_id, t.test_id}] = t.target;
  }
  std::vector<ScoreRecord> out;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_ws(line);
    if (fields.size() != 3) {
      throw ParseError("score file line " + std::to_string(line_no) +
                       ": expected '<enroll> <test> <score>'");
    }
    char* end = nullptr;
    double score = std::strtod(fields[2].c_str(), &end);
    if (end == fields[2].c_str() || *end != '\0') {
      throw ParseError("score file line " + std::to_string(line_no) +
                       ": bad score '" + fields[2] + "'");
    }
    auto it = labels.find({fields[0], fields[1]});
    if (it == labels.end()) {
      throw NotFoundError("score file line " + std::to_string(line_no) +
                          ": pair (" + fields[0] + ", " + fields[1] +
                          ") not in trial list");
    }
    ScoreRecord r;
    r.trial.target = it->second;
    r.trial.enroll_id = fields[0];
    r.trial.test_id = fields[1];
    r.score = score;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path,
                                     const std::vector<Trial>& trials) {
  return parse_scores(read_file(path), trials);
}

std::string serialize_sweep_csv(const std::vector<SweepRow>& rows,
                                const std::string& header_comment) {
  std::string out;
  if (!header_comment.empty()) {
    out += "# " + header_comment + "\n";
  }
  out += "w,eer_percent\n";
  for (const SweepRow& r : rows) {
    out += format_double(r.w);
    out += ',';
    out += format_double(r.eer_percent);
    out += '\n';
  }
  return out;
}

}  // namespace ttaug
