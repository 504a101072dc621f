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

#include "ttaug/phoneme.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

std::string upper_ascii(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string strip_stress(const std::string& symbol) {
  std::string out;
  out.reserve(symbol.size());
  for (char c : symbol) {
    if (!std::isdigit(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

// "WORD(1)" -> "WORD"; plain heads pass through. Returns false on a
// malformed variant suffix like "WORD(" or "WORD(x)".
bool split_variant_head(const std::string& head, std::string* word) {
  size_t open = head.find('(');
  if (open == std::string::npos) {
    *word = head;
    return true;
  }
  if (open == 0 || head.back() != ')') return false;
  for (size_t i = open + 1; i + 1 < head.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(head[i]))) return false;
  }
  if (open + 2 > head.size() - 1) return false;  // "WORD()" has no digits
  *word = head.substr(0, open);
  return true;
}

}  // namespace

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        out.push_back(current);
        current.clear();
      }
      continue;
    }
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
      current.push_back(
          static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    // Other punctuation is stripped in place.
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

PronDict parse_cmudict(const std::string& text) {
  PronDict dict;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind(";;;", 0) == 0) continue;  // comment
    std::vector<std::string> fields = split_ws(line);
    if (fields.size() < 2) {
      throw ParseError("cmudict line " + std::to_string(line_no) +
                       ": entry needs a word and at least one phoneme");
    }
    std::string word;
    if (!split_variant_head(fields[0], &word)) {
      throw ParseError("cmudict line " + std::to_string(line_no) +
                       ": malformed variant head '" + fields[0] + "'");
    }
    word = upper_ascii(word);
    std::vector<std::string> pron;
    pron.reserve(fields.size() - 1);
    for (size_t i = 1; i < fields.size(); ++i) {
      std::string symbol = strip_stress(upper_ascii(fields[i]));
      if (symbol.empty()) {
        throw ParseError("cmudict line " + std::to_string(line_no) +
                         ": empty phoneme symbol '" + fields[i] + "'");
      }
      dict.inventory.insert(symbol);
      pron.push_back(std::move(symbol));
    }
    dict.entries[word].push_back(std::move(pron));
  }
  return dict;
}

PronDict load_cmudict(const std::filesystem::path& path) {
  return parse_cmudict(read_file(path));
}

std::string serialize_cmudict(const PronDict& dict) {
  std::string out;
  for (const auto& [word, prons] : dict.entries) {
    for (size_t k = 0; k < prons.size(); ++k) {
      out += word;
      if (k > 0) {
        out += '(';
        out += std::to_string(k);
        out += ')';
      }
      out += ' ';
      for (size_t i = 0; i < prons[k].size(); ++i) {
        out += ' ';
        out += prons[k][i];
      }
      out += '\n';
    }
  }
  return out;
}

PhonemeReport phoneme_set(const std::string& text, const PronDict& dict) {
  std::set<std::string> distinct_words;
  for (const std::string& w : tokenize_words(text)) distinct_words.insert(w);

  PhonemeReport report;
  std::set<std::string> oov;
  for (const std::string& w : distinct_words) {
    auto it = dict.entries.find(w);
    if (it == dict.entries.end()) {
      oov.insert(w);
      continue;
    }
    // First-pronunciation policy.
    for (const std::string& ph : it->second.front()) {
      report.per_phoneme_counts[ph] += 1;
    }
  }
  report.distinct_count = static_cast<int>(report.per_phoneme_counts.size());
  report.coverage =
      dict.inventory.empty()
          ? 0.0
          : static_cast<double>(report.distinct_count) /
                static_cast<double>(dict.inventory.size());
  report.oov_words.assign(oov.begin(), oov.end());
  report.oov_rate =
      distinct_words.empty()
          ? 0.0
          : static_cast<double>(oov.size()) /
                static_cast<double>(distinct_words.size());
  return report;
}

std::map<int, std::string> select_texts(const std::vector<std::string>& corpus,
                                        const PronDict& dict,
                                        const std::vector<int>& targets,
                                        int min_words, int max_words) {
  if (corpus.empty()) {
    throw DataError("select_texts: empty corpus");
  }
  struct Candidate {
    const std::string* text;
    int distinct;
  };
  std::vector<Candidate> in_band;
  for (const std::string& text : corpus) {
    int words = static_cast<int>(tokenize_words(text).size());
    if (words < min_words || words > max_words) continue;
    in_band.push_back(Candidate{&text, phoneme_set(text, dict).distinct_count});
  }
  std::map<int, std::string> out;
  for (int target : targets) {
    const Candidate* best = nullptr;
    for (const Candidate& c : in_band) {
      if (best == nullptr) {
        best = &c;
        continue;
      }
      int d_new = std::abs(c.distinct - target);
      int d_best = std::abs(best->distinct - target);
      if (d_new < d_best || (d_new == d_best && *c.text < *best->text)) {
        best = &c;
      }
    }
    if (best == nullptr) {
      throw NotFoundError("select_texts: no corpus text within the word band [" +
                          std::to_string(min_words) + ", " +
                          std::to_string(max_words) + "] for target " +
                          std::to_string(target));
    }
    out[target] = *best->text;
  }
  return out;
}

std::string PhonemeReport::to_json() const {
  nlohmann::json j;
  j["distinct_count"] = distinct_count;
  j["coverage"] = coverage;
  j["oov_words"] = oov_words;
  j["oov_rate"] = oov_rate;
  j["per_phoneme_counts"] = per_phoneme_counts;
  return j.dump(2) + "\n";
}

}  // namespace ttaug
