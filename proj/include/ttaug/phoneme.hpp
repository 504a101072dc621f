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

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ttaug {

/// CMU-style pronouncing dictionary. Words are uppercased; stress digits are
/// stripped from the phoneme symbols, so the inventory is the ARPAbet base
/// set actually present in the loaded file (never hard-coded). Immutable
/// after parse.
struct PronDict {
  /// word -> pronunciations in file order; variant heads WORD(1) merge
  /// under WORD.
  std::map<std::string, std::vector<std::vector<std::string>>> entries;
  std::set<std::string> inventory;

  bool contains(const std::string& word_upper) const {
    return entries.count(word_upper) > 0;
  }
  size_t inventory_size() const { return inventory.size(); }
};

/// Distinct-phoneme analysis of one text against a dictionary.
struct PhonemeReport {
  int distinct_count = 0;
  double coverage = 0.0;  // distinct_count / |inventory|
  std::vector<std::string> oov_words;  // sorted, distinct
  std::map<std::string, int> per_phoneme_counts;
  double oov_rate = 0.0;  // distinct OOV words / distinct words

  std::string to_json() const;
};

/// Parses cmudict text: ";;;" comment lines skipped, entries
/// "WORD  PH1 PH2 ...", variants "WORD(1)" merged, stress digits stripped.
/// Throws ParseError naming the line number on malformed entries.
PronDict parse_cmudict(const std::string& text);
PronDict load_cmudict(const std::filesystem::path& path);

/// Canonical cmudict rendering: sorted words, variants numbered (1), (2), ...
std::string serialize_cmudict(const PronDict& dict);

/// Tokenizes on whitespace, strips punctuation, uppercases; counts the
/// distinct-phoneme union over first pronunciations of in-vocabulary words.
/// The report is a function of the distinct word set, so it is invariant to
/// word order and repetition. OOV words are reported, never fatal.
PhonemeReport phoneme_set(const std::string& text, const PronDict& dict);

/// For each target count, the corpus text inside the word-count band whose
/// distinct-phoneme count is closest; ties break to the lexicographically
/// smaller text. Throws NotFoundError naming the target when the band is
/// empty.
std::map<int, std::string> select_texts(const std::vector<std::string>& corpus,
                                        const PronDict& dict,
                                        const std::vector<int>& targets,
                                        int min_words, int max_words);

/// Uppercased, punctuation-stripped word tokens (the analysis tokenizer).
std::vector<std::string> tokenize_words(const std::string& text);

}  // namespace ttaug
