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

#include "ttaug/config.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

[[noreturn]] void toml_fail(size_t line_no, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Strips a trailing # comment that is not inside a string literal.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(std::string text, size_t line_no)
      : text_(std::move(text)), line_no_(line_no) {}

  TomlValue parse() {
    TomlValue v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) {
      toml_fail(line_no_, "trailing characters after value");
    }
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  TomlValue parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) toml_fail(line_no_, "missing value");
    char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  TomlValue parse_string() {
    ++pos_;  // opening quote
    TomlValue v;
    v.type = TomlValue::Type::kString;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) toml_fail(line_no_, "dangling escape");
        char esc = text_[pos_++];
        switch (esc) {
          case 'n': v.str.push_back('\n'); break;
          case 't': v.str.push_back('\t'); break;
          case 'r': v.str.push_back('\r'); break;
          case '"': v.str.push_back('"'); break;
          case '\\': v.str.push_back('\\'); break;
          default:
            toml_fail(line_no_, std::string("unsupported escape \\") + esc);
        }
      } else {
        v.str.push_back(c);
      }
    }
    if (pos_ >= text_.size()) toml_fail(line_no_, "unterminated string");
    ++pos_;  // closing quote
    return v;
  }

  TomlValue parse_array() {
    ++pos_;  // [
    TomlValue v;
    v.type = TomlValue::Type::kArray;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return v;
    }
    for (;;) {
      v.array.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) toml_fail(line_no_, "unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return v;
      }
      toml_fail(line_no_, "expected ',' or ']' in array");
    }
  }

  TomlValue parse_scalar() {
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    std::string token(text_.substr(start, pos_ - start));
    TomlValue v;
    if (token == "true" || token == "false") {
      v.type = TomlValue::Type::kBool;
      v.boolean = token == "true";
      return v;
    }
    // Integer first; fall back to float.
    {
      char* end = nullptr;
      errno = 0;
      long long i = std::strtoll(token.c_str(), &end, 10);
      if (errno == 0 && end == token.c_str() + token.size() &&
          !token.empty()) {
        v.type = TomlValue::Type::kInt;
        v.integer = i;
        v.number = static_cast<double>(i);
        return v;
      }
    }
    {
      char* end = nullptr;
      double d = std::strtod(token.c_str(), &end);
      if (end == token.c_str() + token.size() && !token.empty() &&
          std::isfinite(d)) {
        v.type = TomlValue::Type::kFloat;
        v.number = d;
        return v;
      }
    }
    toml_fail(line_no_, "cannot parse value '" + token + "'");
  }

  std::string text_;
  size_t line_no_;
  size_t pos_ = 0;
};

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') {
      return false;
    }
  }
  return true;
}

}  // namespace

double TomlValue::as_number() const {
  if (type == Type::kInt) return static_cast<double>(integer);
  if (type == Type::kFloat) return number;
  throw ConfigError("config: expected a number");
}

const TomlValue& TomlTable::at(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) {
    throw ConfigError("config: missing key '" + key + "'");
  }
  return it->second;
}

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  TomlTable* current = &doc.root;
  std::istringstream in(text);
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      bool array_table = line.rfind("[[", 0) == 0;
      size_t close = line.find(array_table ? "]]" : "]");
      if (close == std::string::npos ||
          close + (array_table ? 2 : 1) != line.size()) {
        toml_fail(line_no, "malformed section header '" + line + "'");
      }
      std::string name =
          trim(line.substr(array_table ? 2 : 1, close - (array_table ? 2 : 1)));
      if (!valid_key(name)) {
        toml_fail(line_no, "bad section name '" + name + "'");
      }
      if (array_table) {
        doc.table_arrays[name].emplace_back();
        current = &doc.table_arrays[name].back();
      } else {
        if (doc.tables.count(name)) {
          toml_fail(line_no, "duplicate section [" + name + "]");
        }
        current = &doc.tables[name];
      }
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      toml_fail(line_no, "expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) {
      toml_fail(line_no, "bad key '" + key + "'");
    }
    if (current->values.count(key)) {
      toml_fail(line_no, "duplicate key '" + key + "'");
    }
    ValueParser vp(line.substr(eq + 1), line_no);
    current->values.emplace(key, vp.parse());
  }
  return doc;
}

std::string DurationSpec::label() const {
  if (full) return "full";
  std::string s = format_double(seconds);
  return s + "s";
}

DurationSpec DurationSpec::parse(const std::string& text) {
  if (text == "full" || text == "all") {
    return DurationSpec{0.0, true};
  }
  std::string t = text;
  if (!t.empty() && t.back() == 's') t.pop_back();
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !(v > 0.0)) {
    throw ConfigError("bad duration '" + text + "' (want seconds or 'full')");
  }
  return DurationSpec{v, false};
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

std::vector<DurationSpec> parse_durations(const TomlValue& v) {
  if (v.type != TomlValue::Type::kArray) {
    throw ConfigError("config: durations must be an array");
  }
  std::vector<DurationSpec> out;
  for (const TomlValue& item : v.array) {
    if (item.type == TomlValue::Type::kString) {
      out.push_back(DurationSpec::parse(item.str));
    } else {
      double s = item.as_number();
      if (!(s > 0.0)) throw ConfigError("config: non-positive duration");
      out.push_back(DurationSpec{s, false});
    }
  }
  if (out.empty()) throw ConfigError("config: empty durations list");
  return out;
}

std::vector<double> parse_number_array(const TomlValue& v, const char* what) {
  if (v.type != TomlValue::Type::kArray) {
    throw ConfigError(std::string("config: ") + what + " must be an array");
  }
  std::vector<double> out;
  for (const TomlValue& item : v.array) out.push_back(item.as_number());
  return out;
}

std::vector<std::string> parse_string_array(const TomlValue& v,
                                            const char* what) {
  if (v.type != TomlValue::Type::kArray) {
    throw ConfigError(std::string("config: ") + what + " must be an array");
  }
  std::vector<std::string> out;
  for (const TomlValue& item : v.array) {
    if (item.type != TomlValue::Type::kString) {
      throw ConfigError(std::string("config: ") + what +
                        " must contain strings");
    }
    out.push_back(item.str);
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> load_transcripts(
    const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    size_t split = line.find_first_of(" \t");
    if (split == std::string::npos || split == 0) {
      throw ParseError("transcripts line " + std::to_string(line_no) +
                       ": expected '<utt_id> <text>'");
    }
    std::string utt = line.substr(0, split);
    std::string text = trim(line.substr(split + 1));
    if (text.empty()) {
      throw ParseError("transcripts line " + std::to_string(line_no) +
                       ": empty transcript for '" + utt + "'");
    }
    if (!out.emplace(utt, text).second) {
      throw DuplicateKeyError("transcripts: duplicate utterance '" + utt +
                              "'");
    }
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_file(
    const std::filesystem::path& path) {
  return from_toml(read_file(path), path.parent_path());
}

ExperimentConfig ExperimentConfig::from_toml(
    const std::string& text, const std::filesystem::path& base_dir) {
  TomlDoc doc = parse_toml(text);
  ExperimentConfig cfg;
  cfg.config_hash = hex64(fnv1a64(text));

  if (doc.tables.count("dataset")) {
    const TomlTable& t = doc.tables["dataset"];
    if (t.has("root")) cfg.dataset_root = resolve(base_dir, t.at("root").str);
    if (t.has("trials")) cfg.trial_list = resolve(base_dir, t.at("trials").str);
    if (t.has("durations")) cfg.durations = parse_durations(t.at("durations"));
  }
  if (cfg.durations.empty()) {
    cfg.durations = {DurationSpec{0.5, false}, DurationSpec{1.0, false},
                     DurationSpec{2.0, false}, DurationSpec{0.0, true}};
  }

  if (doc.table_arrays.count("backend")) {
    for (const TomlTable& t : doc.table_arrays["backend"]) {
      BackendEndpoint ep;
      ep.name = t.has("name") ? t.at("name").str : "";
      if (t.has("kind")) {
        const std::string& kind = t.at("kind").str;
        if (kind == "embed") {
          ep.kind = BackendKind::kEmbed;
        } else if (kind == "tts") {
          ep.kind = BackendKind::kTts;
        } else {
          throw ConfigError("config: backend kind must be embed or tts, got '" +
                            kind + "'");
        }
      }
      if (t.has("transport")) {
        ep.transport = transport_from_name(t.at("transport").str);
      }
      if (t.has("address")) ep.address = t.at("address").str;
      if (t.has("timeout_s")) ep.timeout_s = t.at("timeout_s").as_number();
      if (t.has("max_retries")) {
        ep.max_retries = static_cast<int>(t.at("max_retries").integer);
      }
      if (t.has("dim")) ep.dim = static_cast<int>(t.at("dim").integer);
      if (ep.name.empty()) {
        throw ConfigError("config: every [[backend]] needs a name");
      }
      if (ep.transport != BackendTransport::kMock && ep.address.empty()) {
        throw ConfigError("config: backend '" + ep.name +
                          "' needs an address");
      }
      cfg.backends.push_back(std::move(ep));
    }
  }

  if (doc.tables.count("text")) {
    const TomlTable& t = doc.tables["text"];
    std::string mode = t.has("mode") ? t.at("mode").str : "fixed";
    if (mode == "fixed") {
      cfg.text.mode = TextStrategy::Mode::kFixed;
      if (t.has("texts")) {
        cfg.text.fixed_texts = parse_string_array(t.at("texts"), "texts");
      }
      if (cfg.text.fixed_texts.size() != 3) {
        throw ConfigError("config: [text] fixed mode needs exactly 3 texts");
      }
    } else if (mode == "original") {
      cfg.text.mode = TextStrategy::Mode::kOriginal;
      if (!t.has("transcripts")) {
        throw ConfigError("config: [text] original mode needs transcripts");
      }
      cfg.text.transcripts =
          load_transcripts(resolve(base_dir, t.at("transcripts").str));
    } else {
      throw ConfigError("config: text mode must be fixed or original");
    }
  }

  if (doc.tables.count("fusion")) {
    const TomlTable& t = doc.tables["fusion"];
    if (t.has("methods")) {
      cfg.methods.clear();
      for (const std::string& m : parse_string_array(t.at("methods"),
                                                     "methods")) {
        cfg.methods.push_back(fusion_method_from_name(m));
      }
    }
    if (t.has("weights")) {
      cfg.weights = parse_number_array(t.at("weights"), "weights");
      for (double w : cfg.weights) {
        if (w < 0.0 || w > 1.0) {
          throw ConfigError("config: fusion weight outside [0,1]");
        }
      }
    }
    if (t.has("normalize_inputs")) {
      cfg.normalize_inputs = t.at("normalize_inputs").boolean;
    }
    if (t.has("gate_checkpoint")) {
      cfg.gate_checkpoint = resolve(base_dir, t.at("gate_checkpoint").str);
    }
    if (t.has("two_stage_inner")) {
      cfg.two_stage_inner = t.at("two_stage_inner").as_number();
    }
    if (t.has("include_rep15")) {
      cfg.include_rep15 = t.at("include_rep15").boolean;
    }
    if (t.has("rep15_target_s")) {
      cfg.rep15_target_s = t.at("rep15_target_s").as_number();
    }
  }

  if (doc.tables.count("run")) {
    const TomlTable& t = doc.tables["run"];
    if (t.has("out")) cfg.out_dir = resolve(base_dir, t.at("out").str);
    if (t.has("seed")) cfg.seed = static_cast<uint64_t>(t.at("seed").integer);
    if (t.has("jobs")) cfg.jobs = static_cast<int>(t.at("jobs").integer);
    if (t.has("cache_dir")) {
      cfg.cache_dir = resolve(base_dir, t.at("cache_dir").str);
    }
  }
  if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");

  if (doc.tables.count("sim")) {
    const TomlTable& t = doc.tables["sim"];
    SimConfig& s = cfg.sim;
    if (t.has("num_speakers")) {
      s.num_speakers = static_cast<int>(t.at("num_speakers").integer);
    }
    if (t.has("utts_per_speaker")) {
      s.utts_per_speaker = static_cast<int>(t.at("utts_per_speaker").integer);
    }
    if (t.has("dim")) s.dim = static_cast<int>(t.at("dim").integer);
    if (t.has("sigma0")) s.sigma0 = t.at("sigma0").as_number();
    if (t.has("alpha")) s.alpha = t.at("alpha").as_number();
    if (t.has("beta")) s.beta = t.at("beta").as_number();
    if (t.has("seed")) s.seed = static_cast<uint64_t>(t.at("seed").integer);
    if (t.has("durations")) {
      s.durations = parse_number_array(t.at("durations"), "sim durations");
    }
    if (t.has("backends")) {
      s.backend_names = parse_string_array(t.at("backends"), "sim backends");
    }
    if (t.has("tts_noise")) {
      s.tts_noise = t.at("tts_noise").as_number();
    }
    if (t.has("prompt_noise_corr")) {
      s.prompt_noise_corr = t.at("prompt_noise_corr").as_number();
    }
    s.validate();
  }

  return cfg;
}

const BackendEndpoint& ExperimentConfig::embed_endpoint() const {
  const BackendEndpoint* found = nullptr;
  for (const BackendEndpoint& ep : backends) {
    if (ep.kind != BackendKind::kEmbed) continue;
    if (found != nullptr) {
      throw ConfigError("config: more than one embed backend configured");
    }
    found = &ep;
  }
  if (found == nullptr) {
    throw ConfigError("config: no embed backend configured");
  }
  return *found;
}

std::vector<BackendEndpoint> ExperimentConfig::tts_endpoints() const {
  std::vector<BackendEndpoint> out;
  for (const BackendEndpoint& ep : backends) {
    if (ep.kind == BackendKind::kTts) out.push_back(ep);
  }
  return out;
}

void ExperimentConfig::validate_paths() const {
  if (!std::filesystem::is_directory(dataset_root)) {
    throw ConfigError("config: dataset root is not a directory: " +
                      dataset_root.string());
  }
  if (!std::filesystem::is_regular_file(trial_list)) {
    throw ConfigError("config: trial list not found: " + trial_list.string());
  }
}

std::filesystem::path ExperimentConfig::effective_cache_dir() const {
  if (!cache_dir.empty()) return cache_dir;
  if (const char* env = std::getenv("TTA_CACHE_DIR")) {
    if (*env != '\0') return std::filesystem::path(env);
  }
  return out_dir / "cache";
}

}  // namespace ttaug
