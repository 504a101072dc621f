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

#include "ttaug/store.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {
constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
}

std::vector<float> l2_normalize(const std::vector<float>& v) {
  double norm = l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DegenerateInputError("l2_normalize: zero or non-finite vector");
  }
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(v[i] / norm);
  }
  return out;
}

double l2_norm(const std::vector<float>& v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

void EmbeddingStore::put(Embedding e) {
  if (e.utt_id.empty()) throw DataError("store: empty utt_id");
  if (e.condition.empty()) throw DataError("store: empty condition");
  if (e.values.empty()) throw DataError("store: empty embedding");
  for (float v : e.values) {
    if (!std::isfinite(v)) {
      throw DataError("store: non-finite value in embedding " + e.utt_id);
    }
  }
  if (dim_ == 0) {
    dim_ = e.dim();
  } else if (e.dim() != dim_) {
    throw DimMismatchError("store: embedding dim " + std::to_string(e.dim()) +
                           " does not match store dim " + std::to_string(dim_) +
                           " for key (" + e.utt_id + ", " + e.condition + ")");
  }
  auto key = std::make_pair(e.utt_id, e.condition);
  if (records_.count(key)) {
    throw DuplicateKeyError("store: duplicate key (" + e.utt_id + ", " +
                            e.condition + ")");
  }
  records_.emplace(std::move(key), std::move(e));
}

const Embedding& EmbeddingStore::get(const std::string& utt_id,
                                     const std::string& condition) const {
  auto it = records_.find(std::make_pair(utt_id, condition));
  if (it == records_.end()) {
    throw NotFoundError("store: no embedding for (" + utt_id + ", " +
                        condition + ")");
  }
  return it->second;
}

std::optional<Embedding> EmbeddingStore::find(
    const std::string& utt_id, const std::string& condition) const {
  auto it = records_.find(std::make_pair(utt_id, condition));
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

bool EmbeddingStore::contains(const std::string& utt_id,
                              const std::string& condition) const {
  return records_.count(std::make_pair(utt_id, condition)) > 0;
}

std::vector<std::pair<std::string, std::string>> EmbeddingStore::keys() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(records_.size());
  for (const auto& [key, rec] : records_) out.push_back(key);
  return out;
}

std::string EmbeddingStore::serialize_text() const {
  std::string out;
  for (const auto& [key, rec] : records_) {
    out += rec.utt_id;
    out += ' ';
    out += rec.condition;
    out += ' ';
    out += std::to_string(rec.dim());
    for (float v : rec.values) {
      out += ' ';
      out += format_float(v);
    }
    out += '\n';
  }
  return out;
}

std::string EmbeddingStore::serialize_binary() const {
  std::string out(kMagic, sizeof(kMagic));
  for (const auto& [key, rec] : records_) {
    std::string payload;
    put_u32le(payload, static_cast<uint32_t>(rec.utt_id.size()));
    payload += rec.utt_id;
    put_u32le(payload, static_cast<uint32_t>(rec.condition.size()));
    payload += rec.condition;
    put_u32le(payload, static_cast<uint32_t>(rec.dim()));
    for (float v : rec.values) put_f32le(payload, v);
    out += payload;
    put_u32le(out, crc32(payload.data(), payload.size()));
  }
  return out;
}

void EmbeddingStore::save_text(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize_text());
}

void EmbeddingStore::save_binary(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize_binary());
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  if (path.extension() == ".txt") {
    save_text(path);
  } else {
    save_binary(path);
  }
}

EmbeddingStore EmbeddingStore::parse_text(const std::string& text) {
  EmbeddingStore store;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_ws(line);
    if (fields.size() < 3) {
      throw ParseError("embedding text line " + std::to_string(line_no) +
                       ": expected <utt> <cond> <dim> <values...>");
    }
    Embedding e;
    e.utt_id = fields[0];
    e.condition = fields[1];
    char* end = nullptr;
    long dim = std::strtol(fields[2].c_str(), &end, 10);
    if (end == fields[2].c_str() || *end != '\0' || dim <= 0) {
      throw ParseError("embedding text line " + std::to_string(line_no) +
                       ": bad dim '" + fields[2] + "'");
    }
    if (fields.size() != static_cast<size_t>(3 + dim)) {
      throw ParseError("embedding text line " + std::to_string(line_no) +
                       ": expected " + std::to_string(dim) + " values, got " +
                       std::to_string(fields.size() - 3));
    }
    e.values.resize(static_cast<size_t>(dim));
    for (long i = 0; i < dim; ++i) {
      const std::string& tok = fields[static_cast<size_t>(3 + i)];
      end = nullptr;
      float v = std::strtof(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') {
        throw ParseError("embedding text line " + std::to_string(line_no) +
                         ": bad float '" + tok + "'");
      }
      e.values[static_cast<size_t>(i)] = v;
    }
    store.put(std::move(e));
  }
  return store;
}

EmbeddingStore EmbeddingStore::parse_binary(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptionError("embedding binary: missing EMB1 magic");
  }
  EmbeddingStore store;
  const auto* p = reinterpret_cast<const uint8_t*>(bytes.data());
  size_t pos = sizeof(kMagic);
  size_t n = bytes.size();
  auto need = [&](size_t want, const char* what) {
    if (pos + want > n) {
      throw CorruptionError(std::string("embedding binary: truncated ") +
                            what + " at offset " + std::to_string(pos));
    }
  };
  while (pos < n) {
    size_t record_start = pos;
    need(4, "id length");
    uint32_t id_len = get_u32le(p + pos);
    pos += 4;
    need(id_len, "utt_id");
    std::string utt_id(bytes, pos, id_len);
    pos += id_len;
    need(4, "condition length");
    uint32_t cond_len = get_u32le(p + pos);
    pos += 4;
    need(cond_len, "condition");
    std::string condition(bytes, pos, cond_len);
    pos += cond_len;
    need(4, "dim");
    uint32_t dim = get_u32le(p + pos);
    pos += 4;
    if (dim == 0 || dim > (1u << 24)) {
      throw CorruptionError("embedding binary: implausible dim " +
                            std::to_string(dim) + " at offset " +
                            std::to_string(pos - 4));
    }
    need(static_cast<size_t>(dim) * 4, "values");
    std::vector<float> values(dim);
    for (uint32_t i = 0; i < dim; ++i) {
      values[i] = get_f32le(p + pos + static_cast<size_t>(i) * 4);
    }
    pos += static_cast<size_t>(dim) * 4;
    uint32_t want_crc = crc32(bytes.data() + record_start, pos - record_start);
    need(4, "checksum");
    uint32_t got_crc = get_u32le(p + pos);
    pos += 4;
    if (want_crc != got_crc) {
      throw CorruptionError("embedding binary: checksum mismatch for (" +
                            utt_id + ", " + condition + ")");
    }
    Embedding e;
    e.utt_id = std::move(utt_id);
    e.condition = std::move(condition);
    e.values = std::move(values);
    store.put(std::move(e));
  }
  return store;
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::string bytes = read_file(path);
  if (bytes.size() >= sizeof(kMagic) &&
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0) {
    return parse_binary(bytes);
  }
  return parse_text(bytes);
}

}  // namespace ttaug
