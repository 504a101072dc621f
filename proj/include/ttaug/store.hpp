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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ttaug/types.hpp"

namespace ttaug {

/// Persistent collection of embeddings keyed by (utt_id, condition).
///
/// Writes happen in a single-writer build phase; after load the store is
/// read-only and safe for concurrent readers. Two on-disk formats:
///
/// Text, one record per line:
///   <utt_id> <condition> <dim> <v1> ... <vdim>
/// Binary: magic "EMB1", then per record
///   u32 id_len, id bytes, u32 cond_len, cond bytes, u32 dim,
///   dim float32 values, u32 CRC32 of the preceding record payload.
/// All integers and floats little-endian.
class EmbeddingStore {
 public:
  /// Empty store; dimension is fixed by the first put (or load).
  EmbeddingStore() = default;
  /// Empty store with a pre-configured dimension.
  explicit EmbeddingStore(int dim) : dim_(dim) {}

  /// Inserts an embedding. Throws DuplicateKeyError if (utt_id, condition)
  /// is already present, DimMismatchError if the dimension disagrees with
  /// the store, DataError on non-finite values.
  void put(Embedding e);

  /// Returns the stored embedding. Throws NotFoundError when absent.
  const Embedding& get(const std::string& utt_id,
                       const std::string& condition) const;

  /// Lookup that signals absence by nullopt instead of throwing.
  std::optional<Embedding> find(const std::string& utt_id,
                                const std::string& condition) const;

  bool contains(const std::string& utt_id, const std::string& condition) const;

  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  /// 0 until the first record fixes it.
  int dim() const { return dim_; }

  /// Keys in deterministic (lexicographic) order.
  std::vector<std::pair<std::string, std::string>> keys() const;

  std::string serialize_text() const;
  std::string serialize_binary() const;

  void save_text(const std::filesystem::path& path) const;
  void save_binary(const std::filesystem::path& path) const;
  /// Sniffs the format from the leading bytes ("EMB1" => binary).
  void save(const std::filesystem::path& path) const;

  static EmbeddingStore parse_text(const std::string& text);
  static EmbeddingStore parse_binary(const std::string& bytes);
  /// Loads either format, sniffing the magic. Throws CorruptionError on
  /// checksum or length violations, ParseError on malformed text.
  static EmbeddingStore load(const std::filesystem::path& path);

 private:
  int dim_ = 0;
  std::map<std::pair<std::string, std::string>, Embedding> records_;
};

}  // namespace ttaug
