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
#include <memory>
#include <string>
#include <vector>

#include "ttaug/audio.hpp"
#include "ttaug/types.hpp"

namespace ttaug {

// Wire protocol (line-delimited JSON, field names are contractual):
//   embed request   {"audio_path": "..."}
//   embed response  {"utt_id": "...", "dim": N, "embedding": [...]}
//   tts request     {"prompt_path": "...", "text": "...", "out_path": "..."}
//   tts response    {"out_path": "...", "duration_s": X}
// HTTP transport posts the bodies to /v1/embed and /v1/tts. Subprocess
// transport writes one request per stdin line and reads one response per
// stdout line; requests are told apart by their fields (audio_path vs
// prompt_path). The env var TTA_BACKEND_TIMEOUT_S overrides timeouts.

enum class BackendKind { kEmbed, kTts };
enum class BackendTransport { kMock, kHttp, kSubprocess };

struct BackendEndpoint {
  BackendKind kind = BackendKind::kEmbed;
  BackendTransport transport = BackendTransport::kMock;
  /// Base URL (http), executable invocation (subprocess), or unused (mock).
  std::string address;
  double timeout_s = 30.0;
  std::string name;
  /// Transport-failure retries for idempotent requests.
  int max_retries = 2;
  /// Expected embedding dimension; responses disagreeing are protocol errors.
  int dim = kDefaultEmbeddingDim;
};

BackendTransport transport_from_name(const std::string& name);
std::string transport_name(BackendTransport t);

/// What text the TTS reads: the same fixed sentences for every utterance
/// (exactly three, one per round) or each utterance's original transcript.
struct TextStrategy {
  enum class Mode { kFixed, kOriginal };
  Mode mode = Mode::kFixed;
  std::vector<std::string> fixed_texts;
  std::map<std::string, std::string> transcripts;

  int rounds() const { return mode == Mode::kFixed ? 3 : 1; }
};

/// fixed mode -> fixed_texts[round]; original mode -> the utterance's
/// transcript. Throws ConfigError on an invalid strategy, NotFoundError
/// naming the utt_id on a missing transcript.
std::string resolve_text(const TextStrategy& strategy,
                         const std::string& utt_id, int round);

struct TtsResult {
  std::filesystem::path out_path;
  double duration_s = 0.0;
};

/// Client for one endpoint. Requests are serialized internally, so one
/// client can be shared across threads; failures never leave partial
/// artifacts behind.
class BackendClient {
 public:
  explicit BackendClient(BackendEndpoint ep);
  ~BackendClient();
  BackendClient(const BackendClient&) = delete;
  BackendClient& operator=(const BackendClient&) = delete;

  const BackendEndpoint& endpoint() const;

  /// Embeds one audio file. Retries idempotently on transport failure up to
  /// endpoint().max_retries times. The caller assigns utt_id and condition
  /// on the returned embedding.
  Embedding request_embedding(const std::filesystem::path& audio_path);

  /// Synthesizes speech for (prompt, text) into out_path. Throws on empty
  /// text before any call, and BackendError on empty output.
  TtsResult request_tts(const std::filesystem::path& prompt_path,
                        const std::string& text,
                        const std::filesystem::path& out_path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Deterministic mock extractor: a unit vector seeded by the file's bytes.
/// Byte-identical files map to identical embeddings.
Embedding mock_embed_file(const std::filesystem::path& audio_path, int dim);

/// Deterministic mock synthesizer: the prompt tiled to 0.5 s per word of
/// text and amplitude-perturbed by a text-seeded factor.
TtsResult mock_tts_file(const std::filesystem::path& prompt_path,
                        const std::string& text,
                        const std::filesystem::path& out_path);

/// cache/<backend>/<prompt-hash>/<text-hash>-<round>.wav
std::filesystem::path tts_cache_path(const std::filesystem::path& cache_root,
                                     const std::string& backend_name,
                                     uint64_t prompt_hash,
                                     const std::string& text, int round);

/// Returns the cached WAV when present; otherwise synthesizes through the
/// client into the cache (atomically) and returns the new entry.
TtsResult request_tts_cached(BackendClient& client,
                             const std::filesystem::path& prompt_path,
                             const std::string& text, int round,
                             const std::filesystem::path& cache_root,
                             bool* cache_hit = nullptr);

}  // namespace ttaug
