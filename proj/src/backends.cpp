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

#include "ttaug/backends.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <cstring>
#include <mutex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ttaug/errors.hpp"
#include "ttaug/util.hpp"

namespace ttaug {

namespace {

using nlohmann::json;

double effective_timeout(double configured) {
  if (const char* env = std::getenv("TTA_BACKEND_TIMEOUT_S")) {
    char* end = nullptr;
    double v = std::strtod(env, &end);
    if (end != env && *end == '\0' && v > 0.0) return v;
  }
  return configured;
}

json make_embed_request(const std::filesystem::path& audio_path) {
  return json{{"audio_path", audio_path.string()}};
}

json make_tts_request(const std::filesystem::path& prompt_path,
                      const std::string& text,
                      const std::filesystem::path& out_path) {
  return json{{"prompt_path", prompt_path.string()},
              {"text", text},
              {"out_path", out_path.string()}};
}

Embedding parse_embed_response(const json& j, const std::string& backend,
                               int expected_dim) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("embedding") ||
      !j.contains("utt_id")) {
    throw ProtocolError("backend '" + backend +
                        "': embed response missing utt_id/dim/embedding");
  }
  Embedding e;
  e.utt_id = j.at("utt_id").get<std::string>();
  int dim = j.at("dim").get<int>();
  const json& values = j.at("embedding");
  if (!values.is_array() || static_cast<int>(values.size()) != dim) {
    throw ProtocolError("backend '" + backend +
                        "': embedding length disagrees with dim");
  }
  if (expected_dim > 0 && dim != expected_dim) {
    throw ProtocolError("backend '" + backend + "': returned dim " +
                        std::to_string(dim) + ", expected " +
                        std::to_string(expected_dim));
  }
  e.values.reserve(values.size());
  for (const json& v : values) {
    if (!v.is_number()) {
      throw ProtocolError("backend '" + backend +
                          "': non-numeric embedding value");
    }
    e.values.push_back(v.get<float>());
  }
  return e;
}

TtsResult parse_tts_response(const json& j, const std::string& backend) {
  if (!j.is_object() || !j.contains("out_path") || !j.contains("duration_s")) {
    throw ProtocolError("backend '" + backend +
                        "': tts response missing out_path/duration_s");
  }
  TtsResult r;
  r.out_path = j.at("out_path").get<std::string>();
  r.duration_s = j.at("duration_s").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// Subprocess transport: persistent child, one JSON line in, one line out.
// ---------------------------------------------------------------------------

class SubprocessChannel {
 public:
  explicit SubprocessChannel(std::string command) : command_(std::move(command)) {
    // Writes to a dead child must fail with EPIPE, not kill the process.
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
  }

  ~SubprocessChannel() { shutdown(); }

  std::string round_trip(const std::string& request_line, double timeout_s) {
    if (pid_ < 0) spawn();
    std::string line = request_line;
    line.push_back('\n');
    write_all(line);
    return read_line(timeout_s);
  }

  void reset() { shutdown(); }

 private:
  void spawn() {
    std::vector<std::string> argv_strings = split_ws(command_);
    if (argv_strings.empty()) {
      throw ConfigError("subprocess backend: empty command");
    }
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
      throw BackendError("subprocess backend: pipe() failed");
    }
    pid_t pid = fork();
    if (pid < 0) {
      throw BackendError("subprocess backend: fork() failed");
    }
    if (pid == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      close(in_pipe[0]);
      close(in_pipe[1]);
      close(out_pipe[0]);
      close(out_pipe[1]);
      std::vector<char*> argv;
      argv.reserve(argv_strings.size() + 1);
      for (std::string& s : argv_strings) argv.push_back(s.data());
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];
    pid_ = pid;
    buffer_.clear();
  }

  void write_all(const std::string& data) {
    size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::write(stdin_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        int saved = errno;
        shutdown();
        throw BackendError(std::string("subprocess backend: write failed: ") +
                           std::strerror(saved));
      }
      off += static_cast<size_t>(n);
    }
  }

  std::string read_line(double timeout_s) {
    const auto deadline_ms = static_cast<int64_t>(timeout_s * 1000.0);
    int64_t waited_ms = 0;
    for (;;) {
      size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      struct pollfd pfd{stdout_fd_, POLLIN, 0};
      const int slice_ms = 50;
      int rc = ::poll(&pfd, 1, slice_ms);
      if (rc < 0) {
        if (errno == EINTR) continue;
        shutdown();
        throw BackendError("subprocess backend: poll failed");
      }
      if (rc == 0) {
        waited_ms += slice_ms;
        if (waited_ms >= deadline_ms) {
          shutdown();
          throw TimeoutError("subprocess backend: no response within " +
                             std::to_string(timeout_s) + " s");
        }
        continue;
      }
      char chunk[4096];
      ssize_t n = ::read(stdout_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        shutdown();
        throw BackendError("subprocess backend: read failed");
      }
      if (n == 0) {
        shutdown();
        throw BackendError("subprocess backend: child closed stdout");
      }
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  void shutdown() {
    if (stdin_fd_ >= 0) {
      close(stdin_fd_);
      stdin_fd_ = -1;
    }
    if (stdout_fd_ >= 0) {
      close(stdout_fd_);
      stdout_fd_ = -1;
    }
    if (pid_ > 0) {
      // Give the child a moment to exit on EOF, then insist.
      for (int i = 0; i < 20; ++i) {
        int status = 0;
        pid_t r = waitpid(pid_, &status, WNOHANG);
        if (r == pid_) {
          pid_ = -1;
          return;
        }
        usleep(10'000);
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

  std::string command_;
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
};

}  // namespace

BackendTransport transport_from_name(const std::string& name) {
  if (name == "mock") return BackendTransport::kMock;
  if (name == "http") return BackendTransport::kHttp;
  if (name == "subprocess") return BackendTransport::kSubprocess;
  throw ConfigError("unknown backend transport '" + name + "'");
}

std::string transport_name(BackendTransport t) {
  switch (t) {
    case BackendTransport::kMock: return "mock";
    case BackendTransport::kHttp: return "http";
    case BackendTransport::kSubprocess: return "subprocess";
  }
  throw ConfigError("unknown backend transport");
}

std::string resolve_text(const TextStrategy& strategy,
                         const std::string& utt_id, int round) {
  if (strategy.mode == TextStrategy::Mode::kFixed) {
    if (strategy.fixed_texts.size() != 3) {
      throw ConfigError("text strategy: fixed mode needs exactly 3 texts, "
                        "got " + std::to_string(strategy.fixed_texts.size()));
    }
    if (round < 0 || round >= 3) {
      throw ConfigError("text strategy: round " + std::to_string(round) +
                        " out of range for fixed mode");
    }
    return strategy.fixed_texts[static_cast<size_t>(round)];
  }
  auto it = strategy.transcripts.find(utt_id);
  if (it == strategy.transcripts.end()) {
    throw NotFoundError("text strategy: no transcript for utterance '" +
                        utt_id + "'");
  }
  return it->second;
}

Embedding mock_embed_file(const std::filesystem::path& audio_path, int dim) {
  if (dim <= 0) throw ConfigError("mock embed: non-positive dim");
  uint64_t file_hash = hash_file(audio_path);
  Rng rng(key_combine(file_hash, fnv1a64("mock-embed")));
  std::vector<float> v(static_cast<size_t>(dim));
  for (float& x : v) x = static_cast<float>(rng.next_gaussian());
  Embedding e;
  e.utt_id = audio_path.stem().string();
  e.values = l2_normalize(v);
  return e;
}

TtsResult mock_tts_file(const std::filesystem::path& prompt_path,
                        const std::string& text,
                        const std::filesystem::path& out_path) {
  AudioBuffer prompt = load_wav(prompt_path);
  if (prompt.samples.empty()) {
    throw BackendError("mock tts: empty prompt audio");
  }
  size_t words = split_ws(text).size();
  double target_s = 0.5 * static_cast<double>(std::max<size_t>(words, 1));
  AudioBuffer out = repeat_to_duration(prompt, target_s);
  uint64_t key = key_combine(key_combine(fnv1a64("mock-tts"), fnv1a64(text)),
                             hash_file(prompt_path));
  Rng rng(key);
  float gain = static_cast<float>(0.7 + 0.3 * rng.next_unit());
  for (float& s : out.samples) {
    s = std::clamp(s * gain, -1.0f, 1.0f);
  }
  save_wav(out, out_path);
  return TtsResult{out_path, out.duration_s()};
}

std::filesystem::path tts_cache_path(const std::filesystem::path& cache_root,
                                     const std::string& backend_name,
                                     uint64_t prompt_hash,
                                     const std::string& text, int round) {
  return cache_root / backend_name / hex64(prompt_hash) /
         (hex64(fnv1a64(text)) + "-" + std::to_string(round) + ".wav");
}

struct BackendClient::Impl {
  BackendEndpoint ep;
  std::mutex mu;  // serializes request/response pairs per client
  std::unique_ptr<SubprocessChannel> child;

  explicit Impl(BackendEndpoint e) : ep(std::move(e)) {
    ep.timeout_s = effective_timeout(ep.timeout_s);
    if (ep.name.empty()) {
      throw ConfigError("backend endpoint: empty name");
    }
    if (!(ep.timeout_s > 0.0)) {
      throw ConfigError("backend '" + ep.name + "': non-positive timeout");
    }
    if (ep.transport == BackendTransport::kSubprocess) {
      child = std::make_unique<SubprocessChannel>(ep.address);
    }
  }

  json call_http(const std::string& route, const json& body) {
    httplib::Client client(ep.address);
    auto secs = static_cast<time_t>(ep.timeout_s);
    auto usecs = static_cast<time_t>((ep.timeout_s - secs) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Result res = client.Post(route, body.dump(), "application/json");
    if (!res) {
      if (res.error() == httplib::Error::ConnectionTimeout ||
          res.error() == httplib::Error::Read ||
          res.error() == httplib::Error::Write) {
        throw TimeoutError("backend '" + ep.name + "': " +
                           httplib::to_string(res.error()));
      }
      throw BackendError("backend '" + ep.name + "': transport failure: " +
                         httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendError("backend '" + ep.name + "': HTTP " +
                         std::to_string(res->status) + " on " + route +
                         ": " + res->body);
    }
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) {
      throw ProtocolError("backend '" + ep.name +
                          "': response is not valid JSON");
    }
    return j;
  }

  json call_subprocess(const json& body) {
    std::string reply;
    try {
      reply = child->round_trip(body.dump(), ep.timeout_s);
    } catch (const TimeoutError&) {
      throw;
    } catch (const BackendError&) {
      child->reset();
      throw;
    }
    json j = json::parse(reply, nullptr, false);
    if (j.is_discarded()) {
      throw ProtocolError("backend '" + ep.name +
                          "': response line is not valid JSON: " + reply);
    }
    return j;
  }
};

BackendClient::BackendClient(BackendEndpoint ep)
    : impl_(std::make_unique<Impl>(std::move(ep))) {}

BackendClient::~BackendClient() = default;

const BackendEndpoint& BackendClient::endpoint() const { return impl_->ep; }

Embedding BackendClient::request_embedding(
    const std::filesystem::path& audio_path) {
  const BackendEndpoint& ep = impl_->ep;
  if (ep.kind != BackendKind::kEmbed) {
    throw ConfigError("backend '" + ep.name + "' is not an embed endpoint");
  }
  if (!std::filesystem::exists(audio_path)) {
    throw DataError("embed request: no such file " + audio_path.string());
  }
  if (ep.transport == BackendTransport::kMock) {
    return mock_embed_file(audio_path, ep.dim);
  }
  std::lock_guard<std::mutex> lock(impl_->mu);
  json request = make_embed_request(audio_path);
  int attempts = 1 + std::max(0, ep.max_retries);
  for (int attempt = 1;; ++attempt) {
    try {
      json response = ep.transport == BackendTransport::kHttp
                          ? impl_->call_http("/v1/embed", request)
                          : impl_->call_subprocess(request);
      return parse_embed_response(response, ep.name, ep.dim);
    } catch (const ProtocolError&) {
      throw;  // malformed responses are not transient
    } catch (const BackendError&) {
      if (attempt >= attempts) throw;
    }
  }
}

TtsResult BackendClient::request_tts(const std::filesystem::path& prompt_path,
                                     const std::string& text,
                                     const std::filesystem::path& out_path) {
  const BackendEndpoint& ep = impl_->ep;
  if (ep.kind != BackendKind::kTts) {
    throw ConfigError("backend '" + ep.name + "' is not a tts endpoint");
  }
  if (text.empty()) {
    throw DataError("tts request: empty text");
  }
  if (!std::filesystem::exists(prompt_path)) {
    throw DataError("tts request: no such prompt file " +
                    prompt_path.string());
  }
  if (!out_path.parent_path().empty()) {
    std::filesystem::create_directories(out_path.parent_path());
  }

  auto validate_output = [&](const TtsResult& r) {
    std::error_code ec;
    auto size = std::filesystem::file_size(r.out_path, ec);
    if (ec || size == 0) {
      std::filesystem::remove(r.out_path, ec);
      throw BackendError("backend '" + ep.name +
                         "': generation produced no output for '" +
                         prompt_path.string() + "'");
    }
    AudioBuffer check = load_wav(r.out_path);
    if (check.samples.empty()) {
      std::filesystem::remove(r.out_path, ec);
      throw BackendError("backend '" + ep.name +
                         "': generation produced zero-length audio");
    }
    return r;
  };

  if (ep.transport == BackendTransport::kMock) {
    return validate_output(mock_tts_file(prompt_path, text, out_path));
  }
  std::lock_guard<std::mutex> lock(impl_->mu);
  json request = make_tts_request(prompt_path, text, out_path);
  int attempts = 1 + std::max(0, ep.max_retries);
  for (int attempt = 1;; ++attempt) {
    try {
      json response = ep.transport == BackendTransport::kHttp
                          ? impl_->call_http("/v1/tts", request)
                          : impl_->call_subprocess(request);
      return validate_output(parse_tts_response(response, ep.name));
    } catch (const ProtocolError&) {
      throw;
    } catch (const BackendError&) {
      std::error_code ec;
      std::filesystem::remove(out_path, ec);  // no partial artifacts
      if (attempt >= attempts) throw;
    }
  }
}

TtsResult request_tts_cached(BackendClient& client,
                             const std::filesystem::path& prompt_path,
                             const std::string& text, int round,
                             const std::filesystem::path& cache_root,
                             bool* cache_hit) {
  uint64_t prompt_hash = hash_file(prompt_path);
  std::filesystem::path cached = tts_cache_path(
      cache_root, client.endpoint().name, prompt_hash, text, round);
  std::error_code ec;
  if (std::filesystem::exists(cached, ec) &&
      std::filesystem::file_size(cached, ec) > 0) {
    if (cache_hit) *cache_hit = true;
    AudioBuffer a = load_wav(cached);
    return TtsResult{cached, a.duration_s()};
  }
  if (cache_hit) *cache_hit = false;
  std::filesystem::create_directories(cached.parent_path());
  // The backend writes a sibling temp path; publish by atomic rename so the
  // cache never holds partial entries.
  static std::atomic<uint64_t> tmp_counter{0};
  std::filesystem::path tmp = cached;
  tmp += ".part" + std::to_string(::getpid()) + "-" +
         std::to_string(tmp_counter.fetch_add(1));
  TtsResult r = client.request_tts(prompt_path, text, tmp);
  std::filesystem::rename(tmp, cached, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("tts cache: rename failed for " + cached.string());
  }
  r.out_path = cached;
  return r;
}

}  // namespace ttaug
