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

// Deterministic mock embedding/TTS backend speaking the line-delimited JSON
// protocol on stdio, or HTTP when --http is given. Useful as a stand-in for
// real model servers and as the reference implementation of the wire
// contract.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ttaug/backends.hpp"
#include "ttaug/errors.hpp"

namespace {

using nlohmann::json;

json handle_request(const json& request, int dim) {
  if (request.contains("audio_path")) {
    ttaug::Embedding e = ttaug::mock_embed_file(
        request.at("audio_path").get<std::string>(), dim);
    json values = json::array();
    for (float v : e.values) values.push_back(v);
    return json{{"utt_id", e.utt_id},
                {"dim", e.dim()},
                {"embedding", std::move(values)}};
  }
  if (request.contains("prompt_path")) {
    ttaug::TtsResult r = ttaug::mock_tts_file(
        request.at("prompt_path").get<std::string>(),
        request.at("text").get<std::string>(),
        request.at("out_path").get<std::string>());
    return json{{"out_path", r.out_path.string()},
                {"duration_s", r.duration_s}};
  }
  throw ttaug::ProtocolError(
      "request carries neither audio_path nor prompt_path");
}

int serve_stdio(int dim) {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json response;
    try {
      json request = json::parse(line);
      response = handle_request(request, dim);
    } catch (const std::exception& e) {
      response = json{{"error", e.what()}};
    }
    std::cout << response.dump() << "\n" << std::flush;
  }
  return 0;
}

int serve_http(int dim, const std::string& host, int port) {
  httplib::Server server;
  auto handler = [dim](const httplib::Request& req, httplib::Response& res) {
    try {
      json request = json::parse(req.body);
      res.set_content(handle_request(request, dim).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  };
  server.Post("/v1/embed", handler);
  server.Post("/v1/tts", handler);
  std::cerr << "mock backend listening on " << host << ":" << port << "\n";
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic mock speaker-embedding / TTS backend"};
  int dim = ttaug::kDefaultEmbeddingDim;
  int http_port = 0;
  std::string host = "127.0.0.1";
  app.add_option("--dim", dim, "embedding dimension");
  app.add_option("--http", http_port, "serve HTTP on this port (default: stdio)");
  app.add_option("--host", host, "HTTP bind address");
  CLI11_PARSE(app, argc, argv);

  if (http_port > 0) {
    return serve_http(dim, host, http_port);
  }
  return serve_stdio(dim);
}
