// Copyright 2026 The Encode Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Online scoring service: line-delimited JSON requests answered from the
// current interest-store snapshot, over a byte stream or TCP.

#ifndef ENCODE_SERVING_H_
#define ENCODE_SERVING_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "encode/datagen.h"
#include "encode/inference.h"
#include "encode/store.h"

namespace encode {

struct ServingModel {
  ItemCatalog catalog;
  ScoringHead head;
  double beta = 20.0;
  AttentionMetric metric = AttentionMetric::kUnifiedSim;
};

// Request lines:
//   {"user": u64, "items": [u64, ...]}  -> {"user": u64, "scores": [float, ...]}
//   {"cmd": "reload"}                   -> {"reloaded": true, "generation": n}
// Errors are reported in-band as {"error": "..."}: user_not_found,
// item_not_found, bad_request, reload_failed.
class Server {
 public:
  // Throws ConfigError when the store, catalog and head disagree on the
  // dimension or the head needs a real-time feature.
  Server(ServingModel model, std::shared_ptr<const Snapshot> initial, std::filesystem::path store_path);

  struct Reply {
    std::string line;             // without the trailing newline
    std::uint64_t generation = 0;  // snapshot that answered; 0 if none
  };

  // Thread-safe.
  Reply handle(std::string_view line);

  // Swaps in the store at the configured path. On failure the old snapshot
  // keeps serving and the error propagates. Returns the new generation.
  std::uint64_t reload();

  SnapshotHolder::Versioned current() const { return holder_.current(); }

 private:
  Reply score_request(std::uint64_t user, const std::vector<std::uint64_t>& items) const;

  ServingModel model_;
  SnapshotHolder holder_;
  std::filesystem::path store_path_;
};

// Answers one line per request line until end of input. Reload requests
// raised through `reload_flag` are honored between lines.
void serve_stream(Server& server, std::istream& in, std::ostream& out, std::atomic<bool>* reload_flag = nullptr);

// Polls `flag` and reloads the server whenever it is set (the SIGHUP path).
class ReloadWatcher {
 public:
  ReloadWatcher(Server& server, std::atomic<bool>& flag, std::ostream* log = nullptr);

 private:
  std::jthread thread_;
};

// Thread-per-connection TCP front end for Server.
class TcpServer {
 public:
  // Binds and listens; port 0 picks an ephemeral port. Throws IoError.
  TcpServer(Server& server, std::uint16_t port, const std::string& host = "127.0.0.1");
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }

  // Accepts connections until stop().
  void run();
  void stop();

 private:
  void serve_connection(int fd);

  Server& server_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<int> connections_;
  std::vector<std::jthread> workers_;
};

}  // namespace encode

#endif  // ENCODE_SERVING_H_
