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

#include "encode/serving.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <istream>
#include <ostream>
#include <utility>

#include <json.hpp>

#include "encode/errors.h"

namespace encode {
namespace {

using json = nlohmann::ordered_json;

std::string error_line(std::string_view code) { return json{{"error", code}}.dump(); }

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

Server::Server(ServingModel model, std::shared_ptr<const Snapshot> initial, std::filesystem::path store_path)
    : model_(std::move(model)), holder_(std::move(initial)), store_path_(std::move(store_path)) {
  const std::size_t d = holder_.current().snapshot->dim();
  if (model_.catalog.dim() != d || model_.head.dim != d) {
    throw ConfigError("store, catalog and scoring head dimensions disagree");
  }
  if (model_.head.realtime_feature) throw ConfigError("serving does not supply a real-time feature");
}

std::uint64_t Server::reload() {
  std::shared_ptr<const Snapshot> next = Snapshot::open(store_path_);
  if (next->dim() != model_.catalog.dim()) throw ConfigError("new store has a different dimension");
  return holder_.swap(std::move(next));
}

Server::Reply Server::score_request(std::uint64_t user, const std::vector<std::uint64_t>& items) const {
  const SnapshotHolder::Versioned snap = holder_.current();
  const std::optional<InterestSet> set = snap.snapshot->find(user);
  if (!set) return {error_line("user_not_found"), snap.generation};
  json scores = json::array();
  for (std::uint64_t id : items) {
    const Item* item = model_.catalog.find(id);
    if (item == nullptr) return {error_line("item_not_found"), snap.generation};
    const Vec interest = online_interest(set->interests, item->embedding, model_.beta, model_.metric).interest;
    scores.push_back(score(model_.head, interest, item->embedding));
  }
  return {json{{"user", user}, {"scores", std::move(scores)}}.dump(), snap.generation};
}

Server::Reply Server::handle(std::string_view line) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception&) {
    return {error_line("bad_request")};
  }
  if (!request.is_object()) return {error_line("bad_request")};
  if (request.contains("cmd")) {
    if (request["cmd"] != "reload") return {error_line("bad_request")};
    try {
      const std::uint64_t generation = reload();
      return {json{{"reloaded", true}, {"generation", generation}}.dump(), generation};
    } catch (const std::exception& e) {
      return {json{{"error", "reload_failed"}, {"message", e.what()}}.dump()};
    }
  }
  const auto user = request.find("user");
  const auto items = request.find("items");
  if (user == request.end() || !user->is_number_unsigned() || items == request.end() || !items->is_array()) {
    return {error_line("bad_request")};
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(items->size());
  for (const json& v : *items) {
    if (!v.is_number_unsigned()) return {error_line("bad_request")};
    ids.push_back(v.get<std::uint64_t>());
  }
  try {
    return score_request(user->get<std::uint64_t>(), ids);
  } catch (const Error& e) {
    return {json{{"error", "bad_request"}, {"message", e.what()}}.dump()};
  }
}

void serve_stream(Server& server, std::istream& in, std::ostream& out, std::atomic<bool>* reload_flag) {
  std::string line;
  while (std::getline(in, line)) {
    if (reload_flag != nullptr && reload_flag->exchange(false)) {
      try {
        server.reload();
      } catch (const std::exception&) {
        // The old snapshot keeps serving.
      }
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << server.handle(line).line << '\n' << std::flush;
  }
}

ReloadWatcher::ReloadWatcher(Server& server, std::atomic<bool>& flag, std::ostream* log)
    : thread_([&server, &flag, log](std::stop_token stop) {
        while (!stop.stop_requested()) {
          if (flag.exchange(false)) {
            try {
              const std::uint64_t g = server.reload();
              if (log != nullptr) *log << "reloaded store, generation " << g << '\n';
            } catch (const std::exception& e) {
              if (log != nullptr) *log << "reload failed, keeping old store: " << e.what() << '\n';
            }
          }
          std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
      }) {}

TcpServer::TcpServer(Server& server, std::uint16_t port, const std::string& host) : server_(server) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw IoError("bad listen address " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 128) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(listen_fd_);
    throw IoError("cannot listen on " + host + ":" + std::to_string(port) + ": " + msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  workers_.clear();
  ::close(listen_fd_);
}

void TcpServer::run() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR && !stopping_) continue;
      break;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    connections_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  std::lock_guard lock(mu_);
  for (int fd : connections_) ::shutdown(fd, SHUT_RDWR);
}

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    bool ok = true;
    for (std::size_t nl; ok && (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
      std::string_view line(buffer.data() + start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty()) continue;
      ok = send_all(fd, server_.handle(line).line + '\n');
    }
    if (!ok) break;
    buffer.erase(0, start);
  }
  std::lock_guard lock(mu_);
  connections_.erase(std::remove(connections_.begin(), connections_.end(), fd), connections_.end());
  ::close(fd);
}

}  // namespace encode
