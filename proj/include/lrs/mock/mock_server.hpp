// Copyright 2026 The Live Rec Study Authors.
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

#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace lrs::mock {

struct RecordedRequest {
  std::string path;  // path with query string
  std::chrono::steady_clock::time_point at;
};

// Shared plumbing for the deterministic offline fixtures: an httplib server
// bound to 127.0.0.1 on an ephemeral port, a request log, and fault
// injection.
class MockServer {
 public:
  MockServer();
  virtual ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds and starts serving on a background thread. port 0 = ephemeral.
  void start(int port = 0);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;

  std::vector<RecordedRequest> requests() const;
  void clear_requests();

  // The next `count` requests whose path starts with `path_prefix` are
  // answered with `status` and an empty JSON object.
  void inject_failures(std::string path_prefix, int status, int count);

 protected:
  virtual void register_routes(httplib::Server& server) = 0;

  // Logs the request and applies pending fault injection. Returns false when
  // the request was answered with an injected failure.
  bool admit(const httplib::Request& req, httplib::Response& res);

  static void reply_json(httplib::Response& res, const nlohmann::json& body, int status = 200);

 private:
  struct Fault {
    std::string prefix;
    int status;
    int remaining;
  };

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  std::vector<RecordedRequest> log_;
  std::vector<Fault> faults_;
};

struct ScrobbleMockOptions {
  std::chrono::milliseconds page_latency{0};  // applied to every events page
  int friends_page_size = 50;
};

// Scrobble-service fixture. World format:
//   {"users": {"<name>": {"public": bool, "event_count": int (optional,
//     defaults to the number of events), "events": [{"artist", "title",
//     "timestamp"}], "friends": ["<name>", ...]}}}
class MockScrobbleServer : public MockServer {
 public:
  explicit MockScrobbleServer(nlohmann::json world, ScrobbleMockOptions options = {});
  static std::unique_ptr<MockScrobbleServer> from_file(const std::string& path,
                                                       ScrobbleMockOptions options = {});

  const nlohmann::json& world() const { return world_; }
  void set_page_latency(std::chrono::milliseconds latency);

 protected:
  void register_routes(httplib::Server& server) override;

 private:
  nlohmann::json world_;
  ScrobbleMockOptions options_;
  std::mutex options_mu_;
};

// Catalog-search fixture. World format:
//   {"tracks": [{"id", "artist", "title", "artwork_url", "preview_seconds",
//     "previews": {"<MARKET>" | "*": "<url>" | null}}]}
// Search matches artist and title case-insensitively.
class MockCatalogServer : public MockServer {
 public:
  explicit MockCatalogServer(nlohmann::json world);
  static std::unique_ptr<MockCatalogServer> from_file(const std::string& path);

 protected:
  void register_routes(httplib::Server& server) override;

 private:
  nlohmann::json world_;
};

}  // namespace lrs::mock
