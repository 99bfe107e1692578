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

#include <memory>
#include <string>
#include <thread>

#include "lrs/study/service.hpp"

namespace httplib {
class Server;
}

namespace lrs::study {

// JSON API over a StudyService:
//   POST /api/sessions                          -> 201 {"session_id"}
//   POST /api/sessions/{id}/consent
//   POST /api/sessions/{id}/username            -> 202 {"username", "market"?}
//   GET  /api/sessions/{id}/status
//   GET  /api/sessions/{id}/items
//   POST /api/sessions/{id}/responses/track     {"rank", "answers"}
//   POST /api/sessions/{id}/responses/global    {"answers"}
//   GET  /api/questions
//   GET  /api/export?from=&to=                  Authorization: Bearer <token>
//   GET  /healthz
// Errors are {"error": code, "message": text} with 400, 401, 404, 409 or 422.
void register_routes(httplib::Server& server, StudyService& service);

// Parses an export bound: unix seconds or YYYY-MM-DD (UTC midnight). Returns
// milliseconds; throws lrs::Error("bad_request").
std::int64_t parse_time_bound(const std::string& s);

// Owns an httplib::Server bound to the configured address and serves on a
// background thread until stop() or destruction.
class HttpServer {
 public:
  explicit HttpServer(StudyService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // port 0 picks an ephemeral port. Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  // Blocks until the server stops.
  void wait();
  int port() const { return port_; }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace lrs::study
