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

#include "lrs/study/http_api.hpp"

#include <charconv>
#include <ctime>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include <spdlog/spdlog.h>

namespace lrs::study {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                json extra = json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

int status_for(const std::string& code) {
  if (code == errc::kUnknownSession) return 404;
  if (code == errc::kUnauthorized) return 401;
  if (code == errc::kWrongState || code == errc::kJobAlreadyRunning || code == errc::kDuplicateResponse ||
      code == "illegal_transition")
    return 409;
  if (code == errc::kUnknownRank) return 422;
  if (code == "bad_request") return 400;
  if (code == "unavailable") return 503;
  return 500;
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error("bad_request", "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error("bad_request", std::string("malformed JSON: ") + e.what());
  }
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const InvalidAnswer& e) {
      send_error(res, 422, e.code(), e.what(), {{"question_id", e.question_id()}});
    } catch (const Error& e) {
      const int status = status_for(e.code());
      if (status == 500) spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, status, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "internal", "internal error");
    }
  };
}

json status_json(const Status& st) {
  json j{{"state", to_string(st.state)}, {"progress", st.progress}};
  j["phase"] = st.phase.empty() ? json(nullptr) : json(st.phase);
  j["reason"] = st.reason.empty() ? json(nullptr) : json(st.reason);
  return j;
}

}  // namespace

std::int64_t parse_time_bound(const std::string& s) {
  int y = 0, m = 0, d = 0;
  char extra = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &extra) == 3 && s.size() == 10) {
    if (m < 1 || m > 12 || d < 1 || d > 31) throw Error("bad_request", "invalid date: " + s);
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = m - 1;
    tm.tm_mday = d;
    return static_cast<std::int64_t>(timegm(&tm)) * 1000;
  }
  std::int64_t secs = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), secs);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("bad_request", "invalid time bound: " + s);
  return secs * 1000;
}

void register_routes(httplib::Server& server, StudyService& service) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  server.Get("/api/questions", guarded([&service](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, service.questions().to_json());
             }));

  server.Post("/api/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                body_of(req);
                send_json(res, 201, {{"session_id", service.create_session()}});
              }));

  server.Post(R"(/api/sessions/([0-9a-f]+)/consent)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                body_of(req);
                service.consent(id);
                send_json(res, 200, status_json(service.get_status(id)));
              }));

  server.Post(R"(/api/sessions/([0-9a-f]+)/username)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const auto body = body_of(req);
                if (!body.contains("username") || !body["username"].is_string())
                  throw InvalidAnswer("username", "username is required");
                const std::string market = body.value("market", std::string{});
                service.submit_username(id, body["username"].get<std::string>(), market);
                send_json(res, 202, status_json(service.get_status(id)));
              }));

  server.Get(R"(/api/sessions/([0-9a-f]+)/status)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, status_json(service.get_status(req.matches[1])));
             }));

  server.Get(R"(/api/sessions/([0-9a-f]+)/items)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service.items_view(req.matches[1]));
             }));

  server.Post(R"(/api/sessions/([0-9a-f]+)/responses/track)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_of(req);
                if (!body.contains("rank") || !body["rank"].is_number_integer())
                  throw Error("bad_request", "rank must be an integer");
                const auto rank = body["rank"].get<std::int64_t>();
                if (rank < 1) throw Error(errc::kUnknownRank, "rank must be positive");
                const auto s = service.record_track_response(req.matches[1], static_cast<std::size_t>(rank),
                                                             body.value("answers", json::object()));
                send_json(res, 200, {{"state", to_string(s.state)}});
              }));

  server.Post(R"(/api/sessions/([0-9a-f]+)/responses/global)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto body = body_of(req);
                const auto s = service.record_global_response(req.matches[1], body.value("answers", json::object()));
                send_json(res, 200, {{"state", to_string(s.state)}});
              }));

  server.Get("/api/export", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               std::string token;
               const auto auth = req.get_header_value("Authorization");
               constexpr std::string_view kBearer = "Bearer ";
               if (auth.rfind(kBearer, 0) == 0) token = auth.substr(kBearer.size());
               std::optional<std::int64_t> from, to;
               if (req.has_param("from")) from = parse_time_bound(req.get_param_value("from"));
               if (req.has_param("to")) to = parse_time_bound(req.get_param_value("to"));
               std::ostringstream out;
               service.export_responses(out, token, from, to);
               res.set_content(out.str(), "application/x-ndjson");
             }));

  // Unmatched session routes with a malformed id.
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) send_error(res, 404, "not_found", "no such route");
  });

  const auto& dir = service.config().static_dir;
  if (!dir.empty() && !server.set_mount_point("/", dir)) spdlog::warn("static directory {} not mounted", dir);
}

HttpServer::HttpServer(StudyService& service) : server_(std::make_unique<httplib::Server>()) {
  const int threads = service.config().http_threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  register_routes(*server_, service);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error("bind_failed", "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpServer::stop() {
  server_->stop();
  wait();
}

void HttpServer::wait() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace lrs::study
