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

#include "lrs/mock/mock_server.hpp"

#include <fstream>

#include "httplib.h"
#include "lrs/error.hpp"
#include "lrs/text.hpp"

namespace lrs::mock {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open fixture: " + path);
  return json::parse(in);
}

int query_int(const httplib::Request& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return std::stoi(req.get_param_value(key));
  } catch (const std::exception&) {
    return fallback;
  }
}

}  // namespace

MockServer::MockServer() : server_(std::make_unique<httplib::Server>()) {}

MockServer::~MockServer() { stop(); }

void MockServer::start(int port) {
  register_routes(*server_);
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    if (!server_->bind_to_port("127.0.0.1", port)) port = -1;
    port_ = port;
  }
  if (port_ < 0) throw Error("io", "mock server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::vector<RecordedRequest> MockServer::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

void MockServer::clear_requests() {
  std::lock_guard lock(mu_);
  log_.clear();
}

void MockServer::inject_failures(std::string path_prefix, int status, int count) {
  std::lock_guard lock(mu_);
  faults_.push_back({std::move(path_prefix), status, count});
}

bool MockServer::admit(const httplib::Request& req, httplib::Response& res) {
  std::string path = req.path;
  if (!req.params.empty()) {
    // httplib drops the raw query; rebuild it in a stable key order.
    std::string q;
    for (const auto& [k, v] : req.params) q += (q.empty() ? "?" : "&") + k + "=" + v;
    path += q;
  }
  std::lock_guard lock(mu_);
  log_.push_back({path, std::chrono::steady_clock::now()});
  for (auto& f : faults_) {
    if (f.remaining > 0 && req.path.starts_with(f.prefix)) {
      --f.remaining;
      res.status = f.status;
      res.set_content("{}", "application/json");
      return false;
    }
  }
  return true;
}

void MockServer::reply_json(httplib::Response& res, const json& body, int status) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// ---------------------------------------------------------------------------

MockScrobbleServer::MockScrobbleServer(json world, ScrobbleMockOptions options)
    : world_(std::move(world)), options_(options) {
  if (!world_.contains("users") || !world_["users"].is_object())
    throw Error("invalid_fixture", "scrobble fixture needs a \"users\" object");
}

std::unique_ptr<MockScrobbleServer> MockScrobbleServer::from_file(const std::string& path,
                                                                  ScrobbleMockOptions options) {
  return std::make_unique<MockScrobbleServer>(load_json(path), options);
}

void MockScrobbleServer::set_page_latency(std::chrono::milliseconds latency) {
  std::lock_guard lock(options_mu_);
  options_.page_latency = latency;
}

void MockScrobbleServer::register_routes(httplib::Server& server) {
  const auto find_user = [this](const httplib::Request& req, httplib::Response& res,
                                 bool allow_private) -> const json* {
    const auto& users = world_["users"];
    const auto it = users.find(req.matches[1].str());
    if (it == users.end()) {
      reply_json(res, {{"error", "user not found"}}, 404);
      return nullptr;
    }
    if (!allow_private && !it->value("public", true)) {
      reply_json(res, {{"error", "private"}}, 403);
      return nullptr;
    }
    return &*it;
  };

  const auto paged = [](std::size_t total, int page, int per_page) {
    const int total_pages = static_cast<int>((total + static_cast<std::size_t>(per_page) - 1) /
                                             static_cast<std::size_t>(per_page));
    return std::pair{total_pages, page};
  };

  server.Get(R"(/users/([^/]+))", [this, find_user](const httplib::Request& req, httplib::Response& res) {
    if (!admit(req, res)) return;
    const json* user = find_user(req, res, true);
    if (!user) return;
    const auto& events = user->value("events", json::array());
    const auto count = user->value("event_count", static_cast<std::int64_t>(events.size()));
    reply_json(res, {{"event_count", count}, {"public", user->value("public", true)}});
  });

  server.Get(R"(/users/([^/]+)/events)", [this, find_user, paged](const httplib::Request& req,
                                                                   httplib::Response& res) {
    if (!admit(req, res)) return;
    std::chrono::milliseconds latency;
    {
      std::lock_guard lock(options_mu_);
      latency = options_.page_latency;
    }
    if (latency.count() > 0) std::this_thread::sleep_for(latency);
    const json* user = find_user(req, res, false);
    if (!user) return;
    const auto& events = user->value("events", json::array());
    const int per_page = std::clamp(query_int(req, "per_page", 50), 1, 500);
    const int page = std::max(1, query_int(req, "page", 1));
    const auto [total_pages, p] = paged(events.size(), page, per_page);
    json slice = json::array();
    const auto begin = static_cast<std::size_t>(p - 1) * static_cast<std::size_t>(per_page);
    for (std::size_t i = begin; i < std::min(events.size(), begin + static_cast<std::size_t>(per_page)); ++i)
      slice.push_back(events[i]);
    reply_json(res, {{"total", events.size()}, {"total_pages", total_pages}, {"page", p}, {"events", slice}});
  });

  server.Get(R"(/users/([^/]+)/friends)", [this, find_user, paged](const httplib::Request& req,
                                                                    httplib::Response& res) {
    if (!admit(req, res)) return;
    const json* user = find_user(req, res, false);
    if (!user) return;
    const auto& friends = user->value("friends", json::array());
    const int per_page = options_.friends_page_size;
    const int page = std::max(1, query_int(req, "page", 1));
    const auto [total_pages, p] = paged(friends.size(), page, per_page);
    json slice = json::array();
    const auto begin = static_cast<std::size_t>(p - 1) * static_cast<std::size_t>(per_page);
    for (std::size_t i = begin; i < std::min(friends.size(), begin + static_cast<std::size_t>(per_page)); ++i)
      slice.push_back(friends[i]);
    reply_json(res, {{"total", friends.size()}, {"total_pages", total_pages}, {"page", p}, {"users", slice}});
  });
}

// ---------------------------------------------------------------------------

MockCatalogServer::MockCatalogServer(json world) : world_(std::move(world)) {
  if (!world_.contains("tracks") || !world_["tracks"].is_array())
    throw Error("invalid_fixture", "catalog fixture needs a \"tracks\" array");
}

std::unique_ptr<MockCatalogServer> MockCatalogServer::from_file(const std::string& path) {
  return std::make_unique<MockCatalogServer>(load_json(path));
}

void MockCatalogServer::register_routes(httplib::Server& server) {
  server.Get("/search", [this](const httplib::Request& req, httplib::Response& res) {
    if (!admit(req, res)) return;
    const auto artist = text::fold_case(text::trim(req.get_param_value("artist")));
    const auto title = text::fold_case(text::trim(req.get_param_value("title")));
    const auto market = req.get_param_value("market");
    json results = json::array();
    for (const auto& t : world_["tracks"]) {
      if (text::fold_case(t.value("artist", "")) != artist || text::fold_case(t.value("title", "")) != title)
        continue;
      json preview = nullptr;
      const auto& previews = t.value("previews", json::object());
      if (previews.contains(market)) {
        preview = previews[market];
      } else if (previews.contains("*")) {
        preview = previews["*"];
      }
      results.push_back({{"id", t.value("id", "")},
                         {"artist", t.value("artist", "")},
                         {"title", t.value("title", "")},
                         {"preview_url", preview},
                         {"artwork_url", t.value("artwork_url", "")},
                         {"preview_seconds", t.value("preview_seconds", 30)}});
    }
    reply_json(res, {{"results", results}});
  });
}

}  // namespace lrs::mock
