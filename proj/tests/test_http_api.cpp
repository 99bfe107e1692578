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

#include <sstream>

#include "doctest.h"
#include "lrs/study/http_api.hpp"
#include "study_fixture.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include "httplib.h"

using namespace lrs;
using namespace lrs::study;
using nlohmann::json;
using testing::StudyFixture;

namespace {

struct Api {
  explicit Api(const ServiceConfig& cfg) : svc(cfg), server(svc) {
    const int port = server.start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  httplib::Result post(const std::string& path, const std::string& body = "{}") {
    return client->Post(path, body, "application/json");
  }
  httplib::Result get(const std::string& path) { return client->Get(path); }

  StudyService svc;
  HttpServer server;
  std::unique_ptr<httplib::Client> client;
};

json body(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("healthz") {
  StudyFixture fx;
  Api api(fx.config());
  const auto r = api.get("/healthz");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->body == "ok");
}

TEST_CASE("full participant flow over HTTP") {
  StudyFixture fx;
  Api api(fx.config());

  auto r = api.post("/api/sessions", "");
  REQUIRE(r);
  CHECK(r->status == 201);
  const auto id = body(r)["session_id"].get<std::string>();
  const std::string base = "/api/sessions/" + id;

  r = api.post(base + "/consent");
  CHECK(r->status == 200);
  CHECK(body(r)["state"] == "Consented");

  r = api.post(base + "/username", R"({"username": "u7", "market": "US"})");
  CHECK(r->status == 202);
  CHECK(body(r)["state"] == "Collecting");

  REQUIRE(StudyFixture::await_settled(api.svc, id).state == SessionState::kRating);
  r = api.get(base + "/status");
  CHECK(r->status == 200);
  const auto st = body(r);
  CHECK(st["state"] == "Rating");
  CHECK(st["progress"] == 1.0);
  CHECK(st["reason"].is_null());

  r = api.get(base + "/items");
  REQUIRE(r->status == 200);
  const auto items = body(r)["items"];
  REQUIRE(items.size() == 10);
  for (const auto& key : {"rank", "artist", "title", "preview_url", "artwork_url", "embed_markup_ref", "questions"})
    CHECK(items[0].contains(key));

  for (int rank = 1; rank <= 10; ++rank) {
    r = api.post(base + "/responses/track", json{{"rank", rank}, {"answers", {{"fit", 3}}}}.dump());
    CHECK(r->status == 200);
  }
  r = api.post(base + "/responses/global", R"({"answers": {"overall": 5}})");
  CHECK(r->status == 200);
  CHECK(body(r)["state"] == "Completed");

  r = api.get("/api/export");
  CHECK(r->status == 401);
  httplib::Headers auth{{"Authorization", "Bearer admin-secret"}};
  r = api.client->Get("/api/export", auth);
  REQUIRE(r->status == 200);
  CHECK(r->get_header_value("Content-Type") == "application/x-ndjson");
  std::istringstream lines(r->body);
  int n = 0;
  for (std::string l; std::getline(lines, l); ++n) CHECK(json::parse(l)["session_id"] == id);
  CHECK(n == 11);

  r = api.client->Get("/api/export?from=2000-01-01&to=2000-01-02", auth);
  CHECK(r->status == 200);
  CHECK(r->body.empty());
  r = api.client->Get("/api/export?from=yesterday", auth);
  CHECK(r->status == 400);
}

TEST_CASE("error statuses") {
  StudyFixture fx;
  Api api(fx.config());
  const auto id = body(api.post("/api/sessions"))["session_id"].get<std::string>();
  const std::string base = "/api/sessions/" + id;

  auto r = api.get("/api/sessions/0123abcd/status");
  CHECK(r->status == 404);
  CHECK(body(r)["error"] == "unknown_session");

  r = api.post(base + "/username", R"({"username": "u0"})");
  CHECK(r->status == 409);
  CHECK(body(r)["error"] == "wrong_state");

  r = api.get(base + "/items");
  CHECK(r->status == 409);

  r = api.post(base + "/consent", "{not json");
  CHECK(r->status == 400);
  CHECK(body(r)["error"] == "bad_request");

  api.post(base + "/consent");
  r = api.post(base + "/username", R"({"name": "u0"})");
  CHECK(r->status == 422);
  CHECK(body(r)["question_id"] == "username");

  r = api.post(base + "/username", R"({"username": "u8"})");
  CHECK(r->status == 202);
  r = api.post(base + "/username", R"({"username": "u8"})");
  CHECK(r->status == 409);
  REQUIRE(StudyFixture::await_settled(api.svc, id).state == SessionState::kRating);

  r = api.post(base + "/responses/track", R"({"rank": 2, "answers": {"fit": 9}})");
  CHECK(r->status == 422);
  CHECK(body(r)["error"] == "invalid_answer");
  CHECK(body(r)["question_id"] == "fit");

  r = api.post(base + "/responses/track", R"({"rank": 99, "answers": {"fit": 3}})");
  CHECK(r->status == 422);
  CHECK(body(r)["error"] == "unknown_rank");

  r = api.post(base + "/responses/track", R"({"rank": "one", "answers": {"fit": 3}})");
  CHECK(r->status == 400);

  CHECK(api.post(base + "/responses/track", R"({"rank": 2, "answers": {"fit": 3}})")->status == 200);
  r = api.post(base + "/responses/track", R"({"rank": 2, "answers": {"fit": 3}})");
  CHECK(r->status == 409);
  CHECK(body(r)["error"] == "duplicate_response");

  CHECK(api.get("/api/nothing")->status == 404);
}

TEST_CASE("questions endpoint") {
  StudyFixture fx;
  Api api(fx.config());
  const auto r = api.get("/api/questions");
  REQUIRE(r->status == 200);
  CHECK(body(r)["per_track"].size() == 2);
  CHECK(body(r)["global"].size() == 1);
}

TEST_CASE("export time bounds") {
  CHECK(parse_time_bound("0") == 0);
  CHECK(parse_time_bound("1700000000") == 1'700'000'000'000);
  CHECK(parse_time_bound("1970-01-02") == 86'400'000);
  CHECK(parse_time_bound("2024-02-29") == 1'709'164'800'000);
  CHECK_THROWS_AS(parse_time_bound("2024-13-01"), Error);
  CHECK_THROWS_AS(parse_time_bound("12abc"), Error);
  CHECK_THROWS_AS(parse_time_bound(""), Error);
}
