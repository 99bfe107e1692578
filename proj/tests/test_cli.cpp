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

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "lrs/ranking.hpp"
#include "lrs/study/response_log.hpp"
#include "lrs/mock/mock_server.hpp"
#include "test_support.hpp"

using namespace lrs;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run lrs_cmd(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string write_zipf(const testing::TempDir& dir, const std::string& name, std::uint64_t seed,
                       std::size_t users = 60, std::size_t tracks = 300, std::size_t events = 4000) {
  const auto ds = Dataset::from_events(testing::zipf_events(users, tracks, events, 1.1, seed));
  const auto path = dir.file(name);
  write_events_file(path, ds);
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  auto r = lrs_cmd({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(lrs_cmd({}).code == 2);
  CHECK(lrs_cmd({"filter", "--min-le", "10"}).code == 2);
  CHECK(lrs_cmd({"filter", "--in", "/no/such/file", "--min-le", "10"}).code == 2);
  CHECK(lrs_cmd({"train", "--in", "x"}).code == 2);
  r = lrs_cmd({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("train") != std::string::npos);
}

TEST_CASE("filter prints the library report") {
  testing::TempDir dir;
  const auto in = write_zipf(dir, "events.tsv", 5);
  const auto out = dir.file("filtered.tsv");
  const auto r = lrs_cmd({"filter", "--min-le", "10", "--in", in, "--out", out});
  REQUIRE(r.code == 0);

  const auto lib = filter_min_interactions(read_events_file(in).dataset, 10);
  CHECK(r.out == format_filter_report(lib.report));
  std::ostringstream expected;
  write_events(expected, lib.dataset);
  CHECK(slurp(out) == expected.str());
  CHECK(r.out.find("%") != std::string::npos);
}

TEST_CASE("topup matches the library merge") {
  testing::TempDir dir;
  const auto base = write_zipf(dir, "base.tsv", 1, 20, 50, 300);
  const auto fresh = write_zipf(dir, "fresh.tsv", 2, 25, 60, 300);
  const auto out = dir.file("merged.tsv");
  REQUIRE(lrs_cmd({"topup", "--base", base, "--fresh", fresh, "--seed", "9", "--out", out}).code == 0);
  std::ostringstream expected;
  write_events(expected, top_up_merge(read_events_file(base).dataset, read_events_file(fresh).dataset, 9));
  CHECK(slurp(out) == expected.str());
}

TEST_CASE("train runs variants concurrently with the same result as one at a time") {
  testing::TempDir dir;
  const auto in = write_zipf(dir, "events.tsv", 7);
  std::ofstream(dir.file("mf.json")) << R"({"name": "mf", "kind": "mf",
      "config": {"factors": 4, "als_iterations": 3, "rng_seed": 2}})";
  std::ofstream(dir.file("vae.json")) << R"({"name": "vae", "kind": "multvae",
      "config": {"epochs": 3, "hidden": 8, "latent": 4, "batch_size": 16, "rng_seed": 2}})";

  const auto both = dir.file("both");
  const auto r = lrs_cmd({"train", "--in", in, "--variant", dir.file("mf.json"), "--variant", dir.file("vae.json"),
                          "--out-dir", both, "--validation-fraction", "0.2", "--seed", "4"});
  REQUIRE(r.code == 0);
  for (const auto* name : {"mf", "vae"}) {
    CHECK(std::filesystem::exists(both + "/" + name + ".lrs1"));
    CHECK(std::filesystem::exists(both + "/" + name + ".log"));
  }
  std::istringstream log(slurp(both + "/vae.log"));
  int lines = 0;
  for (std::string l; std::getline(log, l); ++lines) CHECK(l.rfind("epoch " + std::to_string(lines + 1) + " loss ", 0) == 0);
  CHECK(lines == 3);

  for (const auto* name : {"mf", "vae"}) {
    const auto solo = dir.file(std::string("solo_") + name);
    REQUIRE(lrs_cmd({"train", "--in", in, "--variant", dir.file(std::string(name) + ".json"), "--out-dir", solo,
                     "--validation-fraction", "0.2", "--seed", "4"})
                .code == 0);
    CHECK(slurp(solo + "/" + name + ".lrs1") == slurp(both + "/" + name + ".lrs1"));
  }

  // evaluate reproduces the same split and prints the library report.
  const auto e = lrs_cmd({"evaluate", "--in", in, "--model", both + "/mf.lrs1", "--validation-fraction", "0.2",
                          "--seed", "4", "--popularity"});
  REQUIRE(e.code == 0);
  const auto ds = read_events_file(in).dataset;
  const auto split = split_holdout(build_interaction_matrix(ds, true), 0.2, 0.2, 4);
  const auto model = read_model_file(both + "/mf.lrs1");
  const auto pop = popularity_scores(split.train);
  const std::string expected = "mf " + format_eval_report(evaluate(make_scorer(model), split, 10)) + "\n" +
                               "popularity " +
                               format_eval_report(evaluate([&](const ItemCounts&) { return pop; }, split, 10)) + "\n";
  CHECK(e.out == expected);
}

TEST_CASE("runtime failures exit with 1 and name the stage") {
  testing::TempDir dir;
  const auto in = write_zipf(dir, "events.tsv", 3, 10, 20, 100);
  std::ofstream(dir.file("bad.json")) << R"({"name": "x", "kind": "svd"})";
  const auto r = lrs_cmd({"train", "--in", in, "--variant", dir.file("bad.json"), "--out-dir", dir.file("o")});
  CHECK(r.code == 1);
  CHECK(r.err.find("variants:") != std::string::npos);

  std::ofstream(dir.file("other.tsv")) << "u\tA\tT\t1\n";
  std::ofstream(dir.file("mf.json")) << R"({"name": "mf", "kind": "mf", "config": {"factors": 2, "als_iterations": 1}})";
  REQUIRE(lrs_cmd({"train", "--in", dir.file("other.tsv"), "--variant", dir.file("mf.json"), "--out-dir",
                   dir.file("m")})
              .code == 0);
  const auto e = lrs_cmd({"evaluate", "--in", in, "--model", dir.file("m/mf.lrs1"), "--validation-fraction", "0.3"});
  CHECK(e.code == 1);
  CHECK(e.err.find("catalog") != std::string::npos);
}

TEST_CASE("crawl downloads the histories of the crawled users") {
  testing::TempDir dir;
  auto world = testing::scrobble_world(4, 5, 8, 1);
  world["users"]["u0"]["friends"] = {"u1", "u2"};
  world["users"]["u2"]["friends"] = {"u3"};
  mock::MockScrobbleServer server(world);
  server.start();
  std::ofstream(dir.file("cfg.json")) << json{{"scrobble", {{"base_url", server.base_url()}, {"min_request_interval_ms", 0}}}}.dump();
  const auto r = lrs_cmd({"crawl", "--config", dir.file("cfg.json"), "--seed-user", "u0", "--target", "3", "--seed",
                          "1", "--out", dir.file("crawl.tsv")});
  REQUIRE(r.code == 0);
  const auto ds = read_events_file(dir.file("crawl.tsv")).dataset;
  CHECK(ds.n_users() == 3);
  CHECK(ds.n_events() == 15);
  CHECK(ds.user_index("u0") >= 0);
}

TEST_CASE("export writes the logged responses") {
  testing::TempDir dir;
  const auto log_path = dir.file("log.ndjson");
  {
    study::ResponseLog log(log_path);
    study::StudySession s;
    s.session_id = "s1";
    s.model_name = "mf";
    s.created_at = 1;
    log.append(study::created_record(s));
    log.append(study::track_record({"s1", 1, TrackKey::make("A", "T"), json{{"fit", 4}}, 1'700'000'000'000}));
    log.append(study::global_record({"s1", json{{"overall", 2}}, 1'800'000'000'000}));
  }
  std::ofstream(dir.file("q.json")) << R"({"per_track": [], "global": []})";
  std::ofstream(dir.file("svc.json")) << json{{"scrobble", {{"base_url", "http://127.0.0.1:1"}}},
                                               {"catalog", {{"base_url", "http://127.0.0.1:1"}}},
                                               {"models", {{{"name", "mf"}, {"path", "mf.lrs1"}}}},
                                               {"eligibility_threshold", 1},
                                               {"admin_token", "t"},
                                               {"questions", "q.json"},
                                               {"response_log", "log.ndjson"}}
                                             .dump();
  auto r = lrs_cmd({"export", "--config", dir.file("svc.json")});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
  r = lrs_cmd({"export", "--config", dir.file("svc.json"), "--to", "1750000000"});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
  CHECK(json::parse(r.out)["kind"] == "track_response");
}
