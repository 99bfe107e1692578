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
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <thread>

#include "lrs/dataset.hpp"
#include "lrs/mf.hpp"
#include "lrs/mock/mock_server.hpp"
#include "lrs/model.hpp"
#include "lrs/multvae.hpp"
#include "lrs/study/config.hpp"
#include "lrs/study/service.hpp"
#include "test_support.hpp"

namespace lrs::testing {

struct StudyFixtureOptions {
  std::size_t n_users = 40;
  std::size_t events_per_user = 60;
  std::size_t n_tracks = 80;
  std::size_t list_length = 10;
  double catalog_miss_fraction = 0.0;  // share of tracks absent from the catalog
  std::int64_t eligibility_threshold = 10;
  int page_size = 50;
  std::chrono::milliseconds page_latency{0};
  bool both_models = false;
  std::uint64_t seed = 3;
};

// Mock scrobble and catalog services over one synthetic world, small trained
// models whose catalog is the world's tracks, and a service config pointing
// at all of it.
class StudyFixture {
 public:
  explicit StudyFixture(StudyFixtureOptions o = {}) : opts(o) {
    world = scrobble_world(o.n_users, o.events_per_user, o.n_tracks, o.seed);
    world["users"]["private"] = {{"public", false}, {"events", nlohmann::json::array()}};
    world["users"]["newbie"] = {{"public", true},
                                {"events", {{{"artist", "A0"}, {"title", "T0"}, {"timestamp", 1}}}}};

    std::vector<ListeningEvent> events;
    for (const auto& [name, u] : world["users"].items())
      for (const auto& e : u.value("events", nlohmann::json::array()))
        events.push_back({name, e["artist"], e["title"], e["timestamp"]});
    dataset = Dataset::from_events(events);

    nlohmann::json tracks = nlohmann::json::array();
    std::mt19937_64 rng(o.seed + 1);
    std::bernoulli_distribution miss(o.catalog_miss_fraction);
    for (std::size_t i = 0; i < dataset.n_tracks(); ++i) {
      const auto& t = dataset.tracks()[i];
      if (miss(rng)) {
        missing.insert(t);
        continue;
      }
      tracks.push_back({{"id", "cat" + std::to_string(i)},
                        {"artist", t.artist},
                        {"title", t.title},
                        {"artwork_url", "https://img.example/" + std::to_string(i) + ".jpg"},
                        {"previews", {{"*", "https://p.example/" + std::to_string(i) + ".mp3"}}}});
    }
    catalog_world = {{"tracks", tracks}};

    scrobble = std::make_unique<mock::MockScrobbleServer>(world, mock::ScrobbleMockOptions{o.page_latency, 50});
    catalog = std::make_unique<mock::MockCatalogServer>(catalog_world);
    scrobble->start();
    catalog->start();

    const auto counts = build_interaction_matrix(dataset, false);
    TrainingConfig tc;
    tc.factors = 4;
    tc.als_iterations = 3;
    tc.rng_seed = o.seed;
    write_model_file(dir.file("mf.lrs1"), {"mf", train_mf(counts, tc), dataset.tracks(), tc});
    if (o.both_models) {
      auto bin = build_interaction_matrix(dataset, true);
      tc.epochs = 2;
      tc.hidden = 8;
      tc.latent = 4;
      tc.batch_size = 16;
      write_model_file(dir.file("vae.lrs1"), {"vae", train_multvae(bin, tc), dataset.tracks(), tc});
    }

    std::ofstream(dir.file("questions.json")) << R"({
      "per_track": [{"id": "fit", "prompt": "Fits my taste", "kind": "likert-1-5"},
                    {"id": "note", "prompt": "Comments", "kind": "free-text", "required": false}],
      "global": [{"id": "overall", "prompt": "Overall satisfaction", "kind": "likert-1-5"}]
    })";
  }

  study::ServiceConfig config() const {
    study::ServiceConfig c;
    c.scrobble.base_url = scrobble->base_url();
    c.scrobble.page_size = opts.page_size;
    c.scrobble.min_request_interval = std::chrono::milliseconds(0);
    c.scrobble.backoff_initial = std::chrono::milliseconds(1);
    c.scrobble.max_retries = 1;
    c.catalog.base_url = catalog->base_url();
    c.catalog.backoff_initial = std::chrono::milliseconds(1);
    c.catalog.max_retries = 1;
    c.models.push_back({"mf", dir.file("mf.lrs1")});
    if (opts.both_models) c.models.push_back({"vae", dir.file("vae.lrs1")});
    c.list_length = opts.list_length;
    c.eligibility_threshold = opts.eligibility_threshold;
    c.admin_token = "admin-secret";
    c.questions_path = dir.file("questions.json");
    c.response_log_path = dir.file("responses.ndjson");
    c.port = 0;
    return c;
  }

  // Polls until the session leaves Collecting/Recommending.
  static study::Status await_settled(const study::StudyService& svc, const std::string& id,
                                     std::chrono::milliseconds limit = std::chrono::seconds(30)) {
    const auto end = std::chrono::steady_clock::now() + limit;
    for (;;) {
      auto st = svc.get_status(id);
      if (st.state != study::SessionState::kCollecting && st.state != study::SessionState::kRecommending) return st;
      if (std::chrono::steady_clock::now() > end) return st;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }

  StudyFixtureOptions opts;
  TempDir dir;
  nlohmann::json world;
  nlohmann::json catalog_world;
  Dataset dataset;
  std::set<TrackKey> missing;
  std::unique_ptr<mock::MockScrobbleServer> scrobble;
  std::unique_ptr<mock::MockCatalogServer> catalog;
};

}  // namespace lrs::testing
