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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lrs/dataset.hpp"
#include "lrs/error.hpp"
#include "lrs/http_client.hpp"

namespace lrs {

struct ScrobbleApiConfig {
  std::string base_url;
  std::string api_key;  // optional; sent as api_key query parameter
  int page_size = 200;  // 1..=500
  std::chrono::milliseconds min_request_interval{200};
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{200};
  std::chrono::milliseconds timeout{10000};

  void validate() const;
};

class MalformedPage : public Error {
 public:
  MalformedPage(int page, const std::string& why)
      : Error("malformed_page", "page " + std::to_string(page) + ": " + why), page_(page) {}
  int page() const { return page_; }

 private:
  int page_;
};

struct CrawlPlan {
  std::vector<std::string> seed_usernames;
  std::size_t target_user_count = 1;
  std::uint64_t rng_seed = 0;
  std::size_t max_friends_per_user = 100;
};

struct CrawlResult {
  std::vector<std::string> usernames;
  bool exhausted = false;  // the reachable graph ran out before the target
};

struct EligibilityResult {
  std::string username;
  std::int64_t event_count = 0;
  std::int64_t threshold = 0;
  bool eligible = false;
  std::string reason;  // empty, "below-threshold" or "private-account"
};

struct AccountInfo {
  std::int64_t event_count = 0;
  bool is_public = true;
};

// Called after each history page with (pages fetched, total pages).
using PageProgressFn = std::function<void(int done, int total)>;

// Client for the generic scrobble API:
//   GET {base}/users/{name}                         -> {"event_count", "public"}
//   GET {base}/users/{name}/events?page=P&per_page=N -> paged {"events": [...]}
//   GET {base}/users/{name}/friends?page=P           -> paged {"users": [...]}
// 404 maps to user_not_found, 403 to private_account, 429 (after retries)
// to rate_limited. All calls on one instance share a rate limiter.
class ScrobbleClient {
 public:
  explicit ScrobbleClient(ScrobbleApiConfig cfg);

  AccountInfo account(const std::string& username);

  // Every page in API order; events with timestamp < since are dropped.
  std::vector<ListeningEvent> fetch_user_history(const std::string& username,
                                                 std::optional<std::int64_t> since = {},
                                                 const PageProgressFn& progress = {});

  // Up to max_friends names from the user's friends list.
  std::vector<std::string> friends(const std::string& username, std::size_t max_friends);

  // Seeded random-frontier expansion of the friends graph. Seeds are always
  // part of the result (an unknown seed throws); a friend is included once
  // its own friends list could be read.
  CrawlResult crawl_social_graph(const CrawlPlan& plan);

  // Probes only the account summary. A private account is ineligible, not an
  // error.
  EligibilityResult check_eligibility(const std::string& username, std::int64_t threshold);

  const ScrobbleApiConfig& config() const { return cfg_; }

 private:
  std::string get_json_body(const std::string& path, int page);

  ScrobbleApiConfig cfg_;
  HttpClient http_;
};

}  // namespace lrs
