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

#include "lrs/scrobble_client.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "json.hpp"
#include "lrs/text.hpp"

namespace lrs {

using nlohmann::json;

void ScrobbleApiConfig::validate() const {
  if (base_url.empty()) throw Error("invalid_config", "scrobble base_url is empty");
  if (page_size < 1 || page_size > 500) throw Error("invalid_config", "page_size must lie in 1..500");
  if (min_request_interval.count() < 0) throw Error("invalid_config", "min_request_interval must be >= 0");
  if (max_retries < 0) throw Error("invalid_config", "max_retries must be >= 0");
}

namespace {

HttpSettings http_settings(const ScrobbleApiConfig& c) {
  c.validate();
  return {c.base_url, c.min_request_interval, c.max_retries, c.backoff_initial, c.timeout};
}

}  // namespace

ScrobbleClient::ScrobbleClient(ScrobbleApiConfig cfg) : cfg_(std::move(cfg)), http_(http_settings(cfg_)) {}

std::string ScrobbleClient::get_json_body(const std::string& path, int page) {
  std::string url = path;
  if (!cfg_.api_key.empty()) {
    url += (url.find('?') == std::string::npos ? '?' : '&');
    url += "api_key=" + text::url_encode(cfg_.api_key);
  }
  auto res = http_.get(url);
  switch (res.status) {
    case 200:
      return std::move(res.body);
    case 404:
      throw Error("user_not_found", "user not found: " + path);
    case 403:
      throw Error("private_account", "account is private: " + path);
    case 429:
      throw Error("rate_limited", "rate limited after " + std::to_string(res.attempts) + " attempts");
    default:
      if (res.status >= 500) throw Error("transport", "server error " + std::to_string(res.status));
      throw MalformedPage(page, "unexpected HTTP status " + std::to_string(res.status));
  }
}

AccountInfo ScrobbleClient::account(const std::string& username) {
  if (username.empty()) throw Error("invalid_argument", "empty username");
  const auto body = get_json_body("/users/" + text::url_encode(username), 0);
  try {
    const auto j = json::parse(body);
    return {j.at("event_count").get<std::int64_t>(), j.value("public", true)};
  } catch (const json::exception& e) {
    throw MalformedPage(0, e.what());
  }
}

std::vector<ListeningEvent> ScrobbleClient::fetch_user_history(const std::string& username,
                                                               std::optional<std::int64_t> since,
                                                               const PageProgressFn& progress) {
  if (username.empty()) throw Error("invalid_argument", "empty username");
  std::vector<ListeningEvent> out;
  const std::string base = "/users/" + text::url_encode(username) + "/events?per_page=" +
                           std::to_string(cfg_.page_size) + "&page=";
  int total_pages = 1;
  for (int page = 1; page <= total_pages; ++page) {
    const auto body = get_json_body(base + std::to_string(page), page);
    try {
      const auto j = json::parse(body);
      if (page == 1) total_pages = std::max(1, j.at("total_pages").get<int>());
      for (const auto& e : j.at("events")) {
        const auto ts = e.at("timestamp").get<std::int64_t>();
        if (ts < 0) throw MalformedPage(page, "negative timestamp");
        if (since && ts < *since) continue;
        auto key = TrackKey::make(e.at("artist").get<std::string>(), e.at("title").get<std::string>());
        out.push_back({username, std::move(key.artist), std::move(key.title), ts});
      }
    } catch (const json::exception& e) {
      throw MalformedPage(page, e.what());
    } catch (const MalformedPage&) {
      throw;
    } catch (const Error& e) {
      throw MalformedPage(page, e.what());
    }
    if (progress) progress(page, total_pages);
  }
  return out;
}

std::vector<std::string> ScrobbleClient::friends(const std::string& username, std::size_t max_friends) {
  std::vector<std::string> out;
  const std::string base = "/users/" + text::url_encode(username) + "/friends?page=";
  int total_pages = 1;
  for (int page = 1; page <= total_pages && out.size() < max_friends; ++page) {
    const auto body = get_json_body(base + std::to_string(page), page);
    try {
      const auto j = json::parse(body);
      if (page == 1) total_pages = std::max(1, j.at("total_pages").get<int>());
      for (const auto& u : j.at("users")) {
        if (out.size() >= max_friends) break;
        out.push_back(u.get<std::string>());
      }
    } catch (const json::exception& e) {
      throw MalformedPage(page, e.what());
    }
  }
  return out;
}

CrawlResult ScrobbleClient::crawl_social_graph(const CrawlPlan& plan) {
  if (plan.seed_usernames.empty()) throw Error("invalid_argument", "crawl needs at least one seed");
  if (plan.target_user_count < 1) throw Error("invalid_argument", "target_user_count must be >= 1");

  CrawlResult result;
  std::unordered_set<std::string> seen;
  std::unordered_set<std::string> included;
  std::vector<std::string> frontier;
  auto expand = [&](const std::vector<std::string>& names) {
    for (const auto& f : names)
      if (!f.empty() && seen.insert(f).second) frontier.push_back(f);
  };

  for (const auto& seed : plan.seed_usernames) {
    if (result.usernames.size() >= plan.target_user_count) break;
    if (!included.insert(seed).second) continue;
    const auto fr = friends(seed, plan.max_friends_per_user);
    seen.insert(seed);
    std::erase(frontier, seed);
    result.usernames.push_back(seed);
    expand(fr);
  }

  std::mt19937_64 rng(plan.rng_seed);
  while (result.usernames.size() < plan.target_user_count && !frontier.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, frontier.size() - 1);
    const std::size_t i = pick(rng);
    std::string user = std::move(frontier[i]);
    frontier[i] = std::move(frontier.back());
    frontier.pop_back();
    std::vector<std::string> fr;
    try {
      fr = friends(user, plan.max_friends_per_user);
    } catch (const Error& e) {
      if (e.code() == "user_not_found" || e.code() == "private_account") continue;
      throw;
    }
    result.usernames.push_back(std::move(user));
    expand(fr);
  }
  result.exhausted = result.usernames.size() < plan.target_user_count;
  return result;
}

EligibilityResult ScrobbleClient::check_eligibility(const std::string& username, std::int64_t threshold) {
  if (threshold < 0) throw Error("invalid_argument", "threshold must be >= 0");
  EligibilityResult r;
  r.username = username;
  r.threshold = threshold;
  AccountInfo info;
  try {
    info = account(username);
  } catch (const Error& e) {
    if (e.code() != "private_account") throw;
    info.is_public = false;
  }
  if (!info.is_public) {
    r.event_count = 0;
    r.eligible = false;
    r.reason = "private-account";
    return r;
  }
  r.event_count = info.event_count;
  r.eligible = r.event_count >= threshold;
  if (!r.eligible) r.reason = "below-threshold";
  return r;
}

}  // namespace lrs
