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

#include "lrs/http_client.hpp"

#include <thread>

#include "httplib.h"
#include "lrs/error.hpp"

namespace lrs {

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + min_interval_;
  }
  std::this_thread::sleep_until(slot);
}

HttpClient::HttpClient(HttpSettings settings)
    : settings_(std::move(settings)), limiter_(settings_.min_request_interval) {
  const auto& url = settings_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("invalid_config", "base URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

HttpResponse HttpClient::get(const std::string& path_and_query) {
  HttpResponse out;
  auto backoff = settings_.backoff_initial;
  bool reached = false;
  for (int attempt = 0; attempt <= settings_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    limiter_.acquire();
    ++out.attempts;
    httplib::Client cli(origin_);
    const auto secs = settings_.timeout.count() / 1000;
    const auto usecs = (settings_.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    auto res = cli.Get(prefix_ + path_and_query);
    if (!res) continue;
    reached = true;
    out.status = res->status;
    out.body = std::move(res->body);
    if (out.status != 429 && out.status < 500) return out;
  }
  if (!reached) throw Error("transport", "no response from " + origin_ + prefix_ + path_and_query);
  return out;
}

}  // namespace lrs
