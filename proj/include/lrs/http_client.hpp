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
#include <mutex>
#include <string>

namespace lrs {

// Enforces a minimum spacing between request start times across all
// threads sharing one limiter.
class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}
  void acquire();

 private:
  std::chrono::milliseconds min_interval_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

struct HttpSettings {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::chrono::milliseconds min_request_interval{0};
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{200};
  std::chrono::milliseconds timeout{10000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
  int attempts = 0;
};

// Minimal GET client. Transport errors, 429 and 5xx are retried up to
// max_retries times with exponential backoff; the final response is returned
// as-is. Throws lrs::Error("transport") if no attempt reached the server.
class HttpClient {
 public:
  explicit HttpClient(HttpSettings settings);

  HttpResponse get(const std::string& path_and_query);
  const HttpSettings& settings() const { return settings_; }

 private:
  HttpSettings settings_;
  std::string origin_;
  std::string prefix_;
  RateLimiter limiter_;
};

}  // namespace lrs
