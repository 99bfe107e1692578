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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrs/preview.hpp"
#include "lrs/scrobble_client.hpp"

namespace lrs::study {

struct ModelEntry {
  std::string name;
  std::string path;
};

// Service configuration. Loaded from a JSON file whose relative paths are
// resolved against the file's directory, then overridden from LRS_*
// environment variables.
struct ServiceConfig {
  ScrobbleApiConfig scrobble;
  PreviewConfig catalog;
  std::vector<ModelEntry> models;
  std::string assignment = "round_robin";  // or the name of one model
  std::size_t list_length = 10;
  std::size_t candidate_pool = 0;  // ranked candidates handed to preview resolution; 0 = 5 * list_length
  std::int64_t eligibility_threshold = -1;  // required
  int io_workers = 4;
  int cpu_workers = 2;
  int http_threads = 16;
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string admin_token;
  std::string questions_path;
  std::string response_log_path;
  std::string static_dir;

  // Throws lrs::Error("invalid_config").
  void validate() const;
  std::size_t effective_candidate_pool() const { return candidate_pool ? candidate_pool : 5 * list_length; }
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

ServiceConfig service_config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
ServiceConfig load_service_config(const std::string& path);

// Applies LRS_SCROBBLE_BASE_URL, LRS_SCROBBLE_API_KEY, LRS_CATALOG_BASE_URL,
// LRS_ASSIGNMENT, LRS_LIST_LENGTH, LRS_ELIGIBILITY_THRESHOLD, LRS_IO_WORKERS,
// LRS_CPU_WORKERS, LRS_BIND, LRS_PORT, LRS_ADMIN_TOKEN, LRS_QUESTIONS,
// LRS_RESPONSE_LOG and LRS_STATIC_DIR.
void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env);
EnvLookup process_env();

// The "scrobble" section alone, used by the offline crawl tooling.
ScrobbleApiConfig scrobble_config_from_json(const nlohmann::json& j);

}  // namespace lrs::study
