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

#include "lrs/study/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lrs/error.hpp"

namespace lrs::study {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

std::chrono::milliseconds ms(const json& j, const char* key, std::chrono::milliseconds fallback) {
  return std::chrono::milliseconds(j.value(key, static_cast<std::int64_t>(fallback.count())));
}

template <typename T>
T parse_number(const std::string& name, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<T>(x);
  } catch (const std::exception&) {
    throw Error("invalid_config", name + " is not an integer: " + v);
  }
}

}  // namespace

ScrobbleApiConfig scrobble_config_from_json(const json& s) {
  ScrobbleApiConfig c;
  c.base_url = s.value("base_url", "");
  c.api_key = s.value("api_key", "");
  c.page_size = s.value("page_size", c.page_size);
  c.min_request_interval = ms(s, "min_request_interval_ms", c.min_request_interval);
  c.max_retries = s.value("max_retries", c.max_retries);
  c.backoff_initial = ms(s, "backoff_initial_ms", c.backoff_initial);
  c.timeout = ms(s, "timeout_ms", c.timeout);
  return c;
}

void ServiceConfig::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("invalid_config", what);
  };
  scrobble.validate();
  require(!catalog.base_url.empty(), "catalog.base_url is required");
  require(!models.empty(), "at least one model is required");
  for (const auto& m : models) require(!m.name.empty() && !m.path.empty(), "model entries need a name and a path");
  const bool named = std::any_of(models.begin(), models.end(), [&](const ModelEntry& m) { return m.name == assignment; });
  require(assignment == "round_robin" || named, "assignment must be round_robin or a configured model name");
  require(list_length >= 1, "list_length must be >= 1");
  require(candidate_pool == 0 || candidate_pool >= list_length, "candidate_pool must be >= list_length");
  require(eligibility_threshold >= 0, "eligibility_threshold is required and must be >= 0");
  require(io_workers >= 1 && cpu_workers >= 1 && http_threads >= 1, "worker counts must be >= 1");
  require(port >= 0 && port <= 65535, "port out of range");
  require(!admin_token.empty(), "admin_token is required");
  require(!questions_path.empty(), "questions file is required");
  require(!response_log_path.empty(), "response_log path is required");
}

ServiceConfig service_config_from_json(const json& j, const std::string& base_dir) {
  ServiceConfig c;
  try {
    if (j.contains("scrobble")) c.scrobble = scrobble_config_from_json(j["scrobble"]);
    if (j.contains("catalog")) {
      const auto& k = j["catalog"];
      c.catalog.base_url = k.value("base_url", "");
      c.catalog.min_request_interval = ms(k, "min_request_interval_ms", c.catalog.min_request_interval);
      c.catalog.max_retries = k.value("max_retries", c.catalog.max_retries);
      c.catalog.backoff_initial = ms(k, "backoff_initial_ms", c.catalog.backoff_initial);
      c.catalog.timeout = ms(k, "timeout_ms", c.catalog.timeout);
      c.catalog.default_market = k.value("default_market", c.catalog.default_market);
      c.catalog.supported_markets = k.value("supported_markets", std::vector<std::string>{});
      c.catalog.case_insensitive_match = k.value("case_insensitive_match", false);
      c.catalog.embed_template = k.value("embed_template", c.catalog.embed_template);
    }
    for (const auto& m : j.value("models", json::array()))
      c.models.push_back({m.at("name").get<std::string>(), resolve(base_dir, m.at("path").get<std::string>())});
    c.assignment = j.value("assignment", c.assignment);
    c.list_length = j.value("list_length", c.list_length);
    c.candidate_pool = j.value("candidate_pool", c.candidate_pool);
    c.eligibility_threshold = j.value("eligibility_threshold", c.eligibility_threshold);
    c.io_workers = j.value("io_workers", c.io_workers);
    c.cpu_workers = j.value("cpu_workers", c.cpu_workers);
    c.http_threads = j.value("http_threads", c.http_threads);
    c.bind = j.value("bind", c.bind);
    c.port = j.value("port", c.port);
    c.admin_token = j.value("admin_token", "");
    c.questions_path = resolve(base_dir, j.value("questions", ""));
    c.response_log_path = resolve(base_dir, j.value("response_log", ""));
    c.static_dir = resolve(base_dir, j.value("static_dir", ""));
  } catch (const json::exception& e) {
    throw Error("invalid_config", e.what());
  }
  return c;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid_config", e.what());
  }
  return service_config_from_json(j, fs::path(path).parent_path().string());
}

void apply_env_overrides(ServiceConfig& c, const EnvLookup& env) {
  auto str = [&](const char* name, std::string& field) {
    if (auto v = env(name)) field = *v;
  };
  auto num = [&]<typename T>(const char* name, T& field) {
    if (auto v = env(name)) field = parse_number<T>(name, *v);
  };
  str("LRS_SCROBBLE_BASE_URL", c.scrobble.base_url);
  str("LRS_SCROBBLE_API_KEY", c.scrobble.api_key);
  str("LRS_CATALOG_BASE_URL", c.catalog.base_url);
  str("LRS_ASSIGNMENT", c.assignment);
  num("LRS_LIST_LENGTH", c.list_length);
  num("LRS_ELIGIBILITY_THRESHOLD", c.eligibility_threshold);
  num("LRS_IO_WORKERS", c.io_workers);
  num("LRS_CPU_WORKERS", c.cpu_workers);
  num("LRS_HTTP_THREADS", c.http_threads);
  str("LRS_BIND", c.bind);
  num("LRS_PORT", c.port);
  str("LRS_ADMIN_TOKEN", c.admin_token);
  str("LRS_QUESTIONS", c.questions_path);
  str("LRS_RESPONSE_LOG", c.response_log_path);
  str("LRS_STATIC_DIR", c.static_dir);
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

}  // namespace lrs::study
