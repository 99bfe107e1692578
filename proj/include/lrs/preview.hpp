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
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lrs/dataset.hpp"
#include "lrs/http_client.hpp"

namespace lrs {

inline constexpr int kPreviewSeconds = 30;

struct PreviewConfig {
  std::string base_url;
  std::chrono::milliseconds min_request_interval{0};
  int max_retries = 2;
  std::chrono::milliseconds backoff_initial{200};
  std::chrono::milliseconds timeout{10000};
  std::string default_market = "US";
  std::vector<std::string> supported_markets;  // empty: every market is supported
  bool case_insensitive_match = false;
  // "{id}" is replaced by the catalog track id.
  std::string embed_template = "https://open.spotify.com/embed/track/{id}";
};

struct PreviewQuery {
  std::string artist;
  std::string title;
  std::string market;  // ISO-3166-1 alpha-2, uppercase

  // Throws lrs::Error("invalid_query").
  void validate() const;
};

struct PreviewResult {
  std::string catalog_track_id;
  std::string preview_url;
  std::string artwork_url;
  int preview_seconds = kPreviewSeconds;
  std::string embed_markup_ref;

  friend bool operator==(const PreviewResult&, const PreviewResult&) = default;
};

enum class DiscardReason { kNoResults, kNoExactMatch, kNoPreviewInMarket };
std::string to_string(DiscardReason r);

struct Discarded {
  DiscardReason reason;
};

using Resolution = std::variant<PreviewResult, Discarded>;

struct PresentationItem {
  std::size_t source_rank = 0;  // 0-based position in the ranked input
  TrackKey track;
  PreviewResult preview;
  friend bool operator==(const PresentationItem&, const PresentationItem&) = default;
};

struct PresentationList {
  std::vector<PresentationItem> items;
  std::size_t requested_n = 0;
  std::size_t discarded_count = 0;
  std::size_t consumed = 0;  // source items examined
  bool shortfall() const { return items.size() < requested_n; }
  friend bool operator==(const PresentationList&, const PresentationList&) = default;
};

// Catalog search client: GET {base}/search?artist=A&title=T&market=M.
// Transport failures (after retries) throw lrs::Error("catalog_unavailable");
// a track that cannot be played is a Discarded value, not an error.
class PreviewResolver {
 public:
  explicit PreviewResolver(PreviewConfig cfg);

  Resolution resolve(const PreviewQuery& q);

  // Walks `ranked` in order until n tracks resolve or the list runs out;
  // misses are skipped so later ranks move up.
  PresentationList resolve_ranked_list(std::span<const TrackKey> ranked, const std::string& market,
                                       std::size_t n);

  // Market actually queried for a participant region.
  std::string effective_market(const std::string& market) const;

  const PreviewConfig& config() const { return cfg_; }

 private:
  PreviewConfig cfg_;
  HttpClient http_;
};

}  // namespace lrs
