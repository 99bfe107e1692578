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

#include "lrs/preview.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "lrs/error.hpp"
#include "lrs/text.hpp"

namespace lrs {

using nlohmann::json;

void PreviewQuery::validate() const {
  if (artist.empty() || title.empty()) throw Error("invalid_query", "artist and title are required");
  if (market.size() != 2 || !std::all_of(market.begin(), market.end(), [](char c) { return c >= 'A' && c <= 'Z'; }))
    throw Error("invalid_query", "market must be an uppercase two-letter code: " + market);
}

std::string to_string(DiscardReason r) {
  switch (r) {
    case DiscardReason::kNoResults:
      return "no-results";
    case DiscardReason::kNoExactMatch:
      return "no-exact-match";
    case DiscardReason::kNoPreviewInMarket:
      return "no-preview-in-market";
  }
  return "unknown";
}

namespace {

HttpSettings http_settings(const PreviewConfig& c) {
  if (c.base_url.empty()) throw Error("invalid_config", "catalog base_url is empty");
  return {c.base_url, c.min_request_interval, c.max_retries, c.backoff_initial, c.timeout};
}

std::string render_embed(const std::string& tmpl, const std::string& id) {
  std::string out = tmpl;
  const auto pos = out.find("{id}");
  if (pos != std::string::npos) out.replace(pos, 4, id);
  return out;
}

}  // namespace

PreviewResolver::PreviewResolver(PreviewConfig cfg) : cfg_(std::move(cfg)), http_(http_settings(cfg_)) {}

std::string PreviewResolver::effective_market(const std::string& market) const {
  if (cfg_.supported_markets.empty() ||
      std::find(cfg_.supported_markets.begin(), cfg_.supported_markets.end(), market) !=
          cfg_.supported_markets.end()) {
    return market;
  }
  spdlog::warn("market {} unsupported by catalog, falling back to {}", market, cfg_.default_market);
  return cfg_.default_market;
}

Resolution PreviewResolver::resolve(const PreviewQuery& query) {
  query.validate();
  PreviewQuery q{text::canonical(query.artist), text::canonical(query.title), effective_market(query.market)};

  HttpResponse res;
  try {
    res = http_.get("/search?artist=" + text::url_encode(q.artist) + "&title=" + text::url_encode(q.title) +
                    "&market=" + text::url_encode(q.market));
  } catch (const Error& e) {
    throw Error("catalog_unavailable", e.what());
  }
  if (res.status != 200) throw Error("catalog_unavailable", "catalog returned HTTP " + std::to_string(res.status));

  json body;
  try {
    body = json::parse(res.body);
  } catch (const json::exception& e) {
    throw Error("catalog_unavailable", std::string("unparseable search response: ") + e.what());
  }
  const auto& results = body.contains("results") ? body["results"] : json::array();
  if (!results.is_array() || results.empty()) return Discarded{DiscardReason::kNoResults};

  const auto same = [this](const std::string& a, const std::string& b) {
    return cfg_.case_insensitive_match ? text::fold_case(a) == text::fold_case(b) : a == b;
  };
  bool exact_seen = false;
  for (const auto& r : results) {
    if (!r.is_object()) continue;
    std::string artist, title;
    try {
      artist = text::canonical(r.value("artist", ""));
      title = text::canonical(r.value("title", ""));
    } catch (const Error&) {
      continue;
    }
    if (!same(artist, q.artist) || !same(title, q.title)) continue;
    exact_seen = true;
    if (!r.contains("preview_url") || !r["preview_url"].is_string() || r["preview_url"].get<std::string>().empty())
      continue;
    PreviewResult out;
    out.catalog_track_id = r.value("id", "");
    out.preview_url = r["preview_url"].get<std::string>();
    out.artwork_url = r.value("artwork_url", "");
    out.embed_markup_ref = render_embed(cfg_.embed_template, out.catalog_track_id);
    return out;
  }
  return Discarded{exact_seen ? DiscardReason::kNoPreviewInMarket : DiscardReason::kNoExactMatch};
}

PresentationList PreviewResolver::resolve_ranked_list(std::span<const TrackKey> ranked,
                                                      const std::string& market, std::size_t n) {
  PresentationList out;
  out.requested_n = n;
  for (std::size_t i = 0; i < ranked.size() && out.items.size() < n; ++i) {
    ++out.consumed;
    auto r = resolve({ranked[i].artist, ranked[i].title, market});
    if (auto* hit = std::get_if<PreviewResult>(&r)) {
      out.items.push_back({i, ranked[i], std::move(*hit)});
    } else {
      ++out.discarded_count;
    }
  }
  return out;
}

}  // namespace lrs
