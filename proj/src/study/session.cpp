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

#include "lrs/study/session.hpp"

#include <chrono>

namespace lrs::study {

using nlohmann::json;

std::string to_string(SessionState s) {
  switch (s) {
    case SessionState::kCreated: return "Created";
    case SessionState::kConsented: return "Consented";
    case SessionState::kCollecting: return "Collecting";
    case SessionState::kRecommending: return "Recommending";
    case SessionState::kRating: return "Rating";
    case SessionState::kCompleted: return "Completed";
    case SessionState::kFailed: return "Failed";
  }
  return "?";
}

SessionState parse_session_state(const std::string& s) {
  for (auto st : {SessionState::kCreated, SessionState::kConsented, SessionState::kCollecting,
                  SessionState::kRecommending, SessionState::kRating, SessionState::kCompleted, SessionState::kFailed})
    if (to_string(st) == s) return st;
  throw Error("invalid_argument", "unknown session state: " + s);
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::kConsent: return "consent";
    case EventKind::kUsernameAccepted: return "username_accepted";
    case EventKind::kCollectionDone: return "collection_done";
    case EventKind::kRecommendationDone: return "recommendation_done";
    case EventKind::kLastResponse: return "last_response";
    case EventKind::kFailure: return "failure";
  }
  return "?";
}

EventKind parse_event_kind(const std::string& s) {
  for (auto k : {EventKind::kConsent, EventKind::kUsernameAccepted, EventKind::kCollectionDone,
                 EventKind::kRecommendationDone, EventKind::kLastResponse, EventKind::kFailure})
    if (to_string(k) == s) return k;
  throw Error("invalid_argument", "unknown session event: " + s);
}

bool StudySession::responses_complete() const {
  return items.has_value() && global_response.has_value() && track_responses.size() == items->items.size();
}

bool operator==(const StudySession& a, const StudySession& b) {
  return a.session_id == b.session_id && a.state == b.state && a.failure_reason == b.failure_reason &&
         a.model_name == b.model_name && a.market == b.market && a.username == b.username && a.items == b.items &&
         a.track_responses == b.track_responses && a.global_response == b.global_response &&
         a.created_at == b.created_at && a.updated_at == b.updated_at;
}

StudySession transition(StudySession s, const SessionEvent& e) {
  using S = SessionState;
  const auto reject = [&](const std::string& detail = {}) { throw IllegalTransition(s.state, e.kind, detail); };
  switch (e.kind) {
    case EventKind::kConsent:
      if (s.state != S::kCreated) reject();
      s.state = S::kConsented;
      break;
    case EventKind::kUsernameAccepted:
      if (s.state != S::kConsented) reject();
      if (e.username.empty()) reject("empty username");
      s.username = e.username;
      if (!e.market.empty()) s.market = e.market;
      s.state = S::kCollecting;
      break;
    case EventKind::kCollectionDone:
      if (s.state != S::kCollecting) reject();
      s.state = S::kRecommending;
      break;
    case EventKind::kRecommendationDone:
      if (s.state != S::kRecommending) reject();
      if (!e.items) reject("no items");
      s.items = e.items;
      s.state = S::kRating;
      break;
    case EventKind::kLastResponse:
      if (s.state != S::kRating) reject();
      if (!s.responses_complete()) reject("responses incomplete");
      s.state = S::kCompleted;
      break;
    case EventKind::kFailure:
      if (s.state == S::kCompleted || s.state == S::kFailed) reject();
      s.state = S::kFailed;
      s.failure_reason = e.reason.empty() ? reason::kInternal : e.reason;
      s.items.reset();
      break;
  }
  s.updated_at = e.at;
  return s;
}

json to_json(const PresentationList& list) {
  json items = json::array();
  for (const auto& it : list.items) {
    items.push_back({{"source_rank", it.source_rank},
                     {"artist", it.track.artist},
                     {"title", it.track.title},
                     {"catalog_track_id", it.preview.catalog_track_id},
                     {"preview_url", it.preview.preview_url},
                     {"artwork_url", it.preview.artwork_url},
                     {"preview_seconds", it.preview.preview_seconds},
                     {"embed_markup_ref", it.preview.embed_markup_ref}});
  }
  return {{"items", items},
          {"requested_n", list.requested_n},
          {"discarded_count", list.discarded_count},
          {"consumed", list.consumed}};
}

PresentationList presentation_from_json(const json& j) {
  PresentationList out;
  out.requested_n = j.at("requested_n").get<std::size_t>();
  out.discarded_count = j.at("discarded_count").get<std::size_t>();
  out.consumed = j.at("consumed").get<std::size_t>();
  for (const auto& it : j.at("items")) {
    PresentationItem p;
    p.source_rank = it.at("source_rank").get<std::size_t>();
    p.track = {it.at("artist").get<std::string>(), it.at("title").get<std::string>()};
    p.preview.catalog_track_id = it.at("catalog_track_id").get<std::string>();
    p.preview.preview_url = it.at("preview_url").get<std::string>();
    p.preview.artwork_url = it.at("artwork_url").get<std::string>();
    p.preview.preview_seconds = it.at("preview_seconds").get<int>();
    p.preview.embed_markup_ref = it.at("embed_markup_ref").get<std::string>();
    out.items.push_back(std::move(p));
  }
  return out;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace lrs::study
