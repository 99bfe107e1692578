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
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "lrs/dataset.hpp"
#include "lrs/error.hpp"
#include "lrs/preview.hpp"

namespace lrs::study {

enum class SessionState { kCreated, kConsented, kCollecting, kRecommending, kRating, kCompleted, kFailed };

std::string to_string(SessionState s);
SessionState parse_session_state(const std::string& s);

// Failure reasons surfaced to participants and researchers.
namespace reason {
inline constexpr const char* kIneligible = "ineligible";
inline constexpr const char* kUserNotFound = "user-not-found";
inline constexpr const char* kPrivateAccount = "private-account";
inline constexpr const char* kCatalogUnavailable = "catalog-unavailable";
inline constexpr const char* kInternal = "internal";
}  // namespace reason

struct TrackResponse {
  std::string session_id;
  std::size_t rank = 0;  // 1-based presentation position
  TrackKey track;
  nlohmann::json answers;
  std::int64_t answered_at = 0;  // ms since the Unix epoch
  friend bool operator==(const TrackResponse&, const TrackResponse&) = default;
};

struct GlobalResponse {
  std::string session_id;
  nlohmann::json answers;
  std::int64_t answered_at = 0;
  friend bool operator==(const GlobalResponse&, const GlobalResponse&) = default;
};

struct StudySession {
  std::string session_id;
  SessionState state = SessionState::kCreated;
  std::string failure_reason;
  std::string model_name;
  std::string market;
  std::optional<std::string> username;
  std::optional<PresentationList> items;  // present iff Rating or Completed
  std::map<std::size_t, TrackResponse> track_responses;  // keyed by rank
  std::optional<GlobalResponse> global_response;
  std::int64_t created_at = 0;
  std::int64_t updated_at = 0;

  bool responses_complete() const;
};

bool operator==(const StudySession& a, const StudySession& b);

enum class EventKind { kConsent, kUsernameAccepted, kCollectionDone, kRecommendationDone, kLastResponse, kFailure };

std::string to_string(EventKind k);
EventKind parse_event_kind(const std::string& s);

struct SessionEvent {
  EventKind kind;
  std::int64_t at = 0;
  std::string username;                   // kUsernameAccepted
  std::optional<PresentationList> items;  // kRecommendationDone
  std::string reason;                     // kFailure
  std::string market;                     // kUsernameAccepted

  static SessionEvent consent(std::int64_t at) { return {EventKind::kConsent, at, {}, {}, {}, {}}; }
  static SessionEvent username_accepted(std::string u, std::string market, std::int64_t at) {
    return {EventKind::kUsernameAccepted, at, std::move(u), {}, {}, std::move(market)};
  }
  static SessionEvent collection_done(std::int64_t at) { return {EventKind::kCollectionDone, at, {}, {}, {}, {}}; }
  static SessionEvent recommendation_done(PresentationList items, std::int64_t at) {
    return {EventKind::kRecommendationDone, at, {}, std::move(items), {}, {}};
  }
  static SessionEvent last_response(std::int64_t at) { return {EventKind::kLastResponse, at, {}, {}, {}, {}}; }
  static SessionEvent failure(std::string reason, std::int64_t at) {
    return {EventKind::kFailure, at, {}, {}, std::move(reason), {}};
  }
};

class IllegalTransition : public Error {
 public:
  IllegalTransition(SessionState from, EventKind event, const std::string& detail = {})
      : Error("illegal_transition", "cannot apply " + to_string(event) + " in state " + to_string(from) +
                                        (detail.empty() ? "" : ": " + detail)) {}
};

// Created -> Consented -> Collecting -> Recommending -> Rating -> Completed,
// plus failure from any state before Completed. last_response is accepted
// only once every presented item and the global form are answered.
StudySession transition(StudySession s, const SessionEvent& e);

// JSON helpers shared by the response log and the HTTP layer.
nlohmann::json to_json(const PresentationList& list);
PresentationList presentation_from_json(const nlohmann::json& j);

std::int64_t now_ms();

}  // namespace lrs::study
