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
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrs/error.hpp"
#include "lrs/study/config.hpp"
#include "lrs/study/questions.hpp"
#include "lrs/study/session.hpp"

namespace lrs::study {

// Error codes raised by StudyService, also used as HTTP error bodies.
namespace errc {
inline constexpr const char* kUnknownSession = "unknown_session";
inline constexpr const char* kWrongState = "wrong_state";
inline constexpr const char* kJobAlreadyRunning = "job_already_running";
inline constexpr const char* kDuplicateResponse = "duplicate_response";
inline constexpr const char* kUnknownRank = "unknown_rank";
inline constexpr const char* kUnauthorized = "unauthorized";
}  // namespace errc

struct Status {
  SessionState state = SessionState::kCreated;
  std::string phase;  // "collecting", "recommending" or empty
  double progress = 0.0;
  std::string reason;  // set when Failed
};

// The un-moderated study session backend. Models are loaded once in the
// constructor and shared read-only; participant pipelines run on an IO pool
// (collection, preview resolution) and a CPU pool (scoring), never on the
// caller's thread. Every mutation is appended to the response log before it
// is acknowledged; on start-up the log is replayed to restore sessions.
class StudyService {
 public:
  explicit StudyService(ServiceConfig cfg);
  ~StudyService();
  StudyService(const StudyService&) = delete;
  StudyService& operator=(const StudyService&) = delete;

  std::string create_session();
  void consent(const std::string& id);

  // Starts the background pipeline (eligibility, history, scoring, previews).
  // market defaults to the catalog's default market.
  void submit_username(const std::string& id, const std::string& username, const std::string& market = {});

  Status get_status(const std::string& id) const;
  StudySession snapshot(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  // Presented items with their per-track questions, plus the global form.
  // Only in Rating or Completed.
  nlohmann::json items_view(const std::string& id) const;

  StudySession record_track_response(const std::string& id, std::size_t rank, const nlohmann::json& answers);
  StudySession record_global_response(const std::string& id, const nlohmann::json& answers);

  // NDJSON, one record per response, answered_at within [from_ms, to_ms].
  void export_responses(std::ostream& out, const std::string& token, std::optional<std::int64_t> from_ms = {},
                        std::optional<std::int64_t> to_ms = {}) const;

  const QuestionSet& questions() const;
  const ServiceConfig& config() const;

  // Blocks until no pipeline job is running. Test and shutdown aid.
  void wait_idle() const;

  // Number of times any StudyService has loaded its model set in this
  // process.
  static int model_load_count();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Export records for the given sessions, ordered by session creation then
// rank, with the global response last.
void write_export(std::ostream& out, std::vector<StudySession> sessions, std::optional<std::int64_t> from_ms = {},
                  std::optional<std::int64_t> to_ms = {});

}  // namespace lrs::study
