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

#include <cstdio>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>

#include "json.hpp"
#include "lrs/study/session.hpp"

namespace lrs::study {

// Append-only NDJSON log; every line has "kind" in {session_event,
// track_response, global_response}. Appends are serialized and flushed to
// the OS (fsync) before returning.
class ResponseLog {
 public:
  explicit ResponseLog(std::string path);
  ~ResponseLog();
  ResponseLog(const ResponseLog&) = delete;
  ResponseLog& operator=(const ResponseLog&) = delete;

  void append(const nlohmann::ordered_json& record);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::FILE* file_ = nullptr;
  std::mutex mu_;
};

// Session creation is a session_event with event "created".
nlohmann::ordered_json created_record(const StudySession& s);
nlohmann::ordered_json event_record(const std::string& session_id, const SessionEvent& e);
nlohmann::ordered_json track_record(const TrackResponse& r);
nlohmann::ordered_json global_record(const GlobalResponse& r);

// Rebuilds every session by re-applying the logged records in order.
std::map<std::string, StudySession> replay_log(std::istream& in);
std::map<std::string, StudySession> replay_log_file(const std::string& path);

}  // namespace lrs::study
