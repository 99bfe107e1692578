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

#include "lrs/study/response_log.hpp"

#include <unistd.h>

#include <fstream>

namespace lrs::study {

using nlohmann::json;
using nlohmann::ordered_json;

ResponseLog::ResponseLog(std::string path) : path_(std::move(path)) {
  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw Error("io", "cannot open response log: " + path_);
}

ResponseLog::~ResponseLog() {
  if (file_) std::fclose(file_);
}

void ResponseLog::append(const ordered_json& record) {
  const std::string line = record.dump() + "\n";
  std::lock_guard lock(mu_);
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
      ::fsync(::fileno(file_)) != 0) {
    throw Error("io", "response log write failed: " + path_);
  }
}

ordered_json created_record(const StudySession& s) {
  return {{"kind", "session_event"}, {"session_id", s.session_id}, {"event", "created"},
          {"at", s.created_at},      {"model", s.model_name},      {"market", s.market}};
}

ordered_json event_record(const std::string& session_id, const SessionEvent& e) {
  ordered_json j{{"kind", "session_event"}, {"session_id", session_id}, {"event", to_string(e.kind)}, {"at", e.at}};
  if (e.kind == EventKind::kUsernameAccepted) {
    j["username"] = e.username;
    j["market"] = e.market;
  }
  if (e.kind == EventKind::kFailure) j["reason"] = e.reason;
  if (e.items) j["items"] = ordered_json::parse(to_json(*e.items).dump());
  return j;
}

ordered_json track_record(const TrackResponse& r) {
  return {{"kind", "track_response"},
          {"session_id", r.session_id},
          {"rank", r.rank},
          {"artist", r.track.artist},
          {"title", r.track.title},
          {"answers", ordered_json::parse(r.answers.dump())},
          {"answered_at", r.answered_at}};
}

ordered_json global_record(const GlobalResponse& r) {
  return {{"kind", "global_response"},
          {"session_id", r.session_id},
          {"answers", ordered_json::parse(r.answers.dump())},
          {"answered_at", r.answered_at}};
}

std::map<std::string, StudySession> replay_log(std::istream& in) {
  std::map<std::string, StudySession> sessions;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      const auto kind = j.at("kind").get<std::string>();
      const auto id = j.at("session_id").get<std::string>();
      if (kind == "session_event") {
        const auto ev = j.at("event").get<std::string>();
        const auto at = j.at("at").get<std::int64_t>();
        if (ev == "created") {
          StudySession s;
          s.session_id = id;
          s.created_at = s.updated_at = at;
          s.model_name = j.value("model", "");
          s.market = j.value("market", "");
          sessions[id] = std::move(s);
          continue;
        }
        auto& s = sessions.at(id);
        SessionEvent e{parse_event_kind(ev), at, j.value("username", ""), {}, j.value("reason", ""),
                       j.value("market", "")};
        if (j.contains("items")) e.items = presentation_from_json(j["items"]);
        s = transition(std::move(s), e);
      } else if (kind == "track_response") {
        auto& s = sessions.at(id);
        TrackResponse r{id, j.at("rank").get<std::size_t>(),
                        {j.at("artist").get<std::string>(), j.at("title").get<std::string>()},
                        j.at("answers"), j.at("answered_at").get<std::int64_t>()};
        s.updated_at = r.answered_at;
        s.track_responses[r.rank] = std::move(r);
      } else if (kind == "global_response") {
        auto& s = sessions.at(id);
        s.global_response = GlobalResponse{id, j.at("answers"), j.at("answered_at").get<std::int64_t>()};
        s.updated_at = s.global_response->answered_at;
      } else {
        throw Error("bad_log", "unknown record kind " + kind);
      }
    } catch (const json::exception& e) {
      throw Error("bad_log", "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw Error("bad_log", "line " + std::to_string(line_no) + ": unknown session");
    }
  }
  return sessions;
}

std::map<std::string, StudySession> replay_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  return replay_log(in);
}

}  // namespace lrs::study
