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

#include "lrs/study/questions.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

namespace lrs::study {

using nlohmann::json;

namespace {

std::string kind_name(QuestionKind k) { return k == QuestionKind::kLikert5 ? "likert-1-5" : "free-text"; }

std::vector<Question> parse_list(const json& arr, const char* section) {
  std::vector<Question> out;
  std::unordered_set<std::string> ids;
  if (!arr.is_array()) throw Error("invalid_config", std::string(section) + " must be an array");
  for (const auto& q : arr) {
    Question item;
    item.id = q.at("id").get<std::string>();
    item.prompt = q.value("prompt", "");
    const auto kind = q.value("kind", "likert-1-5");
    if (kind == "likert-1-5") {
      item.kind = QuestionKind::kLikert5;
    } else if (kind == "free-text") {
      item.kind = QuestionKind::kFreeText;
    } else {
      throw Error("invalid_config", "unknown question kind: " + kind);
    }
    item.required = q.value("required", true);
    if (item.id.empty() || !ids.insert(item.id).second)
      throw Error("invalid_config", std::string("duplicate or empty question id in ") + section);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace

QuestionSet QuestionSet::from_json(const json& j) {
  try {
    return {parse_list(j.at("per_track"), "per_track"), parse_list(j.at("global"), "global")};
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string("question set: ") + e.what());
  }
}

QuestionSet QuestionSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open question set: " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error("invalid_config", std::string("question set: ") + e.what());
  }
}

json to_json(const std::vector<Question>& qs) {
  json arr = json::array();
  for (const auto& q : qs)
    arr.push_back({{"id", q.id}, {"prompt", q.prompt}, {"kind", kind_name(q.kind)}, {"required", q.required}});
  return arr;
}

json QuestionSet::to_json() const { return {{"per_track", study::to_json(per_track)}, {"global", study::to_json(global)}}; }

void validate_answers(const std::vector<Question>& questions, const json& answers) {
  if (!answers.is_object()) throw InvalidAnswer("", "answers must be an object");
  for (const auto& [id, v] : answers.items()) {
    const bool known = std::any_of(questions.begin(), questions.end(), [&](const Question& q) { return q.id == id; });
    if (!known) throw InvalidAnswer(id, "unknown question");
  }
  for (const auto& q : questions) {
    const auto it = answers.find(q.id);
    if (it == answers.end() || it->is_null()) {
      if (q.required) throw InvalidAnswer(q.id, "required answer missing");
      continue;
    }
    if (q.kind == QuestionKind::kLikert5) {
      if (!it->is_number_integer()) throw InvalidAnswer(q.id, "expected an integer 1..5");
      const auto v = it->get<std::int64_t>();
      if (v < 1 || v > 5) throw InvalidAnswer(q.id, "value out of range 1..5");
    } else {
      if (!it->is_string()) throw InvalidAnswer(q.id, "expected text");
      if (q.required && it->get<std::string>().empty()) throw InvalidAnswer(q.id, "required answer empty");
    }
  }
}

}  // namespace lrs::study
