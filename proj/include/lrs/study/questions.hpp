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

#include <string>
#include <vector>

#include "json.hpp"
#include "lrs/error.hpp"

namespace lrs::study {

enum class QuestionKind { kLikert5, kFreeText };

struct Question {
  std::string id;
  std::string prompt;
  QuestionKind kind = QuestionKind::kLikert5;
  bool required = true;
};

class InvalidAnswer : public Error {
 public:
  InvalidAnswer(std::string question_id, const std::string& why)
      : Error("invalid_answer", question_id + ": " + why), question_id_(std::move(question_id)) {}
  const std::string& question_id() const { return question_id_; }

 private:
  std::string question_id_;
};

// Operator-supplied survey. Ids are unique within each list.
struct QuestionSet {
  std::vector<Question> per_track;
  std::vector<Question> global;

  static QuestionSet from_json(const nlohmann::json& j);
  static QuestionSet load(const std::string& path);
  nlohmann::json to_json() const;
};

nlohmann::json to_json(const std::vector<Question>& qs);

// Checks an answers object against a question list: every required question
// answered, likert values integers in 1..5, free text strings, no unknown
// ids. Throws InvalidAnswer naming the first offending question.
void validate_answers(const std::vector<Question>& questions, const nlohmann::json& answers);

}  // namespace lrs::study
