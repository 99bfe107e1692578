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
#include <functional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "lrs/dataset.hpp"
#include "lrs/mf.hpp"

namespace lrs {

struct ScoredItem {
  std::int64_t item = 0;
  double score = 0.0;
  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

struct RankedList {
  std::vector<ScoredItem> items;
  std::size_t n = 0;
};

// Top-n items by descending score with `history` excluded; ties go to the
// lower item index. Returns fewer than n items when the catalog runs out.
RankedList recommend_top_n(std::span<const double> scores,
                           const std::unordered_set<std::int64_t>& history, std::size_t n);

// Maps a user's input items (count 1 each) to a score per catalog item.
using Scorer = std::function<Eigen::VectorXd(const ItemCounts& input)>;

struct EvalReport {
  double recall_at_k = 0.0;
  double ndcg_at_k = 0.0;
  std::size_t k = 0;
  std::size_t n_eval_users = 0;
};

// recall@k = |top-k ∩ held-out| / min(k, |held-out|); NDCG@k uses binary
// relevance with a log2 discount. Input items are excluded from ranking.
// Throws lrs::Error("empty_validation") when the split has no users.
EvalReport evaluate(const Scorer& scorer, const TrainSplit& split, std::size_t k);

// One line: "recall@K R ndcg@K N users U" with six decimals.
std::string format_eval_report(const EvalReport& r);

// Per-user metric helpers, exposed for tests.
double recall_at_k(std::span<const ScoredItem> ranked, std::span<const std::int64_t> heldout,
                   std::size_t k);
double ndcg_at_k(std::span<const ScoredItem> ranked, std::span<const std::int64_t> heldout,
                 std::size_t k);

// Item popularity (column sums) of a matrix; the non-personalized baseline.
Eigen::VectorXd popularity_scores(const InteractionMatrix& m);

}  // namespace lrs
