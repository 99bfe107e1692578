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

#include "lrs/ranking.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>

#include "lrs/error.hpp"

namespace lrs {

RankedList recommend_top_n(std::span<const double> scores,
                           const std::unordered_set<std::int64_t>& history, std::size_t n) {
  RankedList out;
  out.n = n;
  if (n == 0) return out;
  std::vector<std::int64_t> candidates;
  candidates.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto item = static_cast<std::int64_t>(i);
    if (!history.contains(item)) candidates.push_back(item);
  }
  const auto better = [&](std::int64_t a, std::int64_t b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  const std::size_t take = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);
  out.items.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.items.push_back({candidates[i], scores[static_cast<std::size_t>(candidates[i])]});
  return out;
}

double recall_at_k(std::span<const ScoredItem> ranked, std::span<const std::int64_t> heldout,
                   std::size_t k) {
  if (heldout.empty() || k == 0) return 0.0;
  const std::unordered_set<std::int64_t> target(heldout.begin(), heldout.end());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) hits += target.contains(ranked[r].item);
  return static_cast<double>(hits) / static_cast<double>(std::min(k, target.size()));
}

double ndcg_at_k(std::span<const ScoredItem> ranked, std::span<const std::int64_t> heldout,
                 std::size_t k) {
  if (heldout.empty() || k == 0) return 0.0;
  const std::unordered_set<std::int64_t> target(heldout.begin(), heldout.end());
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r)
    if (target.contains(ranked[r].item)) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, target.size()); ++r)
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

EvalReport evaluate(const Scorer& scorer, const TrainSplit& split, std::size_t k) {
  if (split.validation_users.empty()) throw Error("empty_validation", "no validation users");
  EvalReport rep;
  rep.k = k;
  for (const auto& vu : split.validation_users) {
    ItemCounts input;
    input.reserve(vu.input_items.size());
    for (auto i : vu.input_items) input.emplace_back(i, 1.0);
    const Eigen::VectorXd scores = scorer(input);
    const std::unordered_set<std::int64_t> history(vu.input_items.begin(), vu.input_items.end());
    const auto ranked = recommend_top_n({scores.data(), static_cast<std::size_t>(scores.size())},
                                        history, k);
    rep.recall_at_k += recall_at_k(ranked.items, vu.heldout_items, k);
    rep.ndcg_at_k += ndcg_at_k(ranked.items, vu.heldout_items, k);
  }
  rep.n_eval_users = split.validation_users.size();
  rep.recall_at_k /= static_cast<double>(rep.n_eval_users);
  rep.ndcg_at_k /= static_cast<double>(rep.n_eval_users);
  return rep;
}

Eigen::VectorXd popularity_scores(const InteractionMatrix& m) {
  Eigen::VectorXd pop = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.n_items()));
  for (std::int64_t u = 0; u < m.cells.outerSize(); ++u)
    for (SparseRows::InnerIterator it(m.cells, u); it; ++it) pop(it.col()) += it.value();
  return pop;
}

std::string format_eval_report(const EvalReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "recall@%zu %.6f ndcg@%zu %.6f users %zu", r.k, r.recall_at_k, r.k, r.ndcg_at_k,
                r.n_eval_users);
  return buf;
}

}  // namespace lrs
