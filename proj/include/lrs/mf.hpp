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
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lrs/dataset.hpp"
#include "lrs/training_config.hpp"

namespace lrs {

// Implicit-feedback matrix factorization trained by alternating least squares.
// Preference p_ui = 1 when count > 0, confidence c_ui = 1 + alpha * count.
struct MfModel {
  Eigen::MatrixXd user_factors;  // n_users x d
  Eigen::MatrixXd item_factors;  // n_items x d
  double lambda = 0.01;
  double alpha = 10.0;

  int factors() const { return static_cast<int>(item_factors.cols()); }
  std::size_t n_items() const { return static_cast<std::size_t>(item_factors.rows()); }
  std::size_t n_users() const { return static_cast<std::size_t>(user_factors.rows()); }
};

// (item index, count) pairs; counts <= 0 are ignored.
using ItemCounts = std::vector<std::pair<std::int64_t, double>>;

// Parameters are rounded to float32 precision at the end of training so that
// a model file reproduces them exactly. The last half-step solves user
// factors against the rounded item factors.
MfModel train_mf(const InteractionMatrix& m, const TrainingConfig& cfg,
                 const ProgressFn& progress = {});

// Weighted regularized objective:
//   sum_ui c_ui (p_ui - x_u . y_i)^2 + lambda (|X|^2 + |Y|^2)
double mf_objective(const MfModel& model, const InteractionMatrix& m);

// Solves the ALS user step for an unseen user against frozen item factors.
Eigen::VectorXd mf_fold_in(const MfModel& model, const ItemCounts& user_vector);

// Scores for every item: item_factors * user_factor.
Eigen::VectorXd mf_scores(const MfModel& model, const Eigen::VectorXd& user_factor);

}  // namespace lrs
