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
#include <string>

#include "json.hpp"

namespace lrs {

// Hyperparameters shared by both model families. Fields a family does not use
// are ignored by it.
struct TrainingConfig {
  // MultVAE
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 0.05;
  int beta_anneal_steps = 1000;
  double beta = 0.2;
  int hidden = 64;  // h
  int latent = 16;  // k

  // MF
  int factors = 16;  // d
  double lambda = 0.01;
  double alpha = 10.0;
  int als_iterations = 15;

  std::uint64_t rng_seed = 0;

  // Throws lrs::Error("invalid_config") on violated invariants.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);

// Called once per epoch (MultVAE) or ALS iteration (MF) with the 1-based
// iteration number and the loss/objective value.
using ProgressFn = std::function<void(int iteration, double loss)>;

}  // namespace lrs
