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

#include "lrs/training_config.hpp"

#include "lrs/error.hpp"

namespace lrs {

void TrainingConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error("invalid_config", what);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(beta_anneal_steps >= 1, "beta_anneal_steps must be >= 1");
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(hidden >= 1 && latent >= 1, "hidden and latent sizes must be >= 1");
  require(factors >= 1, "factors must be >= 1");
  require(lambda > 0.0, "lambda must be > 0");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(als_iterations >= 1, "als_iterations must be >= 1");
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"beta_anneal_steps", c.beta_anneal_steps},
                     {"beta", c.beta},
                     {"hidden", c.hidden},
                     {"latent", c.latent},
                     {"factors", c.factors},
                     {"lambda", c.lambda},
                     {"alpha", c.alpha},
                     {"als_iterations", c.als_iterations},
                     {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
  TrainingConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.beta_anneal_steps = j.value("beta_anneal_steps", d.beta_anneal_steps);
  c.beta = j.value("beta", d.beta);
  c.hidden = j.value("hidden", d.hidden);
  c.latent = j.value("latent", d.latent);
  c.factors = j.value("factors", d.factors);
  c.lambda = j.value("lambda", d.lambda);
  c.alpha = j.value("alpha", d.alpha);
  c.als_iterations = j.value("als_iterations", d.als_iterations);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
}

}  // namespace lrs
