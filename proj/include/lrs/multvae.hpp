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
#include <random>
#include <string_view>

#include <Eigen/Dense>

#include "lrs/dataset.hpp"
#include "lrs/training_config.hpp"

namespace lrs {

// Weights of the multinomial VAE. Encoder [n_items -> h -> 2k], decoder
// [k -> h -> n_items], tanh on both hidden layers. The first k encoder
// outputs are the posterior means, the last k the log-variances.
struct MultVaeParams {
  Eigen::MatrixXd enc_w1;  // h x n
  Eigen::VectorXd enc_b1;  // h
  Eigen::MatrixXd enc_w2;  // 2k x h
  Eigen::VectorXd enc_b2;  // 2k
  Eigen::MatrixXd dec_w1;  // h x k
  Eigen::VectorXd dec_b1;  // h
  Eigen::MatrixXd dec_w2;  // n x h
  Eigen::VectorXd dec_b2;  // n

  static MultVaeParams zeros(int n_items, int hidden, int latent);
  // Glorot-uniform weights, zero biases.
  static MultVaeParams glorot(int n_items, int hidden, int latent, std::mt19937_64& rng);

  int n_items() const { return static_cast<int>(enc_w1.cols()); }
  int hidden() const { return static_cast<int>(enc_w1.rows()); }
  int latent() const { return static_cast<int>(dec_w1.cols()); }

  // Visits every tensor in serialization order as (name, flat view).
  void for_each(const std::function<void(std::string_view, Eigen::Map<Eigen::VectorXd>)>& fn);
  void for_each(const std::function<void(std::string_view, Eigen::Map<const Eigen::VectorXd>)>& fn) const;
};

struct MultVaeModel {
  MultVaeParams params;
  double beta = 0.2;  // KL weight at the end of annealing
};

struct VaeForward {
  Eigen::VectorXd logits;  // n_items
  Eigen::VectorXd mu;      // k
  Eigen::VectorXd logvar;  // k
};

// Forward pass for one user. The input is L2-normalized (an all-zero vector
// stays zero). With sample == false, z = mu and rng is untouched.
VaeForward multvae_forward(const MultVaeModel& model, const Eigen::VectorXd& x, bool sample,
                           std::mt19937_64& rng);

// Loss terms and their gradients w.r.t. the network outputs.
struct ElboTerms {
  double loss = 0.0;
  double reconstruction = 0.0;  // -sum_i x_i log softmax(logits)_i
  double kl = 0.0;              // KL(N(mu, sigma^2) || N(0, I))
  Eigen::VectorXd d_logits;
  Eigen::VectorXd d_mu;       // from the KL term only
  Eigen::VectorXd d_logvar;   // from the KL term only
};

// loss = reconstruction + beta * kl. Throws lrs::Error("non_finite_loss").
ElboTerms elbo_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar, double beta);

struct LossAndGrad {
  double loss = 0.0;
  MultVaeParams grad;
};

// Full backpropagation for one user with an explicit noise vector eps
// (length k); eps = 0 reproduces the deterministic pass.
LossAndGrad multvae_loss_and_gradients(const MultVaeParams& params, const Eigen::VectorXd& x,
                                       double beta, const Eigen::VectorXd& eps);

// Mini-batch SGD with a fixed learning rate and beta annealed linearly from 0
// to cfg.beta over cfg.beta_anneal_steps updates. Requires a binarized
// matrix. Parameters are rounded to float32 precision on return.
MultVaeModel train_multvae(const InteractionMatrix& m, const TrainingConfig& cfg,
                           const ProgressFn& progress = {});

// Deterministic logits for a user vector.
Eigen::VectorXd multvae_scores(const MultVaeModel& model, const Eigen::VectorXd& x);

}  // namespace lrs
