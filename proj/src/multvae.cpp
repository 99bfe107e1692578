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

#include "lrs/multvae.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "lrs/error.hpp"

namespace lrs {

namespace {

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t>;

Eigen::Map<Eigen::VectorXd> flat(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<Eigen::VectorXd> flat(Eigen::VectorXd& v) { return {v.data(), v.size()}; }
Eigen::Map<const Eigen::VectorXd> flat(const Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<const Eigen::VectorXd> flat(const Eigen::VectorXd& v) { return {v.data(), v.size()}; }

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error("non_finite_loss", std::string("non-finite ") + what);
}

// Columns of x are users. Returns the summed per-user loss; when grad is
// non-null it receives the gradient of the mean loss over the batch.
double batch_loss(const MultVaeParams& p, const ColSparse& x, double beta,
                  const Eigen::MatrixXd& eps, MultVaeParams* grad) {
  const Eigen::Index b = x.cols();
  const Eigen::Index k = p.latent();

  Eigen::VectorXd totals = Eigen::VectorXd::Zero(b);
  ColSparse xn = x;
  for (Eigen::Index c = 0; c < b; ++c) {
    double sq = 0.0, sum = 0.0;
    for (ColSparse::InnerIterator it(x, c); it; ++it) {
      sq += it.value() * it.value();
      sum += it.value();
    }
    totals(c) = sum;
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (ColSparse::InnerIterator it(xn, c); it; ++it) it.valueRef() *= inv;
    }
  }

  const Eigen::MatrixXd h1 = ((p.enc_w1 * xn).colwise() + p.enc_b1).array().tanh().matrix();
  const Eigen::MatrixXd enc = (p.enc_w2 * h1).colwise() + p.enc_b2;
  const auto mu = enc.topRows(k);
  const auto logvar = enc.bottomRows(k);
  const Eigen::MatrixXd sigma = (0.5 * logvar.array()).exp().matrix();
  const Eigen::MatrixXd z = mu + sigma.cwiseProduct(eps);
  const Eigen::MatrixXd h2 = ((p.dec_w1 * z).colwise() + p.dec_b1).array().tanh().matrix();
  const Eigen::MatrixXd logits = (p.dec_w2 * h2).colwise() + p.dec_b2;

  // log-softmax per column
  const Eigen::RowVectorXd col_max = logits.colwise().maxCoeff();
  const Eigen::MatrixXd shifted = logits.rowwise() - col_max;
  const Eigen::RowVectorXd lse = shifted.array().exp().colwise().sum().log().matrix();
  const Eigen::MatrixXd log_sm = shifted.rowwise() - lse;

  double loss = 0.0;
  for (Eigen::Index c = 0; c < b; ++c) {
    double rec = 0.0;
    for (ColSparse::InnerIterator it(x, c); it; ++it) rec -= it.value() * log_sm(it.row(), c);
    const double kl = 0.5 * (logvar.col(c).array().exp() + mu.col(c).array().square() - 1.0 -
                             logvar.col(c).array())
                                .sum();
    loss += rec + beta * kl;
  }
  check_finite(loss, "loss");
  if (!grad) return loss;

  const double scale = 1.0 / static_cast<double>(b);
  // d loss / d logits = softmax * sum(x) - x
  Eigen::MatrixXd d_logits = log_sm.array().exp().matrix() * totals.asDiagonal();
  for (Eigen::Index c = 0; c < b; ++c)
    for (ColSparse::InnerIterator it(x, c); it; ++it) d_logits(it.row(), c) -= it.value();
  d_logits *= scale;

  grad->dec_w2.noalias() = d_logits * h2.transpose();
  grad->dec_b2 = d_logits.rowwise().sum();
  const Eigen::MatrixXd d_a2 =
      (p.dec_w2.transpose() * d_logits).cwiseProduct((1.0 - h2.array().square()).matrix());
  grad->dec_w1.noalias() = d_a2 * z.transpose();
  grad->dec_b1 = d_a2.rowwise().sum();
  const Eigen::MatrixXd d_z = p.dec_w1.transpose() * d_a2;

  Eigen::MatrixXd d_enc(2 * k, b);
  d_enc.topRows(k) = d_z + scale * beta * mu;
  d_enc.bottomRows(k) =
      (0.5 * d_z.array() * sigma.array() * eps.array() +
       scale * beta * 0.5 * (logvar.array().exp() - 1.0))
          .matrix();
  grad->enc_w2.noalias() = d_enc * h1.transpose();
  grad->enc_b2 = d_enc.rowwise().sum();
  const Eigen::MatrixXd d_a1 =
      (p.enc_w2.transpose() * d_enc).cwiseProduct((1.0 - h1.array().square()).matrix());
  grad->enc_w1 = d_a1 * xn.transpose();
  grad->enc_b1 = d_a1.rowwise().sum();

  for (double v : {grad->enc_w1.sum(), grad->enc_w2.sum(), grad->dec_w1.sum(), grad->dec_w2.sum()})
    check_finite(v, "gradient");
  return loss;
}

ColSparse dense_to_sparse(const Eigen::VectorXd& x) {
  ColSparse s(x.size(), 1);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) != 0.0) s.insert(i, 0) = x(i);
  s.makeCompressed();
  return s;
}

}  // namespace

MultVaeParams MultVaeParams::zeros(int n_items, int hidden, int latent) {
  MultVaeParams p;
  p.enc_w1 = Eigen::MatrixXd::Zero(hidden, n_items);
  p.enc_b1 = Eigen::VectorXd::Zero(hidden);
  p.enc_w2 = Eigen::MatrixXd::Zero(2 * latent, hidden);
  p.enc_b2 = Eigen::VectorXd::Zero(2 * latent);
  p.dec_w1 = Eigen::MatrixXd::Zero(hidden, latent);
  p.dec_b1 = Eigen::VectorXd::Zero(hidden);
  p.dec_w2 = Eigen::MatrixXd::Zero(n_items, hidden);
  p.dec_b2 = Eigen::VectorXd::Zero(n_items);
  return p;
}

MultVaeParams MultVaeParams::glorot(int n_items, int hidden, int latent, std::mt19937_64& rng) {
  MultVaeParams p = zeros(n_items, hidden, latent);
  auto fill = [&rng](Eigen::MatrixXd& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
  };
  fill(p.enc_w1);
  fill(p.enc_w2);
  fill(p.dec_w1);
  fill(p.dec_w2);
  return p;
}

void MultVaeParams::for_each(
    const std::function<void(std::string_view, Eigen::Map<Eigen::VectorXd>)>& fn) {
  fn("enc_w1", flat(enc_w1));
  fn("enc_b1", flat(enc_b1));
  fn("enc_w2", flat(enc_w2));
  fn("enc_b2", flat(enc_b2));
  fn("dec_w1", flat(dec_w1));
  fn("dec_b1", flat(dec_b1));
  fn("dec_w2", flat(dec_w2));
  fn("dec_b2", flat(dec_b2));
}

void MultVaeParams::for_each(
    const std::function<void(std::string_view, Eigen::Map<const Eigen::VectorXd>)>& fn) const {
  fn("enc_w1", flat(enc_w1));
  fn("enc_b1", flat(enc_b1));
  fn("enc_w2", flat(enc_w2));
  fn("enc_b2", flat(enc_b2));
  fn("dec_w1", flat(dec_w1));
  fn("dec_b1", flat(dec_b1));
  fn("dec_w2", flat(dec_w2));
  fn("dec_b2", flat(dec_b2));
}

VaeForward multvae_forward(const MultVaeModel& model, const Eigen::VectorXd& x, bool sample,
                           std::mt19937_64& rng) {
  const auto& p = model.params;
  const Eigen::Index k = p.latent();
  Eigen::VectorXd xn = x;
  const double norm = x.norm();
  if (norm > 0.0) xn /= norm;
  const Eigen::VectorXd h1 = (p.enc_w1 * xn + p.enc_b1).array().tanh().matrix();
  const Eigen::VectorXd enc = p.enc_w2 * h1 + p.enc_b2;
  VaeForward out;
  out.mu = enc.head(k);
  out.logvar = enc.tail(k);
  Eigen::VectorXd z = out.mu;
  if (sample) {
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < k; ++j) z(j) += std::exp(0.5 * out.logvar(j)) * normal(rng);
  }
  const Eigen::VectorXd h2 = (p.dec_w1 * z + p.dec_b1).array().tanh().matrix();
  out.logits = p.dec_w2 * h2 + p.dec_b2;
  return out;
}

ElboTerms elbo_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar, double beta) {
  if (logits.size() != x.size() || mu.size() != logvar.size())
    throw Error("invalid_argument", "elbo_loss shape mismatch");
  ElboTerms t;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  const Eigen::VectorXd log_sm = logits.array() - lse;
  t.reconstruction = -x.dot(log_sm);
  t.kl = 0.5 * (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array()).sum();
  t.loss = t.reconstruction + beta * t.kl;
  check_finite(t.loss, "loss");
  t.d_logits = log_sm.array().exp().matrix() * x.sum() - x;
  t.d_mu = beta * mu;
  t.d_logvar = beta * 0.5 * (logvar.array().exp() - 1.0).matrix();
  return t;
}

LossAndGrad multvae_loss_and_gradients(const MultVaeParams& params, const Eigen::VectorXd& x,
                                       double beta, const Eigen::VectorXd& eps) {
  LossAndGrad out;
  out.grad = MultVaeParams::zeros(params.n_items(), params.hidden(), params.latent());
  const Eigen::MatrixXd e = eps;
  out.loss = batch_loss(params, dense_to_sparse(x), beta, e, &out.grad);
  return out;
}

MultVaeModel train_multvae(const InteractionMatrix& m, const TrainingConfig& cfg,
                           const ProgressFn& progress) {
  cfg.validate();
  if (!m.binarized) throw Error("invalid_argument", "train_multvae requires a binarized matrix");
  if (m.n_users() == 0 || m.n_items() == 0) throw Error("invalid_argument", "empty interaction matrix");

  std::mt19937_64 rng(cfg.rng_seed);
  MultVaeModel model;
  model.beta = cfg.beta;
  model.params = MultVaeParams::glorot(static_cast<int>(m.n_items()), cfg.hidden, cfg.latent, rng);
  MultVaeParams grad = MultVaeParams::zeros(static_cast<int>(m.n_items()), cfg.hidden, cfg.latent);

  const ColSparse users_by_col = m.cells.transpose();  // n_items x n_users
  std::vector<std::int64_t> order(m.n_users());
  std::iota(order.begin(), order.end(), 0);
  std::normal_distribution<double> normal;
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      ColSparse batch(users_by_col.rows(), b);
      std::vector<Eigen::Triplet<double, std::int64_t>> t;
      for (Eigen::Index c = 0; c < b; ++c)
        for (ColSparse::InnerIterator it(users_by_col, order[start + static_cast<std::size_t>(c)]); it; ++it)
          t.emplace_back(it.row(), c, it.value());
      batch.setFromTriplets(t.begin(), t.end());

      Eigen::MatrixXd eps(cfg.latent, b);
      for (Eigen::Index c = 0; c < b; ++c)
        for (Eigen::Index j = 0; j < cfg.latent; ++j) eps(j, c) = normal(rng);

      const double beta = cfg.beta * std::min(1.0, static_cast<double>(step) / cfg.beta_anneal_steps);
      double loss = 0.0;
      try {
        loss = batch_loss(model.params, batch, beta, eps, &grad);
      } catch (const Error& e) {
        throw Error(e.code(), std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(start / cfg.batch_size + 1));
      }
      epoch_loss += loss;

      auto p_views = std::vector<Eigen::Map<Eigen::VectorXd>>{};
      model.params.for_each([&](std::string_view, Eigen::Map<Eigen::VectorXd> v) { p_views.push_back(v); });
      std::size_t idx = 0;
      const MultVaeParams& g = grad;
      g.for_each([&](std::string_view, Eigen::Map<const Eigen::VectorXd> gv) {
        p_views[idx++] -= cfg.learning_rate * gv;
      });
      ++step;
    }
    if (progress) progress(epoch, epoch_loss / static_cast<double>(order.size()));
  }

  model.params.for_each([](std::string_view, Eigen::Map<Eigen::VectorXd> v) {
    v = v.cast<float>().cast<double>();
  });
  return model;
}

Eigen::VectorXd multvae_scores(const MultVaeModel& model, const Eigen::VectorXd& x) {
  std::mt19937_64 unused;
  return multvae_forward(model, x, false, unused).logits;
}

}  // namespace lrs
