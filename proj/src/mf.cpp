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

#include "lrs/mf.hpp"

#include <random>

#include <Eigen/Cholesky>

#include "lrs/error.hpp"

namespace lrs {

namespace {

using ColMajorSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, std::int64_t>;

// Least-squares step for one row of the side being solved, given the fixed
// factors of the other side and their Gramian.
template <typename Iter>
Eigen::VectorXd solve_row(Iter it, const Eigen::MatrixXd& fixed, const Eigen::MatrixXd& gram,
                          double lambda, double alpha) {
  const auto d = fixed.cols();
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += lambda;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (; it; ++it) {
    const double count = it.value();
    if (count <= 0.0) continue;
    const double c = 1.0 + alpha * count;
    const auto y = fixed.row(it.index()).transpose();
    a.noalias() += (c - 1.0) * y * y.transpose();
    b.noalias() += c * y;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw Error("singular_system", "normal equations are not SPD");
  return llt.solve(b);
}

// Iterator over an ItemCounts vector with the same surface as an Eigen
// InnerIterator.
class CountsIter {
 public:
  explicit CountsIter(const ItemCounts& v) : v_(v) {}
  explicit operator bool() const { return pos_ < v_.size(); }
  CountsIter& operator++() {
    ++pos_;
    return *this;
  }
  std::int64_t index() const { return v_[pos_].first; }
  double value() const { return v_[pos_].second; }

 private:
  const ItemCounts& v_;
  std::size_t pos_ = 0;
};

void round_to_float(Eigen::MatrixXd& m) { m = m.cast<float>().cast<double>(); }

void solve_users(MfModel& model, const SparseRows& rows) {
  const Eigen::MatrixXd gram = model.item_factors.transpose() * model.item_factors;
  for (std::int64_t u = 0; u < rows.outerSize(); ++u) {
    model.user_factors.row(u) =
        solve_row(SparseRows::InnerIterator(rows, u), model.item_factors, gram, model.lambda,
                  model.alpha)
            .transpose();
  }
}

void solve_items(MfModel& model, const ColMajorSparse& cols) {
  const Eigen::MatrixXd gram = model.user_factors.transpose() * model.user_factors;
  for (std::int64_t i = 0; i < cols.outerSize(); ++i) {
    model.item_factors.row(i) =
        solve_row(ColMajorSparse::InnerIterator(cols, i), model.user_factors, gram, model.lambda,
                  model.alpha)
            .transpose();
  }
}

}  // namespace

MfModel train_mf(const InteractionMatrix& m, const TrainingConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  if (m.n_users() == 0 || m.n_items() == 0) throw Error("invalid_argument", "empty interaction matrix");

  MfModel model;
  model.lambda = cfg.lambda;
  model.alpha = cfg.alpha;
  const auto d = cfg.factors;
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> init(-0.01, 0.01);
  model.user_factors.resize(static_cast<Eigen::Index>(m.n_users()), d);
  model.item_factors.resize(static_cast<Eigen::Index>(m.n_items()), d);
  for (Eigen::Index r = 0; r < model.user_factors.rows(); ++r)
    for (Eigen::Index c = 0; c < d; ++c) model.user_factors(r, c) = init(rng);
  for (Eigen::Index r = 0; r < model.item_factors.rows(); ++r)
    for (Eigen::Index c = 0; c < d; ++c) model.item_factors(r, c) = init(rng);

  const ColMajorSparse cols = m.cells;
  for (int iter = 1; iter <= cfg.als_iterations; ++iter) {
    solve_items(model, cols);
    if (iter == cfg.als_iterations) round_to_float(model.item_factors);
    solve_users(model, m.cells);
    if (progress) progress(iter, mf_objective(model, m));
  }
  round_to_float(model.user_factors);
  return model;
}

double mf_objective(const MfModel& model, const InteractionMatrix& m) {
  const auto& x = model.user_factors;
  const auto& y = model.item_factors;
  // sum over all cells of s_ui^2 with unit confidence
  double total = ((x.transpose() * x).cwiseProduct(y.transpose() * y)).sum();
  for (std::int64_t u = 0; u < m.cells.outerSize(); ++u) {
    for (SparseRows::InnerIterator it(m.cells, u); it; ++it) {
      if (it.value() <= 0.0) continue;
      const double s = x.row(u).dot(y.row(it.col()));
      const double c = 1.0 + model.alpha * it.value();
      total += c * (1.0 - s) * (1.0 - s) - s * s;
    }
  }
  return total + model.lambda * (x.squaredNorm() + y.squaredNorm());
}

Eigen::VectorXd mf_fold_in(const MfModel& model, const ItemCounts& user_vector) {
  for (const auto& [i, c] : user_vector) {
    if (i < 0 || static_cast<std::size_t>(i) >= model.n_items())
      throw Error("invalid_argument", "item index out of range");
  }
  const Eigen::MatrixXd gram = model.item_factors.transpose() * model.item_factors;
  return solve_row(CountsIter(user_vector), model.item_factors, gram, model.lambda, model.alpha);
}

Eigen::VectorXd mf_scores(const MfModel& model, const Eigen::VectorXd& user_factor) {
  return model.item_factors * user_factor;
}

}  // namespace lrs
