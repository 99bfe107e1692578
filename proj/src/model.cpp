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

#include "lrs/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "lrs/error.hpp"

namespace lrs {

namespace {

constexpr std::array<char, 4> kMagic{'L', 'R', 'S', '1'};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), b.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!in) throw Error("bad_model_file", "truncated header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

// Writes a matrix row-major as float32 LE.
void put_tensor(std::ostream& out, const Eigen::MatrixXd& m) {
  std::vector<char> buf(static_cast<std::size_t>(m.size()) * 4);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
      for (int i = 0; i < 4; ++i) buf[pos++] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Eigen::MatrixXd get_tensor(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows * cols) * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw Error("bad_model_file", "truncated tensor data");
  Eigen::MatrixXd m(rows, cols);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::uint32_t bits = 0;
      for (int i = 3; i >= 0; --i) bits = (bits << 8) | buf[pos + static_cast<std::size_t>(i)];
      pos += 4;
      const float f = std::bit_cast<float>(bits);
      if (!std::isfinite(f)) throw Error("bad_model_file", "non-finite parameter");
      m(r, c) = f;
    }
  }
  return m;
}

struct TensorRef {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
};

std::vector<TensorRef> vae_layout(int n, int h, int k) {
  return {{"enc_w1", h, n}, {"enc_b1", h, 1},     {"enc_w2", 2 * k, h}, {"enc_b2", 2 * k, 1},
          {"dec_w1", h, k}, {"dec_b1", h, 1},     {"dec_w2", n, h},     {"dec_b2", n, 1}};
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::kMf ? "mf" : "multvae"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "mf") return ModelKind::kMf;
  if (s == "multvae") return ModelKind::kMultVae;
  throw Error("invalid_config", "unknown model kind: " + s);
}

std::size_t TrainedModel::n_items() const {
  if (const auto* mf = std::get_if<MfModel>(&model)) return mf->n_items();
  return static_cast<std::size_t>(std::get<MultVaeModel>(model).params.n_items());
}

Eigen::VectorXd score_user(const TrainedModel& model, const ItemCounts& input) {
  if (const auto* mf = std::get_if<MfModel>(&model.model)) {
    return mf_scores(*mf, mf_fold_in(*mf, input));
  }
  const auto& vae = std::get<MultVaeModel>(model.model);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(vae.params.n_items());
  for (const auto& [i, c] : input) {
    if (i < 0 || i >= x.size()) throw Error("invalid_argument", "item index out of range");
    if (c > 0.0) x(i) = 1.0;
  }
  return multvae_scores(vae, x);
}

Scorer make_scorer(const TrainedModel& model) {
  return [&model](const ItemCounts& input) { return score_user(model, input); };
}

void write_model(std::ostream& out, const TrainedModel& model) {
  nlohmann::json meta;
  meta["kind"] = to_string(model.kind());
  meta["name"] = model.name;
  meta["n_items"] = model.n_items();
  std::vector<std::pair<TensorRef, const Eigen::MatrixXd*>> tensors;
  std::vector<Eigen::MatrixXd> owned;  // vectors promoted to column matrices
  if (const auto* mf = std::get_if<MfModel>(&model.model)) {
    meta["n_users"] = mf->n_users();
    meta["factors"] = mf->factors();
    meta["lambda"] = mf->lambda;
    meta["alpha"] = mf->alpha;
    tensors.push_back({{"user_factors", mf->user_factors.rows(), mf->user_factors.cols()}, &mf->user_factors});
    tensors.push_back({{"item_factors", mf->item_factors.rows(), mf->item_factors.cols()}, &mf->item_factors});
  } else {
    const auto& vae = std::get<MultVaeModel>(model.model);
    const auto& p = vae.params;
    meta["hidden"] = p.hidden();
    meta["latent"] = p.latent();
    meta["beta"] = vae.beta;
    owned.reserve(8);
    const auto layout = vae_layout(p.n_items(), p.hidden(), p.latent());
    const std::array<const Eigen::MatrixXd*, 4> weights{&p.enc_w1, &p.enc_w2, &p.dec_w1, &p.dec_w2};
    const std::array<const Eigen::VectorXd*, 4> biases{&p.enc_b1, &p.enc_b2, &p.dec_b1, &p.dec_b2};
    for (std::size_t i = 0; i < 4; ++i) owned.emplace_back(*biases[i]);
    for (std::size_t i = 0; i < 4; ++i) {
      tensors.push_back({layout[2 * i], weights[i]});
      tensors.push_back({layout[2 * i + 1], &owned[i]});
    }
  }
  meta["config"] = model.config;
  auto& tmeta = meta["tensors"] = nlohmann::json::array();
  for (const auto& [ref, m] : tensors)
    tmeta.push_back({{"name", ref.name}, {"rows", ref.rows}, {"cols", ref.cols}, {"dtype", "f32le"}});
  auto& items = meta["items"] = nlohmann::json::array();
  for (const auto& k : model.items) items.push_back({k.artist, k.title});

  const std::string text = meta.dump();
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [ref, m] : tensors) put_tensor(out, *m);
  if (!out) throw Error("io", "model write failed");
}

void write_model_file(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write model file: " + path);
  write_model(out, model);
}

TrainedModel read_model(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error("bad_model_file", "missing LRS1 magic");
  const auto len = get_u64(in);
  if (len > (1ULL << 34)) throw Error("bad_model_file", "implausible metadata length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("bad_model_file", "truncated metadata");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad_model_file", std::string("metadata: ") + e.what());
  }

  TrainedModel model;
  try {
    model.name = meta.value("name", "");
    model.config = meta.at("config").get<TrainingConfig>();
    for (const auto& it : meta.at("items")) model.items.push_back({it.at(0).get<std::string>(), it.at(1).get<std::string>()});
    std::unordered_map<std::string, Eigen::MatrixXd> tensors;
    for (const auto& t : meta.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      tensors[t.at("name").get<std::string>()] = get_tensor(in, rows, cols);
    }
    auto take = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
      auto it = tensors.find(name);
      if (it == tensors.end() || it->second.rows() != rows || it->second.cols() != cols)
        throw Error("bad_model_file", "missing or misshapen tensor " + name);
      return std::move(it->second);
    };
    const auto n = meta.at("n_items").get<Eigen::Index>();
    if (static_cast<std::size_t>(n) != model.items.size())
      throw Error("bad_model_file", "item catalog size mismatch");
    switch (parse_model_kind(meta.at("kind").get<std::string>())) {
      case ModelKind::kMf: {
        MfModel mf;
        const auto d = meta.at("factors").get<Eigen::Index>();
        mf.lambda = meta.at("lambda").get<double>();
        mf.alpha = meta.at("alpha").get<double>();
        mf.user_factors = take("user_factors", meta.at("n_users").get<Eigen::Index>(), d);
        mf.item_factors = take("item_factors", n, d);
        model.model = std::move(mf);
        break;
      }
      case ModelKind::kMultVae: {
        MultVaeModel vae;
        vae.beta = meta.at("beta").get<double>();
        const int h = meta.at("hidden").get<int>();
        const int k = meta.at("latent").get<int>();
        auto& p = vae.params;
        p.enc_w1 = take("enc_w1", h, n);
        p.enc_b1 = take("enc_b1", h, 1);
        p.enc_w2 = take("enc_w2", 2 * k, h);
        p.enc_b2 = take("enc_b2", 2 * k, 1);
        p.dec_w1 = take("dec_w1", h, k);
        p.dec_b1 = take("dec_b1", h, 1);
        p.dec_w2 = take("dec_w2", n, h);
        p.dec_b2 = take("dec_b2", n, 1);
        model.model = std::move(vae);
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad_model_file", std::string("metadata: ") + e.what());
  }
  return model;
}

TrainedModel read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open model file: " + path);
  return read_model(in);
}

ServingModel::ServingModel(TrainedModel model) : model_(std::move(model)) {
  lookup_.reserve(model_.items.size());
  for (std::size_t i = 0; i < model_.items.size(); ++i)
    lookup_.emplace(model_.items[i], static_cast<std::int64_t>(i));
}

std::int64_t ServingModel::item_index(const TrackKey& key) const {
  auto it = lookup_.find(key);
  return it == lookup_.end() ? -1 : it->second;
}

}  // namespace lrs
