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
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lrs/dataset.hpp"
#include "lrs/mf.hpp"
#include "lrs/multvae.hpp"
#include "lrs/ranking.hpp"
#include "lrs/training_config.hpp"

namespace lrs {

enum class ModelKind { kMf, kMultVae };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

// A trained model together with the catalog its item indices refer to.
struct TrainedModel {
  std::string name;
  std::variant<MfModel, MultVaeModel> model;
  std::vector<TrackKey> items;
  TrainingConfig config;

  ModelKind kind() const {
    return std::holds_alternative<MfModel>(model) ? ModelKind::kMf : ModelKind::kMultVae;
  }
  std::size_t n_items() const;
};

// Scores every catalog item for a user given their item counts. MF folds the
// user in; MultVAE runs the deterministic forward pass on the binarized input.
Eigen::VectorXd score_user(const TrainedModel& model, const ItemCounts& input);
Scorer make_scorer(const TrainedModel& model);

// Model file: "LRS1", u64 little-endian metadata length, JSON metadata, then
// each tensor listed in the metadata as row-major little-endian float32.
void write_model(std::ostream& out, const TrainedModel& model);
void write_model_file(const std::string& path, const TrainedModel& model);
TrainedModel read_model(std::istream& in);
TrainedModel read_model_file(const std::string& path);

// Read-only serving view with a track lookup. Instances are shared across
// threads without synchronization.
class ServingModel {
 public:
  explicit ServingModel(TrainedModel model);

  const TrainedModel& model() const { return model_; }
  const std::string& name() const { return model_.name; }
  // -1 when the track is not in the model catalog.
  std::int64_t item_index(const TrackKey& key) const;
  const TrackKey& track(std::int64_t item) const { return model_.items.at(static_cast<std::size_t>(item)); }

 private:
  TrainedModel model_;
  std::unordered_map<TrackKey, std::int64_t, TrackKeyHash> lookup_;
};

}  // namespace lrs
