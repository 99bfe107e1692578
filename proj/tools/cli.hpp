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

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrs/dataset.hpp"
#include "lrs/model.hpp"

namespace lrs::cli {

// Runs one `lrs` command. args excludes the program name. Returns 0 on
// success, 2 on a usage error and 1 on a runtime failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// A named training run, read from a --variant file:
//   {"name": "mf-16", "kind": "mf" | "multvae", "config": {...}}
struct Variant {
  std::string name;
  ModelKind kind = ModelKind::kMf;
  TrainingConfig config;

  static Variant from_json(const nlohmann::json& j);
  static Variant load(const std::string& path);
};

// Trains one variant on the given matrix of counts; the model catalog is
// `tracks`. One line per iteration goes to `log`.
TrainedModel train_variant(const Variant& v, const InteractionMatrix& counts, const std::vector<TrackKey>& tracks,
                           std::ostream& log);

}  // namespace lrs::cli
