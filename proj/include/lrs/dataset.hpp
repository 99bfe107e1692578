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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

#include "lrs/error.hpp"

namespace lrs {

// Identity of a track: exact (artist, title) after NFC + trim. Case matters.
struct TrackKey {
  std::string artist;
  std::string title;

  // Canonicalizes both fields. Throws lrs::Error("invalid_track") when either
  // is empty after trimming.
  static TrackKey make(std::string_view artist, std::string_view title);

  friend bool operator==(const TrackKey&, const TrackKey&) = default;
  friend auto operator<=>(const TrackKey&, const TrackKey&) = default;
};

struct TrackKeyHash {
  std::size_t operator()(const TrackKey& k) const noexcept;
};

// One play of a track. Fields are canonical once constructed through
// TrackKey::make / ingest.
struct ListeningEvent {
  std::string user_id;
  std::string artist_name;
  std::string track_title;
  std::int64_t timestamp = 0;

  friend bool operator==(const ListeningEvent&, const ListeningEvent&) = default;
  friend auto operator<=>(const ListeningEvent&, const ListeningEvent&) = default;
};

// Deduplicated event collection with dense user and track indices.
class Dataset {
 public:
  struct Row {
    std::uint32_t user;
    std::uint32_t track;
    std::int64_t timestamp;
    friend bool operator==(const Row&, const Row&) = default;
  };

  Dataset() = default;

  // Collapses exact duplicates. Index order is order of first appearance.
  static Dataset from_events(std::span<const ListeningEvent> events);

  std::size_t n_users() const { return users_.size(); }
  std::size_t n_tracks() const { return tracks_.size(); }
  std::size_t n_events() const { return rows_.size(); }

  const std::vector<std::string>& users() const { return users_; }
  const std::vector<TrackKey>& tracks() const { return tracks_; }
  const std::vector<Row>& rows() const { return rows_; }

  ListeningEvent event(std::size_t i) const;
  std::vector<ListeningEvent> events() const;

  // -1 when absent.
  std::int64_t user_index(const std::string& user) const;
  std::int64_t track_index(const TrackKey& key) const;

  // Event count per track, indexed by track.
  std::vector<std::size_t> track_counts() const;
  std::vector<std::size_t> user_counts() const;

 private:
  friend Dataset top_up_merge(const Dataset&, const Dataset&, std::uint64_t);
  friend struct DatasetBuilder;

  std::vector<std::string> users_;
  std::vector<TrackKey> tracks_;
  std::vector<Row> rows_;
  std::unordered_map<std::string, std::uint32_t> user_lookup_;
  std::unordered_map<TrackKey, std::uint32_t, TrackKeyHash> track_lookup_;
};

struct MalformedRecord {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct IngestReport {
  std::size_t records = 0;  // non-blank, non-comment lines seen
  std::size_t duplicates = 0;
  std::vector<MalformedRecord> malformed;
};

struct IngestResult {
  Dataset dataset;
  IngestReport report;
};

// Parses tab-separated lines: user_id, artist_name, track_title, timestamp.
// Blank lines and lines starting with '#' are skipped. Malformed lines are
// collected in the report; throws lrs::Error("too_many_malformed") when more
// than half of the records are malformed.
IngestResult ingest_events(std::span<const std::string> lines);
IngestResult read_events_file(const std::string& path);
IngestResult read_events(std::istream& in);

void write_events(std::ostream& out, const Dataset& ds);
void write_events_file(const std::string& path, const Dataset& ds);

struct FilterReport {
  std::int64_t min_le = 0;
  std::size_t tracks_before = 0;
  std::size_t tracks_after = 0;
  std::size_t events_before = 0;
  std::size_t events_after = 0;
  double track_reduction_pct = 0.0;
  double event_reduction_pct = 0.0;

  friend bool operator==(const FilterReport&, const FilterReport&) = default;
};

// Reduction percentage 100 * (1 - after / before); 0 when before is 0.
double reduction_pct(std::size_t before, std::size_t after);

struct FilterResult {
  Dataset dataset;
  FilterReport report;
};

// Removes every track with min_le or fewer events and any user left without
// events. Index order of survivors is preserved.
FilterResult filter_min_interactions(const Dataset& ds, std::int64_t min_le);

// Text form printed by the CLI.
std::string format_filter_report(const FilterReport& r);

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

// User x item matrix of interaction counts (or 1s when binarized).
struct InteractionMatrix {
  SparseRows cells;
  bool binarized = false;

  std::size_t n_users() const { return static_cast<std::size_t>(cells.rows()); }
  std::size_t n_items() const { return static_cast<std::size_t>(cells.cols()); }
  std::size_t nnz() const { return static_cast<std::size_t>(cells.nonZeros()); }

  // Builds from (user, item, value) triplets; duplicate coordinates are summed.
  static InteractionMatrix from_triplets(std::size_t n_users, std::size_t n_items,
                                         std::span<const Eigen::Triplet<double, std::int64_t>> t,
                                         bool binarize);
};

InteractionMatrix build_interaction_matrix(const Dataset& ds, bool binarize);

struct ValidationUser {
  std::size_t source_row = 0;  // row in the matrix passed to split_holdout
  std::vector<std::int64_t> input_items;
  std::vector<std::int64_t> heldout_items;
};

struct TrainSplit {
  InteractionMatrix train;
  std::vector<std::size_t> train_source_rows;
  std::vector<ValidationUser> validation_users;
  std::size_t skipped_users = 0;  // validation users with an empty input or target
  std::uint64_t seed = 0;
};

// Strong-generalization split. A seeded fraction of users is moved out of the
// training matrix; for each of them holdout_fraction of the items (rounded
// down, at least one when the user has two or more) become targets.
TrainSplit split_holdout(const InteractionMatrix& m, double validation_fraction,
                         double holdout_fraction, std::uint64_t seed);

// Union of both event sets with exact duplicates collapsed. The user index
// order is a permutation drawn from `seed`; tracks keep first-appearance order.
Dataset top_up_merge(const Dataset& base, const Dataset& fresh, std::uint64_t seed);

}  // namespace lrs
