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

#include "lrs/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "lrs/text.hpp"

namespace lrs {

namespace {

std::size_t hash_combine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

struct RowHash {
  std::size_t operator()(const Dataset::Row& r) const noexcept {
    std::size_t h = std::hash<std::uint64_t>{}(
        (static_cast<std::uint64_t>(r.user) << 32) | r.track);
    return hash_combine(h, std::hash<std::int64_t>{}(r.timestamp));
  }
};

}  // namespace

TrackKey TrackKey::make(std::string_view artist, std::string_view title) {
  TrackKey k{text::canonical(artist), text::canonical(title)};
  if (k.artist.empty()) throw Error("invalid_track", "empty artist name");
  if (k.title.empty()) throw Error("invalid_track", "empty track title");
  return k;
}

std::size_t TrackKeyHash::operator()(const TrackKey& k) const noexcept {
  return hash_combine(std::hash<std::string>{}(k.artist), std::hash<std::string>{}(k.title));
}

// Incremental construction shared by ingest, filtering and merging.
struct DatasetBuilder {
  Dataset ds;
  std::unordered_set<Dataset::Row, RowHash> seen;
  std::size_t duplicates = 0;

  std::uint32_t user(const std::string& u) {
    auto [it, inserted] = ds.user_lookup_.try_emplace(u, static_cast<std::uint32_t>(ds.users_.size()));
    if (inserted) ds.users_.push_back(u);
    return it->second;
  }

  std::uint32_t track(const TrackKey& k) {
    auto [it, inserted] = ds.track_lookup_.try_emplace(k, static_cast<std::uint32_t>(ds.tracks_.size()));
    if (inserted) ds.tracks_.push_back(k);
    return it->second;
  }

  // Caller guarantees canonical fields.
  void add(const std::string& u, const TrackKey& k, std::int64_t ts) {
    const Dataset::Row row{user(u), track(k), ts};
    if (seen.insert(row).second) {
      ds.rows_.push_back(row);
    } else {
      ++duplicates;
    }
  }
};

Dataset Dataset::from_events(std::span<const ListeningEvent> events) {
  DatasetBuilder b;
  for (const auto& e : events) {
    if (e.timestamp < 0) throw Error("invalid_event", "negative timestamp");
    b.add(e.user_id, TrackKey::make(e.artist_name, e.track_title), e.timestamp);
  }
  return std::move(b.ds);
}

ListeningEvent Dataset::event(std::size_t i) const {
  const Row& r = rows_.at(i);
  const TrackKey& k = tracks_[r.track];
  return {users_[r.user], k.artist, k.title, r.timestamp};
}

std::vector<ListeningEvent> Dataset::events() const {
  std::vector<ListeningEvent> out;
  out.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) out.push_back(event(i));
  return out;
}

std::int64_t Dataset::user_index(const std::string& user) const {
  auto it = user_lookup_.find(user);
  return it == user_lookup_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::int64_t Dataset::track_index(const TrackKey& key) const {
  auto it = track_lookup_.find(key);
  return it == track_lookup_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::vector<std::size_t> Dataset::track_counts() const {
  std::vector<std::size_t> c(tracks_.size(), 0);
  for (const auto& r : rows_) ++c[r.track];
  return c;
}

std::vector<std::size_t> Dataset::user_counts() const {
  std::vector<std::size_t> c(users_.size(), 0);
  for (const auto& r : rows_) ++c[r.user];
  return c;
}

// ---------------------------------------------------------------------------
// Ingestion

IngestResult ingest_events(std::span<const std::string> lines) {
  DatasetBuilder b;
  IngestReport report;
  std::size_t line_no = 0;
  for (const auto& raw : lines) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    ++report.records;

    std::string_view fields[4];
    std::size_t n = 0;
    std::size_t start = 0;
    while (n < 4) {
      const auto tab = line.find('\t', start);
      if (tab == std::string_view::npos) {
        fields[n++] = line.substr(start);
        break;
      }
      fields[n++] = line.substr(start, tab - start);
      start = tab + 1;
      if (n == 4) {
        n = 5;  // trailing fields
        break;
      }
    }
    if (n != 4) {
      report.malformed.push_back({line_no, "expected 4 tab-separated fields"});
      continue;
    }
    if (fields[0].empty()) {
      report.malformed.push_back({line_no, "empty user_id"});
      continue;
    }
    std::int64_t ts = 0;
    const auto ts_field = fields[3];
    const auto [ptr, ec] = std::from_chars(ts_field.data(), ts_field.data() + ts_field.size(), ts);
    if (ec != std::errc{} || ptr != ts_field.data() + ts_field.size() || ts < 0) {
      report.malformed.push_back({line_no, "timestamp is not a nonnegative integer"});
      continue;
    }
    try {
      b.add(std::string(fields[0]), TrackKey::make(fields[1], fields[2]), ts);
    } catch (const Error& e) {
      report.malformed.push_back({line_no, e.what()});
    }
  }
  if (report.records > 0 && 2 * report.malformed.size() > report.records) {
    throw Error("too_many_malformed", std::to_string(report.malformed.size()) + " of " +
                                          std::to_string(report.records) +
                                          " records are malformed");
  }
  report.duplicates = b.duplicates;
  return {std::move(b.ds), std::move(report)};
}

IngestResult read_events(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return ingest_events(lines);
}

IngestResult read_events_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open events file: " + path);
  return read_events(in);
}

void write_events(std::ostream& out, const Dataset& ds) {
  for (const auto& r : ds.rows()) {
    const auto& k = ds.tracks()[r.track];
    out << ds.users()[r.user] << '\t' << k.artist << '\t' << k.title << '\t' << r.timestamp
        << '\n';
  }
}

void write_events_file(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write events file: " + path);
  write_events(out, ds);
  if (!out) throw Error("io", "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Filtering

double reduction_pct(std::size_t before, std::size_t after) {
  if (before == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(after) / static_cast<double>(before));
}

FilterResult filter_min_interactions(const Dataset& ds, std::int64_t min_le) {
  if (min_le < 0) throw Error("invalid_argument", "min_le must be >= 0");
  const auto counts = ds.track_counts();
  DatasetBuilder b;
  // Users keep their relative order because rows are visited in original order
  // and a user is registered on its first retained row.
  for (const auto& r : ds.rows()) {
    if (static_cast<std::int64_t>(counts[r.track]) > min_le) {
      b.add(ds.users()[r.user], ds.tracks()[r.track], r.timestamp);
    }
  }
  FilterReport rep;
  rep.min_le = min_le;
  rep.tracks_before = ds.n_tracks();
  rep.tracks_after = b.ds.n_tracks();
  rep.events_before = ds.n_events();
  rep.events_after = b.ds.n_events();
  rep.track_reduction_pct = reduction_pct(rep.tracks_before, rep.tracks_after);
  rep.event_reduction_pct = reduction_pct(rep.events_before, rep.events_after);
  return {std::move(b.ds), rep};
}

std::string format_filter_report(const FilterReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "min_le: " << r.min_le << '\n'
     << "tracks: " << r.tracks_before << " -> " << r.tracks_after << " ("
     << r.track_reduction_pct << "% reduction)\n"
     << "events: " << r.events_before << " -> " << r.events_after << " ("
     << r.event_reduction_pct << "% reduction)\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Interaction matrix

InteractionMatrix InteractionMatrix::from_triplets(
    std::size_t n_users, std::size_t n_items,
    std::span<const Eigen::Triplet<double, std::int64_t>> t, bool binarize) {
  InteractionMatrix m;
  m.binarized = binarize;
  m.cells.resize(static_cast<std::int64_t>(n_users), static_cast<std::int64_t>(n_items));
  m.cells.setFromTriplets(t.begin(), t.end());
  m.cells.makeCompressed();
  if (binarize) {
    for (std::int64_t u = 0; u < m.cells.outerSize(); ++u)
      for (SparseRows::InnerIterator it(m.cells, u); it; ++it) it.valueRef() = 1.0;
  }
  return m;
}

InteractionMatrix build_interaction_matrix(const Dataset& ds, bool binarize) {
  std::vector<Eigen::Triplet<double, std::int64_t>> t;
  t.reserve(ds.n_events());
  for (const auto& r : ds.rows()) t.emplace_back(r.user, r.track, 1.0);
  return InteractionMatrix::from_triplets(ds.n_users(), ds.n_tracks(), t, binarize);
}

// ---------------------------------------------------------------------------
// Holdout split

TrainSplit split_holdout(const InteractionMatrix& m, double validation_fraction,
                         double holdout_fraction, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction <= 1.0) ||
      !(holdout_fraction >= 0.0 && holdout_fraction <= 1.0)) {
    throw Error("invalid_argument", "split fractions must lie in [0, 1]");
  }
  if (!m.binarized) throw Error("invalid_argument", "split_holdout requires a binarized matrix");

  TrainSplit split;
  split.seed = seed;
  std::mt19937_64 rng(seed);

  const std::size_t n = m.n_users();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n) + 1e-9));

  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  // Validation users in shuffled order; holdout selection consumes the RNG in
  // that order so the split is a function of the seed alone.
  for (std::size_t i = 0; i < n_val; ++i) {
    const std::size_t u = order[i];
    std::vector<std::int64_t> items;
    for (SparseRows::InnerIterator it(m.cells, static_cast<std::int64_t>(u)); it; ++it)
      items.push_back(it.col());
    std::shuffle(items.begin(), items.end(), rng);
    auto n_hold = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(items.size()) + 1e-9));
    if (holdout_fraction > 0.0 && n_hold == 0 && items.size() >= 2) n_hold = 1;
    if (n_hold == 0 || n_hold >= items.size()) {
      ++split.skipped_users;
      continue;
    }
    ValidationUser vu;
    vu.source_row = u;
    vu.heldout_items.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_hold));
    vu.input_items.assign(items.begin() + static_cast<std::ptrdiff_t>(n_hold), items.end());
    std::sort(vu.heldout_items.begin(), vu.heldout_items.end());
    std::sort(vu.input_items.begin(), vu.input_items.end());
    split.validation_users.push_back(std::move(vu));
  }

  std::vector<Eigen::Triplet<double, std::int64_t>> t;
  std::int64_t row = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (is_val[u]) continue;
    for (SparseRows::InnerIterator it(m.cells, static_cast<std::int64_t>(u)); it; ++it)
      t.emplace_back(row, it.col(), it.value());
    split.train_source_rows.push_back(u);
    ++row;
  }
  split.train = InteractionMatrix::from_triplets(static_cast<std::size_t>(row), m.n_items(), t,
                                                 m.binarized);
  return split;
}

// ---------------------------------------------------------------------------
// Top-up

Dataset top_up_merge(const Dataset& base, const Dataset& fresh, std::uint64_t seed) {
  DatasetBuilder b;
  for (const Dataset* src : {&base, &fresh}) {
    for (const auto& r : src->rows()) b.add(src->users()[r.user], src->tracks()[r.track], r.timestamp);
  }

  // Re-index users through a seeded permutation.
  Dataset& ds = b.ds;
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> perm(ds.users_.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);  // perm[new] = old
  std::vector<std::uint32_t> old_to_new(perm.size());
  std::vector<std::string> users(perm.size());
  for (std::uint32_t j = 0; j < perm.size(); ++j) {
    old_to_new[perm[j]] = j;
    users[j] = std::move(ds.users_[perm[j]]);
  }
  ds.users_ = std::move(users);
  ds.user_lookup_.clear();
  for (std::uint32_t j = 0; j < ds.users_.size(); ++j) ds.user_lookup_.emplace(ds.users_[j], j);
  for (auto& r : ds.rows_) r.user = old_to_new[r.user];
  // Rows ordered by the new user order, stable within a user.
  std::stable_sort(ds.rows_.begin(), ds.rows_.end(),
                   [](const Dataset::Row& a, const Dataset::Row& b) { return a.user < b.user; });
  return std::move(ds);
}

}  // namespace lrs
