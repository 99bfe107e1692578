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

#include "lrs/study/service.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <shared_mutex>
#include <unordered_map>
#include <unordered_set>

#include <boost/asio/post.hpp>
#include <boost/asio/thread_pool.hpp>
#include <spdlog/spdlog.h>

#include "lrs/model.hpp"
#include "lrs/preview.hpp"
#include "lrs/ranking.hpp"
#include "lrs/scrobble_client.hpp"
#include "lrs/study/response_log.hpp"
#include "lrs/text.hpp"

namespace lrs::study {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::atomic<int> g_model_loads{0};

std::string random_session_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id(32, '0');
  for (int half = 0; half < 2; ++half) {
    auto v = rng();
    for (int i = 0; i < 16; ++i, v >>= 4) id[static_cast<std::size_t>(half * 16 + i)] = kHex[v & 0xF];
  }
  return id;
}

struct Slot {
  mutable std::mutex mu;
  StudySession session;
  bool job_attached = false;
  std::string phase;
  double progress = 0.0;
};

}  // namespace

struct StudyService::Impl {
  ServiceConfig cfg;
  QuestionSet questions;
  std::vector<std::shared_ptr<const ServingModel>> models;
  std::atomic<std::size_t> round_robin{0};
  std::unique_ptr<ResponseLog> log;
  ScrobbleClient scrobble;
  PreviewResolver previews;

  mutable std::shared_mutex sessions_mu;
  std::unordered_map<std::string, std::shared_ptr<Slot>> sessions;

  boost::asio::thread_pool io_pool;
  boost::asio::thread_pool cpu_pool;

  mutable std::mutex jobs_mu;
  mutable std::condition_variable jobs_cv;
  int running_jobs = 0;
  bool stopping = false;

  explicit Impl(ServiceConfig c)
      : cfg((c.validate(), std::move(c))),
        questions(QuestionSet::load(cfg.questions_path)),
        scrobble(cfg.scrobble),
        previews(cfg.catalog),
        io_pool(static_cast<std::size_t>(cfg.io_workers)),
        cpu_pool(static_cast<std::size_t>(cfg.cpu_workers)) {
    for (const auto& entry : cfg.models) {
      auto trained = read_model_file(entry.path);
      trained.name = entry.name;
      models.push_back(std::make_shared<const ServingModel>(std::move(trained)));
    }
    ++g_model_loads;
    restore();
    log = std::make_unique<ResponseLog>(cfg.response_log_path);
    interrupt_orphans();
  }

  void restore() {
    for (auto& [id, s] : replay_log_file(cfg.response_log_path)) {
      auto slot = std::make_shared<Slot>();
      slot->session = std::move(s);
      sessions.emplace(id, std::move(slot));
    }
  }

  // Pipelines do not survive a restart.
  void interrupt_orphans() {
    for (auto& [id, slot] : sessions) {
      const auto st = slot->session.state;
      if (st == SessionState::kCollecting || st == SessionState::kRecommending) {
        apply_locked(*slot, SessionEvent::failure(reason::kInternal, now_ms()));
      }
    }
  }

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::shared_lock lock(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(errc::kUnknownSession, "unknown session: " + id);
    return it->second;
  }

  // Caller holds slot.mu. Persists, then mutates.
  void apply_locked(Slot& slot, const SessionEvent& e) {
    auto next = transition(slot.session, e);
    log->append(event_record(slot.session.session_id, e));
    slot.session = std::move(next);
  }

  void apply(Slot& slot, const SessionEvent& e) {
    std::lock_guard lock(slot.mu);
    apply_locked(slot, e);
  }

  const ServingModel& model_for(const StudySession& s) const {
    for (const auto& m : models)
      if (m->name() == s.model_name) return *m;
    throw Error("internal", "session model not loaded: " + s.model_name);
  }

  std::string assign_model() {
    if (cfg.assignment != "round_robin") return cfg.assignment;
    return models[round_robin++ % models.size()]->name();
  }

  void set_progress(Slot& slot, const char* phase, double p) {
    std::lock_guard lock(slot.mu);
    if (slot.phase != phase) {
      slot.phase = phase;
      slot.progress = 0.0;
    }
    slot.progress = std::max(slot.progress, std::clamp(p, 0.0, 1.0));
  }

  void fail(Slot& slot, const std::string& why) {
    try {
      std::lock_guard lock(slot.mu);
      if (slot.session.state != SessionState::kCompleted && slot.session.state != SessionState::kFailed)
        apply_locked(slot, SessionEvent::failure(why, now_ms()));
    } catch (const std::exception& e) {
      spdlog::error("could not record failure for {}: {}", slot.session.session_id, e.what());
    }
  }

  void job_finished(Slot& slot) {
    {
      std::lock_guard lock(slot.mu);
      slot.job_attached = false;
    }
    std::lock_guard lock(jobs_mu);
    --running_jobs;
    jobs_cv.notify_all();
  }

  bool shutting_down() const {
    std::lock_guard lock(jobs_mu);
    return stopping;
  }

  // --- pipeline stages -----------------------------------------------------

  void collect(std::shared_ptr<Slot> slot, std::string username) {
    try {
      set_progress(*slot, "collecting", 0.0);
      const auto elig = scrobble.check_eligibility(username, cfg.eligibility_threshold);
      if (!elig.eligible) {
        fail(*slot, elig.reason == "private-account" ? reason::kPrivateAccount : reason::kIneligible);
        return job_finished(*slot);
      }
      auto history = scrobble.fetch_user_history(username, std::nullopt, [&](int done, int total) {
        set_progress(*slot, "collecting", static_cast<double>(done) / std::max(1, total));
      });
      if (shutting_down()) throw Error("internal", "shutting down");
      apply(*slot, SessionEvent::collection_done(now_ms()));
      set_progress(*slot, "recommending", 0.0);
      boost::asio::post(cpu_pool, [this, slot, h = std::move(history)]() mutable { recommend(slot, std::move(h)); });
    } catch (const Error& e) {
      spdlog::warn("collection failed for {}: {}", slot->session.session_id, e.what());
      const auto& code = e.code();
      fail(*slot, code == "user_not_found"    ? reason::kUserNotFound
                  : code == "private_account" ? reason::kPrivateAccount
                                              : reason::kInternal);
      job_finished(*slot);
    } catch (const std::exception& e) {
      spdlog::error("collection crashed: {}", e.what());
      fail(*slot, reason::kInternal);
      job_finished(*slot);
    }
  }

  void recommend(std::shared_ptr<Slot> slot, std::vector<ListeningEvent> history) {
    try {
      StudySession snap;
      {
        std::lock_guard lock(slot->mu);
        snap = slot->session;
      }
      const ServingModel& model = model_for(snap);
      std::map<std::int64_t, double> counts;
      for (const auto& e : history) {
        const auto idx = model.item_index(TrackKey{e.artist_name, e.track_title});
        if (idx >= 0) counts[idx] += 1.0;
      }
      ItemCounts input(counts.begin(), counts.end());
      std::unordered_set<std::int64_t> seen;
      for (const auto& [i, c] : input) seen.insert(i);
      const Eigen::VectorXd scores = score_user(model.model(), input);
      const auto ranked = recommend_top_n({scores.data(), static_cast<std::size_t>(scores.size())}, seen,
                                          cfg.effective_candidate_pool());
      std::vector<TrackKey> keys;
      keys.reserve(ranked.items.size());
      for (const auto& it : ranked.items) keys.push_back(model.track(it.item));
      if (shutting_down()) throw Error("internal", "shutting down");
      boost::asio::post(io_pool, [this, slot, k = std::move(keys), market = snap.market]() mutable {
        present(slot, std::move(k), market);
      });
    } catch (const std::exception& e) {
      spdlog::error("scoring failed for {}: {}", slot->session.session_id, e.what());
      fail(*slot, reason::kInternal);
      job_finished(*slot);
    }
  }

  void present(std::shared_ptr<Slot> slot, std::vector<TrackKey> keys, std::string market) {
    try {
      PresentationList list;
      list.requested_n = cfg.list_length;
      for (std::size_t i = 0; i < keys.size() && list.items.size() < cfg.list_length; ++i) {
        ++list.consumed;
        auto r = previews.resolve({keys[i].artist, keys[i].title, market});
        if (auto* hit = std::get_if<PreviewResult>(&r)) {
          list.items.push_back({i, keys[i], std::move(*hit)});
          set_progress(*slot, "recommending",
                       static_cast<double>(list.items.size()) / static_cast<double>(cfg.list_length));
        } else {
          ++list.discarded_count;
        }
      }
      if (list.items.empty()) throw Error("internal", "no recommendation could be presented");
      apply(*slot, SessionEvent::recommendation_done(std::move(list), now_ms()));
      {
        std::lock_guard lock(slot->mu);
        slot->phase.clear();
        slot->progress = 1.0;
      }
    } catch (const Error& e) {
      spdlog::warn("preview resolution failed for {}: {}", slot->session.session_id, e.what());
      fail(*slot, e.code() == "catalog_unavailable" ? reason::kCatalogUnavailable : reason::kInternal);
    } catch (const std::exception& e) {
      fail(*slot, reason::kInternal);
    }
    job_finished(*slot);
  }

  // --- responses -------------------------------------------------------------

  void maybe_complete(Slot& slot) {
    if (slot.session.responses_complete()) apply_locked(slot, SessionEvent::last_response(now_ms()));
  }
};

void write_export(std::ostream& out, std::vector<StudySession> snaps, std::optional<std::int64_t> from_ms,
                  std::optional<std::int64_t> to_ms) {
  std::sort(snaps.begin(), snaps.end(), [](const StudySession& a, const StudySession& b) {
    return std::tie(a.created_at, a.session_id) < std::tie(b.created_at, b.session_id);
  });
  const auto in_range = [&](std::int64_t t) { return (!from_ms || t >= *from_ms) && (!to_ms || t <= *to_ms); };
  for (const auto& s : snaps) {
    const auto base = [&](const char* kind) {
      return ordered_json{{"kind", kind},
                          {"session_id", s.session_id},
                          {"username", s.username.value_or("")},
                          {"session_state", to_string(s.state)},
                          {"model", s.model_name}};
    };
    for (const auto& [rank, r] : s.track_responses) {
      if (!in_range(r.answered_at)) continue;
      auto rec = base("track_response");
      rec["rank"] = rank;
      rec["artist"] = r.track.artist;
      rec["title"] = r.track.title;
      rec["answers"] = ordered_json::parse(r.answers.dump());
      rec["answered_at"] = r.answered_at;
      out << rec.dump() << '\n';
    }
    if (s.global_response && in_range(s.global_response->answered_at)) {
      auto rec = base("global_response");
      rec["answers"] = ordered_json::parse(s.global_response->answers.dump());
      rec["answered_at"] = s.global_response->answered_at;
      out << rec.dump() << '\n';
    }
  }
}

StudyService::StudyService(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

StudyService::~StudyService() {
  {
    std::lock_guard lock(impl_->jobs_mu);
    impl_->stopping = true;
  }
  wait_idle();
  impl_->io_pool.join();
  impl_->cpu_pool.join();
}

int StudyService::model_load_count() { return g_model_loads.load(); }

const QuestionSet& StudyService::questions() const { return impl_->questions; }
const ServiceConfig& StudyService::config() const { return impl_->cfg; }

std::string StudyService::create_session() {
  auto slot = std::make_shared<Slot>();
  auto& s = slot->session;
  s.session_id = random_session_id();
  s.created_at = s.updated_at = now_ms();
  s.model_name = impl_->assign_model();
  impl_->log->append(created_record(s));
  std::unique_lock lock(impl_->sessions_mu);
  impl_->sessions.emplace(s.session_id, slot);
  return s.session_id;
}

void StudyService::consent(const std::string& id) {
  auto slot = impl_->find(id);
  std::lock_guard lock(slot->mu);
  if (slot->session.state != SessionState::kCreated)
    throw Error(errc::kWrongState, "consent not expected in state " + to_string(slot->session.state));
  impl_->apply_locked(*slot, SessionEvent::consent(now_ms()));
}

void StudyService::submit_username(const std::string& id, const std::string& username, const std::string& market) {
  auto slot = impl_->find(id);
  const std::string name = text::trim(username);
  if (name.empty()) throw InvalidAnswer("username", "username is required");
  {
    std::lock_guard lock(slot->mu);
    if (slot->job_attached) throw Error(errc::kJobAlreadyRunning, "a pipeline is already running for " + id);
    if (slot->session.state != SessionState::kConsented)
      throw Error(errc::kWrongState, "username not expected in state " + to_string(slot->session.state));
    {
      std::lock_guard jobs(impl_->jobs_mu);
      if (impl_->stopping) throw Error("unavailable", "service is shutting down");
      ++impl_->running_jobs;
    }
    slot->job_attached = true;
    try {
      impl_->apply_locked(*slot, SessionEvent::username_accepted(
                                     name, market.empty() ? impl_->cfg.catalog.default_market : market, now_ms()));
    } catch (...) {
      slot->job_attached = false;
      std::lock_guard jobs(impl_->jobs_mu);
      --impl_->running_jobs;
      throw;
    }
    slot->phase = "collecting";
    slot->progress = 0.0;
  }
  boost::asio::post(impl_->io_pool, [impl = impl_.get(), slot, name] { impl->collect(slot, name); });
}

Status StudyService::get_status(const std::string& id) const {
  auto slot = impl_->find(id);
  std::lock_guard lock(slot->mu);
  Status st;
  st.state = slot->session.state;
  st.reason = slot->session.failure_reason;
  if (st.state == SessionState::kCollecting || st.state == SessionState::kRecommending) {
    st.phase = slot->phase;
    st.progress = slot->progress;
  } else if (st.state == SessionState::kRating || st.state == SessionState::kCompleted) {
    st.progress = 1.0;
  }
  return st;
}

StudySession StudyService::snapshot(const std::string& id) const {
  auto slot = impl_->find(id);
  std::lock_guard lock(slot->mu);
  return slot->session;
}

std::vector<std::string> StudyService::session_ids() const {
  std::shared_lock lock(impl_->sessions_mu);
  std::vector<std::string> ids;
  for (const auto& [id, s] : impl_->sessions) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

json StudyService::items_view(const std::string& id) const {
  const auto s = snapshot(id);
  if (s.state != SessionState::kRating && s.state != SessionState::kCompleted)
    throw Error(errc::kWrongState, "items are not available in state " + to_string(s.state));
  const json per_track = to_json(impl_->questions.per_track);
  json items = json::array();
  for (std::size_t i = 0; i < s.items->items.size(); ++i) {
    const auto& it = s.items->items[i];
    items.push_back({{"rank", i + 1},
                     {"artist", it.track.artist},
                     {"title", it.track.title},
                     {"preview_url", it.preview.preview_url},
                     {"artwork_url", it.preview.artwork_url},
                     {"preview_seconds", it.preview.preview_seconds},
                     {"embed_markup_ref", it.preview.embed_markup_ref},
                     {"answered", s.track_responses.contains(i + 1)},
                     {"questions", per_track}});
  }
  return {{"items", items},
          {"global_questions", to_json(impl_->questions.global)},
          {"global_answered", s.global_response.has_value()}};
}

StudySession StudyService::record_track_response(const std::string& id, std::size_t rank, const json& answers) {
  auto slot = impl_->find(id);
  std::lock_guard lock(slot->mu);
  auto& s = slot->session;
  if (s.state != SessionState::kRating)
    throw Error(errc::kWrongState, "responses are not accepted in state " + to_string(s.state));
  if (rank < 1 || rank > s.items->items.size())
    throw Error(errc::kUnknownRank, "rank " + std::to_string(rank) + " was not presented");
  if (s.track_responses.contains(rank))
    throw Error(errc::kDuplicateResponse, "rank " + std::to_string(rank) + " already answered");
  validate_answers(impl_->questions.per_track, answers);
  TrackResponse r{id, rank, s.items->items[rank - 1].track, answers, now_ms()};
  impl_->log->append(track_record(r));
  s.updated_at = r.answered_at;
  s.track_responses.emplace(rank, std::move(r));
  impl_->maybe_complete(*slot);
  return s;
}

StudySession StudyService::record_global_response(const std::string& id, const json& answers) {
  auto slot = impl_->find(id);
  std::lock_guard lock(slot->mu);
  auto& s = slot->session;
  if (s.state != SessionState::kRating)
    throw Error(errc::kWrongState, "responses are not accepted in state " + to_string(s.state));
  if (s.global_response) throw Error(errc::kDuplicateResponse, "global form already answered");
  validate_answers(impl_->questions.global, answers);
  GlobalResponse r{id, answers, now_ms()};
  impl_->log->append(global_record(r));
  s.updated_at = r.answered_at;
  s.global_response = std::move(r);
  impl_->maybe_complete(*slot);
  return s;
}

void StudyService::export_responses(std::ostream& out, const std::string& token, std::optional<std::int64_t> from_ms,
                                    std::optional<std::int64_t> to_ms) const {
  if (token.empty() || token != impl_->cfg.admin_token) throw Error(errc::kUnauthorized, "admin token required");
  std::vector<StudySession> snaps;
  {
    std::shared_lock lock(impl_->sessions_mu);
    for (const auto& [id, slot] : impl_->sessions) {
      std::lock_guard slock(slot->mu);
      snaps.push_back(slot->session);
    }
  }
  write_export(out, snaps, from_ms, to_ms);
}

void StudyService::wait_idle() const {
  std::unique_lock lock(impl_->jobs_mu);
  impl_->jobs_cv.wait(lock, [&] { return impl_->running_jobs == 0; });
}

}  // namespace lrs::study
