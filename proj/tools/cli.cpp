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

#include "cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "lrs/error.hpp"
#include "lrs/mf.hpp"
#include "lrs/multvae.hpp"
#include "lrs/ranking.hpp"
#include "lrs/scrobble_client.hpp"
#include "lrs/study/config.hpp"
#include "lrs/study/http_api.hpp"
#include "lrs/study/response_log.hpp"
#include "lrs/study/service.hpp"

namespace lrs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Variant Variant::from_json(const json& j) {
  Variant v;
  v.name = j.at("name").get<std::string>();
  if (v.name.empty() || v.name.find_first_of("/\\") != std::string::npos)
    throw Error("invalid_config", "variant name must be a non-empty file name");
  v.kind = parse_model_kind(j.at("kind").get<std::string>());
  if (j.contains("config")) v.config = j["config"].get<TrainingConfig>();
  v.config.validate();
  return v;
}

Variant Variant::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open variant file " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error("invalid_config", path + ": " + e.what());
  }
}

TrainedModel train_variant(const Variant& v, const InteractionMatrix& counts, const std::vector<TrackKey>& tracks,
                           std::ostream& log) {
  const auto progress = [&](int it, double loss) {
    log << (v.kind == ModelKind::kMf ? "iteration " : "epoch ") << it << " loss " << std::setprecision(10) << loss
        << '\n'
        << std::flush;
  };
  TrainedModel out;
  out.name = v.name;
  out.items = tracks;
  out.config = v.config;
  if (v.kind == ModelKind::kMf) {
    out.model = train_mf(counts, v.config, progress);
  } else {
    InteractionMatrix bin = counts;
    for (auto& x : bin.cells.coeffs()) x = 1.0;
    bin.binarized = true;
    out.model = train_multvae(bin, v.config, progress);
  }
  return out;
}

namespace {

// Runtime failure tagged with the stage that raised it.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path);
  return json::parse(in);
}

Dataset load_dataset(const std::string& path, std::ostream& err) {
  auto r = read_events_file(path);
  if (!r.report.malformed.empty())
    err << path << ": skipped " << r.report.malformed.size() << " malformed lines\n";
  return std::move(r.dataset);
}

struct SplitArgs {
  double validation_fraction = 0.0;
  double holdout_fraction = 0.2;
};

// Training matrix of counts: all users, or the training users of the
// seeded split.
InteractionMatrix training_matrix(const Dataset& ds, const SplitArgs& sa, std::uint64_t seed) {
  auto counts = build_interaction_matrix(ds, false);
  if (sa.validation_fraction <= 0.0) return counts;
  const auto split =
      split_holdout(build_interaction_matrix(ds, true), sa.validation_fraction, sa.holdout_fraction, seed);
  std::vector<Eigen::Triplet<double, std::int64_t>> t;
  for (std::size_t r = 0; r < split.train_source_rows.size(); ++r)
    for (SparseRows::InnerIterator it(counts.cells, static_cast<std::int64_t>(split.train_source_rows[r])); it; ++it)
      t.emplace_back(static_cast<std::int64_t>(r), it.col(), it.value());
  return InteractionMatrix::from_triplets(split.train_source_rows.size(), counts.n_items(), t, false);
}

int run_crawl(const std::string& config_path, const std::vector<std::string>& seeds, std::size_t target,
              std::size_t max_friends, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const auto cfg = stage("config", [&] {
    auto c = study::scrobble_config_from_json(read_json_file(config_path).at("scrobble"));
    c.validate();
    return c;
  });
  ScrobbleClient client(cfg);
  const auto crawl = stage("crawl", [&] {
    return client.crawl_social_graph({seeds, target, seed, max_friends});
  });
  std::vector<ListeningEvent> events;
  stage("history", [&] {
    for (const auto& u : crawl.usernames) {
      auto h = client.fetch_user_history(u);
      events.insert(events.end(), h.begin(), h.end());
    }
  });
  const auto ds = Dataset::from_events(events);
  stage("write", [&] { write_events_file(out_path, ds); });
  out << "users " << crawl.usernames.size() << " events " << ds.n_events() << " tracks " << ds.n_tracks()
      << (crawl.exhausted ? " (graph exhausted)" : "") << '\n';
  return 0;
}

int run_topup(const std::string& base, const std::string& fresh, std::uint64_t seed, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
  const auto a = stage("read base", [&] { return load_dataset(base, err); });
  const auto b = stage("read fresh", [&] { return load_dataset(fresh, err); });
  const auto merged = top_up_merge(a, b, seed);
  stage("write", [&] { write_events_file(out_path, merged); });
  out << "users " << merged.n_users() << " events " << merged.n_events() << " tracks " << merged.n_tracks() << '\n';
  return 0;
}

int run_filter(const std::string& in, std::int64_t min_le, const std::string& out_path, std::ostream& out,
               std::ostream& err) {
  const auto ds = stage("read", [&] { return load_dataset(in, err); });
  const auto r = filter_min_interactions(ds, min_le);
  if (!out_path.empty()) stage("write", [&] { write_events_file(out_path, r.dataset); });
  out << format_filter_report(r.report);
  return 0;
}

int run_train(const std::string& in, const std::vector<std::string>& variant_paths, const std::string& out_dir,
              const SplitArgs& sa, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  std::vector<Variant> variants;
  stage("variants", [&] {
    for (const auto& p : variant_paths) variants.push_back(Variant::load(p));
    for (std::size_t i = 0; i < variants.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (variants[i].name == variants[j].name) throw Error("invalid_config", "duplicate variant " + variants[i].name);
  });
  const auto ds = stage("read", [&] { return load_dataset(in, err); });
  const auto counts = stage("matrix", [&] { return training_matrix(ds, sa, seed); });
  fs::create_directories(out_dir);

  // One task per variant; they share only read-only inputs.
  std::vector<std::string> failures(variants.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    workers.emplace_back([&, i] {
      const auto& v = variants[i];
      try {
        std::ofstream log(fs::path(out_dir) / (v.name + ".log"));
        const auto model = train_variant(v, counts, ds.tracks(), log);
        write_model_file((fs::path(out_dir) / (v.name + ".lrs1")).string(), model);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    });
  }
  for (auto& w : workers) w.join();
  int rc = 0;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (failures[i].empty()) {
      out << variants[i].name << ": " << (fs::path(out_dir) / (variants[i].name + ".lrs1")).string() << '\n';
    } else {
      err << "train " << variants[i].name << ": " << failures[i] << '\n';
      rc = 1;
    }
  }
  return rc;
}

int run_evaluate(const std::string& in, const std::vector<std::string>& models, const SplitArgs& sa, std::size_t k,
                 std::uint64_t seed, bool popularity, std::ostream& out, std::ostream& err) {
  const auto ds = stage("read", [&] { return load_dataset(in, err); });
  const auto split = stage("split", [&] {
    if (sa.validation_fraction <= 0.0) throw Error("usage", "--validation-fraction must be positive");
    return split_holdout(build_interaction_matrix(ds, true), sa.validation_fraction, sa.holdout_fraction, seed);
  });
  for (const auto& path : models) {
    const auto model = stage("load " + path, [&] { return read_model_file(path); });
    if (model.items != ds.tracks())
      throw StageError("load " + path, "model catalog does not match the dataset tracks");
    const auto r = stage("evaluate " + model.name, [&] { return evaluate(make_scorer(model), split, k); });
    out << model.name << ' ' << format_eval_report(r) << '\n';
  }
  if (popularity) {
    const Eigen::VectorXd pop = popularity_scores(split.train);
    const auto r = evaluate([&](const ItemCounts&) { return pop; }, split, k);
    out << "popularity " << format_eval_report(r) << '\n';
  }
  return 0;
}

study::ServiceConfig service_config(const std::string& path) {
  auto cfg = study::load_service_config(path);
  study::apply_env_overrides(cfg, study::process_env());
  cfg.validate();
  return cfg;
}

int run_serve(const std::string& config_path, std::ostream& out) {
  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t stop;
  sigemptyset(&stop);
  sigaddset(&stop, SIGINT);
  sigaddset(&stop, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop, nullptr);
  const auto cfg = stage("config", [&] { return service_config(config_path); });
  auto service = stage("start", [&] { return std::make_unique<study::StudyService>(cfg); });
  study::HttpServer server(*service);
  const int port = stage("bind", [&] { return server.start(cfg.bind, cfg.port); });
  out << "listening on " << cfg.bind << ':' << port << '\n' << std::flush;
  int sig = 0;
  sigwait(&stop, &sig);
  server.stop();
  return 0;
}

int run_export(const std::string& config_path, const std::string& from, const std::string& to,
               const std::string& out_path, std::ostream& out) {
  const auto cfg = stage("config", [&] { return service_config(config_path); });
  std::optional<std::int64_t> lo, hi;
  if (!from.empty()) lo = study::parse_time_bound(from);
  if (!to.empty()) hi = study::parse_time_bound(to);
  const auto sessions = stage("replay", [&] { return study::replay_log_file(cfg.response_log_path); });
  std::vector<study::StudySession> all;
  for (const auto& [id, s] : sessions) all.push_back(s);
  if (out_path.empty()) {
    study::write_export(out, all, lo, hi);
  } else {
    std::ofstream f(out_path);
    if (!f) throw StageError("write", "cannot open " + out_path);
    study::write_export(f, all, lo, hi);
  }
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Offline pipeline and study server for live recommendation studies", "lrs"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path, in, out_path, out_dir, from, to;
  std::vector<std::string> seeds, variants, models;
  std::size_t target = 100, max_friends = 100, k = 10;
  std::int64_t min_le = 10;
  SplitArgs sa;
  bool popularity = false;
  std::string fresh;

  auto* crawl = app.add_subcommand("crawl", "Crawl the friends graph and download listening histories");
  crawl->add_option("--config", config_path, "Service config (scrobble section)")->required()->check(CLI::ExistingFile);
  crawl->add_option("--seed-user", seeds, "Seed username (repeatable)")->required();
  crawl->add_option("--target", target, "Number of users to collect")->check(CLI::PositiveNumber);
  crawl->add_option("--max-friends", max_friends, "Friends read per user")->check(CLI::PositiveNumber);
  crawl->add_option("--seed", seed, "Random seed");
  crawl->add_option("--out", out_path, "Output events TSV")->required();

  auto* topup = app.add_subcommand("topup", "Merge freshly crawled events into a base dataset");
  topup->add_option("--base", in, "Base events TSV")->required()->check(CLI::ExistingFile);
  topup->add_option("--fresh", fresh, "Fresh events TSV")->required()->check(CLI::ExistingFile);
  topup->add_option("--seed", seed, "Random seed for the user order");
  topup->add_option("--out", out_path, "Output events TSV")->required();

  auto* filter = app.add_subcommand("filter", "Drop tracks with too few listening events");
  filter->add_option("--in", in, "Input events TSV")->required()->check(CLI::ExistingFile);
  filter->add_option("--min-le", min_le, "Tracks with this many events or fewer are removed")->required();
  filter->add_option("--out", out_path, "Output events TSV");

  const auto add_split = [&](CLI::App* c) {
    c->add_option("--validation-fraction", sa.validation_fraction, "Fraction of users held out")
        ->check(CLI::Range(0.0, 1.0));
    c->add_option("--holdout-fraction", sa.holdout_fraction, "Fraction of each held-out user's items used as targets")
        ->check(CLI::Range(0.0, 1.0));
    c->add_option("--seed", seed, "Split seed");
  };

  auto* train = app.add_subcommand("train", "Train model variants concurrently");
  train->add_option("--in", in, "Training events TSV")->required()->check(CLI::ExistingFile);
  train->add_option("--variant", variants, "Variant JSON (repeatable)")->required()->check(CLI::ExistingFile);
  train->add_option("--out-dir", out_dir, "Directory for model files and logs")->required();
  add_split(train);

  auto* eval = app.add_subcommand("evaluate", "Recall and NDCG on a strong-generalization split");
  eval->add_option("--in", in, "Events TSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--model", models, "Model file (repeatable)")->check(CLI::ExistingFile);
  eval->add_option("-k,--k", k, "Cut-off")->check(CLI::PositiveNumber);
  eval->add_flag("--popularity", popularity, "Also report the popularity baseline");
  add_split(eval);

  auto* serve = app.add_subcommand("serve", "Run the study service");
  serve->add_option("--config", config_path, "Service config")->required()->check(CLI::ExistingFile);

  auto* exp = app.add_subcommand("export", "Write study responses as NDJSON");
  exp->add_option("--config", config_path, "Service config")->required()->check(CLI::ExistingFile);
  exp->add_option("--from", from, "Lower bound (unix seconds or YYYY-MM-DD)");
  exp->add_option("--to", to, "Upper bound (unix seconds or YYYY-MM-DD)");
  exp->add_option("--out", out_path, "Output file (default stdout)");

  try {
    if (!args.empty() && args[0].rfind('-', 0) != 0 && app.get_subcommand_no_throw(args[0]) == nullptr)
      throw CLI::ExtrasError({args[0]});
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
    if (*eval && models.empty() && !popularity) throw CLI::ValidationError("evaluate", "give --model or --popularity");
    if (*eval && eval->count("--validation-fraction") == 0)
      throw CLI::RequiredError("--validation-fraction");
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (*crawl) return run_crawl(config_path, seeds, target, max_friends, seed, out_path, out);
    if (*topup) return run_topup(in, fresh, seed, out_path, out, err);
    if (*filter) return run_filter(in, min_le, out_path, out, err);
    if (*train) return run_train(in, variants, out_dir, sa, seed, out, err);
    if (*eval) return run_evaluate(in, models, sa, k, seed, popularity, out, err);
    if (*serve) return run_serve(config_path, out);
    if (*exp) return run_export(config_path, from, to, out_path, out);
  } catch (const std::exception& e) {
    err << "lrs " << app.get_subcommands().front()->get_name() << ": " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace lrs::cli
