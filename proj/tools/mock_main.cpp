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

// Serves the scrobble and catalog fixtures for local runs of the study
// service.

#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "lrs/mock/mock_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Local scrobble and catalog fixtures", "lrs-mock"};
  std::string scrobble_world, catalog_world;
  int scrobble_port = 9001, catalog_port = 9002, latency_ms = 0;
  app.add_option("--scrobble", scrobble_world, "Scrobble world JSON")->check(CLI::ExistingFile);
  app.add_option("--catalog", catalog_world, "Catalog world JSON")->check(CLI::ExistingFile);
  app.add_option("--scrobble-port", scrobble_port, "Scrobble fixture port");
  app.add_option("--catalog-port", catalog_port, "Catalog fixture port");
  app.add_option("--page-latency-ms", latency_ms, "Delay per history page")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
    if (scrobble_world.empty() && catalog_world.empty()) throw CLI::ValidationError("give --scrobble and/or --catalog");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  sigset_t stop;
  sigemptyset(&stop);
  sigaddset(&stop, SIGINT);
  sigaddset(&stop, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop, nullptr);

  try {
    std::unique_ptr<lrs::mock::MockScrobbleServer> scrobble;
    std::unique_ptr<lrs::mock::MockCatalogServer> catalog;
    if (!scrobble_world.empty()) {
      scrobble = lrs::mock::MockScrobbleServer::from_file(
          scrobble_world, {std::chrono::milliseconds(latency_ms), 50});
      scrobble->start(scrobble_port);
      std::cout << "scrobble fixture on " << scrobble->base_url() << '\n';
    }
    if (!catalog_world.empty()) {
      catalog = lrs::mock::MockCatalogServer::from_file(catalog_world);
      catalog->start(catalog_port);
      std::cout << "catalog fixture on " << catalog->base_url() << '\n';
    }
    std::cout.flush();
    int sig = 0;
    sigwait(&stop, &sig);
  } catch (const std::exception& e) {
    std::cerr << "lrs-mock: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
