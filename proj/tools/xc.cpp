// Copyright 2026 The xcboard Authors.
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


// xc: serve, validate, bench and export.
//
// Exit codes: 0 ok, 1 validation or configuration error, 2 I/O error.

#include <signal.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "xc/bench.hpp"
#include "xc/event_log.hpp"
#include "xc/export.hpp"
#include "xc/http_client.hpp"
#include "xc/pattern_model.hpp"
#include "xc/server_host.hpp"
#include "xc/stimulus_engine.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kIo = 2;

int exit_code_for(xc::ErrorCode c) {
  switch (c) {
    case xc::ErrorCode::io:
    case xc::ErrorCode::storage: return kIo;
    default: return kInvalid;
  }
}

std::optional<fs::path> shared_default(const char* rel) {
#ifdef XC_SHARE_DIR
  fs::path p = fs::path(XC_SHARE_DIR) / rel;
  if (fs::exists(p)) return p;
#endif
  (void)rel;
  return std::nullopt;
}

std::string default_data_dir() {
  if (const char* env = std::getenv("XC_DATA_DIR"); env && *env) return env;
  return "xc-data";
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  xc::server::ServerConfig cfg;
  std::string catalog, decks, stop_list;
  std::uint64_t idle_ttl_s = 24 * 3600;
};

int run_serve(ServeArgs& a) {
  auto& cfg = a.cfg;
  cfg.idle_ttl = std::chrono::seconds(a.idle_ttl_s);
  auto pick = [](const std::string& flag, const char* rel) -> std::optional<fs::path> {
    if (flag == "none") return std::nullopt;
    if (!flag.empty()) return fs::path(flag);
    return shared_default(rel);
  };
  cfg.catalog = pick(a.catalog, "catalog/seed.catalog.json");
  cfg.decks_dir = pick(a.decks, "decks");
  cfg.stop_list = pick(a.stop_list, "data/stoplist.txt");

  // Block before any thread exists so only sigwait sees these.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  xc::server::Server server(cfg);
  for (const auto& e : server.startup_errors()) std::cerr << "xc: skipped session log " << e << "\n";
  server.start();
  std::cout << "listening on http://" << server.address() << std::endl;
  std::cerr << "xc: data dir " << cfg.data_dir.string() << ", " << server.restored_sessions()
            << " sessions restored, " << server.expired_sessions() << " expired" << std::endl;

  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "xc: " << (sig == SIGTERM ? "SIGTERM" : "SIGINT") << ", shutting down" << std::endl;
  server.stop();
  return kOk;
}

// ---------------------------------------------------------------------------
// validate

int validate_file(const fs::path& path) {
  const std::string text = xc::log::read_whole_file(path);
  const xc::json doc = xc::parse_json(text, xc::ErrorCode::parse);
  if (doc.is_object() && doc.contains("patterns")) {
    const auto graph = xc::load_catalog(text);
    const auto violations = xc::validate_graph(graph);
    for (const auto& v : violations) {
      std::string ids;
      for (const auto& id : v.ids) ids += (ids.empty() ? "" : " ") + id;
      std::cout << path.string() << ": " << v.rule << ": " << ids << "\n";
    }
    if (violations.empty())
      std::cout << path.string() << ": ok (" << graph.patterns().size() << " patterns, "
                << graph.relations().size() << " relations)\n";
    return violations.empty() ? kOk : kInvalid;
  }
  if (doc.is_object() && doc.contains("entries")) {
    const auto deck = xc::load_deck(text);
    const auto problems = xc::validate_deck(deck);
    for (const auto& p : problems) std::cout << path.string() << ": " << p << "\n";
    if (problems.empty())
      std::cout << path.string() << ": ok (deck " << deck.id << ", " << deck.entries.size() << " entries)\n";
    return problems.empty() ? kOk : kInvalid;
  }
  std::cout << path.string() << ": neither a catalog nor a deck\n";
  return kInvalid;
}

int run_validate(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  int rc = kOk;
  for (const auto& f : files) {
    int r;
    try {
      r = validate_file(f);
    } catch (const xc::Error& e) {
      std::cout << f.string() << ": " << e.what() << "\n";
      r = exit_code_for(e.code());
    }
    rc = std::max(rc, r);
  }
  return rc;
}

// ---------------------------------------------------------------------------
// bench

int run_bench(xc::bench::BenchOptions& opt, const std::string& server, const std::string& session) {
  opt.server = xc::client::parse_server_url(server);
  if (!session.empty()) opt.session = session;
  const auto report = xc::bench::run_bench(opt);
  std::cout << report.to_json().dump(2) << std::endl;
  if (report.aborted) std::cerr << "xc: bench aborted\n";
  if (report.lost_items) std::cerr << "xc: " << report.lost_items << " items were not acknowledged\n";
  if (report.order_violations) std::cerr << "xc: " << report.order_violations << " order violations\n";
  return report.ok() ? kOk : kInvalid;
}

// ---------------------------------------------------------------------------
// export

struct ExportArgs {
  std::string source, format = "canonical", server, data, out;
};

int run_export(const ExportArgs& a) {
  const auto format = xc::exporter::parse_format(a.format);
  xc::Snapshot snap;
  if (fs::is_regular_file(a.source)) {
    snap = xc::parse_snapshot(xc::log::read_whole_file(a.source));
  } else if (!a.server.empty()) {
    const auto ep = xc::client::parse_server_url(a.server);
    const auto res = xc::client::http_get(ep, "/v1/sessions/" + a.source + "/snapshot");
    if (res.status == 404) xc::fail(xc::ErrorCode::unknown_session, "no session " + a.source);
    if (res.status != 200) xc::fail(xc::ErrorCode::io, "HTTP " + std::to_string(res.status) + ": " + res.body);
    snap = xc::parse_snapshot(res.body);
  } else {
    if (!xc::is_valid_join_code(a.source))
      xc::fail(xc::ErrorCode::io, "'" + a.source + "' is neither a snapshot file nor a session code");
    const fs::path dir = a.data.empty() ? fs::path(default_data_dir()) : fs::path(a.data);
    const fs::path log = dir / "sessions" / (a.source + ".log");
    const auto session = xc::log::replay_file(log);
    // Replayed exports take the snapshot time from the last event so output is stable.
    const auto contents = xc::log::read_log(log);
    snap = xc::snapshot(session, contents.records.empty() ? session.created_at() : contents.records.back().at);
  }
  const std::string text = xc::exporter::render(snap, format);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) xc::fail(xc::ErrorCode::io, "cannot write " + a.out);
    f << text;
    if (!f.flush()) xc::fail(xc::ErrorCode::io, "cannot write " + a.out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xc: collaborative ideation board server and tools"};
  app.require_subcommand(1);

  ServeArgs serve;
  serve.cfg.data_dir = default_data_dir();
  std::string data_dir = serve.cfg.data_dir.string();
  auto* s = app.add_subcommand("serve", "Run the board server");
  s->add_option("--bind", serve.cfg.bind, "host:port to listen on (port 0 picks one)")->capture_default_str();
  s->add_option("--data", data_dir, "Data directory (env XC_DATA_DIR)")->capture_default_str();
  s->add_option("--rate-limit", serve.cfg.rate_limit, "Messages per second per participant")->capture_default_str();
  s->add_option("--burst", serve.cfg.burst, "Token bucket burst")->capture_default_str();
  s->add_option("--max-sessions", serve.cfg.max_sessions, "Concurrent session cap")->capture_default_str();
  s->add_option("--asset-cap", serve.cfg.asset_cap, "Largest accepted asset in bytes")->capture_default_str();
  s->add_option("--idle-ttl", serve.idle_ttl_s, "Seconds before an idle session is evicted")->capture_default_str();
  s->add_option("--threads", serve.cfg.threads, "I/O threads (0 = one per core)")->capture_default_str();
  s->add_flag("--test-mode", serve.cfg.test_mode, "Honour the X-Test-Seed header on session creation");
  s->add_option("--catalog", serve.catalog, "Pattern catalog file ('none' to disable)");
  s->add_option("--decks", serve.decks, "Directory of *.deck.json files ('none' to disable)");
  s->add_option("--stop-list", serve.stop_list, "Clustering stop list ('none' to disable)");

  std::vector<std::string> validate_inputs;
  auto* v = app.add_subcommand("validate", "Check catalog and deck files");
  v->add_option("files", validate_inputs, "Catalog or deck files, or directories of them")->required();

  xc::bench::BenchOptions bench;
  std::string bench_server = "http://127.0.0.1:8080", bench_session;
  std::uint64_t bench_timeout_s = 300;
  auto* b = app.add_subcommand(
      "bench",
      "Drive a server with headless participants. Measures only mechanical throughput and "
      "integrity (acks, loss, ordering); it says nothing about the quality of ideas or sessions.");
  b->add_option("--server", bench_server, "Server URL")->capture_default_str();
  b->add_option("--participants", bench.participants, "Concurrent participants")->capture_default_str();
  b->add_option("--items", bench.items, "Items per participant")->capture_default_str();
  b->add_option("--seed", bench.seed, "Seed for generated item text")->capture_default_str();
  b->add_option("--think-ms", bench.think_ms, "Pause after each ack (0 = pipelined)")->capture_default_str();
  b->add_option("--session", bench_session, "Use an existing session instead of creating one");
  b->add_option("--timeout", bench_timeout_s, "Give up after this many seconds")->capture_default_str();

  ExportArgs exp;
  exp.data = "";
  auto* e = app.add_subcommand("export", "Export a board as canonical JSON or markdown");
  e->add_option("source", exp.source, "Snapshot file or session code")->required();
  e->add_option("--format", exp.format, "canonical or markdown")
      ->check(CLI::IsMember({"canonical", "markdown"}))
      ->capture_default_str();
  e->add_option("--server", exp.server, "Fetch the session from this server");
  e->add_option("--data", exp.data, "Replay the session from this data directory (env XC_DATA_DIR)");
  e->add_option("-o,--out", exp.out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*s) {
      serve.cfg.data_dir = data_dir;
      return run_serve(serve);
    }
    if (*v) return run_validate(validate_inputs);
    if (*b) {
      bench.timeout = std::chrono::seconds(bench_timeout_s);
      return run_bench(bench, bench_server, bench_session);
    }
    if (*e) return run_export(exp);
  } catch (const xc::Error& err) {
    std::cerr << "xc: " << err.what() << "\n";
    return exit_code_for(err.code());
  } catch (const std::exception& err) {
    std::cerr << "xc: " << err.what() << "\n";
    return kIo;
  }
  return kOk;
}
