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


#include "xc/server_host.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"
#include "xc/http_client.hpp"
#include "xc/stream_client.hpp"

namespace xc::server {
namespace {

namespace fs = std::filesystem;
using client::Endpoint;
using client::http_get;
using client::http_post;
using client::StreamClient;

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const auto d = fs::temp_directory_path() / ("xc-srv-" + std::to_string(::getpid()) + "-" + tag + "-" +
                                              std::to_string(counter++));
  fs::remove_all(d);
  return d;
}

ServerConfig test_config(const fs::path& data) {
  ServerConfig c;
  c.bind = "127.0.0.1:0";
  c.data_dir = data;
  c.threads = 2;
  c.test_mode = true;
  c.catalog = xc::testing::source_path("catalog/seed.catalog.json");
  c.decks_dir = xc::testing::source_path("decks");
  c.stop_list = xc::testing::source_path("data/stoplist.txt");
  return c;
}

struct Running {
  explicit Running(ServerConfig c) : server(std::move(c)) {
    server.start();
    ep = {"127.0.0.1", server.port()};
  }
  Server server;
  Endpoint ep;
};

std::string create(const Endpoint& ep, std::optional<std::uint64_t> seed = std::nullopt) {
  std::map<std::string, std::string> h;
  if (seed) h[kTestSeedHeader] = std::to_string(*seed);
  const auto r = http_post(ep, "/v1/sessions", "", h);
  EXPECT_EQ(r.status, 201) << r.body;
  return json::parse(r.body).at("code").get<std::string>();
}

wire::Welcome hello(StreamClient& c, const std::string& code, const std::string& name,
                    Role role = Role::contributor) {
  c.send(wire::Hello{code, name, role, std::nullopt});
  return c.expect<wire::Welcome>();
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = fresh_dir("t"); }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(ServerTest, StartsEmptyAndCreatesSessions) {
  Running r(test_config(dir_));
  EXPECT_EQ(r.server.restored_sessions(), 0u);
  EXPECT_TRUE(r.server.startup_errors().empty());
  const std::string code = create(r.ep);
  EXPECT_TRUE(is_valid_join_code(code));
  const auto info = http_get(r.ep, "/v1/sessions/" + code);
  EXPECT_EQ(info.status, 200);
  const auto j = json::parse(info.body);
  EXPECT_EQ(j.at("code"), code);
  EXPECT_EQ(j.at("phase"), "collect");
  EXPECT_EQ(j.at("items"), 0);
  EXPECT_EQ(http_get(r.ep, "/v1/sessions/AAAAAA").status, 404);
  EXPECT_EQ(json::parse(http_get(r.ep, "/v1/sessions/AAAAAA").body).at("err"), "unknown_session");
}

TEST_F(ServerTest, TestSeedGivesIdenticalCodesOnFreshServers) {
  const auto other = fresh_dir("seed");
  std::string a, b;
  {
    Running r1(test_config(dir_));
    a = create(r1.ep, 2026);
    const auto again = http_post(r1.ep, "/v1/sessions", "", {{kTestSeedHeader, "2026"}});
    EXPECT_EQ(again.status, 409);
    EXPECT_EQ(json::parse(again.body).at("err"), "conflict");
    EXPECT_EQ(http_post(r1.ep, "/v1/sessions", "", {{kTestSeedHeader, "x1"}}).status, 400);
  }
  {
    Running r2(test_config(other));
    b = create(r2.ep, 2026);
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, generate_join_code(Seed{2026}));
  fs::remove_all(other);
}

TEST_F(ServerTest, TestSeedIgnoredOutsideTestMode) {
  auto cfg = test_config(dir_);
  cfg.test_mode = false;
  Running r(cfg);
  const auto a = create(r.ep, 2026);
  const auto b = create(r.ep, 2026);
  EXPECT_NE(a, b);
}

TEST_F(ServerTest, CapacityLimit) {
  auto cfg = test_config(dir_);
  cfg.max_sessions = 2;
  Running r(cfg);
  create(r.ep);
  create(r.ep);
  const auto third = http_post(r.ep, "/v1/sessions");
  EXPECT_EQ(third.status, 429);
  EXPECT_EQ(json::parse(third.body).at("err"), "capacity");
}

TEST_F(ServerTest, OccupiedPortIsABindError) {
  Running r(test_config(dir_));
  auto cfg = test_config(fresh_dir("bind"));
  cfg.bind = "127.0.0.1:" + std::to_string(r.server.port());
  try {
    Server second(cfg);
    FAIL() << "bound twice";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
  fs::remove_all(cfg.data_dir);
}

TEST_F(ServerTest, ConfigLimitsMustBePositive) {
  auto cfg = test_config(dir_);
  cfg.rate_limit = 0;
  EXPECT_THROW(Server s(cfg), Error);
  cfg = test_config(dir_);
  cfg.max_sessions = 0;
  EXPECT_THROW(Server s(cfg), Error);
}

TEST_F(ServerTest, ContributionReachesEveryConnectedClient) {
  Running r(test_config(dir_));
  const auto code = create(r.ep);
  StreamClient a(r.ep, code), b(r.ep, code);
  const auto wa = hello(a, code, "Ada");
  hello(b, code, "Bo");
  a.send(wire::Contribute{code, wa.pid, "m1", ItemKind::text, "solar kiosk"});
  const auto ack = a.expect<wire::Ack>();
  EXPECT_EQ(ack.seq, 1u);
  EXPECT_EQ(a.expect<wire::ItemBroadcast>().item.seq, 1u);
  const auto seen = b.expect<wire::ItemBroadcast>();
  EXPECT_EQ(seen.item.seq, 1u);
  EXPECT_EQ(seen.item.body, "solar kiosk");
  EXPECT_EQ(seen.item.pid, wa.pid);
}

TEST_F(ServerTest, ReconnectWithResumeGetsTheMissedItems) {
  Running r(test_config(dir_));
  const auto code = create(r.ep);
  StreamClient a(r.ep, code);
  const auto pa = hello(a, code, "Ada").pid;
  std::string pb;
  {
    StreamClient b(r.ep, code);
    pb = hello(b, code, "Bo").pid;
    a.send(wire::Contribute{code, pa, "m1", ItemKind::text, "one"});
    EXPECT_EQ(a.expect<wire::Ack>().seq, 1u);
    EXPECT_EQ(b.expect<wire::ItemBroadcast>().item.seq, 1u);
    b.abort();
  }
  a.send(wire::Contribute{code, pa, "m2", ItemKind::text, "two"});
  a.send(wire::Contribute{code, pa, "m3", ItemKind::text, "three"});
  EXPECT_EQ(a.expect<wire::Ack>().seq, 2u);
  EXPECT_EQ(a.expect<wire::Ack>().seq, 3u);
  StreamClient b2(r.ep, code);
  b2.send(wire::Hello{code, "Bo", Role::contributor, pb});
  EXPECT_EQ(b2.expect<wire::Welcome>().seq, 3u);
  b2.send(wire::Resume{code, pb, 1});
  const auto batch = b2.expect<wire::ResumeBatch>();
  ASSERT_EQ(batch.items.size(), 2u);
  EXPECT_EQ(batch.items[0].body, "two");
  EXPECT_EQ(batch.items[1].body, "three");
}

TEST_F(ServerTest, UnknownSessionGetsErrorThenClose) {
  Running r(test_config(dir_));
  StreamClient c(r.ep, "AAAAAA");
  c.send(wire::Hello{"AAAAAA", "Ada", Role::contributor, std::nullopt});
  const auto e = c.expect<wire::ErrorReply>();
  EXPECT_EQ(e.err, ErrorCode::unknown_session);
  EXPECT_FALSE(c.recv(std::chrono::seconds(5)).has_value());
  EXPECT_TRUE(c.closed());
}

TEST_F(ServerTest, ThreeMalformedFramesCloseTheConnection) {
  Running r(test_config(dir_));
  const auto code = create(r.ep);
  StreamClient c(r.ep, code);
  const auto pid = hello(c, code, "Ada").pid;
  c.send_raw("{nope");
  EXPECT_EQ(c.expect<wire::ErrorReply>().err, ErrorCode::malformed);
  c.send_raw(R"({"type":"shout","v":1})");
  EXPECT_EQ(c.expect<wire::ErrorReply>().err, ErrorCode::unknown_type);
  // Still usable between strikes.
  c.send(wire::Contribute{code, pid, "m1", ItemKind::text, "still here"});
  EXPECT_EQ(c.expect<wire::Ack>().seq, 1u);
  c.send_raw(R"({"code":"K","pid":"p1","seq":0,"type":"resume","v":9})");
  EXPECT_EQ(c.expect<wire::ErrorReply>().err, ErrorCode::version_mismatch);
  while (c.recv(std::chrono::seconds(5))) {
  }
  EXPECT_TRUE(c.closed());
}

TEST_F(ServerTest, RateLimitedContributeIsRejectedWithRetryHint) {
  auto cfg = test_config(dir_);
  cfg.rate_limit = 1;
  cfg.burst = 2;
  Running r(cfg);
  const auto code = create(r.ep);
  StreamClient c(r.ep, code);
  const auto pid = hello(c, code, "Ada").pid;
  for (int i = 1; i <= 3; ++i) c.send(wire::Contribute{code, pid, "m" + std::to_string(i), ItemKind::text, "x"});
  EXPECT_EQ(c.expect<wire::Ack>().seq, 1u);
  EXPECT_EQ(c.expect<wire::Ack>().seq, 2u);
  const auto e = c.expect<wire::ErrorReply>();
  EXPECT_EQ(e.err, ErrorCode::rate_limited);
  EXPECT_EQ(e.cmid, "m3");
  ASSERT_TRUE(e.retry_ms.has_value());
  EXPECT_GT(*e.retry_ms, 0u);
  std::this_thread::sleep_for(std::chrono::milliseconds(*e.retry_ms + 20));
  c.send(wire::Contribute{code, pid, "m3", ItemKind::text, "x"});
  EXPECT_EQ(c.expect<wire::Ack>().seq, 3u);
}

TEST_F(ServerTest, BurstBeyondInFlightLimitIsFullyAcked) {
  auto cfg = test_config(dir_);
  cfg.burst = 1000;
  Running r(cfg);
  const auto code = create(r.ep);
  StreamClient c(r.ep, code);
  const auto pid = hello(c, code, "Ada").pid;
  const int n = 300;
  for (int i = 1; i <= n; ++i) c.send(wire::Contribute{code, pid, "m" + std::to_string(i), ItemKind::text, "idea"});
  for (int i = 1; i <= n; ++i) {
    const auto ack = c.expect<wire::Ack>();
    ASSERT_EQ(ack.cmid, "m" + std::to_string(i));
    ASSERT_EQ(ack.seq, static_cast<std::uint64_t>(i));
  }
}

TEST_F(ServerTest, ParallelClientsSeeIdenticalOrder) {
  auto cfg = test_config(dir_);
  Running r(cfg);
  const auto code = create(r.ep);
  const int clients = 10, each = 10;
  std::vector<std::unique_ptr<StreamClient>> cs;
  std::vector<std::string> pids;
  for (int i = 0; i < clients; ++i) {
    cs.push_back(std::make_unique<StreamClient>(r.ep, code));
    pids.push_back(hello(*cs.back(), code, "P" + std::to_string(i)).pid);
  }
  for (int k = 0; k < each; ++k)
    for (int i = 0; i < clients; ++i)
      cs[i]->send(wire::Contribute{code, pids[i], "m" + std::to_string(k), ItemKind::text, "idea"});
  std::vector<std::vector<std::uint64_t>> transcripts(clients);
  std::vector<std::vector<std::string>> owners(clients);
  for (int i = 0; i < clients; ++i)
    while (transcripts[i].size() < static_cast<std::size_t>(clients * each)) {
      const auto b = cs[i]->expect<wire::ItemBroadcast>();
      transcripts[i].push_back(b.item.seq);
      owners[i].push_back(b.item.pid + "/" + b.item.cmid);
    }
  for (int i = 0; i < clients; ++i) {
    for (std::size_t k = 0; k < transcripts[i].size(); ++k) ASSERT_EQ(transcripts[i][k], k + 1);
    EXPECT_EQ(owners[i], owners[0]);
  }
}

TEST_F(ServerTest, AssetsAreContentAddressed) {
  auto cfg = test_config(dir_);
  cfg.asset_cap = 4096;
  Running r(cfg);
  const auto code = create(r.ep);
  std::string bytes(1024, '\0');
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(i * 7);
  const auto a = http_post(r.ep, "/v1/sessions/" + code + "/assets", bytes);
  const auto b = http_post(r.ep, "/v1/sessions/" + code + "/assets", bytes);
  ASSERT_EQ(a.status, 201);
  const std::string ref = json::parse(a.body).at("ref");
  EXPECT_EQ(ref, json::parse(b.body).at("ref").get<std::string>());
  EXPECT_TRUE(is_asset_ref(ref));
  EXPECT_EQ(ref, "sha256:" + sha256_hex(bytes));
  const auto got = http_get(r.ep, "/v1/assets/" + ref);
  EXPECT_EQ(got.status, 200);
  EXPECT_EQ(got.body, bytes);
  EXPECT_EQ(http_post(r.ep, "/v1/sessions/" + code + "/assets", std::string(5000, 'x')).status, 413);
  EXPECT_EQ(http_post(r.ep, "/v1/sessions/AAAAAA/assets", bytes).status, 404);
  EXPECT_EQ(http_get(r.ep, "/v1/assets/sha256:" + std::string(64, '0')).status, 404);
}

TEST_F(ServerTest, KnownSha256) {
  EXPECT_EQ(sha256_hex("test"), "9f86d081884c7d659a2feaa0c55ad015a3bf4f1b2b0b822cd15d6c15b0f00a08");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_F(ServerTest, SnapshotAndClustersEndpoints) {
  Running r(test_config(dir_));
  const auto code = create(r.ep);
  EXPECT_EQ(json::parse(http_get(r.ep, "/v1/sessions/" + code + "/clusters").body).at("clusters").size(), 0u);
  StreamClient c(r.ep, code);
  const auto pid = hello(c, code, "Ada").pid;
  for (int i = 1; i <= 3; ++i) c.send(wire::Contribute{code, pid, "m" + std::to_string(i), ItemKind::text, "Solar kiosks"});
  c.send(wire::Contribute{code, pid, "m4", ItemKind::text, "Night markets downtown"});
  for (int i = 0; i < 4; ++i) c.expect<wire::Ack>();

  const auto snap_res = http_get(r.ep, "/v1/sessions/" + code + "/snapshot");
  ASSERT_EQ(snap_res.status, 200);
  const Snapshot snap = parse_snapshot(snap_res.body);
  EXPECT_EQ(snap.items.size(), 4u);
  EXPECT_EQ(serialize_snapshot(snap), snap_res.body);

  const auto cl = json::parse(http_get(r.ep, "/v1/sessions/" + code + "/clusters?threshold=0.5").body);
  ASSERT_EQ(cl.at("clusters").size(), 2u);
  EXPECT_EQ(cl.at("clusters")[0].at("member_seqs"), json::array({1, 2, 3}));
  EXPECT_EQ(cl.at("clusters")[0].at("cluster_id"), "c1");
  EXPECT_EQ(http_get(r.ep, "/v1/sessions/" + code + "/clusters?threshold=0").status, 400);
  EXPECT_EQ(http_get(r.ep, "/v1/sessions/" + code + "/clusters?threshold=abc").status, 400);

  const auto log = log::read_log(dir_ / "sessions" / (code + ".log"));
  EXPECT_EQ(log.records.back().event, log::EventKind::snapshot_taken);
}

TEST_F(ServerTest, CatalogDecksAndPatternSteps) {
  Running r(test_config(dir_));
  const auto cat = http_get(r.ep, "/v1/catalog");
  ASSERT_EQ(cat.status, 200);
  EXPECT_NO_THROW(load_catalog(cat.body));
  const auto decks = json::parse(http_get(r.ep, "/v1/decks").body).at("decks");
  EXPECT_EQ(decks.size(), 3u);
  const auto card = json::parse(http_get(r.ep, "/v1/patterns/change-of-perspective/steps/0").body);
  EXPECT_EQ(card.at("step_index"), 0);
  EXPECT_FALSE(card.contains("reasoning"));
  const auto full = json::parse(http_get(r.ep, "/v1/patterns/change-of-perspective/steps/1?detail=full").body);
  EXPECT_EQ(full.at("step_index"), 1);
  EXPECT_TRUE(full.contains("reasoning"));
  EXPECT_EQ(http_get(r.ep, "/v1/patterns/change-of-perspective/steps/99").status, 400);
  EXPECT_EQ(http_get(r.ep, "/v1/patterns/no-such/steps/0").status, 404);
  EXPECT_EQ(http_get(r.ep, "/v1/nothing").status, 404);
}

TEST_F(ServerTest, DrawStimulusOverTheStream) {
  Running r(test_config(dir_));
  const auto code = create(r.ep);
  StreamClient c(r.ep, code);
  const auto pid = hello(c, code, "Ada", Role::facilitator).pid;
  c.send(wire::DrawStimulus{code, pid, "personas", 1, 5, std::nullopt});
  const auto cards = c.expect<wire::StimulusCards>();
  ASSERT_EQ(cards.cards.size(), 1u);
  EXPECT_EQ(cards.prompt, "What would " + cards.cards[0].entry + " do?");
}

TEST_F(ServerTest, RestartRestoresStateEqualToReplayOracle) {
  std::string code;
  Snapshot before;
  {
    Running r(test_config(dir_));
    code = create(r.ep);
    StreamClient c(r.ep, code);
    const auto pa = hello(c, code, "Ada", Role::facilitator).pid;
    for (int i = 1; i <= 6; ++i) c.send(wire::Contribute{code, pa, "m" + std::to_string(i), ItemKind::text, "idea " + std::to_string(i)});
    for (int i = 0; i < 6; ++i) c.expect<wire::Ack>();
    OpPayload tag;
    tag.tag = "green";
    c.send(wire::BoardOpRequest{code, pa, "o1", OpKind::tag, 2, tag});
    c.expect<wire::OpBroadcast>();
    OpPayload ph;
    ph.phase = Phase::organize;
    c.send(wire::BoardOpRequest{code, pa, "o2", OpKind::set_phase, 0, ph});
    c.expect<wire::OpBroadcast>();
  }
  const auto path = dir_ / "sessions" / (code + ".log");
  const auto records = log::read_log(path).records;
  EXPECT_EQ(records.size(), 10u);
  EXPECT_EQ(records.back().event, log::EventKind::phase_changed);
  const Session oracle = log::replay(records);
  Running r(test_config(dir_));
  EXPECT_EQ(r.server.restored_sessions(), 1u);
  EXPECT_EQ(r.server.find(code)->copy_session(), oracle);
  EXPECT_EQ(oracle.phase(), Phase::organize);
  EXPECT_EQ(oracle.items()[1].tags, std::set<std::string>{"green"});
}

TEST_F(ServerTest, CorruptLogIsReportedAndOthersStillServed) {
  std::string good;
  {
    Running r(test_config(dir_));
    good = create(r.ep, 1);
    create(r.ep, 2);
  }
  const auto bad = generate_join_code(Seed{2});
  {
    std::ofstream out(dir_ / "sessions" / (bad + ".log"), std::ios::app);
    out << "{garbage}\n";
  }
  Running r(test_config(dir_));
  EXPECT_EQ(r.server.restored_sessions(), 1u);
  ASSERT_EQ(r.server.startup_errors().size(), 1u);
  EXPECT_NE(r.server.startup_errors()[0].find(bad), std::string::npos);
  EXPECT_EQ(http_get(r.ep, "/v1/sessions/" + good).status, 200);
  EXPECT_EQ(http_get(r.ep, "/v1/sessions/" + bad).status, 404);
}

TEST_F(ServerTest, ExpiredSessionsAreNotRestored) {
  fs::create_directories(dir_ / "sessions");
  {
    log::LogWriter w;
    w.open(dir_ / "sessions" / "AAAAAA.log", 1);
    std::vector<log::EventRecord> recs{{"AAAAAA", 0, 1000, log::EventKind::session_created, {{"created_at", 1000}}}};
    w.append(recs);
  }
  Running r(test_config(dir_));
  EXPECT_EQ(r.server.restored_sessions(), 0u);
  EXPECT_EQ(r.server.expired_sessions(), 1u);
  EXPECT_EQ(http_get(r.ep, "/v1/sessions/AAAAAA").status, 404);
}

TEST_F(ServerTest, StorageFailureMakesSessionReadOnly) {
  auto cfg = test_config(dir_);
  std::atomic<bool> failing{false};
  cfg.storage_fault = [&] { return failing.load(); };
  Running r(cfg);
  const auto code = create(r.ep);
  StreamClient c(r.ep, code);
  const auto pid = hello(c, code, "Ada").pid;
  c.send(wire::Contribute{code, pid, "m1", ItemKind::text, "kept"});
  EXPECT_EQ(c.expect<wire::Ack>().seq, 1u);
  failing = true;
  c.send(wire::Contribute{code, pid, "m2", ItemKind::text, "lost"});
  const auto e = c.expect<wire::ErrorReply>();
  EXPECT_EQ(e.err, ErrorCode::storage);
  EXPECT_EQ(e.cmid, "m2");
  const auto info = json::parse(http_get(r.ep, "/v1/sessions/" + code).body);
  EXPECT_EQ(info.at("read_only"), true);
  EXPECT_EQ(info.at("items"), 1);
  c.send(wire::Resume{code, pid, 0});
  EXPECT_EQ(c.expect<wire::ResumeBatch>().items.size(), 1u);
}

}  // namespace
}  // namespace xc::server
