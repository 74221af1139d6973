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

#include "xc/session_core.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <unordered_set>

#include <gtest/gtest.h>

#include "generators.hpp"

namespace xc {
namespace {

Clock fixed_clock(Timestamp t) {
  return [t] { return t; };
}

Session fresh() { return create_session(Seed{1}, fixed_clock(1000)); }

TEST(JoinCode, GoldenAndAlphabet) {
  // From tests/oracles/sampler_oracle.py.
  EXPECT_EQ(generate_join_code(Seed{0}), "T4CEE3");
  EXPECT_EQ(generate_join_code(Seed{42}), "472QWX");
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto code = generate_join_code(Seed{s});
    EXPECT_TRUE(is_valid_join_code(code)) << code;
  }
  EXPECT_FALSE(is_valid_join_code("0O0O0O"));
  EXPECT_FALSE(is_valid_join_code("ABCDE"));
}

TEST(CreateSession, Determinism) {
  const auto a = create_session(Seed{77}, fixed_clock(5));
  const auto b = create_session(Seed{77}, fixed_clock(5));
  EXPECT_EQ(a.code(), b.code());
  EXPECT_EQ(a.phase(), Phase::collect);
  EXPECT_TRUE(a.items().empty());
  EXPECT_EQ(a.next_seq(), 1u);
}

// 31^6 codes, 10^4 draws: the birthday bound expects ~0.06 collisions. The
// oracle run over seeds 0..9999 found none.
TEST(CreateSession, CollisionsOverTenThousandSeeds) {
  std::unordered_set<std::string> codes;
  int collisions = 0;
  for (std::uint64_t s = 0; s < 10000; ++s)
    collisions += !codes.insert(create_session(Seed{s}, fixed_clock(0)).code()).second;
  EXPECT_EQ(collisions, 0);
}

TEST(Join, RegistersParticipants) {
  auto s = fresh();
  const auto ada = s.join("Ada", Role::contributor, 10);
  EXPECT_EQ(s.participants().size(), 1u);
  EXPECT_EQ(ada.display_name, "Ada");
  EXPECT_THROW(s.join("  ", Role::contributor, 10), Error);
  const auto ada2 = s.join("Ada", Role::contributor, 11);
  EXPECT_NE(ada.participant_id, ada2.participant_id);
}

TEST(Join, SanitizesNames) {
  auto s = fresh();
  EXPECT_EQ(s.join("  Grace \t", Role::contributor, 0).display_name, "Grace");
  const std::string long_name(100, 'x');
  EXPECT_EQ(s.join(long_name, Role::contributor, 0).display_name.size(), kMaxDisplayName);
  EXPECT_EQ(text::length(s.join(std::string(70, 'x') + "é", Role::contributor, 0).display_name), 64u);
}

TEST(Ingest, GaplessArrivalOrder) {
  auto s = fresh();
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(s.join("p" + std::to_string(i), Role::contributor, 0).participant_id);
  for (int i = 0; i < 3; ++i) {
    const auto r = s.ingest(ids[i], "m", ItemKind::text, "idea " + std::to_string(i), 100 + i);
    EXPECT_EQ(r.item.seq, static_cast<std::uint64_t>(i + 1));
    EXPECT_FALSE(r.duplicate);
  }
}

TEST(Ingest, RetryIsIdempotent) {
  auto s = fresh();
  const auto p = s.join("Ada", Role::contributor, 0).participant_id;
  const auto first = s.ingest(p, "m1", ItemKind::text, "solar kiosk", 1);
  const Session before = s;
  const auto again = s.ingest(p, "m1", ItemKind::text, "solar kiosk", 2);
  EXPECT_TRUE(again.duplicate);
  EXPECT_EQ(again.item.seq, first.item.seq);
  EXPECT_EQ(s, before);
}

TEST(Ingest, DifferentAuthorsSameTextAreDistinct) {
  auto s = fresh();
  const auto a = s.join("A", Role::contributor, 0).participant_id;
  const auto b = s.join("B", Role::contributor, 0).participant_id;
  EXPECT_FALSE(s.ingest(a, "m", ItemKind::text, "same", 0).duplicate);
  EXPECT_FALSE(s.ingest(b, "m", ItemKind::text, "same", 0).duplicate);
  EXPECT_EQ(s.items().size(), 2u);
}

TEST(Ingest, Errors) {
  auto s = fresh();
  const auto p = s.join("Ada", Role::facilitator, 0).participant_id;
  auto code_of = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  EXPECT_EQ(code_of([&] { s.ingest("ghost", "m", ItemKind::text, "x", 0); }),
            ErrorCode::unknown_participant);
  EXPECT_EQ(code_of([&] { s.ingest(p, "m", ItemKind::text, "   ", 0); }), ErrorCode::invalid_body);
  EXPECT_EQ(code_of([&] { s.ingest(p, "m", ItemKind::text, std::string(2001, 'a'), 0); }), ErrorCode::invalid_body);
  EXPECT_EQ(code_of([&] { s.ingest(p, "m", ItemKind::text, "\xC3\x28", 0); }), ErrorCode::invalid_body);
  EXPECT_EQ(code_of([&] { s.ingest(p, "m", ItemKind::image, "not-a-ref", 0); }), ErrorCode::invalid_body);
  s.apply_board_op({OpKind::set_phase, 0, {.phase = Phase::evaluate}, p, ""}, 0);
  EXPECT_EQ(code_of([&] { s.ingest(p, "m", ItemKind::text, "late idea", 0); }), ErrorCode::phase);
}

TEST(Ingest, ImageReferencesWithCaption) {
  auto s = fresh();
  const auto p = s.join("Ada", Role::contributor, 0).participant_id;
  const std::string ref = "sha256:" + std::string(64, 'a');
  EXPECT_NO_THROW(s.ingest(p, "1", ItemKind::image, ref, 0));
  EXPECT_NO_THROW(s.ingest(p, "2", ItemKind::image, ref + " whiteboard sketch", 0));
  EXPECT_EQ(item_text(ItemKind::image, ref + " whiteboard sketch"), "whiteboard sketch");
  EXPECT_EQ(item_text(ItemKind::image, ref), "");
}

// Oracle: the sent log. Every message appears exactly once, seqs are 1..N.
TEST(Ingest, ThousandInterleavedFromFiftyAuthors) {
  auto s = fresh();
  std::vector<std::string> authors;
  for (int i = 0; i < 50; ++i) authors.push_back(s.join("a" + std::to_string(i), Role::contributor, 0).participant_id);
  std::vector<std::pair<std::string, std::string>> sent;
  for (int a = 0; a < 50; ++a)
    for (int m = 0; m < 20; ++m) sent.emplace_back(authors[a], "m" + std::to_string(m));
  std::mt19937_64 rng(9);
  std::shuffle(sent.begin(), sent.end(), rng);
  for (const auto& [a, m] : sent) s.ingest(a, m, ItemKind::text, a + "/" + m, 0);

  ASSERT_EQ(s.items().size(), 1000u);
  std::set<std::pair<std::string, std::string>> received;
  for (std::size_t k = 0; k < s.items().size(); ++k) {
    const auto& it = s.items()[k];
    EXPECT_EQ(it.seq, k + 1);
    EXPECT_EQ(it.author_id, sent[k].first);
    EXPECT_EQ(it.client_msg_id, sent[k].second);
    received.emplace(it.author_id, it.client_msg_id);
  }
  using Key = std::pair<std::string, std::string>;
  EXPECT_EQ(received, std::set<Key>(sent.begin(), sent.end()));
}

// Content never affects acceptance.
TEST(Ingest, NoFilterOnAdversarialText) {
  auto s = fresh();
  const auto p = s.join("Ada", Role::contributor, 0).participant_id;
  const std::vector<std::string> bodies = {
      "x",
      " x ",
      std::string(2000, 'z'),
      std::string(1999, 'z') + "é",
      "\xF0\x9F\x92\xA1 idea",
      "DROP TABLE items;",
      "<script>alert(1)</script>",
      "\"quoted\" \\ backslash",
      "line\nbreak",
      "same",
      "same",
      "\xE2\x80\x8B zero width",
      "مرحبا",
      "日本語のアイデア",
  };
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const auto r = s.ingest(p, std::to_string(i), ItemKind::text, bodies[i], 0);
    EXPECT_FALSE(r.duplicate);
    EXPECT_EQ(r.item.body, bodies[i]);
  }
  EXPECT_EQ(s.items().size(), bodies.size());
}

class BoardOps : public ::testing::Test {
 protected:
  void SetUp() override {
    fac = s.join("Facilitator", Role::facilitator, 0).participant_id;
    con = s.join("Contributor", Role::contributor, 0).participant_id;
    s.ingest(con, "1", ItemKind::text, "solar panels", 0);
  }

  ErrorCode code_of(const BoardOpDraft& d) {
    try {
      s.apply_board_op(d, 0);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  }

  Session s = fresh();
  std::string fac;
  std::string con;
};

TEST_F(BoardOps, TagUntagMove) {
  const auto op = s.apply_board_op({OpKind::tag, 1, {.tag = "hardware"}, con, "t1"}, 5).op;
  EXPECT_EQ(op.op_seq, 1u);
  EXPECT_TRUE(s.items()[0].tags.count("hardware"));
  s.apply_board_op({OpKind::move, 1, {.position = Position{3, -4}}, con, ""}, 5);
  EXPECT_EQ(s.items()[0].position, (Position{3, -4}));
  s.apply_board_op({OpKind::untag, 1, {.tag = "hardware"}, con, ""}, 5);
  EXPECT_TRUE(s.items()[0].tags.empty());
  EXPECT_EQ(s.board_ops().size(), 3u);
  EXPECT_EQ(s.board_ops()[2].op_seq, 3u);
}

TEST_F(BoardOps, RetriedOpIsIdempotent) {
  s.apply_board_op({OpKind::tag, 1, {.tag = "x"}, con, "t1"}, 5);
  const auto again = s.apply_board_op({OpKind::tag, 1, {.tag = "x"}, con, "t1"}, 6);
  EXPECT_TRUE(again.duplicate);
  EXPECT_EQ(again.op.op_seq, 1u);
  EXPECT_EQ(s.board_ops().size(), 1u);
}

TEST_F(BoardOps, VotingPostponedUntilOrganize) {
  EXPECT_EQ(code_of({OpKind::vote, 1, {.vote = 1}, con, ""}), ErrorCode::phase);
  EXPECT_EQ(code_of({OpKind::unvote, 1, {}, con, ""}), ErrorCode::phase);
  s.apply_board_op({OpKind::set_phase, 0, {.phase = Phase::organize}, fac, ""}, 0);
  s.apply_board_op({OpKind::vote, 1, {.vote = 2}, con, ""}, 0);
  EXPECT_EQ(s.items()[0].votes.at(con), 2);
  s.apply_board_op({OpKind::unvote, 1, {}, con, ""}, 0);
  EXPECT_TRUE(s.items()[0].votes.empty());
}

TEST_F(BoardOps, PhaseMovesForwardOnly) {
  s.apply_board_op({OpKind::set_phase, 0, {.phase = Phase::evaluate}, fac, ""}, 0);
  EXPECT_EQ(code_of({OpKind::set_phase, 0, {.phase = Phase::collect}, fac, ""}), ErrorCode::illegal_transition);
  EXPECT_EQ(code_of({OpKind::set_phase, 0, {.phase = Phase::evaluate}, fac, ""}), ErrorCode::illegal_transition);
  EXPECT_EQ(s.phase(), Phase::evaluate);
}

TEST_F(BoardOps, FacilitatorOnlyControls) {
  EXPECT_EQ(code_of({OpKind::set_phase, 0, {.phase = Phase::organize}, con, ""}), ErrorCode::forbidden);
  EXPECT_EQ(code_of({OpKind::assign_cluster, 1, {.cluster_id = "c1"}, con, ""}), ErrorCode::forbidden);
  s.apply_board_op({OpKind::assign_cluster, 1, {.cluster_id = "c1"}, fac, ""}, 0);
  EXPECT_EQ(s.items()[0].cluster_id, "c1");
}

TEST_F(BoardOps, Errors) {
  EXPECT_EQ(code_of({OpKind::tag, 9, {.tag = "x"}, con, ""}), ErrorCode::unknown_target);
  EXPECT_EQ(code_of({OpKind::tag, 1, {.tag = "x"}, "ghost", ""}), ErrorCode::unknown_participant);
  EXPECT_EQ(code_of({OpKind::tag, 1, {}, con, ""}), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of({OpKind::tag, 1, {.tag = "x", .vote = 1}, con, ""}), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of({OpKind::tag, 1, {.tag = " padded "}, con, ""}), ErrorCode::invalid_argument);
  EXPECT_TRUE(s.board_ops().empty());
}

TEST(Snapshot, EmptySession) {
  const auto s = fresh();
  const auto snap = snapshot(s, 50);
  EXPECT_EQ(snap.snapshot_seq, 0u);
  const auto r = restore(snap);
  EXPECT_EQ(r.code(), s.code());
  EXPECT_TRUE(r.items().empty());
}

TEST(Snapshot, IsolationAndContinuation) {
  auto s = fresh();
  const auto p = s.join("Ada", Role::contributor, 0).participant_id;
  s.ingest(p, "1", ItemKind::text, "one", 0);
  const auto snap = snapshot(s, 10);
  s.ingest(p, "2", ItemKind::text, "two", 0);
  auto r = restore(snap);
  EXPECT_EQ(r.items().size(), 1u);
  EXPECT_EQ(r.ingest(p, "3", ItemKind::text, "three", 0).item.seq, snap.snapshot_seq + 1);
  // Duplicate detection survives restore.
  EXPECT_TRUE(r.ingest(p, "1", ItemKind::text, "one", 0).duplicate);
}

TEST(Snapshot, GapIsIntegrityError) {
  auto s = fresh();
  const auto p = s.join("Ada", Role::contributor, 0).participant_id;
  s.ingest(p, "1", ItemKind::text, "one", 0);
  s.ingest(p, "2", ItemKind::text, "two", 0);
  s.ingest(p, "3", ItemKind::text, "three", 0);
  auto snap = snapshot(s, 0);
  snap.items.erase(snap.items.begin() + 1);
  snap.snapshot_seq = 2;
  try {
    restore(snap);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::integrity);
  }
}

TEST(Snapshot, RoundTripProperty) {
  std::mt19937_64 rng(2026);
  for (int i = 0; i < 100; ++i) {
    const Session s = xc::testing::random_session(rng);
    const auto snap = snapshot(s, 123456);
    const Session r = restore(snap);
    EXPECT_EQ(r, s);
    auto again = snapshot(r, 999);
    again.taken_at = snap.taken_at;
    EXPECT_EQ(again, snap);
    // Through the document form as well.
    EXPECT_EQ(parse_snapshot(serialize_snapshot(snap)), snap);
    EXPECT_EQ(serialize_snapshot(snap), serialize_snapshot(parse_snapshot(serialize_snapshot(snap))));
  }
}

TEST(Session, PhaseMonotonic) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    auto s = create_session(Seed{1}, fixed_clock(0));
    const auto fac = s.join("F", Role::facilitator, 0).participant_id;
    int last = 0;
    for (int j = 0; j < 10; ++j) {
      try {
        s.apply_board_op({OpKind::set_phase, 0, {.phase = kAllPhases[rng() % 3]}, fac, ""}, 0);
      } catch (const Error&) {
      }
      EXPECT_GE(static_cast<int>(s.phase()), last);
      last = static_cast<int>(s.phase());
    }
  }
}

// Replaying the same command log (including retries) rebuilds identical state.
TEST(Session, ReplayDeterminism) {
  struct Cmd {
    int author;
    std::string cmid;
    std::string body;
  };
  std::mt19937_64 rng(11);
  std::vector<Cmd> log;
  for (int i = 0; i < 300; ++i)
    log.push_back({static_cast<int>(rng() % 5), "m" + std::to_string(rng() % 80), "b" + std::to_string(i)});
  auto run = [&](std::size_t prefix) {
    auto s = create_session(Seed{4}, fixed_clock(0));
    std::vector<std::string> ids;
    for (int a = 0; a < 5; ++a) ids.push_back(s.join("a", Role::contributor, 0).participant_id);
    for (std::size_t i = 0; i < prefix; ++i) s.ingest(ids[log[i].author], log[i].cmid, ItemKind::text, log[i].body, 7);
    return s;
  };
  for (std::size_t prefix : {0u, 1u, 57u, 300u}) EXPECT_EQ(run(prefix), run(prefix));
  const auto full = run(300);
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& it : full.items()) EXPECT_TRUE(keys.emplace(it.author_id, it.client_msg_id).second);
}

TEST(SnapshotDocument, RejectsUnknownFields) {
  auto doc = to_json(snapshot(fresh(), 0));
  doc["extra"] = 1;
  EXPECT_THROW(snapshot_from_json(doc), Error);
}

}  // namespace
}  // namespace xc
