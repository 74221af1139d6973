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

#pragma once

// Live brainstorming session: join codes, participants, totally ordered
// item ingestion with idempotent retries, board organization, and
// save-anytime snapshots.
//
// A Session is not thread-safe. Callers serialize all access to one
// session through a single writer; distinct sessions are independent.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xc/error.hpp"
#include "xc/json_util.hpp"
#include "xc/random.hpp"
#include "xc/text.hpp"

namespace xc {

using Timestamp = std::int64_t;  // milliseconds since the Unix epoch
using Clock = std::function<Timestamp()>;

inline Timestamp system_now() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

inline constexpr std::string_view kJoinCodeAlphabet = "ABCDEFGHJKMNPQRSTUVWXYZ23456789";
inline constexpr std::size_t kJoinCodeLength = 6;
inline constexpr std::size_t kMaxDisplayName = 64;
inline constexpr std::size_t kMaxTextBody = 2000;
inline constexpr std::size_t kMaxTag = 64;

enum class Phase { collect, organize, evaluate };
enum class Role { facilitator, contributor };
enum class ItemKind { text, image };
enum class OpKind { move, assign_cluster, tag, untag, vote, unvote, set_phase };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::collect: return "collect";
    case Phase::organize: return "organize";
    case Phase::evaluate: return "evaluate";
  }
  return "";
}
constexpr std::string_view to_string(Role r) {
  return r == Role::facilitator ? "facilitator" : "contributor";
}
constexpr std::string_view to_string(ItemKind k) { return k == ItemKind::text ? "text" : "image"; }
constexpr std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::move: return "move";
    case OpKind::assign_cluster: return "assign-cluster";
    case OpKind::tag: return "tag";
    case OpKind::untag: return "untag";
    case OpKind::vote: return "vote";
    case OpKind::unvote: return "unvote";
    case OpKind::set_phase: return "set-phase";
  }
  return "";
}

inline constexpr Phase kAllPhases[] = {Phase::collect, Phase::organize, Phase::evaluate};
inline constexpr Role kAllRoles[] = {Role::facilitator, Role::contributor};
inline constexpr ItemKind kAllItemKinds[] = {ItemKind::text, ItemKind::image};
inline constexpr OpKind kAllOpKinds[] = {OpKind::move, OpKind::assign_cluster, OpKind::tag,
                                         OpKind::untag, OpKind::vote, OpKind::unvote,
                                         OpKind::set_phase};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const Enum (&all)[N], ErrorCode code, std::string_view what) {
  for (Enum e : all)
    if (to_string(e) == s) return e;
  fail(code, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Join codes

inline std::string generate_join_code(Seed seed) {
  SplitMix64 rng(seed);
  std::string code;
  for (std::size_t i = 0; i < kJoinCodeLength; ++i)
    code += kJoinCodeAlphabet[rng.below(kJoinCodeAlphabet.size())];
  return code;
}

inline bool is_valid_join_code(std::string_view code) {
  return code.size() == kJoinCodeLength &&
         code.find_first_not_of(kJoinCodeAlphabet) == std::string_view::npos;
}

// ---------------------------------------------------------------------------
// Asset references: "sha256:" + 64 lowercase hex digits. Image item bodies
// carry a reference optionally followed by white space and a caption.

inline constexpr std::string_view kAssetRefPrefix = "sha256:";

inline bool is_asset_ref(std::string_view ref) {
  if (ref.size() != kAssetRefPrefix.size() + 64 || ref.substr(0, kAssetRefPrefix.size()) != kAssetRefPrefix)
    return false;
  for (char c : ref.substr(kAssetRefPrefix.size()))
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

struct ImageBody {
  std::string ref;
  std::string caption;
};

inline std::optional<ImageBody> parse_image_body(std::string_view body) {
  const std::size_t ref_len = kAssetRefPrefix.size() + 64;
  if (body.size() < ref_len || !is_asset_ref(body.substr(0, ref_len))) return std::nullopt;
  std::string_view rest = body.substr(ref_len);
  if (!rest.empty() && rest.front() != ' ' && rest.front() != '\n' && rest.front() != '\t')
    return std::nullopt;
  return ImageBody{std::string(body.substr(0, ref_len)), text::trim(rest)};
}

// Text that participates in clustering: the body for text items, the
// caption for image items.
inline std::string item_text(ItemKind kind, const std::string& body) {
  if (kind == ItemKind::text) return body;
  auto img = parse_image_body(body);
  return img ? img->caption : std::string();
}

// ---------------------------------------------------------------------------
// Domain types

struct Participant {
  std::string participant_id;
  std::string display_name;
  Timestamp joined_at = 0;
  Role role = Role::contributor;

  friend bool operator==(const Participant&, const Participant&) = default;
};

struct Position {
  std::int32_t x = 0;
  std::int32_t y = 0;

  friend bool operator==(const Position&, const Position&) = default;
};

struct BoardItem {
  std::uint64_t seq = 0;
  std::string author_id;
  std::string client_msg_id;
  ItemKind kind = ItemKind::text;
  std::string body;
  Timestamp received_at = 0;
  std::set<std::string> tags;
  std::map<std::string, std::int32_t> votes;
  std::optional<std::string> cluster_id;
  std::optional<Position> position;

  friend bool operator==(const BoardItem&, const BoardItem&) = default;
};

struct OpPayload {
  std::optional<std::string> tag;
  std::optional<std::string> cluster_id;
  std::optional<Position> position;
  std::optional<std::int32_t> vote;
  std::optional<Phase> phase;

  friend bool operator==(const OpPayload&, const OpPayload&) = default;
};

struct BoardOpDraft {
  OpKind kind = OpKind::tag;
  std::uint64_t target = 0;  // item seq; unused (0) for set-phase
  OpPayload payload;
  std::string actor;
  std::string client_msg_id;  // empty means no retry protection
};

struct BoardOp {
  std::uint64_t op_seq = 0;
  OpKind kind = OpKind::tag;
  std::uint64_t target = 0;
  OpPayload payload;
  std::string actor;
  std::string client_msg_id;
  Timestamp applied_at = 0;

  friend bool operator==(const BoardOp&, const BoardOp&) = default;
};

struct IngestResult {
  BoardItem item;
  bool duplicate = false;
};

struct OpResult {
  BoardOp op;
  bool duplicate = false;
};

struct Snapshot;

class Session {
 public:
  Session(std::string code, Timestamp created_at)
      : code_(std::move(code)), created_at_(created_at) {}

  const std::string& code() const { return code_; }
  Timestamp created_at() const { return created_at_; }
  Phase phase() const { return phase_; }
  const std::map<std::string, Participant>& participants() const { return participants_; }
  const std::vector<BoardItem>& items() const { return items_; }
  const std::vector<BoardOp>& board_ops() const { return board_ops_; }
  std::uint64_t next_seq() const { return items_.size() + 1; }
  std::uint64_t max_seq() const { return items_.size(); }

  const Participant* find_participant(const std::string& id) const {
    const auto it = participants_.find(id);
    return it == participants_.end() ? nullptr : &it->second;
  }

  const BoardItem* find_item(std::uint64_t seq) const {
    return seq >= 1 && seq <= items_.size() ? &items_[seq - 1] : nullptr;
  }

  // Seq previously assigned to (author, client_msg_id), if any.
  std::optional<std::uint64_t> seen(const std::string& author, const std::string& cmid) const {
    const auto it = seen_msgs_.find({author, cmid});
    if (it == seen_msgs_.end()) return std::nullopt;
    return it->second;
  }

  // Board op previously applied for (actor, client_msg_id), if any.
  const BoardOp* seen_op(const std::string& actor, const std::string& cmid) const {
    const auto it = seen_ops_.find({actor, cmid});
    return it == seen_ops_.end() ? nullptr : &board_ops_[it->second - 1];
  }

  Participant join(std::string_view display_name, Role role, Timestamp now) {
    std::string name = text::trim(display_name, kMaxDisplayName);
    if (name.empty()) fail(ErrorCode::invalid_argument, "display name is empty");
    Participant p{"p" + std::to_string(participants_.size() + 1), std::move(name), now, role};
    participants_.emplace(p.participant_id, p);
    return p;
  }

  IngestResult ingest(const std::string& author, const std::string& cmid, ItemKind kind,
                      const std::string& body, Timestamp now) {
    if (!participants_.count(author))
      fail(ErrorCode::unknown_participant, "unknown participant '" + author + "'");
    if (cmid.empty()) fail(ErrorCode::invalid_argument, "client message id is empty");
    if (auto prior = seen(author, cmid)) return {items_[*prior - 1], true};
    check_body(kind, body);
    if (phase_ == Phase::evaluate)
      fail(ErrorCode::phase, "the session is in the evaluate phase and accepts no new items");

    BoardItem item;
    item.seq = next_seq();
    item.author_id = author;
    item.client_msg_id = cmid;
    item.kind = kind;
    item.body = body;
    item.received_at = now;
    seen_msgs_.emplace(std::pair{author, cmid}, item.seq);
    items_.push_back(item);
    return {std::move(item), false};
  }

  OpResult apply_board_op(const BoardOpDraft& draft, Timestamp now) {
    const Participant* actor = find_participant(draft.actor);
    if (!actor) fail(ErrorCode::unknown_participant, "unknown participant '" + draft.actor + "'");
    if (!draft.client_msg_id.empty()) {
      const auto it = seen_ops_.find({draft.actor, draft.client_msg_id});
      if (it != seen_ops_.end()) return {board_ops_[it->second - 1], true};
    }
    check_payload_shape(draft);

    BoardItem* item = nullptr;
    if (draft.kind != OpKind::set_phase) {
      if (draft.target < 1 || draft.target > items_.size())
        fail(ErrorCode::unknown_target, "no item with seq " + std::to_string(draft.target));
      item = &items_[draft.target - 1];
    }

    switch (draft.kind) {
      case OpKind::set_phase: {
        require_facilitator(*actor);
        const Phase to = *draft.payload.phase;
        if (static_cast<int>(to) <= static_cast<int>(phase_))
          fail(ErrorCode::illegal_transition, "phase may only move forward: " +
                                                  std::string(to_string(phase_)) + " -> " +
                                                  std::string(to_string(to)));
        phase_ = to;
        break;
      }
      case OpKind::move: item->position = *draft.payload.position; break;
      case OpKind::assign_cluster:
        require_facilitator(*actor);
        item->cluster_id = *draft.payload.cluster_id;
        break;
      case OpKind::tag: item->tags.insert(*draft.payload.tag); break;
      case OpKind::untag: item->tags.erase(*draft.payload.tag); break;
      case OpKind::vote:
        require_voting_phase();
        item->votes[actor->participant_id] = *draft.payload.vote;
        break;
      case OpKind::unvote:
        require_voting_phase();
        item->votes.erase(actor->participant_id);
        break;
    }

    BoardOp op{board_ops_.size() + 1, draft.kind, draft.target, draft.payload,
               draft.actor, draft.client_msg_id, now};
    if (!op.client_msg_id.empty()) seen_ops_.emplace(std::pair{op.actor, op.client_msg_id}, op.op_seq);
    board_ops_.push_back(op);
    return {std::move(op), false};
  }

  friend bool operator==(const Session&, const Session&) = default;

 private:
  friend Session restore(const Snapshot& snap);

  static void check_body(ItemKind kind, const std::string& body) {
    if (!text::is_valid_utf8(body)) fail(ErrorCode::invalid_body, "body is not valid UTF-8");
    if (kind == ItemKind::text) {
      const std::size_t n = text::length(text::trim(body));
      if (n == 0) fail(ErrorCode::invalid_body, "text body is empty");
      if (n > kMaxTextBody)
        fail(ErrorCode::invalid_body, "text body exceeds " + std::to_string(kMaxTextBody) + " characters");
      return;
    }
    const auto img = parse_image_body(body);
    if (!img) fail(ErrorCode::invalid_body, "image body must start with an asset reference");
    if (text::length(img->caption) > kMaxTextBody)
      fail(ErrorCode::invalid_body, "image caption too long");
  }

  static void check_payload_shape(const BoardOpDraft& d) {
    const OpPayload& p = d.payload;
    const bool want_tag = d.kind == OpKind::tag || d.kind == OpKind::untag;
    const bool want_cluster = d.kind == OpKind::assign_cluster;
    const bool want_position = d.kind == OpKind::move;
    const bool want_vote = d.kind == OpKind::vote;
    const bool want_phase = d.kind == OpKind::set_phase;
    auto check = [&](bool want, bool have, const char* field) {
      if (want != have)
        fail(ErrorCode::invalid_argument, std::string(to_string(d.kind)) +
                                              (want ? " requires " : " does not take ") + field);
    };
    check(want_tag, p.tag.has_value(), "a tag");
    check(want_cluster, p.cluster_id.has_value(), "a cluster id");
    check(want_position, p.position.has_value(), "a position");
    check(want_vote, p.vote.has_value(), "a vote value");
    check(want_phase, p.phase.has_value(), "a phase");
    if (p.tag && (text::trim(*p.tag).empty() || *p.tag != text::trim(*p.tag, kMaxTag)))
      fail(ErrorCode::invalid_argument, "tags must be trimmed, non-empty and at most 64 characters");
    if (p.cluster_id && p.cluster_id->empty())
      fail(ErrorCode::invalid_argument, "cluster id is empty");
    if (d.kind == OpKind::set_phase && d.target != 0)
      fail(ErrorCode::invalid_argument, "set-phase takes no target");
  }

  static void require_facilitator(const Participant& p) {
    if (p.role != Role::facilitator)
      fail(ErrorCode::forbidden, "only a facilitator may change phases or assign clusters");
  }

  void require_voting_phase() const {
    if (phase_ == Phase::collect)
      fail(ErrorCode::phase, "voting opens after the collect phase");
  }

  std::string code_;
  Timestamp created_at_ = 0;
  std::map<std::string, Participant> participants_;
  std::vector<BoardItem> items_;
  std::vector<BoardOp> board_ops_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> seen_msgs_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> seen_ops_;
  Phase phase_ = Phase::collect;
};

inline Session create_session(Seed seed, const Clock& clock) {
  return Session(generate_join_code(seed), clock());
}

// ---------------------------------------------------------------------------
// Snapshots

struct Snapshot {
  std::string code;
  Timestamp created_at = 0;
  Timestamp taken_at = 0;
  std::uint64_t snapshot_seq = 0;
  Phase phase = Phase::collect;
  std::vector<Participant> participants;  // sorted by id
  std::vector<BoardItem> items;
  std::vector<BoardOp> board_ops;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

inline Snapshot snapshot(const Session& s, Timestamp now) {
  Snapshot snap;
  snap.code = s.code();
  snap.created_at = s.created_at();
  snap.taken_at = now;
  snap.snapshot_seq = s.next_seq() - 1;
  snap.phase = s.phase();
  for (const auto& [_, p] : s.participants()) snap.participants.push_back(p);
  snap.items = s.items();
  snap.board_ops = s.board_ops();
  return snap;
}

inline Session restore(const Snapshot& snap) {
  auto corrupt = [](const std::string& why) { fail(ErrorCode::integrity, "corrupt snapshot: " + why); };
  Session s(snap.code, snap.created_at);
  for (const auto& p : snap.participants)
    if (!s.participants_.emplace(p.participant_id, p).second)
      corrupt("participant '" + p.participant_id + "' repeated");
  for (std::size_t k = 0; k < snap.items.size(); ++k) {
    const BoardItem& item = snap.items[k];
    if (item.seq != k + 1)
      corrupt("item seq gap: expected " + std::to_string(k + 1) + ", found " + std::to_string(item.seq));
    if (!s.participants_.count(item.author_id)) corrupt("item author unknown");
    if (!s.seen_msgs_.emplace(std::pair{item.author_id, item.client_msg_id}, item.seq).second)
      corrupt("client message id repeated");
  }
  if (snap.snapshot_seq != snap.items.size()) corrupt("snapshot_seq does not match item count");
  for (std::size_t k = 0; k < snap.board_ops.size(); ++k) {
    const BoardOp& op = snap.board_ops[k];
    if (op.op_seq != k + 1) corrupt("board op seq gap");
    if (!op.client_msg_id.empty()) s.seen_ops_.emplace(std::pair{op.actor, op.client_msg_id}, op.op_seq);
  }
  s.items_ = snap.items;
  s.board_ops_ = snap.board_ops;
  s.phase_ = snap.phase;
  return s;
}

// ---------------------------------------------------------------------------
// JSON document forms (snapshot files and event payloads)

inline json to_json(const Participant& p) {
  return {{"participant_id", p.participant_id}, {"display_name", p.display_name},
          {"joined_at", p.joined_at}, {"role", std::string(to_string(p.role))}};
}

inline Participant participant_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where, ErrorCode::integrity, ErrorCode::integrity);
  Participant p;
  p.participant_id = r.str("participant_id");
  p.display_name = r.str("display_name");
  p.joined_at = r.i64("joined_at");
  p.role = parse_enum(r.str("role"), kAllRoles, ErrorCode::integrity, "role");
  r.finish();
  return p;
}

inline json to_json(const BoardItem& item) {
  json j{{"seq", item.seq},
         {"author_id", item.author_id},
         {"client_msg_id", item.client_msg_id},
         {"kind", std::string(to_string(item.kind))},
         {"body", item.body},
         {"received_at", item.received_at},
         {"tags", json(item.tags)},
         {"votes", json(item.votes)}};
  j["cluster_id"] = item.cluster_id ? json(*item.cluster_id) : json(nullptr);
  j["position"] = item.position ? json{{"x", item.position->x}, {"y", item.position->y}} : json(nullptr);
  return j;
}

inline Position position_from_json(const json& j, const std::string& where, ErrorCode code) {
  ObjectReader r(j, where, code, code);
  const auto x = r.i64("x");
  const auto y = r.i64("y");
  r.finish();
  if (x < INT32_MIN || x > INT32_MAX || y < INT32_MIN || y > INT32_MAX) fail(code, where + ": out of range");
  return {static_cast<std::int32_t>(x), static_cast<std::int32_t>(y)};
}

inline BoardItem item_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where, ErrorCode::integrity, ErrorCode::integrity);
  BoardItem item;
  item.seq = r.u64("seq");
  item.author_id = r.str("author_id");
  item.client_msg_id = r.str("client_msg_id");
  item.kind = parse_enum(r.str("kind"), kAllItemKinds, ErrorCode::integrity, "item kind");
  item.body = r.str("body");
  item.received_at = r.i64("received_at");
  for (const auto& t : r.strings("tags")) item.tags.insert(t);
  const json& votes = r.raw("votes");
  if (!votes.is_object()) fail(ErrorCode::integrity, where + "/votes: expected object");
  for (const auto& [pid, v] : votes.items()) {
    if (!v.is_number_integer()) fail(ErrorCode::integrity, where + "/votes: expected integers");
    item.votes[pid] = v.get<std::int32_t>();
  }
  item.cluster_id = r.opt_str("cluster_id");
  const json& pos = r.raw("position");
  if (!pos.is_null()) item.position = position_from_json(pos, where + "/position", ErrorCode::integrity);
  r.finish();
  return item;
}

inline json to_json(const OpPayload& p) {
  json j = json::object();
  if (p.tag) j["tag"] = *p.tag;
  if (p.cluster_id) j["cluster_id"] = *p.cluster_id;
  if (p.position) j["position"] = {{"x", p.position->x}, {"y", p.position->y}};
  if (p.vote) j["vote"] = *p.vote;
  if (p.phase) j["phase"] = std::string(to_string(*p.phase));
  return j;
}

inline OpPayload payload_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where, ErrorCode::integrity, ErrorCode::integrity);
  OpPayload p;
  p.tag = r.opt_str("tag");
  p.cluster_id = r.opt_str("cluster_id");
  if (r.has("position")) p.position = position_from_json(r.raw("position"), where + "/position", ErrorCode::integrity);
  if (r.has("vote")) {
    const auto v = r.i64("vote");
    if (v < INT32_MIN || v > INT32_MAX) fail(ErrorCode::integrity, where + "/vote: out of range");
    p.vote = static_cast<std::int32_t>(v);
  }
  if (auto ph = r.opt_str("phase")) p.phase = parse_enum(*ph, kAllPhases, ErrorCode::integrity, "phase");
  r.finish();
  return p;
}

inline json to_json(const BoardOp& op) {
  return {{"op_seq", op.op_seq},
          {"kind", std::string(to_string(op.kind))},
          {"target", op.target},
          {"payload", to_json(op.payload)},
          {"actor", op.actor},
          {"client_msg_id", op.client_msg_id},
          {"applied_at", op.applied_at}};
}

inline BoardOp op_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where, ErrorCode::integrity, ErrorCode::integrity);
  BoardOp op;
  op.op_seq = r.u64("op_seq");
  op.kind = parse_enum(r.str("kind"), kAllOpKinds, ErrorCode::integrity, "op kind");
  op.target = r.u64("target");
  op.payload = payload_from_json(r.raw("payload"), where + "/payload");
  op.actor = r.str("actor");
  op.client_msg_id = r.str("client_msg_id");
  op.applied_at = r.i64("applied_at");
  r.finish();
  return op;
}

inline json to_json(const Snapshot& s) {
  json j{{"code", s.code},
         {"created_at", s.created_at},
         {"taken_at", s.taken_at},
         {"snapshot_seq", s.snapshot_seq},
         {"phase", std::string(to_string(s.phase))}};
  j["participants"] = json::array();
  for (const auto& p : s.participants) j["participants"].push_back(to_json(p));
  j["items"] = json::array();
  for (const auto& i : s.items) j["items"].push_back(to_json(i));
  j["board_ops"] = json::array();
  for (const auto& o : s.board_ops) j["board_ops"].push_back(to_json(o));
  return j;
}

inline Snapshot snapshot_from_json(const json& j) {
  ObjectReader r(j, "", ErrorCode::integrity, ErrorCode::integrity);
  Snapshot s;
  s.code = r.str("code");
  s.created_at = r.i64("created_at");
  s.taken_at = r.i64("taken_at");
  s.snapshot_seq = r.u64("snapshot_seq");
  s.phase = parse_enum(r.str("phase"), kAllPhases, ErrorCode::integrity, "phase");
  const json& ps = r.array("participants");
  for (std::size_t i = 0; i < ps.size(); ++i)
    s.participants.push_back(participant_from_json(ps[i], "/participants/" + std::to_string(i)));
  const json& items = r.array("items");
  for (std::size_t i = 0; i < items.size(); ++i)
    s.items.push_back(item_from_json(items[i], "/items/" + std::to_string(i)));
  const json& ops = r.array("board_ops");
  for (std::size_t i = 0; i < ops.size(); ++i)
    s.board_ops.push_back(op_from_json(ops[i], "/board_ops/" + std::to_string(i)));
  r.finish();
  return s;
}

inline std::string serialize_snapshot(const Snapshot& s) { return canonical_dump(to_json(s)); }

inline Snapshot parse_snapshot(std::string_view text) {
  return snapshot_from_json(parse_json(text, ErrorCode::integrity));
}

}  // namespace xc
