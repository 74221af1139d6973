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

// Client/server message schemas. A frame is one message in canonical JSON:
// keys sorted, no insignificant whitespace, UTF-8. Decoding is strict:
// unknown fields, unknown types and other protocol versions are errors.
// See protocol/PROTOCOL.md for the field tables.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xc/error.hpp"
#include "xc/json_util.hpp"
#include "xc/session_core.hpp"
#include "xc/stimulus_engine.hpp"

namespace xc::wire {

inline constexpr std::int64_t kProtocolVersion = 1;

using Frame = std::string;

struct Item {
  std::uint64_t seq = 0;
  std::string pid;
  std::string cmid;
  ItemKind kind = ItemKind::text;
  std::string body;

  friend bool operator==(const Item&, const Item&) = default;
};

inline Item to_wire(const BoardItem& b) { return {b.seq, b.author_id, b.client_msg_id, b.kind, b.body}; }

struct Hello {
  std::string code;
  std::string name;
  Role role = Role::contributor;
  std::optional<std::string> pid;  // rejoin as an existing participant
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct Welcome {
  std::string code;
  std::string pid;
  Phase phase = Phase::collect;
  std::uint64_t seq = 0;  // current max seq
  friend bool operator==(const Welcome&, const Welcome&) = default;
};

struct Contribute {
  std::string code;
  std::string pid;
  std::string cmid;
  ItemKind kind = ItemKind::text;
  std::string body;
  friend bool operator==(const Contribute&, const Contribute&) = default;
};

struct Ack {
  std::string code;
  std::string pid;
  std::string cmid;
  std::uint64_t seq = 0;
  bool dup = false;
  friend bool operator==(const Ack&, const Ack&) = default;
};

struct ItemBroadcast {
  std::string code;
  Item item;
  friend bool operator==(const ItemBroadcast&, const ItemBroadcast&) = default;
};

struct BoardOpRequest {
  std::string code;
  std::string pid;
  std::string cmid;
  OpKind kind = OpKind::tag;
  std::uint64_t target = 0;
  OpPayload args;
  friend bool operator==(const BoardOpRequest&, const BoardOpRequest&) = default;
};

struct OpBroadcast {
  std::string code;
  std::uint64_t oseq = 0;
  std::string pid;
  std::string cmid;
  OpKind kind = OpKind::tag;
  std::uint64_t target = 0;
  OpPayload args;
  friend bool operator==(const OpBroadcast&, const OpBroadcast&) = default;
};

struct Resume {
  std::string code;
  std::string pid;
  std::uint64_t seq = 0;  // last seen
  friend bool operator==(const Resume&, const Resume&) = default;
};

struct ResumeBatch {
  std::string code;
  Phase phase = Phase::collect;
  std::uint64_t seq = 0;  // max seq at the time of the batch
  std::vector<Item> items;
  friend bool operator==(const ResumeBatch&, const ResumeBatch&) = default;
};

struct DrawStimulus {
  std::string code;
  std::string pid;
  std::string deck;
  std::uint64_t n = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> topic;
  friend bool operator==(const DrawStimulus&, const DrawStimulus&) = default;
};

struct StimulusCards {
  std::string code;
  std::vector<StimulusCard> cards;
  std::string prompt;
  friend bool operator==(const StimulusCards&, const StimulusCards&) = default;
};

struct ErrorReply {
  ErrorCode err = ErrorCode::malformed;
  std::string body;
  std::optional<std::string> code;
  std::optional<std::string> cmid;
  std::optional<std::uint64_t> retry_ms;
  friend bool operator==(const ErrorReply&, const ErrorReply&) = default;
};

using Message = std::variant<Hello, Welcome, Contribute, Ack, ItemBroadcast, BoardOpRequest,
                             OpBroadcast, Resume, ResumeBatch, DrawStimulus, StimulusCards,
                             ErrorReply>;

template <typename T>
constexpr std::string_view type_name();
template <> constexpr std::string_view type_name<Hello>() { return "hello"; }
template <> constexpr std::string_view type_name<Welcome>() { return "welcome"; }
template <> constexpr std::string_view type_name<Contribute>() { return "contribute"; }
template <> constexpr std::string_view type_name<Ack>() { return "ack"; }
template <> constexpr std::string_view type_name<ItemBroadcast>() { return "item_broadcast"; }
template <> constexpr std::string_view type_name<BoardOpRequest>() { return "board_op"; }
template <> constexpr std::string_view type_name<OpBroadcast>() { return "op_broadcast"; }
template <> constexpr std::string_view type_name<Resume>() { return "resume"; }
template <> constexpr std::string_view type_name<ResumeBatch>() { return "resume_batch"; }
template <> constexpr std::string_view type_name<DrawStimulus>() { return "draw_stimulus"; }
template <> constexpr std::string_view type_name<StimulusCards>() { return "stimulus_card"; }
template <> constexpr std::string_view type_name<ErrorReply>() { return "error"; }

inline std::string_view type_of(const Message& m) {
  return std::visit([](const auto& v) { return type_name<std::decay_t<decltype(v)>>(); }, m);
}

inline constexpr ErrorCode kAllErrorCodes[] = {
    ErrorCode::malformed,        ErrorCode::unknown_type,      ErrorCode::unknown_field,
    ErrorCode::version_mismatch, ErrorCode::schema,            ErrorCode::parse,
    ErrorCode::duplicate_id,     ErrorCode::unknown_id,        ErrorCode::invalid_argument,
    ErrorCode::out_of_range,     ErrorCode::unknown_session,   ErrorCode::unknown_participant,
    ErrorCode::unknown_target,   ErrorCode::invalid_body,      ErrorCode::phase,
    ErrorCode::illegal_transition, ErrorCode::forbidden,       ErrorCode::rate_limited,
    ErrorCode::capacity,         ErrorCode::conflict,          ErrorCode::payload_too_large,
    ErrorCode::not_found,        ErrorCode::integrity,         ErrorCode::corrupt_log,
    ErrorCode::storage,          ErrorCode::io};

namespace detail {

[[noreturn]] inline void schema_error(std::string_view type, const std::string& what) {
  fail(ErrorCode::schema, std::string(type) + ": " + what);
}

inline void require_text(std::string_view type, const char* field, const std::string& v) {
  if (v.empty()) schema_error(type, std::string("missing ") + field);
}

// Board-op arguments must match the op kind exactly.
inline void check_args(std::string_view type, OpKind kind, std::uint64_t target, const OpPayload& a) {
  auto want = [&](bool expected, bool present, const char* field) {
    if (expected != present)
      schema_error(type, std::string(to_string(kind)) + (expected ? " requires " : " does not take ") + field);
  };
  want(kind == OpKind::tag || kind == OpKind::untag, a.tag.has_value(), "tag");
  want(kind == OpKind::assign_cluster, a.cluster_id.has_value(), "cluster");
  want(kind == OpKind::move, a.position.has_value(), "x/y");
  want(kind == OpKind::vote, a.vote.has_value(), "value");
  want(kind == OpKind::set_phase, a.phase.has_value(), "phase");
  if (kind == OpKind::set_phase ? target != 0 : target == 0)
    schema_error(type, kind == OpKind::set_phase ? "set-phase takes target 0" : "missing target");
}

inline void validate(const Hello& m) {
  require_text("hello", "code", m.code);
  require_text("hello", "name", m.name);
  if (m.pid) require_text("hello", "pid", *m.pid);
}
inline void validate(const Welcome& m) {
  require_text("welcome", "code", m.code);
  require_text("welcome", "pid", m.pid);
}
inline void validate(const Contribute& m) {
  require_text("contribute", "code", m.code);
  require_text("contribute", "pid", m.pid);
  require_text("contribute", "cmid", m.cmid);
}
inline void validate(const Ack& m) {
  require_text("ack", "code", m.code);
  require_text("ack", "pid", m.pid);
  require_text("ack", "cmid", m.cmid);
  if (m.seq == 0) schema_error("ack", "missing seq");
}
inline void validate_item(std::string_view type, const Item& i) {
  if (i.seq == 0) schema_error(type, "missing seq");
  require_text(type, "pid", i.pid);
  require_text(type, "cmid", i.cmid);
}
inline void validate(const ItemBroadcast& m) {
  require_text("item_broadcast", "code", m.code);
  validate_item("item_broadcast", m.item);
}
inline void validate(const BoardOpRequest& m) {
  require_text("board_op", "code", m.code);
  require_text("board_op", "pid", m.pid);
  require_text("board_op", "cmid", m.cmid);
  check_args("board_op", m.kind, m.target, m.args);
}
inline void validate(const OpBroadcast& m) {
  require_text("op_broadcast", "code", m.code);
  require_text("op_broadcast", "pid", m.pid);
  if (m.oseq == 0) schema_error("op_broadcast", "missing oseq");
  check_args("op_broadcast", m.kind, m.target, m.args);
}
inline void validate(const Resume& m) {
  require_text("resume", "code", m.code);
  require_text("resume", "pid", m.pid);
}
inline void validate(const ResumeBatch& m) {
  require_text("resume_batch", "code", m.code);
  for (const auto& i : m.items) validate_item("resume_batch", i);
}
inline void validate(const DrawStimulus& m) {
  require_text("draw_stimulus", "code", m.code);
  require_text("draw_stimulus", "pid", m.pid);
  require_text("draw_stimulus", "deck", m.deck);
  if (m.n == 0) schema_error("draw_stimulus", "n must be positive");
}
inline void validate(const StimulusCards& m) {
  require_text("stimulus_card", "code", m.code);
  if (m.cards.empty()) schema_error("stimulus_card", "no cards");
  for (const auto& c : m.cards) {
    require_text("stimulus_card", "deck", c.deck_id);
    require_text("stimulus_card", "entry", c.entry);
  }
}
inline void validate(const ErrorReply&) {}

inline void put_item(json& j, const Item& i) {
  j["seq"] = i.seq;
  j["pid"] = i.pid;
  j["cmid"] = i.cmid;
  j["kind"] = std::string(to_string(i.kind));
  j["body"] = i.body;
}

inline void put_args(json& j, OpKind kind, std::uint64_t target, const OpPayload& a) {
  j["kind"] = std::string(to_string(kind));
  j["target"] = target;
  if (a.tag) j["tag"] = *a.tag;
  if (a.cluster_id) j["cluster"] = *a.cluster_id;
  if (a.position) {
    j["x"] = a.position->x;
    j["y"] = a.position->y;
  }
  if (a.vote) j["value"] = *a.vote;
  if (a.phase) j["phase"] = std::string(to_string(*a.phase));
}

inline json body_of(const Hello& m) {
  json j{{"code", m.code}, {"name", m.name}, {"role", std::string(to_string(m.role))}};
  if (m.pid) j["pid"] = *m.pid;
  return j;
}
inline json body_of(const Welcome& m) {
  return {{"code", m.code}, {"pid", m.pid}, {"phase", std::string(to_string(m.phase))}, {"seq", m.seq}};
}
inline json body_of(const Contribute& m) {
  return {{"code", m.code}, {"pid", m.pid}, {"cmid", m.cmid},
          {"kind", std::string(to_string(m.kind))}, {"body", m.body}};
}
inline json body_of(const Ack& m) {
  return {{"code", m.code}, {"pid", m.pid}, {"cmid", m.cmid}, {"seq", m.seq}, {"dup", m.dup}};
}
inline json body_of(const ItemBroadcast& m) {
  json j{{"code", m.code}};
  put_item(j, m.item);
  return j;
}
inline json body_of(const BoardOpRequest& m) {
  json j{{"code", m.code}, {"pid", m.pid}, {"cmid", m.cmid}};
  put_args(j, m.kind, m.target, m.args);
  return j;
}
inline json body_of(const OpBroadcast& m) {
  json j{{"code", m.code}, {"oseq", m.oseq}, {"pid", m.pid}, {"cmid", m.cmid}};
  put_args(j, m.kind, m.target, m.args);
  return j;
}
inline json body_of(const Resume& m) { return {{"code", m.code}, {"pid", m.pid}, {"seq", m.seq}}; }
inline json body_of(const ResumeBatch& m) {
  json items = json::array();
  for (const auto& i : m.items) {
    json e;
    put_item(e, i);
    items.push_back(std::move(e));
  }
  return {{"code", m.code}, {"phase", std::string(to_string(m.phase))}, {"seq", m.seq}, {"items", items}};
}
inline json body_of(const DrawStimulus& m) {
  json j{{"code", m.code}, {"pid", m.pid}, {"deck", m.deck}, {"n", m.n}};
  if (m.seed) j["seed"] = *m.seed;
  if (m.topic) j["topic"] = *m.topic;
  return j;
}
inline json body_of(const StimulusCards& m) {
  json cards = json::array();
  for (const auto& c : m.cards) {
    json e{{"deck", c.deck_id}, {"entry", c.entry}, {"prompt", c.prompt}};
    if (c.pattern_id) e["pattern"] = *c.pattern_id;
    cards.push_back(std::move(e));
  }
  return {{"code", m.code}, {"cards", cards}, {"prompt", m.prompt}};
}
inline json body_of(const ErrorReply& m) {
  json j{{"err", std::string(to_string(m.err))}, {"body", m.body}};
  if (m.code) j["code"] = *m.code;
  if (m.cmid) j["cmid"] = *m.cmid;
  if (m.retry_ms) j["retry_ms"] = *m.retry_ms;
  return j;
}

// Decoding helpers: all field problems are schema errors, except keys the
// type does not define, which are unknown_field.
class Fields {
 public:
  Fields(const json& j, std::string_view type) : r_(j, std::string(type)), type_(type) {}

  std::string str(const char* k) { return r_.str(k); }
  std::optional<std::string> opt_str(const char* k) { return r_.opt_str(k); }
  std::uint64_t u64(const char* k) { return r_.u64(k); }
  std::optional<std::uint64_t> opt_u64(const char* k) {
    if (!r_.has(k)) return std::nullopt;
    return r_.u64(k);
  }
  std::int32_t i32(const char* k) {
    const auto v = r_.i64(k);
    if (v < INT32_MIN || v > INT32_MAX) schema_error(type_, std::string(k) + " out of range");
    return static_cast<std::int32_t>(v);
  }
  bool boolean(const char* k) { return r_.boolean(k); }
  bool has(const char* k) const { return r_.has(k); }
  const json& array(const char* k) { return r_.array(k); }

  template <typename Enum, std::size_t N>
  Enum enumeration(const char* k, const Enum (&all)[N]) {
    return parse_enum(str(k), all, ErrorCode::schema, std::string(type_) + "/" + k);
  }

  Item item() {
    Item i;
    i.seq = u64("seq");
    i.pid = str("pid");
    i.cmid = str("cmid");
    i.kind = enumeration("kind", kAllItemKinds);
    i.body = str("body");
    return i;
  }

  void args(OpKind* kind, std::uint64_t* target, OpPayload* a) {
    *kind = enumeration("kind", kAllOpKinds);
    *target = u64("target");
    a->tag = opt_str("tag");
    a->cluster_id = opt_str("cluster");
    if (has("x") || has("y")) a->position = Position{i32("x"), i32("y")};
    if (has("value")) a->vote = i32("value");
    if (has("phase")) a->phase = enumeration("phase", kAllPhases);
  }

  void finish() { r_.finish(); }

 private:
  ObjectReader r_;
  std::string_view type_;
};

inline Message decode_body(std::string_view type, const json& j) {
  Fields f(j, type);
  f.str("type");
  f.u64("v");
  Message out;
  if (type == "hello") {
    Hello m;
    m.code = f.str("code");
    m.name = f.str("name");
    m.role = f.enumeration("role", kAllRoles);
    m.pid = f.opt_str("pid");
    out = m;
  } else if (type == "welcome") {
    Welcome m;
    m.code = f.str("code");
    m.pid = f.str("pid");
    m.phase = f.enumeration("phase", kAllPhases);
    m.seq = f.u64("seq");
    out = m;
  } else if (type == "contribute") {
    Contribute m;
    m.code = f.str("code");
    m.pid = f.str("pid");
    m.cmid = f.str("cmid");
    m.kind = f.enumeration("kind", kAllItemKinds);
    m.body = f.str("body");
    out = m;
  } else if (type == "ack") {
    Ack m;
    m.code = f.str("code");
    m.pid = f.str("pid");
    m.cmid = f.str("cmid");
    m.seq = f.u64("seq");
    m.dup = f.boolean("dup");
    out = m;
  } else if (type == "item_broadcast") {
    ItemBroadcast m;
    m.code = f.str("code");
    m.item = f.item();
    out = m;
  } else if (type == "board_op") {
    BoardOpRequest m;
    m.code = f.str("code");
    m.pid = f.str("pid");
    m.cmid = f.str("cmid");
    f.args(&m.kind, &m.target, &m.args);
    out = m;
  } else if (type == "op_broadcast") {
    OpBroadcast m;
    m.code = f.str("code");
    m.oseq = f.u64("oseq");
    m.pid = f.str("pid");
    m.cmid = f.str("cmid");
    f.args(&m.kind, &m.target, &m.args);
    out = m;
  } else if (type == "resume") {
    Resume m;
    m.code = f.str("code");
    m.pid = f.str("pid");
    m.seq = f.u64("seq");
    out = m;
  } else if (type == "resume_batch") {
    ResumeBatch m;
    m.code = f.str("code");
    m.phase = f.enumeration("phase", kAllPhases);
    m.seq = f.u64("seq");
    const json& items = f.array("items");
    for (std::size_t i = 0; i < items.size(); ++i) {
      Fields e(items[i], "resume_batch/items");
      m.items.push_back(e.item());
      e.finish();
    }
    out = m;
  } else if (type == "draw_stimulus") {
    DrawStimulus m;
    m.code = f.str("code");
    m.pid = f.str("pid");
    m.deck = f.str("deck");
    m.n = f.u64("n");
    m.seed = f.opt_u64("seed");
    m.topic = f.opt_str("topic");
    out = m;
  } else if (type == "stimulus_card") {
    StimulusCards m;
    m.code = f.str("code");
    m.prompt = f.str("prompt");
    const json& cards = f.array("cards");
    for (std::size_t i = 0; i < cards.size(); ++i) {
      Fields e(cards[i], "stimulus_card/cards");
      StimulusCard c;
      c.deck_id = e.str("deck");
      c.entry = e.str("entry");
      c.prompt = e.str("prompt");
      c.pattern_id = e.opt_str("pattern");
      e.finish();
      m.cards.push_back(std::move(c));
    }
    out = m;
  } else {
    ErrorReply m;
    m.err = f.enumeration("err", kAllErrorCodes);
    m.body = f.str("body");
    m.code = f.opt_str("code");
    m.cmid = f.opt_str("cmid");
    m.retry_ms = f.opt_u64("retry_ms");
    out = m;
  }
  f.finish();
  return out;
}

inline constexpr std::string_view kTypeNames[] = {
    "hello",  "welcome",      "contribute",    "ack",           "item_broadcast", "board_op",
    "op_broadcast", "resume", "resume_batch",  "draw_stimulus", "stimulus_card",  "error"};

}  // namespace detail

inline Frame encode(const Message& m) {
  return std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        detail::validate(v);
        json j = detail::body_of(v);
        j["type"] = std::string(type_name<T>());
        j["v"] = kProtocolVersion;
        return canonical_dump(j);
      },
      m);
}

inline Message decode(std::string_view frame) {
  json j;
  try {
    j = json::parse(frame.begin(), frame.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::malformed, std::string("malformed frame: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::malformed, "frame is not an object");
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) fail(ErrorCode::schema, "frame has no type");
  const std::string type = type_it->get<std::string>();
  bool known = false;
  for (auto t : detail::kTypeNames) known = known || t == type;
  if (!known) fail(ErrorCode::unknown_type, "unknown message type '" + type + "'");
  const auto v_it = j.find("v");
  if (v_it == j.end()) fail(ErrorCode::schema, type + ": missing v");
  if (!v_it->is_number_integer() || v_it->get<std::int64_t>() != kProtocolVersion)
    fail(ErrorCode::version_mismatch, "unsupported protocol version " + v_it->dump());
  Message m = detail::decode_body(type, j);
  std::visit([](const auto& v) { detail::validate(v); }, m);
  return m;
}

// ---------------------------------------------------------------------------
// Resume

inline ResumeBatch plan_resume(std::uint64_t last_seen_seq, const Session& s) {
  if (last_seen_seq > s.max_seq())
    fail(ErrorCode::out_of_range, "last seen seq " + std::to_string(last_seen_seq) +
                                      " is beyond the board's max seq " + std::to_string(s.max_seq()));
  ResumeBatch batch{s.code(), s.phase(), s.max_seq(), {}};
  for (std::uint64_t seq = last_seen_seq + 1; seq <= s.max_seq(); ++seq)
    batch.items.push_back(to_wire(*s.find_item(seq)));
  return batch;
}

// Client-side board mirror. Live broadcasts that arrive ahead of a pending
// resume batch are held back until the batch fills the gap; anything at or
// below the mirror's high-water mark is a duplicate and ignored.
class BoardMirror {
 public:
  void on_broadcast(const Item& item) {
    if (item.seq <= last_seen()) {
      ++duplicates_;
      return;
    }
    if (item.seq == last_seen() + 1) {
      items_.push_back(item);
      drain();
    } else {
      held_.emplace(item.seq, item);
    }
  }

  void on_batch(const ResumeBatch& batch) {
    for (const auto& item : batch.items) on_broadcast(item);
    phase_ = batch.phase;
  }

  std::uint64_t last_seen() const { return items_.empty() ? 0 : items_.back().seq; }
  const std::vector<Item>& items() const { return items_; }
  bool has_gap() const { return !held_.empty(); }
  std::size_t duplicates() const { return duplicates_; }
  Phase phase() const { return phase_; }
  void set_phase(Phase p) { phase_ = p; }

 private:
  void drain() {
    for (auto it = held_.begin(); it != held_.end() && it->first <= last_seen() + 1;) {
      if (it->first == last_seen() + 1) items_.push_back(it->second);
      it = held_.erase(it);
    }
  }

  std::vector<Item> items_;
  std::map<std::uint64_t, Item> held_;
  std::size_t duplicates_ = 0;
  Phase phase_ = Phase::collect;
};

}  // namespace xc::wire
