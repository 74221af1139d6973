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

// Append-only per-session event log. Each line is one canonical JSON record:
//
//   {"at":<ms>,"code":"K7QX2M","event":"item_ingested","payload":{...},"rseq":7}
//
// rseq is gapless from 1 and the first record is always session_created.
// Replaying records 1..k through session_core yields the state after event k.
// A final line without its newline is a torn write and is discarded; any
// other unreadable line makes the log corrupt.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xc/error.hpp"
#include "xc/json_util.hpp"
#include "xc/session_core.hpp"

namespace xc::log {

enum class EventKind {
  session_created,
  participant_joined,
  item_ingested,
  board_op_applied,
  snapshot_taken,
  phase_changed,
};

inline constexpr EventKind kAllEventKinds[] = {
    EventKind::session_created, EventKind::participant_joined, EventKind::item_ingested,
    EventKind::board_op_applied, EventKind::snapshot_taken,    EventKind::phase_changed};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::session_created: return "session_created";
    case EventKind::participant_joined: return "participant_joined";
    case EventKind::item_ingested: return "item_ingested";
    case EventKind::board_op_applied: return "board_op_applied";
    case EventKind::snapshot_taken: return "snapshot_taken";
    case EventKind::phase_changed: return "phase_changed";
  }
  return "?";
}

struct EventRecord {
  std::string code;
  std::uint64_t rseq = 0;
  Timestamp at = 0;
  EventKind event = EventKind::session_created;
  json payload = json::object();

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

inline std::string encode_record(const EventRecord& r) {
  return canonical_dump(json{{"code", r.code},
                             {"rseq", r.rseq},
                             {"at", r.at},
                             {"event", std::string(to_string(r.event))},
                             {"payload", r.payload}});
}

inline EventRecord decode_record(std::string_view line, const std::string& where) {
  json j;
  try {
    j = parse_json(line, ErrorCode::corrupt_log);
  } catch (const Error& e) {
    fail(ErrorCode::corrupt_log, where + ": " + e.what());
  }
  ObjectReader r(j, where, ErrorCode::corrupt_log, ErrorCode::corrupt_log);
  EventRecord rec;
  rec.code = r.str("code");
  rec.rseq = r.u64("rseq");
  rec.at = r.i64("at");
  rec.event = parse_enum(r.str("event"), kAllEventKinds, ErrorCode::corrupt_log, where + "/event");
  rec.payload = r.raw("payload");
  if (!rec.payload.is_object()) fail(ErrorCode::corrupt_log, where + "/payload: expected object");
  r.finish();
  return rec;
}

// Record payloads. Each carries what the matching session_core call
// produced, so replay can both redo the call and check its outcome.
inline json created_payload(const Session& s) { return {{"created_at", s.created_at()}}; }
inline json joined_payload(const Participant& p) { return to_json(p); }
inline json ingested_payload(const BoardItem& item) { return to_json(item); }
inline json op_payload(const BoardOp& op) { return to_json(op); }
inline json snapshot_payload(const Snapshot& snap) {
  return {{"snapshot_seq", snap.snapshot_seq}, {"taken_at", snap.taken_at}};
}

inline EventKind event_for(const BoardOp& op) {
  return op.kind == OpKind::set_phase ? EventKind::phase_changed : EventKind::board_op_applied;
}

// Folds records one at a time. Every record is checked against the state it
// produces; any disagreement is corrupt_log.
class Replayer {
 public:
  void apply(const EventRecord& r) {
    const std::string where = "record " + std::to_string(r.rseq);
    auto corrupt = [&](const std::string& why) { fail(ErrorCode::corrupt_log, where + ": " + why); };
    if (r.rseq != applied_ + 1)
      corrupt("expected rseq " + std::to_string(applied_ + 1) + " (gap in log)");
    if (!session_) {
      if (r.event != EventKind::session_created) corrupt("log does not start with session_created");
    } else if (r.event == EventKind::session_created) {
      corrupt("second session_created");
    } else if (r.code != session_->code()) {
      corrupt("record for session '" + r.code + "' in log of '" + session_->code() + "'");
    }
    try {
      apply_event(r, corrupt);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::corrupt_log) throw;
      corrupt(std::string(xc::to_string(e.code())) + ": " + e.what());
    }
    applied_ = r.rseq;
    last_at_ = r.at;
  }

  bool empty() const { return !session_.has_value(); }
  std::uint64_t applied() const { return applied_; }
  Timestamp last_at() const { return last_at_; }
  const Session& session() const { return *session_; }
  Session take() { return std::move(*session_); }

 private:
  template <typename Corrupt>
  void apply_event(const EventRecord& r, Corrupt&& corrupt) {
    const std::string where = "record " + std::to_string(r.rseq) + "/payload";
    switch (r.event) {
      case EventKind::session_created: {
        ObjectReader p(r.payload, where, ErrorCode::corrupt_log, ErrorCode::corrupt_log);
        session_.emplace(r.code, p.i64("created_at"));
        p.finish();
        if (!is_valid_join_code(r.code)) corrupt("invalid session code");
        break;
      }
      case EventKind::participant_joined: {
        const Participant want = participant_from_json(r.payload, where);
        const Participant got = session_->join(want.display_name, want.role, want.joined_at);
        if (!(got == want)) corrupt("participant replay mismatch");
        break;
      }
      case EventKind::item_ingested: {
        const BoardItem want = item_from_json(r.payload, where);
        const auto got = session_->ingest(want.author_id, want.client_msg_id, want.kind, want.body,
                                          want.received_at);
        if (got.duplicate || !(got.item == want)) corrupt("item replay mismatch");
        break;
      }
      case EventKind::board_op_applied:
      case EventKind::phase_changed: {
        const BoardOp want = op_from_json(r.payload, where);
        if (event_for(want) != r.event) corrupt("event kind does not match op kind");
        BoardOpDraft d{want.kind, want.target, want.payload, want.actor, want.client_msg_id};
        const auto got = session_->apply_board_op(d, want.applied_at);
        if (got.duplicate || !(got.op == want)) corrupt("board op replay mismatch");
        break;
      }
      case EventKind::snapshot_taken: {
        ObjectReader p(r.payload, where, ErrorCode::corrupt_log, ErrorCode::corrupt_log);
        if (p.u64("snapshot_seq") != session_->max_seq()) corrupt("snapshot_seq disagrees with log");
        p.i64("taken_at");
        p.finish();
        break;
      }
    }
  }

  std::optional<Session> session_;
  std::uint64_t applied_ = 0;
  Timestamp last_at_ = 0;
};

struct LogContents {
  std::vector<EventRecord> records;
  std::uint64_t valid_bytes = 0;  // length of the prefix made of complete lines
  std::uint64_t torn_bytes = 0;   // trailing bytes after the last newline
};

inline LogContents split_log(std::string_view text, const std::string& name) {
  LogContents out;
  std::size_t pos = 0;
  std::uint64_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.torn_bytes = text.size() - pos;
      break;
    }
    ++line_no;
    out.records.push_back(
        decode_record(text.substr(pos, nl - pos), name + " line " + std::to_string(line_no)));
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

inline std::string read_whole_file(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) fail(ErrorCode::io, "cannot open " + path.string() + ": " + std::strerror(errno));
  std::string data;
  char buf[1 << 16];
  for (;;) {
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      const int err = errno;
      ::close(fd);
      fail(ErrorCode::io, "cannot read " + path.string() + ": " + std::strerror(err));
    }
    if (n == 0) break;
    data.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fd);
  return data;
}

inline LogContents read_log(const std::filesystem::path& path) {
  return split_log(read_whole_file(path), path.filename().string());
}

// Replays records up to and including max_rseq (all when unset).
inline Session replay(const std::vector<EventRecord>& records,
                      std::optional<std::uint64_t> max_rseq = std::nullopt) {
  Replayer rp;
  for (const auto& r : records) {
    if (max_rseq && r.rseq > *max_rseq) break;
    rp.apply(r);
  }
  if (rp.empty()) fail(ErrorCode::unknown_session, "log has no records");
  return rp.take();
}

inline Session replay_file(const std::filesystem::path& path,
                           std::optional<std::uint64_t> max_rseq = std::nullopt) {
  return replay(read_log(path).records, max_rseq);
}

// Single-writer appender. append() writes a batch and syncs it once; when it
// returns, every record in the batch is on stable storage.
class LogWriter {
 public:
  // Test hook: return true to make the next append fail as a storage error.
  using FaultHook = std::function<bool()>;

  LogWriter() = default;
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;
  ~LogWriter() { close(); }

  // Opens for append. A torn tail (valid_bytes < file size) is cut off first
  // so new records never follow a partial line.
  void open(const std::filesystem::path& path, std::uint64_t next_rseq,
            std::optional<std::uint64_t> valid_bytes = std::nullopt) {
    close();
    const bool existed = std::filesystem::exists(path);
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(ErrorCode::storage, "cannot open " + path.string() + ": " + std::strerror(errno));
    if (valid_bytes && ::ftruncate(fd_, static_cast<off_t>(*valid_bytes)) != 0)
      fail(ErrorCode::storage, "cannot truncate " + path.string() + ": " + std::strerror(errno));
    if (!existed) sync_dir(path.parent_path());
    path_ = path;
    next_rseq_ = next_rseq;
  }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  bool is_open() const { return fd_ >= 0; }
  std::uint64_t next_rseq() const { return next_rseq_; }
  const std::filesystem::path& path() const { return path_; }
  void set_fault_hook(FaultHook hook) { fault_ = std::move(hook); }

  // Assigns rseqs to the batch and writes it.
  void append(std::vector<EventRecord>& batch) {
    if (batch.empty()) return;
    if (fd_ < 0) fail(ErrorCode::storage, "log is not open");
    std::string bytes;
    std::uint64_t rseq = next_rseq_;
    for (auto& r : batch) {
      r.rseq = rseq++;
      bytes += encode_record(r);
      bytes += '\n';
    }
    if (fault_ && fault_()) fail(ErrorCode::storage, "injected storage failure");
    const char* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
      const ssize_t n = ::write(fd_, p, left);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) fail(ErrorCode::storage, "write " + path_.string() + ": " + std::strerror(errno));
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_) != 0)
      fail(ErrorCode::storage, "sync " + path_.string() + ": " + std::strerror(errno));
    next_rseq_ = rseq;
  }

 private:
  static void sync_dir(const std::filesystem::path& dir) {
    const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
  }

  int fd_ = -1;
  std::filesystem::path path_;
  std::uint64_t next_rseq_ = 1;
  FaultHook fault_;
};

}  // namespace xc::log
