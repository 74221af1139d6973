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

// Per-session single writer. Connections submit decoded requests; a drain
// pass takes every queued request, applies them in arrival order, appends the
// resulting records with one sync, and only then hands frames to peers. This
// keeps broadcast order equal to seq order and makes every ack durable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "xc/error.hpp"
#include "xc/event_log.hpp"
#include "xc/session_core.hpp"
#include "xc/stimulus_engine.hpp"
#include "xc/wire_protocol.hpp"

namespace xc::server {

using SteadyClock = std::chrono::steady_clock;

// Classic token bucket. take() returns 0 when a token was spent, otherwise
// the wait in milliseconds until one will be available.
class TokenBucket {
 public:
  TokenBucket(double rate, double burst, SteadyClock::time_point now)
      : rate_(rate), burst_(burst), tokens_(burst), last_(now) {}

  std::uint64_t take(SteadyClock::time_point now) {
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return 0;
    }
    return static_cast<std::uint64_t>(std::ceil((1.0 - tokens_) / rate_ * 1000.0));
  }

 private:
  double rate_;
  double burst_;
  double tokens_;
  SteadyClock::time_point last_;
};

// A connection as the host sees it. deliver() and completed() may be called
// from any thread and must not block.
class Peer {
 public:
  virtual ~Peer() = default;
  virtual void deliver(std::shared_ptr<const std::string> frame) = 0;
  // One submitted request has been fully handled (backpressure credit).
  virtual void completed() = 0;
  virtual void close_after_flush() = 0;
};

struct HostEnv {
  double rate_limit = 10.0;
  double burst = 30.0;
  const std::map<std::string, Deck>* decks = nullptr;
  PromptTemplates templates;
  std::function<Timestamp()> now = system_now;
  std::function<SteadyClock::time_point()> steady = [] { return SteadyClock::now(); };
  std::function<std::uint64_t()> entropy = [] {
    thread_local std::random_device rd;
    return (std::uint64_t{rd()} << 32) ^ rd();
  };
  // Runs the drain. Servers post to their executor; tests may run inline.
  std::function<void(std::function<void()>)> post = [](std::function<void()> f) { f(); };
  log::LogWriter::FaultHook fault;
};

struct Command {
  std::shared_ptr<Peer> from;
  wire::Message msg;
};

struct HostInfo {
  std::string code;
  Timestamp created_at = 0;
  Phase phase = Phase::collect;
  std::size_t participants = 0;
  std::uint64_t items = 0;
  std::size_t board_ops = 0;
  std::size_t connected = 0;
  bool read_only = false;

  json to_json() const {
    return {{"code", code},           {"created_at", created_at}, {"phase", std::string(xc::to_string(phase))},
            {"participants", participants}, {"items", items},     {"board_ops", board_ops},
            {"connected", connected}, {"read_only", read_only}};
  }
};

class SessionHost : public std::enable_shared_from_this<SessionHost> {
 public:
  // New session: writes its session_created record before returning.
  static std::shared_ptr<SessionHost> create(const std::string& code, const std::filesystem::path& log_path,
                                             HostEnv env) {
    auto h = std::shared_ptr<SessionHost>(new SessionHost(Session(code, env.now()), std::move(env)));
    h->log_.open(log_path, 1);
    h->log_.set_fault_hook(h->env_.fault);
    std::vector<log::EventRecord> recs{
        {code, 0, h->session_.created_at(), log::EventKind::session_created, log::created_payload(h->session_)}};
    h->log_.append(recs);
    return h;
  }

  // Existing session: replays the log, cuts a torn tail, reopens for append.
  static std::shared_ptr<SessionHost> restore(const std::filesystem::path& log_path, HostEnv env) {
    const auto contents = log::read_log(log_path);
    log::Replayer rp;
    for (const auto& r : contents.records) rp.apply(r);
    if (rp.empty()) fail(ErrorCode::unknown_session, log_path.string() + " has no records");
    const Timestamp last_at = rp.last_at();
    auto h = std::shared_ptr<SessionHost>(new SessionHost(rp.take(), std::move(env)));
    h->log_.open(log_path, contents.records.size() + 1,
                 contents.torn_bytes ? std::optional<std::uint64_t>(contents.valid_bytes) : std::nullopt);
    h->log_.set_fault_hook(h->env_.fault);
    h->last_activity_ = last_at;
    return h;
  }

  const std::string& code() const { return code_; }

  void submit(Command cmd) {
    bool start = false;
    {
      std::lock_guard lk(inbox_mu_);
      inbox_.push_back(std::move(cmd));
      if (!draining_) start = draining_ = true;
    }
    if (start) env_.post([self = shared_from_this()] { self->drain(); });
  }

  // Connection went away; it stops receiving broadcasts.
  void detach(const Peer* peer) {
    std::lock_guard lk(mu_);
    subscribers_.erase(peer);
  }

  Snapshot take_snapshot() {
    std::lock_guard lk(mu_);
    const Timestamp now = env_.now();
    Snapshot snap = snapshot(session_, now);
    if (!read_only_) {
      std::vector<log::EventRecord> recs{
          {code_, 0, now, log::EventKind::snapshot_taken, log::snapshot_payload(snap)}};
      try {
        log_.append(recs);
      } catch (const Error&) {
        enter_read_only();
      }
    }
    return snap;
  }

  Session copy_session() const {
    std::lock_guard lk(mu_);
    return session_;
  }

  HostInfo info() const {
    std::lock_guard lk(mu_);
    return {code_,
            session_.created_at(),
            session_.phase(),
            session_.participants().size(),
            session_.max_seq(),
            session_.board_ops().size(),
            subscribers_.size(),
            read_only_};
  }

  bool idle_since(Timestamp cutoff) const {
    std::lock_guard lk(mu_);
    return subscribers_.empty() && last_activity_ < cutoff;
  }

  bool read_only() const {
    std::lock_guard lk(mu_);
    return read_only_;
  }

 private:
  struct Subscriber {
    std::weak_ptr<Peer> peer;
    std::string pid;
  };

  struct Out {
    std::vector<std::shared_ptr<Peer>> to;
    std::shared_ptr<const std::string> frame;
    bool close = false;
  };

  struct Batch {
    std::vector<Out> outs;
    std::vector<log::EventRecord> records;
  };

  SessionHost(Session s, HostEnv env)
      : session_(std::move(s)), code_(session_.code()), env_(std::move(env)) {
    last_activity_ = session_.created_at();
  }

  void drain() {
    std::vector<Command> batch;
    {
      std::lock_guard lk(inbox_mu_);
      batch.swap(inbox_);
    }
    process(batch);
    bool again = false;
    {
      std::lock_guard lk(inbox_mu_);
      again = !inbox_.empty();
      if (!again) draining_ = false;
    }
    if (again) env_.post([self = shared_from_this()] { self->drain(); });
  }

  void process(std::vector<Command>& cmds) {
    Batch b;
    {
      std::lock_guard lk(mu_);
      const auto subscribers_before = subscribers_;
      const std::uint64_t durable = log_.next_rseq() - 1;
      for (auto& c : cmds) handle(c, b);
      if (!b.records.empty()) {
        try {
          log_.append(b.records);
          last_activity_ = env_.now();
        } catch (const Error& e) {
          // Nothing from this batch became visible. Roll the state back to
          // what is on disk and refuse further mutations.
          subscribers_ = subscribers_before;
          enter_read_only();
          try {
            session_ = log::replay_file(log_.path(), durable);
          } catch (const Error&) {
            // The in-memory state stays ahead of the disk; read-only keeps it from growing.
          }
          b.outs.clear();
          for (auto& c : cmds) {
            std::optional<std::string> cmid;
            if (auto* m = std::get_if<wire::Contribute>(&c.msg)) cmid = m->cmid;
            if (auto* m = std::get_if<wire::BoardOpRequest>(&c.msg)) cmid = m->cmid;
            b.outs.push_back({{c.from}, frame_of(error_reply(ErrorCode::storage, e.what(), cmid))});
          }
        }
      }
    }
    for (auto& o : b.outs)
      for (auto& p : o.to) {
        p->deliver(o.frame);
        if (o.close) p->close_after_flush();
      }
    for (auto& c : cmds) c.from->completed();
  }

  void enter_read_only() {
    read_only_ = true;
    log_.close();
  }

  static std::shared_ptr<const std::string> frame_of(const wire::Message& m) {
    return std::make_shared<const std::string>(wire::encode(m));
  }

  wire::ErrorReply error_reply(ErrorCode code, std::string what, std::optional<std::string> cmid = {},
                               std::optional<std::uint64_t> retry = {}) const {
    return {code, std::move(what), code_, std::move(cmid), retry};
  }

  void reply(Batch& b, const std::shared_ptr<Peer>& to, const wire::Message& m, bool close = false) {
    b.outs.push_back({{to}, frame_of(m), close});
  }

  void broadcast(Batch& b, const wire::Message& m) {
    Out o{{}, frame_of(m)};
    for (auto it = subscribers_.begin(); it != subscribers_.end();) {
      if (auto p = it->second.peer.lock()) {
        o.to.push_back(std::move(p));
        ++it;
      } else {
        it = subscribers_.erase(it);
      }
    }
    b.outs.push_back(std::move(o));
  }

  void record(Batch& b, log::EventKind kind, Timestamp at, json payload) {
    b.records.push_back({code_, 0, at, kind, std::move(payload)});
  }

  // 0 when allowed, otherwise the retry hint in ms.
  std::uint64_t throttle(const std::string& pid) {
    const auto now = env_.steady();
    auto it = buckets_.find(pid);
    if (it == buckets_.end()) it = buckets_.emplace(pid, TokenBucket(env_.rate_limit, env_.burst, now)).first;
    return it->second.take(now);
  }

  void handle(Command& c, Batch& b) {
    std::visit(
        [&](auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, wire::Hello>) {
            on_hello(c.from, m, b);
          } else if constexpr (std::is_same_v<T, wire::Contribute> || std::is_same_v<T, wire::BoardOpRequest> ||
                               std::is_same_v<T, wire::Resume> || std::is_same_v<T, wire::DrawStimulus>) {
            std::optional<std::string> cmid;
            if constexpr (requires { m.cmid; }) cmid = m.cmid;
            const auto sub = subscribers_.find(c.from.get());
            if (sub == subscribers_.end()) {
              reply(b, c.from, error_reply(ErrorCode::invalid_argument, "send hello first", cmid));
            } else if (m.code != code_) {
              reply(b, c.from, error_reply(ErrorCode::unknown_session, "connection is bound to " + code_, cmid));
            } else if (m.pid != sub->second.pid) {
              reply(b, c.from, error_reply(ErrorCode::forbidden, "pid does not match this connection", cmid));
            } else {
              try {
                on_request(c.from, m, b);
              } catch (const Error& e) {
                reply(b, c.from, error_reply(e.code(), e.what(), cmid));
              }
            }
          } else {
            reply(b, c.from,
                  error_reply(ErrorCode::invalid_argument,
                              "'" + std::string(wire::type_name<T>()) + "' is not a client message"));
          }
        },
        c.msg);
  }

  void on_hello(const std::shared_ptr<Peer>& from, const wire::Hello& m, Batch& b) {
    if (m.code != code_) {
      reply(b, from, error_reply(ErrorCode::unknown_session, "unknown session '" + m.code + "'"), true);
      return;
    }
    if (subscribers_.count(from.get())) {
      reply(b, from, error_reply(ErrorCode::invalid_argument, "already joined"));
      return;
    }
    std::string pid;
    if (m.pid) {
      if (!session_.find_participant(*m.pid)) {
        reply(b, from, error_reply(ErrorCode::unknown_participant, "unknown participant '" + *m.pid + "'"));
        return;
      }
      pid = *m.pid;
    } else {
      if (read_only_) {
        reply(b, from, error_reply(ErrorCode::storage, "session is read-only"));
        return;
      }
      try {
        const Timestamp now = env_.now();
        const Participant p = session_.join(m.name, m.role, now);
        record(b, log::EventKind::participant_joined, now, log::joined_payload(p));
        pid = p.participant_id;
      } catch (const Error& e) {
        reply(b, from, error_reply(e.code(), e.what()));
        return;
      }
    }
    subscribers_[from.get()] = {from, pid};
    reply(b, from, wire::Welcome{code_, pid, session_.phase(), session_.max_seq()});
  }

  void on_request(const std::shared_ptr<Peer>& from, const wire::Contribute& m, Batch& b) {
    if (const auto seq = session_.seen(m.pid, m.cmid)) {
      reply(b, from, wire::Ack{code_, m.pid, m.cmid, *seq, true});
      return;
    }
    if (read_only_) fail(ErrorCode::storage, "session is read-only");
    if (const auto wait = throttle(m.pid)) {
      reply(b, from, error_reply(ErrorCode::rate_limited, "rate limit exceeded", m.cmid, wait));
      return;
    }
    const Timestamp now = env_.now();
    const auto r = session_.ingest(m.pid, m.cmid, m.kind, m.body, now);
    record(b, log::EventKind::item_ingested, now, log::ingested_payload(r.item));
    reply(b, from, wire::Ack{code_, m.pid, m.cmid, r.item.seq, false});
    broadcast(b, wire::ItemBroadcast{code_, wire::to_wire(r.item)});
  }

  static wire::OpBroadcast op_frame(const std::string& code, const BoardOp& op) {
    return {code, op.op_seq, op.actor, op.client_msg_id, op.kind, op.target, op.payload};
  }

  void on_request(const std::shared_ptr<Peer>& from, const wire::BoardOpRequest& m, Batch& b) {
    if (const BoardOp* op = session_.seen_op(m.pid, m.cmid)) {
      reply(b, from, op_frame(code_, *op));
      return;
    }
    if (read_only_) fail(ErrorCode::storage, "session is read-only");
    if (const auto wait = throttle(m.pid)) {
      reply(b, from, error_reply(ErrorCode::rate_limited, "rate limit exceeded", m.cmid, wait));
      return;
    }
    const Timestamp now = env_.now();
    const auto r = session_.apply_board_op({m.kind, m.target, m.args, m.pid, m.cmid}, now);
    record(b, log::event_for(r.op), now, log::op_payload(r.op));
    broadcast(b, op_frame(code_, r.op));
  }

  void on_request(const std::shared_ptr<Peer>& from, const wire::Resume& m, Batch& b) {
    reply(b, from, wire::plan_resume(m.seq, session_));
  }

  void on_request(const std::shared_ptr<Peer>& from, const wire::DrawStimulus& m, Batch& b) {
    if (!env_.decks) fail(ErrorCode::not_found, "no decks loaded");
    const auto deck = env_.decks->find(m.deck);
    if (deck == env_.decks->end()) fail(ErrorCode::not_found, "unknown deck '" + m.deck + "'");
    if (const auto wait = throttle(m.pid)) {
      reply(b, from, error_reply(ErrorCode::rate_limited, "rate limit exceeded", std::nullopt, wait));
      return;
    }
    const Seed seed{m.seed ? *m.seed : env_.entropy()};
    auto cards = draw(deck->second, seed, static_cast<std::size_t>(m.n), env_.templates);
    const std::string topic = m.topic.value_or("");
    std::string prompt = cards.size() >= 2 || !topic.empty()
                             ? forced_connection(cards, topic, env_.templates)
                             : cards.front().prompt;
    reply(b, from, wire::StimulusCards{code_, std::move(cards), std::move(prompt)});
  }

  mutable std::mutex mu_;  // session_, log_, subscribers_, buckets_, read_only_
  Session session_;
  const std::string code_;
  HostEnv env_;
  log::LogWriter log_;
  std::map<const Peer*, Subscriber> subscribers_;
  std::map<std::string, TokenBucket> buckets_;
  bool read_only_ = false;
  Timestamp last_activity_ = 0;

  std::mutex inbox_mu_;
  std::vector<Command> inbox_;
  bool draining_ = false;
};

}  // namespace xc::server
