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

// Load generator: N participants each send M contributes as fast as the
// server lets them, every participant also observes the board, and the run
// checks that all observers saw the same gapless seq order.
//
// Each client keeps a send window. It starts wide (zero think time means a
// burst), collapses to 1 on a rate-limit reply and regrows by one per ack,
// so a limited client settles at roughly the server's rate while every
// rejected item is resent with its original client message id.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xc/error.hpp"
#include "xc/http_client.hpp"
#include "xc/json_util.hpp"
#include "xc/random.hpp"
#include "xc/wire_protocol.hpp"

namespace xc::bench {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using client::Endpoint;

inline constexpr std::size_t kMaxWindow = 32;

struct BenchOptions {
  Endpoint server;
  std::size_t participants = 10;
  std::size_t items = 10;  // per participant
  std::uint64_t seed = 1;
  std::uint32_t think_ms = 0;
  std::chrono::milliseconds timeout = std::chrono::seconds(300);
  std::optional<std::string> session;  // use an existing session instead of creating one
  std::map<std::string, std::string> create_headers;
  // Called on every first ack, with the running ack count.
  std::function<void(const std::string& cmid, std::uint64_t seq, std::size_t acked)> on_ack;
};

struct BenchReport {
  std::string session;
  std::size_t participants = 0;
  std::size_t items_sent = 0;
  std::size_t items_acked = 0;
  double duration = 0;    // seconds
  double throughput = 0;  // acked items per second
  std::size_t order_violations = 0;
  std::size_t lost_items = 0;
  std::size_t connection_failures = 0;
  std::size_t rate_limited = 0;  // rejections that were retried
  std::size_t errors = 0;        // other error replies
  bool aborted = false;
  std::vector<std::pair<std::string, std::uint64_t>> acks;  // (pid/cmid, seq), in ack order

  bool ok() const { return !aborted && lost_items == 0 && order_violations == 0; }

  json to_json() const {
    return {{"session", session},
            {"participants", participants},
            {"items_sent", items_sent},
            {"items_acked", items_acked},
            {"duration", duration},
            {"throughput", throughput},
            {"order_violations", order_violations},
            {"lost_items", lost_items},
            {"connection_failures", connection_failures},
            {"rate_limited", rate_limited},
            {"errors", errors},
            {"aborted", aborted}};
  }
};

// Seeded idea texts: short phrases over a fixed vocabulary, so clustering a
// bench board finds real overlaps.
inline std::vector<std::string> bench_bodies(std::uint64_t seed, std::size_t count) {
  static constexpr const char* kWords[] = {
      "solar",   "kiosk",   "bike",    "share",    "market",  "night",   "garden", "roof",    "school",
      "library", "repair",  "cafe",    "water",    "bus",     "lane",    "tree",   "bench",   "light",
      "battery", "compost", "tool",    "swap",     "studio",  "festival", "river", "bridge",  "park",
      "app",     "map",     "sensor",  "coop",     "kitchen", "mural",   "square", "stall",   "train",
      "charger", "parcel",  "locker",  "workshop", "clinic",  "playground", "fountain", "tram", "ferry",
      "orchard", "beehive", "pantry",  "toolbox",  "hub"};
  constexpr std::size_t n = std::size(kWords);
  SplitMix64 rng(Seed{seed});
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = 2 + rng.below(3);
    std::string body;
    for (std::size_t w : shuffled_prefix(rng, n, len)) body += (body.empty() ? "" : " ") + std::string(kWords[w]);
    out.push_back(std::move(body));
  }
  return out;
}

namespace detail {

class Run;

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(Run& run, net::io_context& ioc, std::size_t index) : run_(run), ws_(ioc), timer_(ioc), index_(index) {}

  void start(const tcp::resolver::results_type& where);
  void begin_sending() { pump(); }
  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  std::size_t index() const { return index_; }
  bool failed() const { return failed_; }
  bool welcomed() const { return !pid_.empty(); }
  const std::string& pid() const { return pid_; }
  const std::vector<wire::Item>& transcript() const { return transcript_; }

  std::deque<std::size_t> queue;  // item numbers still to send
  std::size_t in_flight = 0;

 private:
  void read();
  void on_frame(const std::string& text);
  void pump();
  void send(std::string frame);
  void write_next();
  void fail_connection();

  Run& run_;
  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  std::size_t index_;
  std::string pid_;
  beast::flat_buffer buf_;
  std::deque<std::string> outq_;
  bool writing_ = false;
  bool waiting_ = false;  // backing off after a rate limit or think time
  bool failed_ = false;
  std::size_t window_ = kMaxWindow;
  std::vector<wire::Item> transcript_;
};

class Run {
 public:
  Run(const BenchOptions& opt, std::string code) : opt_(opt), code_(std::move(code)), tick_(ioc_) {
    bodies_ = bench_bodies(opt.seed, opt.participants * opt.items);
  }

  BenchReport go() {
    tcp::resolver resolver(ioc_);
    beast::error_code ec;
    const auto where = resolver.resolve(opt_.server.host, std::to_string(opt_.server.port), ec);
    if (ec) fail(ErrorCode::io, "resolve " + opt_.server.host + ": " + ec.message());
    for (std::size_t i = 0; i < opt_.participants; ++i) {
      auto c = std::make_shared<Client>(*this, ioc_, i);
      for (std::size_t k = 0; k < opt_.items; ++k) c->queue.push_back(k);
      clients_.push_back(c);
    }
    start_ = std::chrono::steady_clock::now();
    for (auto& c : clients_) c->start(where);
    schedule_tick();
    ioc_.run();
    return report();
  }

  const std::string& code() const { return code_; }
  std::uint32_t think_ms() const { return opt_.think_ms; }

  std::string cmid(std::size_t client, std::size_t k) const {
    return "b" + std::to_string(client) + "-" + std::to_string(k);
  }
  const std::string& body(std::size_t client, std::size_t k) const { return bodies_[client * opt_.items + k]; }

  void on_welcome() {
    ++settled_;
    maybe_begin();
  }

  void on_connection_failed(const Client& c) {
    if (finished_) return;
    ++connection_failures_;
    if (!c.welcomed()) {
      ++settled_;
      maybe_begin();
    }
    // Items this client never resolved stay unacked, which the report counts as lost.
    if (connection_failures_ * 20 > opt_.participants) {
      aborted_ = true;
      finish();
    }
  }

  void on_sent(std::size_t client, std::size_t k) { sent_.insert(client * opt_.items + k); }

  void on_ack(const Client& c, std::size_t k, const wire::Ack& a) {
    const auto key = c.index() * opt_.items + k;
    if (!acked_.emplace(key, a.seq).second) return;
    report_.acks.emplace_back(c.pid() + "/" + a.cmid, a.seq);
    if (opt_.on_ack) opt_.on_ack(a.cmid, a.seq, acked_.size());
  }

  void on_rate_limited() { ++rate_limited_; }
  void on_error() { ++errors_; }
  void on_resolved_without_ack() { ++unresolved_errors_; }

 private:
  void maybe_begin() {
    if (begun_ || settled_ < clients_.size()) return;
    begun_ = true;
    for (auto& c : clients_)
      if (c->welcomed() && !c->failed()) c->begin_sending();
  }

  void schedule_tick() {
    tick_.expires_after(std::chrono::milliseconds(20));
    tick_.async_wait([this](beast::error_code ec) {
      if (ec || finished_) return;
      if (done() || std::chrono::steady_clock::now() - start_ > opt_.timeout) {
        if (!done()) aborted_ = true;
        finish();
        return;
      }
      schedule_tick();
    });
  }

  // Every item is acked or has failed, and every live observer has caught up.
  bool done() const {
    if (!begun_) return false;
    std::size_t live = 0;
    for (const auto& c : clients_) {
      if (c->failed()) continue;
      ++live;
      if (!c->queue.empty() || c->in_flight > 0) return false;
    }
    if (live == 0) return true;
    const std::uint64_t max_seq = max_acked_seq();
    for (const auto& c : clients_) {
      if (c->failed()) continue;
      if (c->transcript().empty() ? max_seq > 0 : c->transcript().back().seq < max_seq) return false;
    }
    return true;
  }

  std::uint64_t max_acked_seq() const {
    std::uint64_t m = 0;
    for (const auto& [_, seq] : acked_) m = std::max(m, seq);
    return m;
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    end_ = std::chrono::steady_clock::now();
    tick_.cancel();
    for (auto& c : clients_) c->close();
  }

  BenchReport report() {
    if (!finished_) end_ = std::chrono::steady_clock::now();
    BenchReport& r = report_;
    r.session = code_;
    r.participants = opt_.participants;
    r.items_sent = sent_.size();
    r.items_acked = acked_.size();
    r.duration = std::chrono::duration<double>(end_ - start_).count();
    r.throughput = r.duration > 0 ? static_cast<double>(r.items_acked) / r.duration : 0.0;
    r.lost_items = r.items_sent - r.items_acked;
    r.connection_failures = connection_failures_;
    r.rate_limited = rate_limited_;
    r.errors = errors_;
    r.aborted = aborted_;

    // Seq each (pid, cmid) was acked with; a broadcast disagreeing with it is
    // an order violation as much as a gap is.
    std::map<std::uint64_t, std::string> owner;
    for (const auto& [key, seq] : r.acks) owner.emplace(seq, key);
    const std::uint64_t max_seq = max_acked_seq();
    for (const auto& c : clients_) {
      if (c->failed()) continue;
      std::uint64_t expect = 1;
      for (const auto& item : c->transcript()) {
        if (item.seq != expect) ++r.order_violations;
        const auto o = owner.find(item.seq);
        if (o != owner.end() && o->second != item.pid + "/" + item.cmid) ++r.order_violations;
        expect = item.seq + 1;
      }
      if (!aborted_ && expect <= max_seq) ++r.order_violations;  // observer fell short
    }
    return r;
  }

  BenchOptions opt_;
  std::string code_;
  net::io_context ioc_;
  net::steady_timer tick_;
  std::vector<std::string> bodies_;
  std::vector<std::shared_ptr<Client>> clients_;
  std::set<std::size_t> sent_;
  std::map<std::size_t, std::uint64_t> acked_;
  std::size_t settled_ = 0;
  std::size_t connection_failures_ = 0;
  std::size_t rate_limited_ = 0;
  std::size_t errors_ = 0;
  std::size_t unresolved_errors_ = 0;
  bool begun_ = false;
  bool finished_ = false;
  bool aborted_ = false;
  std::chrono::steady_clock::time_point start_, end_;
  BenchReport report_;
};

inline void Client::start(const tcp::resolver::results_type& where) {
  auto& layer = beast::get_lowest_layer(ws_);
  layer.expires_after(std::chrono::seconds(30));
  layer.async_connect(where, [self = shared_from_this()](beast::error_code ec, const tcp::endpoint&) {
    if (ec) return self->fail_connection();
    beast::error_code ignored;
    beast::get_lowest_layer(self->ws_).socket().set_option(tcp::no_delay(true), ignored);
    self->ws_.async_handshake("localhost", "/v1/sessions/" + self->run_.code() + "/stream",
                              [self](beast::error_code ec) {
                                if (ec) return self->fail_connection();
                                beast::get_lowest_layer(self->ws_).expires_never();
                                self->ws_.text(true);
                                self->read();
                                self->send(wire::encode(wire::Hello{self->run_.code(),
                                                                    "bench-" + std::to_string(self->index_),
                                                                    Role::contributor, std::nullopt}));
                              });
  });
}

inline void Client::fail_connection() {
  if (failed_) return;
  failed_ = true;
  timer_.cancel();
  run_.on_connection_failed(*this);
}

inline void Client::read() {
  ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) return self->fail_connection();
    const std::string text = beast::buffers_to_string(self->buf_.data());
    self->buf_.consume(self->buf_.size());
    self->on_frame(text);
    if (!self->failed_) self->read();
  });
}

inline void Client::send(std::string frame) {
  outq_.push_back(std::move(frame));
  if (!writing_) write_next();
}

inline void Client::write_next() {
  writing_ = true;
  ws_.async_write(net::buffer(outq_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    self->writing_ = false;
    if (ec) return self->fail_connection();
    self->outq_.pop_front();
    if (!self->outq_.empty()) self->write_next();
  });
}

inline void Client::pump() {
  const std::size_t window = run_.think_ms() ? 1 : window_;
  while (!failed_ && !waiting_ && in_flight < window && !queue.empty()) {
    const std::size_t k = queue.front();
    queue.pop_front();
    ++in_flight;
    run_.on_sent(index_, k);
    send(wire::encode(wire::Contribute{run_.code(), pid_, run_.cmid(index_, k), ItemKind::text, run_.body(index_, k)}));
  }
}

inline void Client::on_frame(const std::string& text) {
  wire::Message m;
  try {
    m = wire::decode(text);
  } catch (const Error&) {
    run_.on_error();
    return;
  }
  auto item_of = [&](const std::string& cmid) -> std::optional<std::size_t> {
    const std::string prefix = "b" + std::to_string(index_) + "-";
    if (!cmid.starts_with(prefix)) return std::nullopt;
    return std::stoul(cmid.substr(prefix.size()));
  };
  if (auto* w = std::get_if<wire::Welcome>(&m)) {
    pid_ = w->pid;
    run_.on_welcome();
  } else if (auto* a = std::get_if<wire::Ack>(&m)) {
    const auto k = item_of(a->cmid);
    if (!k) return;
    --in_flight;
    run_.on_ack(*this, *k, *a);
    window_ = std::min(kMaxWindow, window_ + 1);
    if (run_.think_ms() && !queue.empty()) {
      waiting_ = true;
      timer_.expires_after(std::chrono::milliseconds(run_.think_ms()));
      timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
        if (ec) return;
        self->waiting_ = false;
        self->pump();
      });
    } else {
      pump();
    }
  } else if (auto* b = std::get_if<wire::ItemBroadcast>(&m)) {
    transcript_.push_back(b->item);
  } else if (auto* e = std::get_if<wire::ErrorReply>(&m)) {
    const auto k = e->cmid ? item_of(*e->cmid) : std::nullopt;
    if (!k) {
      run_.on_error();
      return;
    }
    --in_flight;
    if (e->err == ErrorCode::rate_limited) {
      run_.on_rate_limited();
      queue.push_front(*k);
      window_ = 1;
      if (!waiting_) {
        waiting_ = true;
        timer_.expires_after(std::chrono::milliseconds(e->retry_ms.value_or(100)));
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
          if (ec) return;
          self->waiting_ = false;
          self->pump();
        });
      }
    } else {
      run_.on_error();
      run_.on_resolved_without_ack();
      pump();
    }
  }
}

}  // namespace detail

inline BenchReport run_bench(const BenchOptions& opt) {
  if (opt.participants == 0 || opt.items == 0) fail(ErrorCode::invalid_argument, "participants and items must be positive");
  std::string code;
  if (opt.session) {
    code = *opt.session;
  } else {
    const auto res = client::http_post(opt.server, "/v1/sessions", "", opt.create_headers);
    if (res.status != 201) fail(ErrorCode::io, "session creation failed: HTTP " + std::to_string(res.status) + " " + res.body);
    code = json::parse(res.body).at("code").get<std::string>();
  }
  detail::Run run(opt, code);
  return run.go();
}

}  // namespace xc::bench
