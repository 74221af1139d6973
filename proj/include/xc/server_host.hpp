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

// HTTP + WebSocket front end over SessionHost.
//
//   POST /v1/sessions                          -> 201 {"code"}
//   GET  /v1/sessions/{code}                   -> session info
//   POST /v1/sessions/{code}/assets            -> 201 {"ref"}
//   GET  /v1/assets/{ref}                      -> asset bytes
//   GET  /v1/sessions/{code}/snapshot          -> snapshot document
//   GET  /v1/sessions/{code}/clusters?threshold=
//   GET  /v1/sessions/{code}/stream            -> WebSocket, one frame per message
//   GET  /v1/catalog, /v1/decks, /v1/patterns/{id}/steps/{i}?detail=card|full
//
// Errors are {"body": message, "err": code} with a matching HTTP status.

#include <unistd.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "xc/asset_store.hpp"
#include "xc/cluster_engine.hpp"
#include "xc/error.hpp"
#include "xc/event_log.hpp"
#include "xc/pattern_model.hpp"
#include "xc/session_host.hpp"
#include "xc/stimulus_engine.hpp"
#include "xc/wire_protocol.hpp"

namespace xc::server {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

inline constexpr std::size_t kMaxInFlight = 32;
inline constexpr int kMaxStrikes = 3;
inline constexpr std::size_t kMaxOutbound = 1 << 16;
inline constexpr std::uint64_t kMiB = 1024 * 1024;
inline constexpr const char* kTestSeedHeader = "X-Test-Seed";

struct ServerConfig {
  std::string bind = "127.0.0.1:8080";
  std::filesystem::path data_dir = "xc-data";
  std::size_t max_sessions = 1024;
  double rate_limit = 10.0;  // messages per second per participant
  double burst = 30.0;
  std::uint64_t asset_cap = 5 * kMiB;
  std::chrono::seconds idle_ttl = std::chrono::hours(24);
  bool test_mode = false;  // honours X-Test-Seed on session creation
  unsigned threads = 0;    // 0 = hardware concurrency
  std::optional<std::filesystem::path> catalog;
  std::optional<std::filesystem::path> decks_dir;
  std::optional<std::filesystem::path> stop_list;
  log::LogWriter::FaultHook storage_fault;  // tests only
};

inline void validate_config(const ServerConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_argument, what); };
  if (c.max_sessions == 0) bad("max sessions must be positive");
  if (!(c.rate_limit > 0)) bad("rate limit must be positive");
  if (!(c.burst >= 1)) bad("burst must be at least 1");
  if (c.asset_cap == 0) bad("asset cap must be positive");
  if (c.idle_ttl.count() <= 0) bad("idle TTL must be positive");
  if (c.data_dir.empty()) bad("data directory must be set");
}

// "host:port" or "[v6]:port".
inline std::pair<std::string, std::uint16_t> parse_host_port(std::string_view s) {
  const auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == s.size())
    fail(ErrorCode::invalid_argument, "expected host:port, got '" + std::string(s) + "'");
  std::string host(s.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  unsigned long port = 0;
  const std::string p(s.substr(colon + 1));
  std::size_t used = 0;
  try {
    port = std::stoul(p, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != p.size() || port > 65535 || host.empty())
    fail(ErrorCode::invalid_argument, "bad bind address '" + std::string(s) + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

struct Resources {
  std::optional<PatternGraph> catalog;
  std::map<std::string, Deck> decks;
  StopList stop;
};

inline Resources load_resources(const ServerConfig& c) {
  Resources r;
  if (c.catalog) r.catalog = load_catalog(log::read_whole_file(*c.catalog));
  if (c.decks_dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(*c.decks_dir))
      if (e.path().string().ends_with(".deck.json")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Deck d = load_deck(log::read_whole_file(f));
      const auto problems = validate_deck(d);
      if (!problems.empty()) fail(ErrorCode::schema, f.string() + ": " + problems.front());
      const std::string id = d.id;
      if (!r.decks.emplace(id, std::move(d)).second) fail(ErrorCode::duplicate_id, "deck '" + id + "' loaded twice");
    }
  }
  if (c.stop_list) r.stop = StopList::parse(log::read_whole_file(*c.stop_list));
  return r;
}

inline http::status status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::unknown_session:
    case ErrorCode::unknown_id:
    case ErrorCode::not_found: return http::status::not_found;
    case ErrorCode::capacity:
    case ErrorCode::rate_limited: return http::status::too_many_requests;
    case ErrorCode::payload_too_large: return http::status::payload_too_large;
    case ErrorCode::conflict: return http::status::conflict;
    case ErrorCode::storage: return http::status::service_unavailable;
    case ErrorCode::io:
    case ErrorCode::integrity:
    case ErrorCode::corrupt_log: return http::status::internal_server_error;
    default: return http::status::bad_request;
  }
}

inline std::string_view sv(beast::string_view s) { return {s.data(), s.size()}; }

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

inline Response make_response(const Request& req, http::status status, std::string body,
                              std::string_view content_type = "application/json") {
  Response res{status, req.version()};
  res.set(http::field::server, "xcboard");
  res.set(http::field::content_type, std::string(content_type));
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

inline Response json_response(const Request& req, http::status status, const json& j) {
  return make_response(req, status, canonical_dump(j));
}

inline Response error_response(const Request& req, ErrorCode code, const std::string& what) {
  return json_response(req, status_for(code), {{"err", std::string(xc::to_string(code))}, {"body", what}});
}

// Minimal target parsing: path segments plus key=value query pairs.
struct Target {
  std::vector<std::string> segments;
  std::map<std::string, std::string> query;
};

inline std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
        std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += s[i] == '+' ? ' ' : s[i];
    }
  }
  return out;
}

inline Target parse_target(std::string_view t) {
  Target out;
  const auto q = t.find('?');
  std::string_view path = t.substr(0, q);
  while (!path.empty()) {
    const auto slash = path.find('/');
    const auto seg = path.substr(0, slash);
    if (!seg.empty()) out.segments.push_back(percent_decode(seg));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  if (q != std::string_view::npos) {
    std::string_view query = t.substr(q + 1);
    while (!query.empty()) {
      const auto amp = query.find('&');
      const auto pair = query.substr(0, amp);
      const auto eq = pair.find('=');
      if (!pair.empty())
        out.query[percent_decode(pair.substr(0, eq))] =
            eq == std::string_view::npos ? "" : percent_decode(pair.substr(eq + 1));
      if (amp == std::string_view::npos) break;
      query.remove_prefix(amp + 1);
    }
  }
  return out;
}

class Server;

class WsConnection : public Peer, public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(Server& server, tcp::socket&& socket, std::string url_code)
      : server_(server), ws_(std::move(socket)), url_code_(std::move(url_code)) {}

  void run(Request req) {
    req_ = std::move(req);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(1 << 20);
    ws_.text(true);
    ws_.async_accept(req_, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
  }

  void deliver(std::shared_ptr<const std::string> frame) override {
    net::post(ws_.get_executor(), [self = shared_from_this(), f = std::move(frame)]() mutable {
      self->enqueue(std::move(f));
    });
  }

  void completed() override {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      --self->in_flight_;
      if (self->paused_ && !self->closed_ && self->in_flight_ < kMaxInFlight) {
        self->paused_ = false;
        self->do_read();
      }
    });
  }

  void close_after_flush() override {
    net::post(ws_.get_executor(), [self = shared_from_this()] { self->request_close(); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    do_read();
  }

  void do_read() { ws_.async_read(buf_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      on_closed();
      return;
    }
    const std::string text = beast::buffers_to_string(buf_.data());
    buf_.consume(buf_.size());
    handle_text(text);
  }

  void reply_error(ErrorCode code, const std::string& what, bool close = false) {
    wire::ErrorReply e{code, what, std::nullopt, std::nullopt, std::nullopt};
    if (host_) e.code = host_->code();
    enqueue(std::make_shared<const std::string>(wire::encode(e)));
    if (close) request_close();
  }

  void handle_text(const std::string& text);

  void submit(wire::Message m) {
    ++in_flight_;
    host_->submit({shared_from_this(), std::move(m)});
    if (in_flight_ < kMaxInFlight)
      do_read();
    else
      paused_ = true;
  }

  void enqueue(std::shared_ptr<const std::string> frame) {
    if (closed_ || closing_) return;
    if (outq_.size() >= kMaxOutbound) {
      // Slow consumer: drop the connection rather than buffer without bound.
      beast::error_code ignored;
      ws_.next_layer().socket().close(ignored);
      return;
    }
    outq_.push_back(std::move(frame));
    if (!writing_) do_write();
  }

  void do_write() {
    writing_ = true;
    ws_.async_write(net::buffer(*outq_.front()),
                    beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      on_closed();
      return;
    }
    outq_.pop_front();
    if (!outq_.empty())
      do_write();
    else if (close_pending_)
      do_close();
  }

  void request_close() {
    close_pending_ = true;
    if (!writing_ && outq_.empty()) do_close();
  }

  void do_close() {
    if (closing_ || closed_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  void on_closed() {
    if (closed_) return;
    closed_ = true;
    outq_.clear();
    if (host_) host_->detach(this);
  }

  Server& server_;
  websocket::stream<beast::tcp_stream> ws_;
  std::string url_code_;
  Request req_;
  beast::flat_buffer buf_;
  std::shared_ptr<SessionHost> host_;
  std::deque<std::shared_ptr<const std::string>> outq_;
  std::size_t in_flight_ = 0;
  int strikes_ = 0;
  bool paused_ = false;
  bool writing_ = false;
  bool close_pending_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(Server& server, tcp::socket&& socket) : server_(server), stream_(std::move(socket)) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  void do_read();
  void on_read(beast::error_code ec, std::size_t);

  void send(Response res, bool force_close = false) {
    if (force_close) res.keep_alive(false);
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!sp->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  Server& server_;
  beast::tcp_stream stream_;
  beast::flat_buffer buf_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

class Server {
 public:
  explicit Server(ServerConfig cfg)
      : cfg_(std::move(cfg)),
        ioc_(static_cast<int>(thread_count())),
        acceptor_(ioc_),
        reaper_(ioc_),
        rng_(Seed{(std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}()}) {
    validate_config(cfg_);
    resources_ = load_resources(cfg_);
    prepare_data_dir();
    assets_ = std::make_unique<AssetStore>(cfg_.data_dir / "assets");
    restore_sessions();
    bind();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  void start() {
    do_accept();
    schedule_reaper();
    for (unsigned i = 0; i < thread_count(); ++i) threads_.emplace_back([this] { ioc_.run(); });
  }

  // Stops accepting, abandons queued work and joins the I/O threads. Every
  // acknowledged mutation is already on disk, so nothing durable is lost.
  void stop() {
    if (stopped_) return;
    stopped_ = true;
    ioc_.stop();
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    threads_.clear();
  }

  std::uint16_t port() const { return endpoint_.port(); }
  std::string address() const {
    const auto a = endpoint_.address();
    return (a.is_v6() ? "[" + a.to_string() + "]" : a.to_string()) + ":" + std::to_string(endpoint_.port());
  }
  const std::vector<std::string>& startup_errors() const { return startup_errors_; }
  std::size_t restored_sessions() const { return restored_; }
  std::size_t expired_sessions() const { return expired_; }
  std::size_t session_count() const {
    std::lock_guard lk(hosts_mu_);
    return hosts_.size();
  }
  const ServerConfig& config() const { return cfg_; }

  std::shared_ptr<SessionHost> find(const std::string& code) const {
    std::lock_guard lk(hosts_mu_);
    const auto it = hosts_.find(code);
    return it == hosts_.end() ? nullptr : it->second;
  }

  std::uint64_t body_limit() const { return std::max<std::uint64_t>(cfg_.asset_cap, 64 * 1024); }

  // Session code of a stream target, if the target is one.
  static std::optional<std::string> stream_code(std::string_view target) {
    const Target t = parse_target(target);
    if (t.segments.size() == 4 && t.segments[0] == "v1" && t.segments[1] == "sessions" && t.segments[3] == "stream")
      return t.segments[2];
    return std::nullopt;
  }

  Response handle(const Request& req) {
    try {
      return route(req);
    } catch (const Error& e) {
      return error_response(req, e.code(), e.what());
    } catch (const std::exception& e) {
      return error_response(req, ErrorCode::io, e.what());
    }
  }

  net::io_context& io_context() { return ioc_; }

 private:
  unsigned thread_count() const {
    return cfg_.threads ? cfg_.threads : std::max(1u, std::thread::hardware_concurrency());
  }

  std::filesystem::path sessions_dir() const { return cfg_.data_dir / "sessions"; }
  std::filesystem::path log_path(const std::string& code) const { return sessions_dir() / (code + ".log"); }

  void prepare_data_dir() {
    std::error_code ec;
    std::filesystem::create_directories(sessions_dir(), ec);
    if (ec) fail(ErrorCode::io, "cannot create data directory " + cfg_.data_dir.string() + ": " + ec.message());
    const auto probe = cfg_.data_dir / (".probe-" + std::to_string(::getpid()));
    const int fd = ::open(probe.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) fail(ErrorCode::io, "data directory " + cfg_.data_dir.string() + " is not writable");
    ::close(fd);
    std::filesystem::remove(probe, ec);
  }

  HostEnv host_env() {
    HostEnv e;
    e.rate_limit = cfg_.rate_limit;
    e.burst = cfg_.burst;
    e.decks = &resources_.decks;
    e.entropy = [this] { return entropy(); };
    e.post = [this](std::function<void()> f) { net::post(ioc_, std::move(f)); };
    e.fault = cfg_.storage_fault;
    return e;
  }

  std::uint64_t entropy() {
    std::lock_guard lk(rng_mu_);
    return rng_.next();
  }

  void restore_sessions() {
    std::vector<std::filesystem::path> logs;
    for (const auto& e : std::filesystem::directory_iterator(sessions_dir()))
      if (e.path().extension() == ".log") logs.push_back(e.path());
    std::sort(logs.begin(), logs.end());
    const Timestamp cutoff = system_now() - std::chrono::duration_cast<std::chrono::milliseconds>(cfg_.idle_ttl).count();
    for (const auto& path : logs) {
      const std::string code = path.stem().string();
      if (!is_valid_join_code(code)) {
        startup_errors_.push_back(path.filename().string() + ": not a session code");
        continue;
      }
      try {
        auto host = SessionHost::restore(path, host_env());
        if (host->code() != code) fail(ErrorCode::corrupt_log, "log is for session " + host->code());
        if (host->idle_since(cutoff)) {
          ++expired_;
          continue;
        }
        hosts_.emplace(code, std::move(host));
        ++restored_;
      } catch (const Error& e) {
        startup_errors_.push_back(path.filename().string() + ": " + e.what());
      }
    }
  }

  void bind() {
    const auto [host, port] = parse_host_port(cfg_.bind);
    beast::error_code ec;
    const auto addr = net::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
    if (ec) fail(ErrorCode::invalid_argument, "bad bind host '" + host + "'");
    const tcp::endpoint ep(addr, port);
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) fail(ErrorCode::io, "cannot bind " + cfg_.bind + ": " + ec.message());
    endpoint_ = acceptor_.local_endpoint();
  }

  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) {
        beast::error_code ignored;
        socket.set_option(tcp::no_delay(true), ignored);
        std::make_shared<HttpSession>(*this, std::move(socket))->run();
      }
      if (acceptor_.is_open()) do_accept();
    });
  }

  void schedule_reaper() {
    const auto interval = std::clamp<std::chrono::seconds>(cfg_.idle_ttl / 4, std::chrono::seconds(1),
                                                           std::chrono::seconds(60));
    reaper_.expires_after(interval);
    reaper_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      reap();
      schedule_reaper();
    });
  }

  void reap() {
    const Timestamp cutoff =
        system_now() - std::chrono::duration_cast<std::chrono::milliseconds>(cfg_.idle_ttl).count();
    std::lock_guard lk(hosts_mu_);
    for (auto it = hosts_.begin(); it != hosts_.end();)
      it = it->second->idle_since(cutoff) ? hosts_.erase(it) : std::next(it);
  }

  std::shared_ptr<SessionHost> host_or_fail(const std::string& code) const {
    auto h = find(code);
    if (!h) fail(ErrorCode::unknown_session, "unknown session '" + code + "'");
    return h;
  }

  Response create_session(const Request& req) {
    std::optional<std::uint64_t> seed;
    if (cfg_.test_mode) {
      const auto it = req.find(kTestSeedHeader);
      if (it != req.end()) {
        const std::string v(it->value());
        std::size_t used = 0;
        try {
          seed = std::stoull(v, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != v.size() || v.front() == '-')
          fail(ErrorCode::invalid_argument, "bad test seed '" + v + "'");
      }
    }
    std::lock_guard lk(hosts_mu_);
    if (hosts_.size() >= cfg_.max_sessions)
      fail(ErrorCode::capacity, "server is at its limit of " + std::to_string(cfg_.max_sessions) + " sessions");
    auto taken = [&](const std::string& code) {
      return hosts_.count(code) != 0 || std::filesystem::exists(log_path(code));
    };
    std::string code;
    if (seed) {
      code = generate_join_code(Seed{*seed});
      if (taken(code)) fail(ErrorCode::conflict, "session " + code + " already exists");
    } else {
      do code = generate_join_code(Seed{entropy()});
      while (taken(code));
    }
    hosts_.emplace(code, SessionHost::create(code, log_path(code), host_env()));
    return json_response(req, http::status::created, {{"code", code}});
  }

  Response clusters(const Request& req, const std::string& code, const Target& t) {
    double threshold = kDefaultClusterThreshold;
    if (const auto it = t.query.find("threshold"); it != t.query.end()) {
      std::size_t used = 0;
      try {
        threshold = std::stod(it->second, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != it->second.size())
        fail(ErrorCode::invalid_argument, "bad threshold '" + it->second + "'");
    }
    check_threshold(threshold);
    const Session s = host_or_fail(code)->copy_session();
    json out = json::array();
    if (!s.items().empty())
      for (const auto& c : cluster(s.items(), threshold, resources_.stop))
        out.push_back({{"cluster_id", c.cluster_id}, {"member_seqs", c.member_seqs},
                       {"representative_seq", c.representative_seq}});
    return json_response(req, http::status::ok, {{"threshold", threshold}, {"clusters", out}});
  }

  Response pattern_step(const Request& req, const std::string& id, const std::string& index, const Target& t) {
    if (!resources_.catalog) fail(ErrorCode::not_found, "no catalog loaded");
    DetailLevel level = DetailLevel::card;
    if (const auto it = t.query.find("detail"); it != t.query.end()) {
      if (it->second == "full")
        level = DetailLevel::full;
      else if (it->second != "card")
        fail(ErrorCode::invalid_argument, "detail must be card or full");
    }
    std::size_t i = 0, used = 0;
    try {
      i = std::stoul(index, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != index.size()) fail(ErrorCode::invalid_argument, "bad step index '" + index + "'");
    WizardState st = wizard_start(*resources_.catalog, id, level);
    if (i >= st.total_steps) fail(ErrorCode::out_of_range, "pattern '" + id + "' has " + std::to_string(st.total_steps) + " steps");
    while (st.step_index < i) st = wizard_advance(st);
    return json_response(req, http::status::ok, render_step(*resources_.catalog, st).to_json());
  }

  Response route(const Request& req) {
    const Target t = parse_target(sv(req.target()));
    const auto& s = t.segments;
    const auto method = req.method();
    auto expect = [&](http::verb v) {
      if (method != v) fail(ErrorCode::not_found, "no route for " + std::string(req.method_string()) + " " +
                                                      std::string(req.target()));
    };
    if (s.size() < 2 || s[0] != "v1") fail(ErrorCode::not_found, "no route for " + std::string(req.target()));

    if (s[1] == "sessions") {
      if (s.size() == 2) {
        expect(http::verb::post);
        return create_session(req);
      }
      const std::string& code = s[2];
      if (s.size() == 3) {
        expect(http::verb::get);
        return json_response(req, http::status::ok, host_or_fail(code)->info().to_json());
      }
      if (s.size() == 4 && s[3] == "assets") {
        expect(http::verb::post);
        host_or_fail(code);
        if (req.body().size() > cfg_.asset_cap)
          fail(ErrorCode::payload_too_large, "asset exceeds " + std::to_string(cfg_.asset_cap) + " bytes");
        return json_response(req, http::status::created, {{"ref", assets_->put(req.body())}});
      }
      if (s.size() == 4 && s[3] == "snapshot") {
        expect(http::verb::get);
        return make_response(req, http::status::ok, serialize_snapshot(host_or_fail(code)->take_snapshot()));
      }
      if (s.size() == 4 && s[3] == "clusters") {
        expect(http::verb::get);
        return clusters(req, code, t);
      }
      if (s.size() == 4 && s[3] == "stream") {
        host_or_fail(code);
        fail(ErrorCode::invalid_argument, "the stream endpoint needs a WebSocket upgrade");
      }
    } else if (s[1] == "assets" && s.size() == 3) {
      expect(http::verb::get);
      const auto bytes = assets_->get(s[2]);
      if (!bytes) fail(ErrorCode::not_found, "unknown asset '" + s[2] + "'");
      return make_response(req, http::status::ok, *bytes, "application/octet-stream");
    } else if (s[1] == "catalog" && s.size() == 2) {
      expect(http::verb::get);
      if (!resources_.catalog) fail(ErrorCode::not_found, "no catalog loaded");
      return make_response(req, http::status::ok, serialize_catalog(*resources_.catalog));
    } else if (s[1] == "decks" && s.size() == 2) {
      expect(http::verb::get);
      json decks = json::array();
      for (const auto& [id, d] : resources_.decks)
        decks.push_back({{"id", id}, {"kind", std::string(to_string(d.kind))}, {"size", d.entries.size()}});
      return json_response(req, http::status::ok, {{"decks", decks}});
    } else if (s[1] == "patterns" && s.size() == 5 && s[3] == "steps") {
      expect(http::verb::get);
      return pattern_step(req, s[2], s[4], t);
    }
    fail(ErrorCode::not_found, "no route for " + std::string(req.target()));
  }

  ServerConfig cfg_;
  Resources resources_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  tcp::endpoint endpoint_;
  net::steady_timer reaper_;
  std::unique_ptr<AssetStore> assets_;
  mutable std::mutex hosts_mu_;
  std::map<std::string, std::shared_ptr<SessionHost>> hosts_;
  std::mutex rng_mu_;
  SplitMix64 rng_;
  std::vector<std::string> startup_errors_;
  std::size_t restored_ = 0;
  std::size_t expired_ = 0;
  std::vector<std::thread> threads_;
  bool stopped_ = false;
};

inline void HttpSession::do_read() {
  parser_.emplace();
  parser_->body_limit(server_.body_limit());
  stream_.expires_after(std::chrono::seconds(300));
  http::async_read(stream_, buf_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
}

inline void HttpSession::on_read(beast::error_code ec, std::size_t) {
  if (ec == http::error::body_limit) {
    Request stub;
    stub.version(11);
    send(error_response(stub, ErrorCode::payload_too_large,
                        "request body exceeds " + std::to_string(server_.body_limit()) + " bytes"),
         true);
    return;
  }
  if (ec) {
    beast::error_code ignored;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    return;
  }
  Request req = parser_->release();
  if (websocket::is_upgrade(req)) {
    const auto code = Server::stream_code(sv(req.target()));
    if (!code) {
      send(error_response(req, ErrorCode::not_found, "no stream at " + std::string(req.target())), true);
      return;
    }
    stream_.expires_never();
    std::make_shared<WsConnection>(server_, stream_.release_socket(), *code)->run(std::move(req));
    return;
  }
  send(server_.handle(req));
}

inline void WsConnection::handle_text(const std::string& text) {
  wire::Message m;
  try {
    m = wire::decode(text);
  } catch (const Error& e) {
    ++strikes_;
    reply_error(e.code(), e.what(), strikes_ >= kMaxStrikes);
    if (strikes_ < kMaxStrikes) do_read();
    return;
  }
  if (const auto* hello = std::get_if<wire::Hello>(&m)) {
    if (!host_) {
      auto host = hello->code == url_code_ ? server_.find(hello->code) : nullptr;
      if (!host) {
        reply_error(ErrorCode::unknown_session, "unknown session '" + hello->code + "'", true);
        return;
      }
      host_ = std::move(host);
    }
    submit(std::move(m));
    return;
  }
  const bool client_message = std::holds_alternative<wire::Contribute>(m) ||
                              std::holds_alternative<wire::BoardOpRequest>(m) ||
                              std::holds_alternative<wire::Resume>(m) ||
                              std::holds_alternative<wire::DrawStimulus>(m);
  if (!client_message) {
    reply_error(ErrorCode::invalid_argument, "'" + std::string(wire::type_of(m)) + "' is not a client message");
    do_read();
  } else if (!host_) {
    reply_error(ErrorCode::invalid_argument, "send hello first");
    do_read();
  } else {
    submit(std::move(m));
  }
}

}  // namespace xc::server
