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

// Blocking WebSocket client speaking the wire protocol. A read is always
// pending in the background; recv() waits for the next queued frame.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <optional>
#include <string>

#include "xc/error.hpp"
#include "xc/http_client.hpp"
#include "xc/wire_protocol.hpp"

namespace xc::client {

namespace websocket = beast::websocket;

class StreamClient {
 public:
  StreamClient(const Endpoint& ep, const std::string& code,
               std::chrono::milliseconds timeout = std::chrono::seconds(10))
      : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    beast::error_code ec;
    const auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
    if (ec) fail(ErrorCode::io, "resolve " + ep.host + ": " + ec.message());
    auto& layer = beast::get_lowest_layer(ws_);
    layer.expires_after(timeout);
    layer.connect(results, ec);
    if (ec) fail(ErrorCode::io, "connect: " + ec.message());
    ws_.handshake(ep.host + ":" + std::to_string(ep.port), "/v1/sessions/" + code + "/stream", ec);
    if (ec) fail(ErrorCode::io, "handshake: " + ec.message());
    layer.expires_never();
    ws_.text(true);
    arm_read();
  }

  void send(const wire::Message& m) { send_raw(wire::encode(m)); }

  // Asynchronous under the hood so it cooperates with the pending read.
  void send_raw(const std::string& frame) {
    bool done = false;
    beast::error_code result;
    ws_.async_write(net::buffer(frame), [&](beast::error_code ec, std::size_t) {
      result = ec;
      done = true;
    });
    while (!done)
      if (ioc_.run_one() == 0) break;
    if (!done || result) fail(ErrorCode::io, "send: " + (result ? result.message() : std::string("aborted")));
  }

  // Next raw frame, or nullopt on timeout or once the server has closed.
  std::optional<std::string> recv_raw(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (queue_.empty() && !closed_ && std::chrono::steady_clock::now() < deadline)
      if (ioc_.run_one_until(deadline) == 0) break;
    if (queue_.empty()) return std::nullopt;
    std::string f = std::move(queue_.front());
    queue_.pop_front();
    return f;
  }

  std::optional<wire::Message> recv(std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    auto f = recv_raw(timeout);
    if (!f) return std::nullopt;
    return wire::decode(*f);
  }

  // Skips frames of other types; throws on timeout.
  template <typename T>
  T expect(std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      auto m = recv(std::max(left, std::chrono::milliseconds(0)));
      if (!m) fail(ErrorCode::io, "timed out waiting for " + std::string(wire::type_name<T>()));
      if (auto* v = std::get_if<T>(&*m)) return std::move(*v);
    }
  }

  bool closed() const { return closed_; }

  void close() {
    if (closed_) return;
    bool done = false;
    ws_.async_close(websocket::close_code::normal, [&](beast::error_code) { done = true; });
    while (!done)
      if (ioc_.run_one() == 0) break;
  }

  // Drops the TCP connection without a close handshake.
  void abort() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
    closed_ = true;
  }

 private:
  void arm_read() {
    ws_.async_read(buf_, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        closed_ = true;
        return;
      }
      queue_.push_back(beast::buffers_to_string(buf_.data()));
      buf_.consume(buf_.size());
      arm_read();
    });
  }

  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buf_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

}  // namespace xc::client
