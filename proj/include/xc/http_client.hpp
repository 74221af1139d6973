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

// Small blocking HTTP client for the CLI and tests. One request per
// connection; every call has a deadline.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <chrono>
#include <map>
#include <string>
#include <string_view>

#include "xc/error.hpp"

namespace xc::client {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
using tcp = net::ip::tcp;

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

// Accepts "http://host:port", "host:port" and a trailing slash.
inline Endpoint parse_server_url(std::string_view url) {
  if (url.starts_with("http://")) url.remove_prefix(7);
  if (url.starts_with("ws://")) url.remove_prefix(5);
  while (url.ends_with("/")) url.remove_suffix(1);
  const auto colon = url.rfind(':');
  if (colon == std::string_view::npos) fail(ErrorCode::invalid_argument, "server URL needs a port: " + std::string(url));
  std::string host(url.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  const std::string port(url.substr(colon + 1));
  std::size_t used = 0;
  unsigned long p = 0;
  try {
    p = std::stoul(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (host.empty() || used == 0 || used != port.size() || p == 0 || p > 65535)
    fail(ErrorCode::invalid_argument, "bad server URL '" + std::string(url) + "'");
  return {host, static_cast<std::uint16_t>(p)};
}

struct HttpResult {
  int status = 0;
  std::string body;
  std::string content_type;
};

inline HttpResult http_request(const Endpoint& ep, http::verb method, const std::string& target,
                               std::string body = {}, const std::map<std::string, std::string>& headers = {},
                               std::chrono::milliseconds timeout = std::chrono::seconds(60)) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  tcp::resolver resolver(ioc);
  http::request<http::string_body> req{method, target, 11};
  req.set(http::field::host, ep.host + ":" + std::to_string(ep.port));
  req.set(http::field::connection, "close");
  for (const auto& [k, v] : headers) req.set(k, v);
  req.body() = std::move(body);
  req.prepare_payload();

  beast::flat_buffer buf;
  http::response_parser<http::string_body> parser;
  parser.body_limit(1ull << 32);
  beast::error_code result;
  bool done = false;
  auto finish = [&](beast::error_code ec) {
    result = ec;
    done = true;
  };

  stream.expires_after(timeout);
  resolver.async_resolve(ep.host, std::to_string(ep.port), [&](beast::error_code ec, tcp::resolver::results_type r) {
    if (ec) return finish(ec);
    stream.async_connect(r, [&](beast::error_code ec, const tcp::endpoint&) {
      if (ec) return finish(ec);
      http::async_write(stream, req, [&](beast::error_code ec, std::size_t) {
        if (ec) return finish(ec);
        http::async_read(stream, buf, parser, [&](beast::error_code ec, std::size_t) { finish(ec); });
      });
    });
  });
  ioc.run();
  if (!done || result)
    fail(ErrorCode::io, std::string(http::to_string(method)) + " " + target + ": " +
                            (result ? result.message() : std::string("no response")));
  auto res = parser.release();
  return {static_cast<int>(res.result_int()), std::move(res.body()),
          std::string(res[http::field::content_type])};
}

inline HttpResult http_get(const Endpoint& ep, const std::string& target) {
  return http_request(ep, http::verb::get, target);
}

inline HttpResult http_post(const Endpoint& ep, const std::string& target, std::string body = {},
                            const std::map<std::string, std::string>& headers = {}) {
  return http_request(ep, http::verb::post, target, std::move(body), headers);
}

}  // namespace xc::client
