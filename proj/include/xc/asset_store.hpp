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

// Content-addressed asset storage: <dir>/<64 hex>. A reference is
// "sha256:<hex>" of the stored bytes, so identical uploads share one file.

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "xc/error.hpp"
#include "xc/event_log.hpp"
#include "xc/session_core.hpp"

namespace xc {

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::io, "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

class AssetStore {
 public:
  explicit AssetStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  // Stores bytes durably and returns their reference.
  std::string put(std::string_view bytes) {
    const std::string hex = sha256_hex(bytes);
    const auto path = dir_ / hex;
    if (std::filesystem::exists(path)) return "sha256:" + hex;
    const auto tmp = dir_ / (hex + ".tmp" + std::to_string(::getpid()));
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) fail(ErrorCode::storage, "cannot create asset: " + std::string(std::strerror(errno)));
    const char* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
      const ssize_t n = ::write(fd, p, left);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) {
        const int err = errno;
        ::close(fd);
        fail(ErrorCode::storage, "cannot write asset: " + std::string(std::strerror(err)));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    const bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced) fail(ErrorCode::storage, "cannot sync asset");
    std::filesystem::rename(tmp, path);
    return "sha256:" + hex;
  }

  std::optional<std::string> get(std::string_view ref) const {
    if (!is_asset_ref(ref)) return std::nullopt;
    const auto path = dir_ / std::string(ref.substr(7));
    if (!std::filesystem::exists(path)) return std::nullopt;
    return log::read_whole_file(path);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace xc
