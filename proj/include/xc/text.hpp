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

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace xc::text {

// Decodes UTF-8 into code points. Returns false on any ill-formed sequence.
inline bool decode_utf8(std::string_view s, std::vector<UChar32>* out) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(p, i, len, c);
    if (c < 0) return false;
    if (out) out->push_back(c);
  }
  return true;
}

inline bool is_valid_utf8(std::string_view s) { return decode_utf8(s, nullptr); }

inline std::string encode_utf8(const std::vector<UChar32>& cps, std::size_t begin,
                               std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    char buf[U8_MAX_LENGTH];
    std::int32_t n = 0;
    UBool err = false;
    U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), n, U8_MAX_LENGTH, cps[i], err);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

// Number of code points; ill-formed input counts as zero.
inline std::size_t length(std::string_view s) {
  std::vector<UChar32> cps;
  return decode_utf8(s, &cps) ? cps.size() : 0;
}

// Strips Unicode white space from both ends and keeps at most `max_len`
// code points of what remains.
inline std::string trim(std::string_view s,
                        std::size_t max_len = static_cast<std::size_t>(-1)) {
  std::vector<UChar32> cps;
  if (!decode_utf8(s, &cps)) return {};
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && u_isUWhiteSpace(cps[b])) ++b;
  while (e > b && u_isUWhiteSpace(cps[e - 1])) --e;
  if (e - b > max_len) e = b + max_len;
  return encode_utf8(cps, b, e);
}

// NFC followed by full lowercase mapping (root locale).
inline std::string fold(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
  if (U_SUCCESS(status)) {
    icu::UnicodeString normalized = nfc->normalize(u, status);
    if (U_SUCCESS(status)) u = normalized;
  }
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

// Maximal runs of alphanumeric code points, in order.
inline std::vector<std::string> alnum_runs(std::string_view s) {
  std::vector<UChar32> cps;
  std::vector<std::string> runs;
  if (!decode_utf8(s, &cps)) return runs;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= cps.size(); ++i) {
    const bool word = i < cps.size() && u_isalnum(cps[i]);
    if (word) continue;
    if (i > start) runs.push_back(encode_utf8(cps, start, i));
    start = i + 1;
  }
  return runs;
}

}  // namespace xc::text
