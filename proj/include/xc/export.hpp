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

// Board export. Canonical output is the snapshot document itself; markdown is
// a readable report grouped by cluster. Both depend only on the snapshot, so
// exporting the same board twice gives identical bytes.

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "xc/error.hpp"
#include "xc/session_core.hpp"

namespace xc::exporter {

enum class Format { canonical, markdown };

inline Format parse_format(std::string_view s) {
  if (s == "canonical") return Format::canonical;
  if (s == "markdown") return Format::markdown;
  fail(ErrorCode::invalid_argument, "unknown export format '" + std::string(s) + "'");
}

namespace detail {

inline std::string one_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out += (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
  return out;
}

inline std::string item_line(const BoardItem& item, const std::map<std::string, std::string>& names) {
  const auto name = names.find(item.author_id);
  std::string line = "- [" + std::to_string(item.seq) + "] " +
                     one_line(name != names.end() ? name->second : item.author_id) + ": ";
  if (item.kind == ItemKind::image) {
    const auto img = parse_image_body(item.body);
    line += img ? "![" + one_line(img->caption) + "](" + img->ref + ")" : one_line(item.body);
  } else {
    line += one_line(item.body);
  }
  std::string tags;
  for (const auto& t : item.tags) tags += (tags.empty() ? "" : ", ") + t;
  std::int64_t votes = 0;
  for (const auto& [_, v] : item.votes) votes += v;
  line += " (";
  if (!tags.empty()) line += "tags: " + tags + "; ";
  line += "votes: " + std::to_string(votes) + ")";
  return line;
}

}  // namespace detail

inline std::string to_markdown(const Snapshot& snap) {
  std::map<std::string, std::string> names;
  for (const auto& p : snap.participants) names[p.participant_id] = p.display_name;

  std::map<std::string, std::vector<const BoardItem*>> clusters;
  std::vector<const BoardItem*> loose;
  for (const auto& item : snap.items) {
    if (item.cluster_id) clusters[*item.cluster_id].push_back(&item);
    else loose.push_back(&item);
  }

  std::string out = "# Board " + snap.code + "\n\nPhase: " + std::string(to_string(snap.phase)) + "\n";
  auto section = [&](const std::string& title, const std::vector<const BoardItem*>& items) {
    out += "\n## " + title + "\n\n";
    for (const auto* item : items) out += detail::item_line(*item, names) + "\n";
  };
  for (const auto& [cid, items] : clusters) section("Cluster " + cid, items);
  if (!loose.empty()) section("Unclustered", loose);
  return out;
}

inline std::string render(const Snapshot& snap, Format f) {
  return f == Format::canonical ? serialize_snapshot(snap) + "\n" : to_markdown(snap);
}

}  // namespace xc::exporter
