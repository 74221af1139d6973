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

// Greedy leader clustering of board items by token-set Jaccard similarity.
// Items are visited in seq order; each joins the earliest-created cluster
// whose representative is similar enough, otherwise it founds a new one.

#include <algorithm>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xc/error.hpp"
#include "xc/session_core.hpp"
#include "xc/text.hpp"

namespace xc {

class StopList {
 public:
  StopList() = default;
  explicit StopList(std::set<std::string> tokens) : tokens_(std::move(tokens)) {}

  // One token per line; blank lines and lines starting with '#' ignored.
  static StopList parse(std::string_view text) {
    std::set<std::string> tokens;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      std::string t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      tokens.insert(text::fold(t));
    }
    return StopList(std::move(tokens));
  }

  bool contains(const std::string& token) const { return tokens_.count(token) != 0; }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::set<std::string> tokens_;
};

struct TokenVector {
  std::uint64_t seq = 0;
  std::vector<std::string> tokens;  // multiset, sorted

  friend bool operator==(const TokenVector&, const TokenVector&) = default;
};

// NFC, lowercase, split on non-alphanumerics, drop 1-code-point tokens,
// drop stop tokens. Result is sorted so equal multisets compare equal.
inline std::vector<std::string> tokenize(std::string_view input, const StopList& stop = {}) {
  std::vector<std::string> out;
  for (auto& run : text::alnum_runs(text::fold(input))) {
    if (text::length(run) < 2) continue;
    if (stop.contains(run)) continue;
    out.push_back(std::move(run));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

template <typename T>
double jaccard_sorted_unique(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

template <typename T>
std::vector<T> unique_sorted(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

// Jaccard coefficient of the underlying token sets; 0 when both are empty.
inline double similarity(const TokenVector& a, const TokenVector& b) {
  return detail::jaccard_sorted_unique(detail::unique_sorted(a.tokens),
                                       detail::unique_sorted(b.tokens));
}

struct ClusterInput {
  std::uint64_t seq = 0;
  std::string text;
};

struct Cluster {
  std::string cluster_id;
  std::vector<std::uint64_t> member_seqs;  // ascending
  std::uint64_t representative_seq = 0;

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

inline std::string cluster_id_for(std::uint64_t representative_seq) {
  return "c" + std::to_string(representative_seq);
}

inline constexpr double kDefaultClusterThreshold = 0.5;

inline void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    fail(ErrorCode::out_of_range, "threshold must lie in (0, 1]");
}

inline std::vector<Cluster> cluster(std::vector<ClusterInput> items, double threshold,
                                    const StopList& stop = {}) {
  check_threshold(threshold);
  if (items.empty()) fail(ErrorCode::invalid_argument, "nothing to cluster");
  std::stable_sort(items.begin(), items.end(),
                   [](const ClusterInput& a, const ClusterInput& b) { return a.seq < b.seq; });

  // Intern tokens so set intersection runs over integers.
  std::unordered_map<std::string, std::uint32_t> dictionary;
  std::vector<std::vector<std::uint32_t>> sets;
  sets.reserve(items.size());
  for (const auto& item : items) {
    std::vector<std::uint32_t> ids;
    for (const auto& t : tokenize(item.text, stop)) {
      const auto [it, _] = dictionary.emplace(t, static_cast<std::uint32_t>(dictionary.size()));
      ids.push_back(it->second);
    }
    sets.push_back(detail::unique_sorted(std::move(ids)));
  }

  std::vector<Cluster> clusters;
  std::vector<std::size_t> leaders;  // index into items/sets
  for (std::size_t i = 0; i < items.size(); ++i) {
    bool placed = false;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (detail::jaccard_sorted_unique(sets[i], sets[leaders[c]]) >= threshold) {
        clusters[c].member_seqs.push_back(items[i].seq);
        placed = true;
        break;
      }
    }
    if (!placed) {
      clusters.push_back({cluster_id_for(items[i].seq), {items[i].seq}, items[i].seq});
      leaders.push_back(i);
    }
  }
  return clusters;
}

inline std::vector<Cluster> near_duplicates(std::vector<ClusterInput> items, double threshold,
                                            const StopList& stop = {}) {
  check_threshold(threshold);
  if (items.empty()) return {};
  std::vector<Cluster> out;
  for (auto& c : cluster(std::move(items), threshold, stop))
    if (c.member_seqs.size() >= 2) out.push_back(std::move(c));
  return out;
}

inline std::vector<ClusterInput> cluster_inputs(const std::vector<BoardItem>& items) {
  std::vector<ClusterInput> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back({item.seq, item_text(item.kind, item.body)});
  return out;
}

inline std::vector<Cluster> cluster(const std::vector<BoardItem>& items, double threshold,
                                    const StopList& stop = {}) {
  return cluster(cluster_inputs(items), threshold, stop);
}

inline std::vector<Cluster> near_duplicates(const std::vector<BoardItem>& items, double threshold,
                                            const StopList& stop = {}) {
  return near_duplicates(cluster_inputs(items), threshold, stop);
}

}  // namespace xc
