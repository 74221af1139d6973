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

// Pattern-language schema: patterns with context/problem/forces/solution,
// typed relations between them, and the graph queries used by the
// stimulus wizards and the board UI.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xc/error.hpp"
#include "xc/json_util.hpp"

namespace xc {

enum class PatternLevel { process_phase, pattern, variant };
enum class RoleTag { explorer, artist, judge, warrior };
enum class RelationKind { refines, alternative_to, blends_with, followed_by };

constexpr std::string_view to_string(PatternLevel v) {
  switch (v) {
    case PatternLevel::process_phase: return "process-phase";
    case PatternLevel::pattern: return "pattern";
    case PatternLevel::variant: return "variant";
  }
  return "";
}

constexpr std::string_view to_string(RoleTag v) {
  switch (v) {
    case RoleTag::explorer: return "explorer";
    case RoleTag::artist: return "artist";
    case RoleTag::judge: return "judge";
    case RoleTag::warrior: return "warrior";
  }
  return "";
}

constexpr std::string_view to_string(RelationKind v) {
  switch (v) {
    case RelationKind::refines: return "refines";
    case RelationKind::alternative_to: return "alternative-to";
    case RelationKind::blends_with: return "blends-with";
    case RelationKind::followed_by: return "followed-by";
  }
  return "";
}

template <typename Enum, std::size_t N>
std::optional<Enum> enum_from(std::string_view s, const Enum (&all)[N]) {
  for (Enum e : all)
    if (to_string(e) == s) return e;
  return std::nullopt;
}

inline constexpr PatternLevel kAllLevels[] = {
    PatternLevel::process_phase, PatternLevel::pattern, PatternLevel::variant};
inline constexpr RoleTag kAllRoleTags[] = {RoleTag::explorer, RoleTag::artist,
                                           RoleTag::judge, RoleTag::warrior};
inline constexpr RelationKind kAllRelationKinds[] = {
    RelationKind::refines, RelationKind::alternative_to,
    RelationKind::blends_with, RelationKind::followed_by};

struct DetailBlock {
  std::vector<std::string> steps;
  std::vector<std::string> examples;
  std::vector<std::string> stimulating_questions;
  std::string reasoning;

  friend bool operator==(const DetailBlock&, const DetailBlock&) = default;
};

struct Pattern {
  std::string id;
  std::string name;
  PatternLevel level = PatternLevel::pattern;
  std::string context;
  std::string problem;
  std::vector<std::string> forces;
  std::string solution;
  std::vector<std::string> consequences;
  std::optional<RoleTag> role_tag;
  std::string card_text;
  DetailBlock detail;

  friend bool operator==(const Pattern&, const Pattern&) = default;
};

struct Relation {
  std::string from;
  std::string to;
  RelationKind kind = RelationKind::refines;

  friend bool operator==(const Relation&, const Relation&) = default;
};

struct Violation {
  std::string rule;
  std::vector<std::string> ids;

  friend bool operator==(const Violation&, const Violation&) = default;
  friend auto operator<=>(const Violation&, const Violation&) = default;
};

// Immutable after construction; concurrent readers need no locking.
class PatternGraph {
 public:
  PatternGraph() = default;
  PatternGraph(std::map<std::string, Pattern> patterns, std::vector<Relation> relations)
      : patterns_(std::move(patterns)), relations_(std::move(relations)) {}

  const std::map<std::string, Pattern>& patterns() const { return patterns_; }
  const std::vector<Relation>& relations() const { return relations_; }

  bool contains(std::string_view id) const {
    return patterns_.find(std::string(id)) != patterns_.end();
  }

  const Pattern& at(std::string_view id) const {
    const auto it = patterns_.find(std::string(id));
    if (it == patterns_.end()) fail(ErrorCode::unknown_id, "unknown pattern '" + std::string(id) + "'");
    return it->second;
  }

  friend bool operator==(const PatternGraph&, const PatternGraph&) = default;

 private:
  std::map<std::string, Pattern> patterns_;
  std::vector<Relation> relations_;
};

inline bool is_valid_pattern_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

// ---------------------------------------------------------------------------
// Catalog document

namespace detail {

inline Pattern pattern_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where, ErrorCode::parse, ErrorCode::parse);
  Pattern p;
  p.id = r.str("id");
  p.name = r.str("name");
  const auto level = r.str("level");
  const auto parsed_level = enum_from(level, kAllLevels);
  if (!parsed_level) fail(ErrorCode::parse, where + "/level: unknown level '" + level + "'");
  p.level = *parsed_level;
  p.context = r.str("context");
  p.problem = r.str("problem");
  p.forces = r.strings("forces");
  p.solution = r.str("solution");
  p.consequences = r.strings("consequences");
  if (auto role = r.opt_str("role_tag")) {
    const auto tag = enum_from(*role, kAllRoleTags);
    if (!tag) fail(ErrorCode::parse, where + "/role_tag: unknown role '" + *role + "'");
    p.role_tag = *tag;
  }
  p.card_text = r.str("card_text");
  ObjectReader d(r.raw("detail"), where + "/detail", ErrorCode::parse, ErrorCode::parse);
  p.detail.steps = d.strings("steps");
  p.detail.examples = d.strings("examples");
  p.detail.stimulating_questions = d.strings("stimulating_questions");
  p.detail.reasoning = d.str("reasoning");
  d.finish();
  r.finish();
  return p;
}

inline json pattern_to_json(const Pattern& p) {
  json j;
  j["id"] = p.id;
  j["name"] = p.name;
  j["level"] = std::string(to_string(p.level));
  j["context"] = p.context;
  j["problem"] = p.problem;
  j["forces"] = p.forces;
  j["solution"] = p.solution;
  j["consequences"] = p.consequences;
  j["role_tag"] = p.role_tag ? json(std::string(to_string(*p.role_tag))) : json(nullptr);
  j["card_text"] = p.card_text;
  j["detail"] = {{"steps", p.detail.steps},
                 {"examples", p.detail.examples},
                 {"stimulating_questions", p.detail.stimulating_questions},
                 {"reasoning", p.detail.reasoning}};
  return j;
}

}  // namespace detail

inline PatternGraph load_catalog(std::string_view source) {
  const json doc = parse_json(source, ErrorCode::parse);
  ObjectReader top(doc, "", ErrorCode::parse, ErrorCode::parse);
  std::map<std::string, Pattern> patterns;
  const json& plist = top.array("patterns");
  for (std::size_t i = 0; i < plist.size(); ++i) {
    Pattern p = detail::pattern_from_json(plist[i], "/patterns/" + std::to_string(i));
    const std::string id = p.id;
    if (!patterns.emplace(id, std::move(p)).second)
      fail(ErrorCode::duplicate_id, "duplicate pattern id '" + id + "'");
  }
  std::vector<Relation> relations;
  const json& rlist = top.array("relations");
  for (std::size_t i = 0; i < rlist.size(); ++i) {
    const std::string where = "/relations/" + std::to_string(i);
    ObjectReader r(rlist[i], where, ErrorCode::parse, ErrorCode::parse);
    Relation rel;
    rel.from = r.str("from");
    rel.to = r.str("to");
    const auto kind = r.str("kind");
    const auto parsed = enum_from(kind, kAllRelationKinds);
    if (!parsed) fail(ErrorCode::parse, where + "/kind: unknown relation kind '" + kind + "'");
    rel.kind = *parsed;
    r.finish();
    for (const auto* end : {&rel.from, &rel.to})
      if (!patterns.count(*end))
        fail(ErrorCode::unknown_id, where + ": unknown pattern '" + *end + "'");
    relations.push_back(std::move(rel));
  }
  top.finish();
  return PatternGraph(std::move(patterns), std::move(relations));
}

inline std::string serialize_catalog(const PatternGraph& g) {
  json doc;
  doc["patterns"] = json::array();
  for (const auto& [_, p] : g.patterns()) doc["patterns"].push_back(detail::pattern_to_json(p));
  doc["relations"] = json::array();
  for (const auto& r : g.relations())
    doc["relations"].push_back(
        {{"from", r.from}, {"to", r.to}, {"kind", std::string(to_string(r.kind))}});
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

// Strongly connected components of size > 1 in the refines relation
// (self-loops are reported separately as self-relations).
inline std::vector<std::vector<std::string>> refines_cycles(const PatternGraph& g) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& r : g.relations())
    if (r.kind == RelationKind::refines && r.from != r.to) adj[r.from].push_back(r.to);

  std::map<std::string, int> index;
  std::map<std::string, int> low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> out;
  int counter = 0;

  std::function<void(const std::string&)> visit = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const auto& w : adj[v]) {
      if (!index.count(w)) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.count(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::string> comp;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        comp.push_back(w);
      } while (w != v);
      if (comp.size() > 1) {
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
    }
  };
  for (const auto& [id, _] : g.patterns())
    if (!index.count(id)) visit(id);
  return out;
}

}  // namespace detail

inline std::vector<Violation> validate_graph(const PatternGraph& g) {
  std::vector<Violation> out;
  auto add = [&](std::string rule, std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    out.push_back({std::move(rule), std::move(ids)});
  };

  for (const auto& [key, p] : g.patterns()) {
    if (!is_valid_pattern_id(p.id)) add("invalid-id", {p.id});
    if (key != p.id) add("id-mismatch", {key, p.id});
    if (p.card_text.empty()) add("empty-card-text", {p.id});
    if (std::any_of(p.detail.steps.begin(), p.detail.steps.end(),
                    [](const std::string& s) { return s.empty(); }))
      add("empty-step", {p.id});
    if (p.level != PatternLevel::process_phase && p.detail.steps.empty())
      add("missing-steps", {p.id});
    if (p.level == PatternLevel::process_phase && !p.role_tag) add("phase-without-role", {p.id});
    if (p.level == PatternLevel::variant && p.role_tag) add("variant-has-role", {p.id});
  }

  for (const auto& r : g.relations()) {
    const bool from_ok = g.contains(r.from);
    const bool to_ok = g.contains(r.to);
    if (!from_ok || !to_ok) {
      std::vector<std::string> missing;
      if (!from_ok) missing.push_back(r.from);
      if (!to_ok) missing.push_back(r.to);
      add("unknown-endpoint", missing);
      continue;
    }
    if (r.from == r.to &&
        (r.kind == RelationKind::refines || r.kind == RelationKind::followed_by))
      add("self-relation", {r.from});
    if (r.kind == RelationKind::alternative_to &&
        g.at(r.to).level == PatternLevel::variant)
      add("alternative-targets-variant", {r.from, r.to});
  }

  for (auto& cycle : detail::refines_cycles(g)) add("refines-cycle", std::move(cycle));

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Queries (non-transitive; results sorted and duplicate-free)

namespace detail {

template <typename Pred>
std::vector<std::string> collect(const PatternGraph& g, std::string_view id, Pred pred) {
  g.at(id);
  std::set<std::string> ids;
  for (const auto& r : g.relations())
    if (auto hit = pred(r)) ids.insert(*hit);
  return {ids.begin(), ids.end()};
}

}  // namespace detail

inline std::vector<std::string> resolve_alternatives(const PatternGraph& g, std::string_view goal) {
  return detail::collect(g, goal, [&](const Relation& r) -> std::optional<std::string> {
    if (r.kind == RelationKind::alternative_to && r.to == goal) return r.from;
    return std::nullopt;
  });
}

inline std::vector<std::string> refinements(const PatternGraph& g, std::string_view id) {
  return detail::collect(g, id, [&](const Relation& r) -> std::optional<std::string> {
    if (r.kind == RelationKind::refines && r.to == id) return r.from;
    return std::nullopt;
  });
}

inline std::vector<std::string> blends(const PatternGraph& g, std::string_view id) {
  return detail::collect(g, id, [&](const Relation& r) -> std::optional<std::string> {
    if (r.kind != RelationKind::blends_with || r.from == r.to) return std::nullopt;
    if (r.from == id) return r.to;
    if (r.to == id) return r.from;
    return std::nullopt;
  });
}

inline std::vector<std::string> next_steps(const PatternGraph& g, std::string_view id) {
  return detail::collect(g, id, [&](const Relation& r) -> std::optional<std::string> {
    if (r.kind == RelationKind::followed_by && r.from == id) return r.to;
    return std::nullopt;
  });
}

// Kahn's algorithm over refines edges; empty optional when a cycle exists.
inline std::optional<std::vector<std::string>> refines_topological_order(const PatternGraph& g) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [id, _] : g.patterns()) indegree[id] = 0;
  for (const auto& r : g.relations()) {
    if (r.kind != RelationKind::refines) continue;
    adj[r.from].push_back(r.to);
    ++indegree[r.to];
  }
  std::set<std::string> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.insert(id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::string v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (const auto& w : adj[v])
      if (--indegree[w] == 0) ready.insert(w);
  }
  if (order.size() != indegree.size()) return std::nullopt;
  return order;
}

}  // namespace xc
