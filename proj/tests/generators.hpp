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

// Seeded generators shared by the unit tests and the acceptance suite.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xc/pattern_model.hpp"
#include "xc/random.hpp"
#include "xc/session_core.hpp"
#include "xc/wire_protocol.hpp"

namespace xc::testing {

// Graph of 1..12 minimal patterns with up to 30 relations of any kind,
// including self-loops and repeated edges.
inline PatternGraph random_graph(std::mt19937_64& rng) {
  const int n = std::uniform_int_distribution<int>(1, 12)(rng);
  std::map<std::string, Pattern> ps;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    Pattern p;
    p.id = p.name = "p" + std::to_string(i);
    p.level = kAllLevels[rng() % 3];
    p.card_text = "card " + p.id;
    p.detail.steps = {"do " + p.id};
    if (p.level == PatternLevel::process_phase) p.role_tag = RoleTag::artist;
    ids.push_back(p.id);
    ps.emplace(p.id, std::move(p));
  }
  std::vector<Relation> rels;
  const int m = std::uniform_int_distribution<int>(0, 30)(rng);
  for (int i = 0; i < m; ++i) rels.push_back({ids[rng() % n], ids[rng() % n], kAllRelationKinds[rng() % 4]});
  return PatternGraph(std::move(ps), std::move(rels));
}

// Builds a random but valid session history.
inline Session random_session(std::mt19937_64& rng) {
  auto s = create_session(Seed{rng()}, [t = static_cast<Timestamp>(rng() % 100000)] { return t; });
  const auto fac = s.join("Fac", Role::facilitator, 1).participant_id;
  std::vector<std::string> people{fac};
  const int joins = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < joins; ++i) people.push_back(s.join("P" + std::to_string(i), Role::contributor, 2).participant_id);
  const int steps = static_cast<int>(rng() % 60);
  for (int i = 0; i < steps; ++i) {
    const auto who = people[rng() % people.size()];
    const int action = static_cast<int>(rng() % 10);
    try {
      if (action < 6 || s.items().empty()) {
        s.ingest(who, "m" + std::to_string(rng() % 40), ItemKind::text, "idea " + std::to_string(rng() % 9), i);
      } else if (action == 6) {
        s.apply_board_op({OpKind::tag, 1 + rng() % s.items().size(), {.tag = "t" + std::to_string(rng() % 3)}, who, ""}, i);
      } else if (action == 7) {
        s.apply_board_op({OpKind::vote, 1 + rng() % s.items().size(), {.vote = 1}, who, ""}, i);
      } else if (action == 8) {
        s.apply_board_op({OpKind::assign_cluster, 1 + rng() % s.items().size(), {.cluster_id = "c1"}, fac, ""}, i);
      } else {
        s.apply_board_op({OpKind::set_phase, 0, {.phase = kAllPhases[rng() % 3]}, fac, ""}, i);
      }
    } catch (const Error&) {
      // illegal moves are part of the history generator's search space
    }
  }
  return s;
}

// Random message generator over every type, with awkward strings.
class MessageGen {
 public:
  explicit MessageGen(std::uint64_t seed) : rng_(Seed{seed}) {}

  std::uint64_t u(std::uint64_t bound) { return rng_.below(bound); }

  std::string str(bool nonempty = true) {
    static const char* const pieces[] = {"a", "Z", "0", " ", "\"", "\\", "/", "\n", "\t", "\x01",
                                         "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x92\xa1", "{", "}",
                                         "\xe2\x80\x8b", "sha256:", "p1", "\x7f"};
    std::string s;
    const std::size_t n = u(12) + (nonempty ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) s += pieces[u(std::size(pieces))];
    return s;
  }

  std::optional<std::string> opt_str() {
    if (u(2) == 0) return std::nullopt;
    return str();
  }

  std::uint64_t big() {
    switch (u(4)) {
      case 0: return 0;
      case 1: return u(10);
      case 2: return UINT64_MAX - u(3);
      default: return rng_.next();
    }
  }

  std::int32_t i32() { return static_cast<std::int32_t>(rng_.next()); }

  wire::Item item() {
    return {1 + u(1000), str(), str(), kAllItemKinds[u(2)], str(false)};
  }

  void args(OpKind* kind, std::uint64_t* target, OpPayload* a) {
    *kind = kAllOpKinds[u(std::size(kAllOpKinds))];
    *target = *kind == OpKind::set_phase ? 0 : 1 + u(1000);
    switch (*kind) {
      case OpKind::tag:
      case OpKind::untag: a->tag = str(); break;
      case OpKind::assign_cluster: a->cluster_id = str(); break;
      case OpKind::move: a->position = Position{i32(), i32()}; break;
      case OpKind::vote: a->vote = i32(); break;
      case OpKind::set_phase: a->phase = kAllPhases[u(3)]; break;
      default: break;
    }
  }

  wire::Message message() {
    switch (u(12)) {
      case 0: {
        return wire::Hello{str(), str(), kAllRoles[u(2)], opt_str()};
      }
      case 1: return wire::Welcome{str(), str(), kAllPhases[u(3)], big()};
      case 2: return wire::Contribute{str(), str(), str(), kAllItemKinds[u(2)], str(false)};
      case 3: return wire::Ack{str(), str(), str(), 1 + u(100000), u(2) == 0};
      case 4: return wire::ItemBroadcast{str(), item()};
      case 5: {
        wire::BoardOpRequest m{str(), str(), str()};
        args(&m.kind, &m.target, &m.args);
        return m;
      }
      case 6: {
        wire::OpBroadcast m{str(), 1 + u(1000), str(), str(false)};
        args(&m.kind, &m.target, &m.args);
        return m;
      }
      case 7: return wire::Resume{str(), str(), big()};
      case 8: {
        wire::ResumeBatch m{str(), kAllPhases[u(3)], big()};
        for (std::uint64_t i = u(4); i > 0; --i) m.items.push_back(item());
        return m;
      }
      case 9: {
        wire::DrawStimulus m{str(), str(), str(), 1 + u(50)};
        if (u(2)) m.seed = big();
        m.topic = opt_str();
        return m;
      }
      case 10: {
        wire::StimulusCards m{str(), {}, str(false)};
        for (std::uint64_t i = 1 + u(3); i > 0; --i)
          m.cards.push_back({str(), str(), opt_str(), str(false)});
        return m;
      }
      default: {
        wire::ErrorReply m{wire::kAllErrorCodes[u(std::size(wire::kAllErrorCodes))], str(false), opt_str(), opt_str()};
        if (u(2)) m.retry_ms = big();
        return m;
      }
    }
  }

 private:
  SplitMix64 rng_;
};

}  // namespace xc::testing
