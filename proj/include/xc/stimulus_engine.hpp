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

// Seeded stimulus generation: card decks, forced connections, perspective
// and metaphor prompts, attribute recombination, and method wizards.
// Everything here is a pure function of its inputs.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xc/error.hpp"
#include "xc/json_util.hpp"
#include "xc/pattern_model.hpp"
#include "xc/random.hpp"

namespace xc {

enum class DeckKind { words, images, personas, attributes };

constexpr std::string_view to_string(DeckKind k) {
  switch (k) {
    case DeckKind::words: return "words";
    case DeckKind::images: return "images";
    case DeckKind::personas: return "personas";
    case DeckKind::attributes: return "attributes";
  }
  return "";
}

inline constexpr DeckKind kAllDeckKinds[] = {DeckKind::words, DeckKind::images,
                                             DeckKind::personas, DeckKind::attributes};

struct Deck {
  std::string id;
  DeckKind kind = DeckKind::words;
  std::vector<std::string> entries;  // authored order; images hold asset refs

  friend bool operator==(const Deck&, const Deck&) = default;
};

// Returns human-readable problems; empty means the deck is usable.
inline std::vector<std::string> validate_deck(const Deck& deck) {
  std::vector<std::string> out;
  if (deck.id.empty()) out.push_back("deck id is empty");
  if (deck.entries.empty()) out.push_back("deck '" + deck.id + "' has no entries");
  std::set<std::string> seen;
  for (const auto& e : deck.entries) {
    if (e.empty()) out.push_back("deck '" + deck.id + "' has an empty entry");
    if (!seen.insert(e).second)
      out.push_back("deck '" + deck.id + "' repeats entry '" + e + "'");
  }
  return out;
}

inline Deck load_deck(std::string_view source) {
  const json doc = parse_json(source, ErrorCode::parse);
  ObjectReader r(doc, "", ErrorCode::parse, ErrorCode::parse);
  Deck deck;
  deck.id = r.str("id");
  const auto kind = r.str("kind");
  const auto parsed = enum_from(kind, kAllDeckKinds);
  if (!parsed) fail(ErrorCode::parse, "/kind: unknown deck kind '" + kind + "'");
  deck.kind = *parsed;
  deck.entries = r.strings("entries");
  r.finish();
  return deck;
}

inline std::string serialize_deck(const Deck& deck) {
  json j{{"id", deck.id}, {"kind", std::string(to_string(deck.kind))}, {"entries", deck.entries}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Prompt templates. Placeholders are {a} {b} {persona} {topic} {concept}
// {entry}; deployments may replace any string.

struct PromptTemplates {
  std::string connect = "How does {a} connect to {b}?";
  std::string analogue = "What parts of {concept} are analogue to {topic}?";
  std::string perspective = "What would {persona} do?";
  std::string perspective_topic = "How would {persona} tackle {topic}?";
  std::string impulse = "Random impulse: {entry}";
  std::string attribute = "{entry}";

  static PromptTemplates from_json(const json& j) {
    PromptTemplates t;
    ObjectReader r(j, "/templates", ErrorCode::parse, ErrorCode::parse);
    for (auto [key, field] : {std::pair{"connect", &t.connect},
                              std::pair{"analogue", &t.analogue},
                              std::pair{"perspective", &t.perspective},
                              std::pair{"perspective_topic", &t.perspective_topic},
                              std::pair{"impulse", &t.impulse},
                              std::pair{"attribute", &t.attribute}})
      if (auto v = r.opt_str(key)) *field = *v;
    r.finish();
    return t;
  }
};

inline std::string render_template(std::string_view tpl,
                                   const std::map<std::string, std::string>& vars) {
  std::string out;
  for (std::size_t i = 0; i < tpl.size();) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto it = vars.find(std::string(tpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cards

struct StimulusCard {
  std::string deck_id;
  std::string entry;
  std::optional<std::string> pattern_id;
  std::string prompt;

  friend bool operator==(const StimulusCard&, const StimulusCard&) = default;
};

inline std::optional<std::string> pattern_for(DeckKind kind) {
  switch (kind) {
    case DeckKind::words:
    case DeckKind::images: return "random-impulse";
    case DeckKind::personas: return "change-of-perspective";
    case DeckKind::attributes: return "variation";
  }
  return std::nullopt;
}

inline std::vector<StimulusCard> draw(const Deck& deck, Seed seed, std::size_t n,
                                      const PromptTemplates& tpl = {}) {
  if (n < 1 || n > deck.entries.size())
    fail(ErrorCode::out_of_range, "draw count " + std::to_string(n) + " outside [1, " +
                                      std::to_string(deck.entries.size()) + "]");
  SplitMix64 rng(seed);
  std::vector<StimulusCard> cards;
  for (std::size_t i : shuffled_prefix(rng, deck.entries.size(), n)) {
    const std::string& entry = deck.entries[i];
    std::string prompt;
    switch (deck.kind) {
      case DeckKind::personas: prompt = render_template(tpl.perspective, {{"persona", entry}}); break;
      case DeckKind::attributes: prompt = render_template(tpl.attribute, {{"entry", entry}}); break;
      default: prompt = render_template(tpl.impulse, {{"entry", entry}}); break;
    }
    cards.push_back({deck.id, entry, pattern_for(deck.kind), std::move(prompt)});
  }
  return cards;
}

inline std::string forced_connection(const std::vector<StimulusCard>& cards, std::string_view topic,
                                     const PromptTemplates& tpl = {}) {
  if (cards.empty()) fail(ErrorCode::invalid_argument, "forced connection needs at least one card");
  if (cards.size() == 1 && topic.empty())
    fail(ErrorCode::invalid_argument, "a single card needs a topic to connect to");
  std::vector<std::string> chain;
  for (const auto& c : cards) chain.push_back(c.entry);
  if (!topic.empty()) chain.emplace_back(topic);

  std::string out;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += render_template(tpl.connect, {{"a", chain[i]}, {"b", chain[i + 1]}});
  }
  if (!topic.empty()) {
    std::string joined;
    for (const auto& c : cards) joined += (joined.empty() ? "" : " and ") + c.entry;
    out += ' ';
    out += render_template(tpl.analogue, {{"concept", joined}, {"topic", std::string(topic)}});
  }
  return out;
}

inline std::string perspective_prompt(std::string_view persona, std::string_view topic,
                                      const PromptTemplates& tpl = {}) {
  if (persona.empty()) fail(ErrorCode::invalid_argument, "persona is empty");
  if (topic.empty()) return render_template(tpl.perspective, {{"persona", std::string(persona)}});
  return render_template(tpl.perspective_topic,
                         {{"persona", std::string(persona)}, {"topic", std::string(topic)}});
}

inline std::string metaphor_prompt(std::string_view image, std::string_view topic,
                                   const PromptTemplates& tpl = {}) {
  if (image.empty()) fail(ErrorCode::invalid_argument, "concept is empty");
  if (topic.empty()) fail(ErrorCode::invalid_argument, "topic is empty");
  return render_template(tpl.analogue,
                         {{"concept", std::string(image)}, {"topic", std::string(topic)}});
}

inline std::vector<std::string> recombine_attributes(
    const std::vector<std::vector<std::string>>& groups, Seed seed) {
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].empty())
      fail(ErrorCode::invalid_argument, "attribute group " + std::to_string(i) + " is empty");
  SplitMix64 rng(seed);
  std::vector<std::string> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g[rng.below(g.size())]);
  return out;
}

// Attribute decks write entries as "dimension: value"; groups keep the
// order in which each dimension first appears. Entries without a colon
// form their own singleton dimension.
inline std::vector<std::vector<std::string>> attribute_groups(const Deck& deck) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> by_dim;
  for (const auto& e : deck.entries) {
    const auto colon = e.find(':');
    std::string dim = colon == std::string::npos ? e : e.substr(0, colon);
    std::string value = colon == std::string::npos ? e : e.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.erase(value.begin());
    if (!by_dim.count(dim)) order.push_back(dim);
    by_dim[dim].push_back(value);
  }
  std::vector<std::vector<std::string>> groups;
  for (const auto& d : order) groups.push_back(by_dim[d]);
  return groups;
}

// ---------------------------------------------------------------------------
// Wizards

enum class DetailLevel { card, full };

constexpr std::string_view to_string(DetailLevel d) {
  return d == DetailLevel::card ? "card" : "full";
}

struct WizardState {
  std::string pattern_id;
  std::size_t step_index = 0;
  std::size_t total_steps = 0;
  DetailLevel detail_level = DetailLevel::card;
  bool finished = false;

  friend bool operator==(const WizardState&, const WizardState&) = default;
};

inline WizardState wizard_start(const PatternGraph& g, std::string_view pattern_id,
                                DetailLevel level) {
  const Pattern& p = g.at(pattern_id);
  if (p.detail.steps.empty())
    fail(ErrorCode::invalid_argument, "pattern '" + p.id + "' has no steps");
  return {p.id, 0, p.detail.steps.size(), level, false};
}

inline WizardState wizard_advance(const WizardState& state) {
  if (state.finished) fail(ErrorCode::invalid_argument, "wizard already finished");
  WizardState next = state;
  ++next.step_index;
  next.finished = next.step_index == next.total_steps;
  return next;
}

struct StepView {
  std::string pattern_id;
  std::string card_text;
  std::size_t step_index = 0;
  std::size_t total_steps = 0;
  std::string step;
  // full detail only
  std::optional<std::vector<std::string>> examples;
  std::optional<std::vector<std::string>> stimulating_questions;
  std::optional<std::string> reasoning;

  json to_json() const {
    json j{{"pattern_id", pattern_id}, {"card_text", card_text}, {"step_index", step_index},
           {"total_steps", total_steps}, {"step", step}};
    if (examples) j["examples"] = *examples;
    if (stimulating_questions) j["stimulating_questions"] = *stimulating_questions;
    if (reasoning) j["reasoning"] = *reasoning;
    return j;
  }

  friend bool operator==(const StepView&, const StepView&) = default;
};

inline StepView render_step(const PatternGraph& g, const WizardState& state) {
  if (state.finished) fail(ErrorCode::invalid_argument, "wizard already finished");
  const Pattern& p = g.at(state.pattern_id);
  if (state.step_index >= p.detail.steps.size())
    fail(ErrorCode::out_of_range, "step index beyond the pattern's steps");
  StepView v{p.id, p.card_text, state.step_index, state.total_steps,
             p.detail.steps[state.step_index], std::nullopt, std::nullopt, std::nullopt};
  if (state.detail_level == DetailLevel::full) {
    v.examples = p.detail.examples;
    v.stimulating_questions = p.detail.stimulating_questions;
    v.reasoning = p.detail.reasoning;
  }
  return v;
}

}  // namespace xc
