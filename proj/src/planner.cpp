// SPDX-License-Identifier: Apache-2.0
#include "releasegate/planner.hpp"

#include <cctype>

#include "releasegate/plan_wire.hpp"

namespace releasegate {

namespace {

std::string failure_message(const std::vector<PlanCandidate>& candidates) {
  std::string msg = "no valid plan among " + std::to_string(candidates.size()) + " candidates";
  for (const auto& c : candidates) msg += "; sample " + std::to_string(c.sample_index) + ": " + c.error;
  return msg;
}

/// End of the balanced-brace span opening at `open`, honouring JSON strings; npos if none.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

}  // namespace

PlanningFailure::PlanningFailure(std::vector<PlanCandidate> candidates)
    : std::runtime_error(failure_message(candidates)), candidates_(std::move(candidates)) {}

std::string extract_plan_document(std::string_view raw) {
  if (raw.find("```") != std::string_view::npos) {
    auto body = strip_code_fence(raw);
    if (body.data() != raw.data() || body.size() != raw.size()) {
      while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.remove_suffix(1);
      while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) body.remove_prefix(1);
      return std::string(body);
    }
  }
  std::size_t best_start = 0, best_len = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{') continue;
    const auto end = match_brace(raw, i);
    if (end == std::string_view::npos) continue;
    if (end - i + 1 > best_len) {
      best_start = i;
      best_len = end - i + 1;
    }
    i = end;
  }
  if (best_len == 0) throw PlanError(PlanErrorKind::syntax, "no plan document found in reply");
  return std::string(raw.substr(best_start, best_len));
}

PlanDecision plan_query(const std::string& query, const KnowledgeBase& kb, const PlannerConfig& config,
                        const LlmGateway& gateway) {
  if (config.n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
  auto request = render_planner_prompt(kb, select_examples(kb.examples, config.k_shot), query, kb.constraints);
  request.temperature = config.temperature;
  request.sample_tag = config.sample_tag;
  const auto responses = gateway.complete_n(request, config.n_samples, config.parallelism);

  PlanDecision d;
  d.n_samples = config.n_samples;
  d.k_shot = config.k_shot;
  d.system_prompt = request.system_prompt;
  d.query = query;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    PlanCandidate c;
    c.sample_index = i;
    c.raw_response = responses[i].text;
    try {
      auto plan = parse_plan(extract_plan_document(c.raw_response), kb.schema);
      c.canonical = canonicalize(plan, kb.schema);
      c.plan = std::move(plan);
    } catch (const PlanError& e) {
      c.error = e.what();
    }
    if (c.canonical) {
      bool seen = false;
      for (auto& v : d.tally) {
        if (v.canonical == *c.canonical) {
          ++v.votes;
          seen = true;
          break;
        }
      }
      if (!seen) d.tally.push_back({*c.canonical, 1, i});
    }
    d.candidates.push_back(std::move(c));
  }
  if (d.tally.empty()) throw PlanningFailure(std::move(d.candidates));

  // Tally is in first-appearance order, so the first maximum has the lowest sample index.
  const VoteCount* best = &d.tally.front();
  for (const auto& v : d.tally) {
    if (v.votes > best->votes) best = &v;
  }
  d.chosen_canonical = best->canonical;
  d.chosen_votes = best->votes;
  d.chosen = *d.candidates[best->first_sample].plan;
  return d;
}

PlanDecision plan_query_single(const std::string& query, const KnowledgeBase& kb, std::size_t k_shot,
                               const LlmGateway& gateway) {
  PlannerConfig config;
  config.k_shot = k_shot;
  config.n_samples = 1;
  config.parallelism = 1;
  return plan_query(query, kb, config, gateway);
}

nlohmann::ordered_json candidate_to_json(const PlanCandidate& c) {
  nlohmann::ordered_json j;
  j["sample_index"] = c.sample_index;
  j["raw_response"] = c.raw_response;
  if (c.plan) {
    j["plan"] = plan_to_json(*c.plan);
    j["canonical"] = *c.canonical;
  } else {
    j["error"] = c.error;
  }
  return j;
}

nlohmann::ordered_json decision_to_json(const PlanDecision& d) {
  nlohmann::ordered_json j;
  j["query"] = d.query;
  j["k_shot"] = d.k_shot;
  j["n_samples"] = d.n_samples;
  j["chosen"] = plan_to_json(d.chosen);
  j["chosen_canonical"] = d.chosen_canonical;
  j["chosen_votes"] = d.chosen_votes;
  j["steps_text"] = render_steps(d.chosen);
  j["difficulty"] = classify_difficulty(d.chosen);
  nlohmann::ordered_json tally = nlohmann::ordered_json::array();
  for (const auto& v : d.tally) {
    tally.push_back({{"canonical", v.canonical}, {"votes", v.votes}, {"first_sample", v.first_sample}});
  }
  j["tally"] = std::move(tally);
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const auto& c : d.candidates) cands.push_back(candidate_to_json(c));
  j["candidates"] = std::move(cands);
  j["system_prompt"] = d.system_prompt;
  return j;
}

}  // namespace releasegate
