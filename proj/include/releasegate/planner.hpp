// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "releasegate/knowledge_base.hpp"
#include "releasegate/llm_gateway.hpp"
#include "releasegate/plan.hpp"

namespace releasegate {

struct PlanCandidate {
  std::size_t sample_index = 0;
  std::string raw_response;
  std::optional<AnalysisPlan> plan;
  /// Extraction, parse or validation error when `plan` is empty.
  std::string error;
  /// Present exactly when `plan` is.
  std::optional<std::string> canonical;
};

struct VoteCount {
  std::string canonical;
  std::size_t votes = 0;
  /// Lowest sample index that produced this form.
  std::size_t first_sample = 0;
};

struct PlanDecision {
  std::vector<PlanCandidate> candidates;
  /// One entry per distinct canonical form, in order of first appearance.
  std::vector<VoteCount> tally;
  AnalysisPlan chosen;
  std::string chosen_canonical;
  std::size_t chosen_votes = 0;
  std::size_t n_samples = 0;
  std::size_t k_shot = 0;
  std::string system_prompt;
  std::string query;
};

class PlanningFailure : public std::runtime_error {
 public:
  explicit PlanningFailure(std::vector<PlanCandidate> candidates);
  const std::vector<PlanCandidate>& candidates() const { return candidates_; }

 private:
  std::vector<PlanCandidate> candidates_;
};

struct PlannerConfig {
  std::size_t k_shot = 3;
  std::size_t n_samples = 3;
  std::size_t parallelism = 3;
  double temperature = 0.7;
  std::string sample_tag = "plan";
};

/// The plan document inside an LLM reply: the last fenced block, else the largest balanced
/// `{...}` span. Throws PlanError(syntax) when there is neither.
std::string extract_plan_document(std::string_view raw);

/// Samples `n_samples` plans, validates each and picks the canonical form with the most
/// votes; ties go to the form seen at the lowest sample index. Throws PlanningFailure when
/// no candidate is valid; gateway errors propagate.
PlanDecision plan_query(const std::string& query, const KnowledgeBase& kb, const PlannerConfig& config,
                        const LlmGateway& gateway);

/// plan_query with a single sample.
PlanDecision plan_query_single(const std::string& query, const KnowledgeBase& kb, std::size_t k_shot,
                               const LlmGateway& gateway);

nlohmann::ordered_json candidate_to_json(const PlanCandidate& c);
/// Decision summary: chosen plan, its renderings, the tally and every candidate.
nlohmann::ordered_json decision_to_json(const PlanDecision& d);

}  // namespace releasegate
