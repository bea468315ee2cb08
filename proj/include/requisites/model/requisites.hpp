#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "requisites/bn/inference.hpp"
#include "requisites/bn/network.hpp"

namespace requisites::model {

namespace var {
inline constexpr std::string_view kStakeholdersExpertise = "stakeholders_expertise";
inline constexpr std::string_view kDomainExpertise = "domain_expertise";
inline constexpr std::string_view kReusedRequirement = "reused_requirement";
inline constexpr std::string_view kUnexpectedDependencies = "unexpected_dependencies";
inline constexpr std::string_view kSpecificity = "specificity";
inline constexpr std::string_view kUnclearCostBenefit = "unclear_cost_benefit";
inline constexpr std::string_view kDegreeOfCommitment = "degree_of_commitment";
inline constexpr std::string_view kHomogeneity = "homogeneity_of_description";
inline constexpr std::string_view kCompleteness = "requirement_completeness";
inline constexpr std::string_view kVariability = "requirement_variability";
inline constexpr std::string_view kDegreeOfRevision = "degree_of_revision";
}  // namespace var

// The eleven variables in declaration order, with their state labels.
const std::vector<bn::Variable>& requisites_variables();
// The fixed dependency structure.
const std::vector<bn::Edge>& requisites_edges();
// Parents of a variable in CPT order (order of appearance in the edge list).
std::vector<std::string> requisites_parents(std::string_view child);
bool is_root(std::string_view id);

// States of a non-root child from its baseline to its most escalated level.
const std::vector<std::string>& escalation_order(std::string_view child);
// States of `parent` ordered from least to most escalating for `child`.
const std::vector<std::string>& influence_order(std::string_view child, std::string_view parent);

// Weighted-cause (noisy-MAX) parameters of one child. Each parent state
// carries a weight in [0,1]; the leak covers causes outside the model.
struct CausalParams {
  double leak = 0.5;
  std::map<std::string, std::vector<double>> weights;  // parent id -> weight per parent state

  bool operator==(const CausalParams&) const = default;
};

struct CptParamSet {
  std::map<std::string, std::vector<double>> priors;  // root id -> prior row
  std::map<std::string, CausalParams> causal;         // child id -> parameters

  bool operator==(const CptParamSet&) const = default;
};

// Uniform priors, weights 0.5 everywhere, leak 0.5.
CptParamSet uniform_params();
// Starting point for calibration: uniform priors, leak 0.1, and each parent's
// weights rising evenly from 0 to 0.6 along influence_order().
CptParamSet graded_params();

// Throws std::invalid_argument when a parameter is missing, misshaped or
// outside [0,1], or a prior row is not normalized.
void validate_params(const CptParamSet& params);

// Expands one child's parameters into full CPT rows (parents in CPT order,
// last parent fastest). Each level of the child's escalation ladder is the
// max of independent per-cause levels; a cause of weight w lands on level k
// with Binomial(L-1, w) probability, L being the number of levels.
std::vector<std::vector<double>> expand_causal(std::string_view child, const CausalParams& params);

bn::BayesianNetwork build_requisites(const CptParamSet& params);

// The shipped, pre-calibrated parameters and the network built from them.
const CptParamSet& default_params();
const bn::BayesianNetwork& default_network();

// Posterior of degree_of_revision after each prefix of `steps`; element 0 is
// the prior. Throws std::invalid_argument on a repeated variable.
std::vector<bn::Posterior> evidence_trajectory(
    const bn::BayesianNetwork& net, const std::vector<std::pair<std::string, std::string>>& steps);

// Parameter file dialect ("requisites-params").
inline constexpr const char* kParamsFormat = "requisites-params";
nlohmann::json params_to_json(const CptParamSet& params);
CptParamSet params_from_json(const nlohmann::json& doc);

}  // namespace requisites::model
