#include "requisites/model/requisites.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace requisites::model {

namespace {

const std::vector<std::string> kHighMediumLow{"high", "medium", "low"};
const std::vector<std::string> kLowMediumHigh{"low", "medium", "high"};
const std::vector<std::string> kYesNo{"yes", "no"};
const std::vector<std::string> kNoYes{"no", "yes"};
const std::vector<std::string> kManyFewNone{"many", "few", "none"};

struct Influence {
  std::string_view child;
  std::string_view parent;
  const std::vector<std::string>* order;  // least to most escalating
};

// Edge list in CPT parent order, each with the direction of its influence.
const std::vector<Influence>& influences() {
  static const std::vector<Influence> table{
      {var::kSpecificity, var::kDegreeOfCommitment, &kLowMediumHigh},
      {var::kUnclearCostBenefit, var::kStakeholdersExpertise, &kHighMediumLow},
      {var::kCompleteness, var::kDomainExpertise, &kHighMediumLow},
      {var::kCompleteness, var::kStakeholdersExpertise, &kHighMediumLow},
      {var::kHomogeneity, var::kDomainExpertise, &kHighMediumLow},
      {var::kHomogeneity, var::kStakeholdersExpertise, &kHighMediumLow},
      {var::kVariability, var::kUnexpectedDependencies, &kNoYes},
      {var::kVariability, var::kUnclearCostBenefit, &kLowMediumHigh},
      {var::kVariability, var::kCompleteness, &kHighMediumLow},
      {var::kVariability, var::kDegreeOfCommitment, &kLowMediumHigh},
      {var::kDegreeOfRevision, var::kSpecificity, &kHighMediumLow},
      {var::kDegreeOfRevision, var::kHomogeneity, &kYesNo},
      {var::kDegreeOfRevision, var::kVariability, &kLowMediumHigh},
      {var::kDegreeOfRevision, var::kCompleteness, &kHighMediumLow},
      {var::kDegreeOfRevision, var::kReusedRequirement, &kManyFewNone},
  };
  return table;
}

const bn::Variable& variable(std::string_view id) {
  for (const auto& v : requisites_variables()) {
    if (v.id == id) return v;
  }
  throw std::invalid_argument("not a Requisites variable: " + std::string(id));
}

std::size_t index_in(const std::vector<std::string>& states, std::string_view label) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == label) return i;
  }
  throw std::logic_error("state table out of sync: " + std::string(label));
}

// P(Binomial(n, w) <= k) for k = 0..n-1.
std::vector<double> binomial_cdf(std::size_t n, double w) {
  std::vector<double> cdf(n, 0.0);
  double coeff = 1.0;
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double term = coeff;
    for (std::size_t a = 0; a < j; ++a) term *= w;
    for (std::size_t b = 0; b < n - j; ++b) term *= 1.0 - w;
    total += term;
    cdf[j] = total;
    coeff = coeff * static_cast<double>(n - j) / static_cast<double>(j + 1);
  }
  return cdf;
}

void check_unit(double x, const std::string& what) {
  if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
    throw std::invalid_argument(what + " must lie in [0,1]");
  }
}

}  // namespace

const std::vector<bn::Variable>& requisites_variables() {
  static const std::vector<bn::Variable> vars{
      {std::string(var::kStakeholdersExpertise), kHighMediumLow},
      {std::string(var::kDomainExpertise), kHighMediumLow},
      {std::string(var::kReusedRequirement), kManyFewNone},
      {std::string(var::kUnexpectedDependencies), kYesNo},
      {std::string(var::kSpecificity), kHighMediumLow},
      {std::string(var::kUnclearCostBenefit), kHighMediumLow},
      {std::string(var::kDegreeOfCommitment), kHighMediumLow},
      {std::string(var::kHomogeneity), kYesNo},
      {std::string(var::kCompleteness), kHighMediumLow},
      {std::string(var::kVariability), kHighMediumLow},
      {std::string(var::kDegreeOfRevision), kYesNo},
  };
  return vars;
}

const std::vector<bn::Edge>& requisites_edges() {
  static const std::vector<bn::Edge> edges = [] {
    std::vector<bn::Edge> out;
    for (const auto& inf : influences()) out.push_back({std::string(inf.parent), std::string(inf.child)});
    return out;
  }();
  return edges;
}

std::vector<std::string> requisites_parents(std::string_view child) {
  variable(child);
  std::vector<std::string> out;
  for (const auto& inf : influences()) {
    if (inf.child == child) out.emplace_back(inf.parent);
  }
  return out;
}

bool is_root(std::string_view id) { return requisites_parents(id).empty(); }

const std::vector<std::string>& escalation_order(std::string_view child) {
  if (child == var::kSpecificity || child == var::kCompleteness) return kHighMediumLow;
  if (child == var::kUnclearCostBenefit || child == var::kVariability) return kLowMediumHigh;
  if (child == var::kHomogeneity) return kYesNo;
  if (child == var::kDegreeOfRevision) return kNoYes;
  throw std::invalid_argument(std::string(child) + " has no parents");
}

const std::vector<std::string>& influence_order(std::string_view child, std::string_view parent) {
  for (const auto& inf : influences()) {
    if (inf.child == child && inf.parent == parent) return *inf.order;
  }
  throw std::invalid_argument("no edge " + std::string(parent) + " -> " + std::string(child));
}

CptParamSet uniform_params() {
  CptParamSet params;
  for (const auto& v : requisites_variables()) {
    const auto parents = requisites_parents(v.id);
    if (parents.empty()) {
      params.priors[v.id] = std::vector<double>(v.states.size(), 1.0 / static_cast<double>(v.states.size()));
      continue;
    }
    CausalParams c;
    c.leak = 0.5;
    for (const auto& p : parents) c.weights[p] = std::vector<double>(variable(p).states.size(), 0.5);
    params.causal[v.id] = std::move(c);
  }
  return params;
}

CptParamSet graded_params() {
  CptParamSet params = uniform_params();
  for (auto& [child, c] : params.causal) {
    c.leak = 0.1;
    for (auto& [parent, weights] : c.weights) {
      const auto& order = influence_order(child, parent);
      const auto& states = variable(parent).states;
      for (std::size_t k = 0; k < order.size(); ++k) {
        weights[index_in(states, order[k])] =
            0.6 * static_cast<double>(k) / static_cast<double>(order.size() - 1);
      }
    }
  }
  return params;
}

void validate_params(const CptParamSet& params) {
  std::size_t roots = 0, children = 0;
  for (const auto& v : requisites_variables()) {
    const auto parents = requisites_parents(v.id);
    if (parents.empty()) {
      ++roots;
      auto it = params.priors.find(v.id);
      if (it == params.priors.end()) throw std::invalid_argument("missing prior for " + v.id);
      if (it->second.size() != v.states.size()) {
        throw std::invalid_argument("prior of " + v.id + " needs " +
                                    std::to_string(v.states.size()) + " entries");
      }
      double sum = 0.0;
      for (double p : it->second) {
        check_unit(p, "prior of " + v.id);
        sum += p;
      }
      if (std::abs(sum - 1.0) > bn::kProbabilityTolerance) {
        throw std::invalid_argument("prior of " + v.id + " does not sum to 1");
      }
      continue;
    }
    ++children;
    auto it = params.causal.find(v.id);
    if (it == params.causal.end()) throw std::invalid_argument("missing causal params for " + v.id);
    check_unit(it->second.leak, "leak of " + v.id);
    if (it->second.weights.size() != parents.size()) {
      throw std::invalid_argument("causal params of " + v.id + " must list exactly its parents");
    }
    for (const auto& p : parents) {
      auto w = it->second.weights.find(p);
      if (w == it->second.weights.end()) {
        throw std::invalid_argument("missing weights for " + p + " -> " + v.id);
      }
      if (w->second.size() != variable(p).states.size()) {
        throw std::invalid_argument("weights for " + p + " -> " + v.id + " need one per state");
      }
      for (double x : w->second) check_unit(x, "weight " + p + " -> " + v.id);
    }
  }
  if (params.priors.size() != roots || params.causal.size() != children) {
    throw std::invalid_argument("parameter set names variables outside the model");
  }
}

std::vector<std::vector<double>> expand_causal(std::string_view child, const CausalParams& params) {
  const auto& child_states = variable(child).states;
  const auto& ladder = escalation_order(child);
  const std::size_t levels = ladder.size();
  const auto parents = requisites_parents(child);

  std::vector<std::size_t> card;
  std::size_t rows = 1;
  for (const auto& p : parents) {
    card.push_back(variable(p).states.size());
    rows *= card.back();
  }

  std::vector<std::size_t> column(levels);
  for (std::size_t k = 0; k < levels; ++k) column[k] = index_in(child_states, ladder[k]);

  // Per-cause CDFs, computed once per parent state.
  const std::size_t n = levels - 1;
  const auto leak_cdf = binomial_cdf(n, params.leak);
  std::vector<std::vector<std::vector<double>>> cause_cdf(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    for (double w : params.weights.at(parents[i])) cause_cdf[i].push_back(binomial_cdf(n, w));
  }

  std::vector<std::vector<double>> out;
  out.reserve(rows);
  std::vector<std::size_t> digit(parents.size(), 0);
  std::vector<double> cdf(levels);
  for (std::size_t r = 0; r < rows; ++r) {
    // P(level <= k) is the product of every cause's own CDF at k.
    for (std::size_t k = 0; k < n; ++k) {
      double f = leak_cdf[k];
      for (std::size_t i = 0; i < parents.size(); ++i) f *= cause_cdf[i][digit[i]][k];
      cdf[k] = f;
    }
    cdf[n] = 1.0;
    std::vector<double> row(levels, 0.0);
    double below = 0.0;
    for (std::size_t k = 0; k < levels; ++k) {
      row[column[k]] = cdf[k] - below;
      below = cdf[k];
    }
    out.push_back(std::move(row));

    for (std::size_t d = parents.size(); d-- > 0;) {
      if (++digit[d] < card[d]) break;
      digit[d] = 0;
    }
  }
  return out;
}

bn::BayesianNetwork build_requisites(const CptParamSet& params) {
  validate_params(params);
  std::vector<bn::Cpt> cpts;
  for (const auto& v : requisites_variables()) {
    bn::Cpt cpt;
    cpt.child = v.id;
    cpt.parents = requisites_parents(v.id);
    if (cpt.parents.empty()) {
      cpt.rows = {params.priors.at(v.id)};
    } else {
      cpt.rows = expand_causal(v.id, params.causal.at(v.id));
    }
    cpts.push_back(std::move(cpt));
  }
  return bn::build_network(requisites_variables(), requisites_edges(), std::move(cpts));
}

const bn::BayesianNetwork& default_network() {
  static const bn::BayesianNetwork net = build_requisites(default_params());
  return net;
}

std::vector<bn::Posterior> evidence_trajectory(
    const bn::BayesianNetwork& net, const std::vector<std::pair<std::string, std::string>>& steps) {
  std::set<std::string> seen;
  for (const auto& [id, state] : steps) {
    if (!seen.insert(id).second) {
      throw std::invalid_argument("variable '" + id + "' appears twice in the trajectory");
    }
  }
  std::vector<bn::Posterior> out;
  bn::Evidence evidence;
  out.push_back(bn::posterior(net, evidence, var::kDegreeOfRevision));
  for (const auto& [id, state] : steps) {
    evidence[id] = state;
    out.push_back(bn::posterior(net, evidence, var::kDegreeOfRevision));
  }
  return out;
}

nlohmann::json params_to_json(const CptParamSet& params) {
  nlohmann::json doc;
  doc["format"] = kParamsFormat;
  doc["version"] = 1;
  doc["priors"] = params.priors;
  nlohmann::json causal = nlohmann::json::object();
  for (const auto& [child, c] : params.causal) {
    causal[child] = {{"leak", c.leak}, {"weights", c.weights}};
  }
  doc["causal"] = std::move(causal);
  return doc;
}

CptParamSet params_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kParamsFormat) {
    throw bn::BnError(bn::ErrorCode::ParseError,
                      std::string("expected a document with \"format\": \"") + kParamsFormat + "\"");
  }
  CptParamSet params;
  try {
    params.priors = doc.at("priors").get<std::map<std::string, std::vector<double>>>();
    for (const auto& [child, c] : doc.at("causal").items()) {
      CausalParams cp;
      cp.leak = c.at("leak").get<double>();
      cp.weights = c.at("weights").get<std::map<std::string, std::vector<double>>>();
      params.causal[child] = std::move(cp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw bn::BnError(bn::ErrorCode::ParseError, std::string("parameter file: ") + e.what());
  }
  return params;
}

}  // namespace requisites::model
