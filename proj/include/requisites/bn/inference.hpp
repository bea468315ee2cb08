#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "requisites/bn/network.hpp"

namespace requisites::bn {

// Knobs for variable elimination. The defaults are what every caller outside
// the test suite wants.
struct EliminationOptions {
  // Variables eliminated first, in this order. Variables not listed are
  // eliminated afterwards by the min-degree heuristic. Unknown ids throw.
  std::vector<std::string> order;
  // Drop variables that are not ancestors of the target or of an observed
  // variable (barren nodes). Exact either way.
  bool prune_irrelevant = true;
};

// Product of the CPT entries selected by a complete assignment.
// Throws IncompleteAssignment, IllegalState or UnknownVariable.
double joint_probability(const BayesianNetwork& net, const Evidence& assignment);

// P(evidence), by variable elimination.
double evidence_probability(const BayesianNetwork& net, const Evidence& evidence);

// Exact P(target | evidence) by variable elimination. An observed target
// yields a point mass on its observed state. Throws InconsistentEvidence when
// P(evidence) is zero.
Posterior posterior(const BayesianNetwork& net, const Evidence& evidence, std::string_view target,
                    const EliminationOptions& options = {});

// Marginals under empty evidence, keyed by variable id.
std::map<std::string, Posterior> prior_marginals(const BayesianNetwork& net);

// Parents, children and the children's other parents; never contains var.
std::set<std::string> markov_blanket(const BayesianNetwork& net, std::string_view var);

// Most probable state of class_var; ties go to the earliest declared state.
// Throws ClassObserved when class_var is part of the evidence.
std::string map_predict(const BayesianNetwork& net, const Evidence& evidence,
                        std::string_view class_var);

}  // namespace requisites::bn
