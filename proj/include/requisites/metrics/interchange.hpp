#pragma once

#include <string>

#include "requisites/bn/network.hpp"

namespace requisites::metrics {

// Evidence interchange document:
//   <evidence><homogeneity_of_description state="yes"/>...</evidence>
// Elements are written in the network's variable order.
std::string evidence_to_xml(const bn::BayesianNetwork& net, const bn::Evidence& evidence);

// Throws bn::BnError(ParseError) for malformed XML or a wrong root, and
// UnknownVariable / IllegalState / ParseError (duplicate element, missing
// attribute) for content the network rejects.
bn::Evidence evidence_from_xml(const bn::BayesianNetwork& net, const std::string& xml);

}  // namespace requisites::metrics
