#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "requisites/bn/network.hpp"

namespace requisites::bn {

// Canonical network document (JSON), see docs/formats.md:
//
//   { "format": "requisites-bn", "version": 1,
//     "variables": [ {"id": "a", "states": ["x", "y"]}, ... ],
//     "edges":     [ ["a", "b"], ... ],
//     "cpts":      [ {"child": "b", "parents": ["a"], "rows": [[0.8, 0.2], [0.1, 0.9]]}, ... ] }
//
// Rows follow the listed parent order with the last parent varying fastest.
// Probabilities are written with 17 significant digits so load(save(x)) == x.
inline constexpr const char* kNetworkFormat = "requisites-bn";

nlohmann::json network_to_json(const BayesianNetwork& net);
// Throws BnError(ParseError) for malformed documents and the build_network
// errors for well-formed but invalid ones.
BayesianNetwork network_from_json(const nlohmann::json& doc);

BayesianNetwork load_network(const std::filesystem::path& path);
void save_network(const BayesianNetwork& net, const std::filesystem::path& path);

std::string dump_json(const nlohmann::json& doc);

}  // namespace requisites::bn
