#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "requisites/bn/error.hpp"

namespace requisites::bn {

// Tolerance for row sums and other internal probability identities.
inline constexpr double kProbabilityTolerance = 1e-9;

struct Variable {
  std::string id;
  std::vector<std::string> states;  // declaration order is table order and tie-break order

  bool operator==(const Variable&) const = default;
};

struct Edge {
  std::string parent;
  std::string child;

  auto operator<=>(const Edge&) const = default;
};

// P(child | parents). One row per parent-state combination, the last listed
// parent varying fastest; one column per child state.
struct Cpt {
  std::string child;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> rows;

  bool operator==(const Cpt&) const = default;
};

// Observed variable -> state label.
using Evidence = std::map<std::string, std::string>;

struct Posterior {
  std::string variable;
  std::vector<std::string> states;
  std::vector<double> probabilities;  // aligned with states

  double probability(std::string_view state) const;
  // Index of the most probable state; ties go to the earliest state.
  std::size_t argmax() const;
};

// Validated, immutable discrete Bayesian network. Variables are addressed by
// their declaration index internally; the public surface speaks in ids.
class BayesianNetwork {
 public:
  std::size_t size() const noexcept { return variables_.size(); }
  const std::vector<Variable>& variables() const noexcept { return variables_; }
  const Variable& variable(std::size_t index) const { return variables_.at(index); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::optional<std::size_t> find(std::string_view id) const;
  // Throws UnknownVariable.
  std::size_t index_of(std::string_view id) const;
  // Throws IllegalState.
  std::size_t state_index(std::size_t var, std::string_view state) const;

  std::size_t cardinality(std::size_t var) const { return variables_[var].states.size(); }
  // Parents in the order used by the variable's CPT.
  const std::vector<std::size_t>& parents(std::size_t var) const { return parents_[var]; }
  const std::vector<std::size_t>& children(std::size_t var) const { return children_[var]; }
  const std::vector<std::size_t>& topological_order() const noexcept { return topo_; }

  // Flat CPT, row-major with the child state fastest.
  std::span<const double> table(std::size_t var) const { return tables_[var]; }
  Cpt cpt(std::string_view id) const;
  std::vector<Cpt> cpts() const;

  // Resolves ids/labels to indices; unobserved variables map to -1.
  // Throws UnknownVariable or IllegalState.
  std::vector<int> resolve(const Evidence& evidence) const;

 private:
  friend BayesianNetwork build_network(std::vector<Variable>, std::vector<Edge>,
                                       std::vector<Cpt>);
  BayesianNetwork() = default;

  std::vector<Variable> variables_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<double>> tables_;
  std::vector<std::size_t> topo_;
};

// Validates and assembles a network. Throws BnError with CycleDetected,
// CptMismatch, RowNotNormalized, UnknownVariable, DuplicateVariable,
// DuplicateEdge or InvalidVariable.
BayesianNetwork build_network(std::vector<Variable> variables, std::vector<Edge> edges,
                              std::vector<Cpt> cpts);

}  // namespace requisites::bn
