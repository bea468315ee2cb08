#include "requisites/bn/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace requisites::bn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::CptMismatch: return "CptMismatch";
    case ErrorCode::RowNotNormalized: return "RowNotNormalized";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::IllegalState: return "IllegalState";
    case ErrorCode::DuplicateVariable: return "DuplicateVariable";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::InvalidVariable: return "InvalidVariable";
    case ErrorCode::IncompleteAssignment: return "IncompleteAssignment";
    case ErrorCode::InconsistentEvidence: return "InconsistentEvidence";
    case ErrorCode::ClassObserved: return "ClassObserved";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

double Posterior::probability(std::string_view state) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == state) return probabilities[i];
  }
  throw BnError(ErrorCode::IllegalState,
                "'" + std::string(state) + "' is not a state of " + variable);
}

std::size_t Posterior::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probabilities.size(); ++i) {
    if (probabilities[i] > probabilities[best]) best = i;
  }
  return best;
}

std::optional<std::size_t> BayesianNetwork::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t BayesianNetwork::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw BnError(ErrorCode::UnknownVariable, "no variable named '" + std::string(id) + "'");
}

std::size_t BayesianNetwork::state_index(std::size_t var, std::string_view state) const {
  const auto& states = variables_[var].states;
  auto it = std::find(states.begin(), states.end(), state);
  if (it == states.end()) {
    throw BnError(ErrorCode::IllegalState, "'" + std::string(state) + "' is not a state of " +
                                               variables_[var].id);
  }
  return static_cast<std::size_t>(it - states.begin());
}

Cpt BayesianNetwork::cpt(std::string_view id) const {
  const std::size_t var = index_of(id);
  Cpt out;
  out.child = variables_[var].id;
  for (auto p : parents_[var]) out.parents.push_back(variables_[p].id);
  const std::size_t cols = cardinality(var);
  const auto& flat = tables_[var];
  for (std::size_t r = 0; r < flat.size() / cols; ++r) {
    out.rows.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(r * cols),
                          flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  }
  return out;
}

std::vector<Cpt> BayesianNetwork::cpts() const {
  std::vector<Cpt> out;
  out.reserve(size());
  for (const auto& v : variables_) out.push_back(cpt(v.id));
  return out;
}

std::vector<int> BayesianNetwork::resolve(const Evidence& evidence) const {
  std::vector<int> states(size(), -1);
  for (const auto& [id, label] : evidence) {
    const std::size_t var = index_of(id);
    states[var] = static_cast<int>(state_index(var, label));
  }
  return states;
}

namespace {

void validate_variables(const std::vector<Variable>& variables) {
  std::set<std::string> seen;
  for (const auto& v : variables) {
    if (v.id.empty()) throw BnError(ErrorCode::InvalidVariable, "variable with empty id");
    if (!seen.insert(v.id).second) {
      throw BnError(ErrorCode::DuplicateVariable, "variable '" + v.id + "' declared twice");
    }
    if (v.states.size() < 2) {
      throw BnError(ErrorCode::InvalidVariable, "variable '" + v.id + "' needs at least 2 states");
    }
    std::set<std::string> labels;
    for (const auto& s : v.states) {
      if (s.empty()) throw BnError(ErrorCode::InvalidVariable, "empty state label in " + v.id);
      if (!labels.insert(s).second) {
        throw BnError(ErrorCode::InvalidVariable,
                      "state '" + s + "' repeated in variable '" + v.id + "'");
      }
    }
  }
}

std::string describe_cycle(const std::vector<Variable>& variables,
                           const std::vector<std::size_t>& remaining) {
  std::ostringstream os;
  os << "directed cycle among {";
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    if (i) os << ", ";
    os << variables[remaining[i]].id;
  }
  os << "}";
  return os.str();
}

}  // namespace

BayesianNetwork build_network(std::vector<Variable> variables, std::vector<Edge> edges,
                              std::vector<Cpt> cpts) {
  validate_variables(variables);

  BayesianNetwork net;
  net.variables_ = std::move(variables);
  const std::size_t n = net.variables_.size();
  for (std::size_t i = 0; i < n; ++i) net.index_.emplace(net.variables_[i].id, i);

  std::vector<std::set<std::size_t>> structural_parents(n);
  net.children_.assign(n, {});
  std::set<std::pair<std::size_t, std::size_t>> seen_edges;
  for (const auto& e : edges) {
    const std::size_t p = net.index_of(e.parent);
    const std::size_t c = net.index_of(e.child);
    if (p == c) throw BnError(ErrorCode::CycleDetected, "self-loop on '" + e.parent + "'");
    if (!seen_edges.emplace(p, c).second) {
      throw BnError(ErrorCode::DuplicateEdge, e.parent + " -> " + e.child + " listed twice");
    }
    structural_parents[c].insert(p);
    net.children_[p].push_back(c);
  }
  for (auto& ch : net.children_) std::sort(ch.begin(), ch.end());

  // Kahn's algorithm; ties resolved by declaration index.
  std::vector<std::size_t> indegree(n);
  for (std::size_t c = 0; c < n; ++c) indegree[c] = structural_parents[c].size();
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    net.topo_.push_back(v);
    for (auto c : net.children_[v]) {
      if (--indegree[c] == 0) ready.insert(c);
    }
  }
  if (net.topo_.size() != n) {
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < n; ++i) {
      if (indegree[i] > 0) remaining.push_back(i);
    }
    throw BnError(ErrorCode::CycleDetected, describe_cycle(net.variables_, remaining));
  }

  net.parents_.assign(n, {});
  net.tables_.assign(n, {});
  std::vector<bool> has_cpt(n, false);
  for (auto& cpt : cpts) {
    const std::size_t c = net.index_of(cpt.child);
    if (has_cpt[c]) throw BnError(ErrorCode::CptMismatch, "two CPTs for '" + cpt.child + "'");
    has_cpt[c] = true;

    std::vector<std::size_t> parents;
    std::set<std::size_t> parent_set;
    for (const auto& p : cpt.parents) {
      const std::size_t pi = net.index_of(p);
      if (!parent_set.insert(pi).second) {
        throw BnError(ErrorCode::CptMismatch, "parent '" + p + "' repeated in CPT of " + cpt.child);
      }
      parents.push_back(pi);
    }
    if (parent_set != structural_parents[c]) {
      throw BnError(ErrorCode::CptMismatch,
                    "CPT parents of '" + cpt.child + "' differ from the graph's parents");
    }

    std::size_t expected_rows = 1;
    for (auto p : parents) expected_rows *= net.cardinality(p);
    const std::size_t cols = net.cardinality(c);
    if (cpt.rows.size() != expected_rows) {
      throw BnError(ErrorCode::CptMismatch, "CPT of '" + cpt.child + "' has " +
                                                std::to_string(cpt.rows.size()) + " rows, expected " +
                                                std::to_string(expected_rows));
    }
    std::vector<double> flat;
    flat.reserve(expected_rows * cols);
    for (std::size_t r = 0; r < cpt.rows.size(); ++r) {
      const auto& row = cpt.rows[r];
      if (row.size() != cols) {
        throw BnError(ErrorCode::CptMismatch, "row " + std::to_string(r) + " of CPT '" +
                                                  cpt.child + "' has " + std::to_string(row.size()) +
                                                  " entries, expected " + std::to_string(cols));
      }
      double sum = 0.0;
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
          throw BnError(ErrorCode::RowNotNormalized, "row " + std::to_string(r) + " of CPT '" +
                                                         cpt.child + "' has an entry outside [0,1]");
        }
        sum += p;
        flat.push_back(p);
      }
      if (std::abs(sum - 1.0) > kProbabilityTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "row " << r << " of CPT '" << cpt.child << "' sums to " << sum;
        throw BnError(ErrorCode::RowNotNormalized, os.str());
      }
    }
    net.parents_[c] = std::move(parents);
    net.tables_[c] = std::move(flat);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_cpt[i]) {
      throw BnError(ErrorCode::CptMismatch, "no CPT for '" + net.variables_[i].id + "'");
    }
  }

  // Edges are kept grouped by child, in each CPT's parent order.
  for (std::size_t c = 0; c < n; ++c) {
    for (auto p : net.parents_[c]) net.edges_.push_back({net.variables_[p].id, net.variables_[c].id});
  }
  return net;
}

}  // namespace requisites::bn
