#include "requisites/bn/inference.hpp"

#include <algorithm>
#include <limits>

#include "factor.hpp"

namespace requisites::bn {

using detail::Factor;

namespace {

constexpr std::size_t kNoTarget = std::numeric_limits<std::size_t>::max();

// CPT of var restricted to the observed states of its family.
Factor cpt_factor(const BayesianNetwork& net, std::size_t var, const std::vector<int>& observed) {
  const auto& parents = net.parents(var);
  std::vector<std::size_t> family = parents;
  family.push_back(var);

  // Strides of each family member inside the flat CPT (child fastest).
  std::vector<std::size_t> cpt_stride(family.size());
  std::size_t s = 1;
  for (std::size_t i = family.size(); i-- > 0;) {
    cpt_stride[i] = s;
    s *= net.cardinality(family[i]);
  }

  std::size_t base = 0;
  std::vector<std::pair<std::size_t, std::size_t>> free_vars;  // (var, stride)
  for (std::size_t i = 0; i < family.size(); ++i) {
    const int st = observed[family[i]];
    if (st >= 0) {
      base += static_cast<std::size_t>(st) * cpt_stride[i];
    } else {
      free_vars.emplace_back(family[i], cpt_stride[i]);
    }
  }
  std::sort(free_vars.begin(), free_vars.end());

  Factor f;
  std::size_t total = 1;
  for (const auto& [v, stride] : free_vars) {
    f.scope.push_back(v);
    f.card.push_back(net.cardinality(v));
    total *= net.cardinality(v);
  }
  f.values.resize(total);
  const auto table = net.table(var);
  std::vector<std::size_t> digit(free_vars.size(), 0);
  std::size_t idx = base;
  for (std::size_t n = 0; n < total; ++n) {
    f.values[n] = table[idx];
    for (std::size_t d = free_vars.size(); d-- > 0;) {
      if (++digit[d] < f.card[d]) {
        idx += free_vars[d].second;
        break;
      }
      digit[d] = 0;
      idx -= (f.card[d] - 1) * free_vars[d].second;
    }
  }
  return f;
}

std::vector<bool> relevant_variables(const BayesianNetwork& net, const std::vector<int>& observed,
                                     std::size_t target, bool prune) {
  const std::size_t n = net.size();
  if (!prune) return std::vector<bool>(n, true);
  std::vector<bool> keep(n, false);
  std::vector<std::size_t> stack;
  for (std::size_t v = 0; v < n; ++v) {
    if (observed[v] >= 0 || v == target) {
      keep[v] = true;
      stack.push_back(v);
    }
  }
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto p : net.parents(v)) {
      if (!keep[p]) {
        keep[p] = true;
        stack.push_back(p);
      }
    }
  }
  return keep;
}

std::vector<std::size_t> min_degree_order(const std::vector<Factor>& factors,
                                          std::vector<std::size_t> pending, std::size_t n) {
  std::vector<char> adj(n * n, 0);
  std::vector<std::size_t> degree(n, 0);
  auto link = [&](std::size_t a, std::size_t b) {
    if (a != b && !adj[a * n + b]) {
      adj[a * n + b] = adj[b * n + a] = 1;
      ++degree[a];
      ++degree[b];
    }
  };
  for (const auto& f : factors) {
    for (auto a : f.scope) {
      for (auto b : f.scope) link(a, b);
    }
  }
  std::vector<std::size_t> order;
  order.reserve(pending.size());
  std::vector<std::size_t> neighbours;
  while (!pending.empty()) {
    auto best = pending.begin();
    for (auto it = pending.begin(); it != pending.end(); ++it) {
      if (degree[*it] < degree[*best]) best = it;
    }
    const std::size_t v = *best;
    pending.erase(best);
    order.push_back(v);
    neighbours.clear();
    for (std::size_t u = 0; u < n; ++u) {
      if (adj[v * n + u]) neighbours.push_back(u);
    }
    for (auto u : neighbours) {
      adj[v * n + u] = adj[u * n + v] = 0;
      --degree[u];
    }
    degree[v] = 0;
    for (auto a : neighbours) {
      for (auto b : neighbours) {
        if (a < b) link(a, b);
      }
    }
  }
  return order;
}

// Unnormalized P(target, evidence) over the target's states, or P(evidence)
// as a single value when target == kNoTarget. The target must be unobserved.
std::vector<double> eliminate(const BayesianNetwork& net, const std::vector<int>& observed,
                              std::size_t target, const EliminationOptions& options) {
  const std::size_t n = net.size();
  const auto keep = relevant_variables(net, observed, target, options.prune_irrelevant);

  std::vector<Factor> factors;
  for (std::size_t v = 0; v < n; ++v) {
    if (keep[v]) factors.push_back(cpt_factor(net, v, observed));
  }

  std::vector<std::size_t> order;
  std::vector<bool> queued(n, false);
  for (const auto& id : options.order) {
    const std::size_t v = net.index_of(id);
    if (keep[v] && observed[v] < 0 && v != target && !queued[v]) {
      order.push_back(v);
      queued[v] = true;
    }
  }
  std::vector<std::size_t> rest;
  for (std::size_t v = 0; v < n; ++v) {
    if (keep[v] && observed[v] < 0 && v != target && !queued[v]) rest.push_back(v);
  }
  for (auto v : min_degree_order(factors, std::move(rest), n)) order.push_back(v);

  for (auto v : order) {
    auto split = std::stable_partition(factors.begin(), factors.end(),
                                       [v](const Factor& f) { return !f.contains(v); });
    if (split == factors.end()) continue;
    Factor combined = std::move(*split);
    for (auto it = split + 1; it != factors.end(); ++it) combined = multiply(combined, *it);
    factors.erase(split, factors.end());
    factors.push_back(detail::sum_out(combined, v));
  }

  Factor result{{}, {}, {1.0}};
  for (const auto& f : factors) result = multiply(result, f);
  if (target == kNoTarget) return {result.values.at(0)};
  return result.values;
}

}  // namespace

double joint_probability(const BayesianNetwork& net, const Evidence& assignment) {
  const auto states = net.resolve(assignment);
  double p = 1.0;
  for (std::size_t v = 0; v < net.size(); ++v) {
    if (states[v] < 0) {
      throw BnError(ErrorCode::IncompleteAssignment,
                    "no state given for '" + net.variable(v).id + "'");
    }
  }
  for (std::size_t v = 0; v < net.size(); ++v) {
    std::size_t row = 0;
    for (auto parent : net.parents(v)) {
      row = row * net.cardinality(parent) + static_cast<std::size_t>(states[parent]);
    }
    p *= net.table(v)[row * net.cardinality(v) + static_cast<std::size_t>(states[v])];
  }
  return p;
}

double evidence_probability(const BayesianNetwork& net, const Evidence& evidence) {
  const auto states = net.resolve(evidence);
  return eliminate(net, states, kNoTarget, {})[0];
}

Posterior posterior(const BayesianNetwork& net, const Evidence& evidence, std::string_view target,
                    const EliminationOptions& options) {
  auto states = net.resolve(evidence);
  const std::size_t t = net.index_of(target);
  const int observed_target = states[t];
  states[t] = -1;

  auto joint = eliminate(net, states, t, options);
  double z = 0.0;
  for (double v : joint) z += v;
  if (!(z > 0.0) || (observed_target >= 0 && !(joint[static_cast<std::size_t>(observed_target)] > 0.0))) {
    throw BnError(ErrorCode::InconsistentEvidence, "evidence has probability zero");
  }

  Posterior out;
  out.variable = net.variable(t).id;
  out.states = net.variable(t).states;
  if (observed_target >= 0) {
    out.probabilities.assign(joint.size(), 0.0);
    out.probabilities[static_cast<std::size_t>(observed_target)] = 1.0;
  } else {
    out.probabilities = std::move(joint);
    for (double& v : out.probabilities) v /= z;
  }
  return out;
}

std::map<std::string, Posterior> prior_marginals(const BayesianNetwork& net) {
  std::map<std::string, Posterior> out;
  for (const auto& v : net.variables()) out.emplace(v.id, posterior(net, {}, v.id));
  return out;
}

std::set<std::string> markov_blanket(const BayesianNetwork& net, std::string_view var) {
  const std::size_t v = net.index_of(var);
  std::set<std::size_t> blanket(net.parents(v).begin(), net.parents(v).end());
  for (auto c : net.children(v)) {
    blanket.insert(c);
    blanket.insert(net.parents(c).begin(), net.parents(c).end());
  }
  blanket.erase(v);
  std::set<std::string> out;
  for (auto i : blanket) out.insert(net.variable(i).id);
  return out;
}

std::string map_predict(const BayesianNetwork& net, const Evidence& evidence,
                        std::string_view class_var) {
  const std::size_t c = net.index_of(class_var);
  if (evidence.contains(net.variable(c).id)) {
    throw BnError(ErrorCode::ClassObserved,
                  "'" + std::string(class_var) + "' is observed; nothing to predict");
  }
  const auto post = posterior(net, evidence, class_var);
  return post.states[post.argmax()];
}

}  // namespace requisites::bn
