#include "requisites/model/calibration.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>
#include <tuple>

namespace requisites::model {

namespace {

constexpr double kMinRaw = 0.1;   // unnormalized prior entries live in [kMinRaw, 1]
constexpr double kMinLeak = 0.01;
constexpr double kMaxLeak = 0.99;
constexpr double kMaxWeight = 0.99;

enum class SlotKind { PriorRaw, Leak, Increment };

struct Slot {
  SlotKind kind;
  std::string child;   // owning variable
  std::string parent;  // Increment only
  double lo;
  double hi;
};

// Flat search vector <-> CptParamSet. Root priors are unnormalized positive
// entries; causal weights are cumulative increments along influence_order so
// any point in the box decodes to a monotone parameter set.
class SearchSpace {
 public:
  SearchSpace() {
    for (const auto& v : requisites_variables()) {
      const auto parents = requisites_parents(v.id);
      if (parents.empty()) {
        for (std::size_t s = 0; s < v.states.size(); ++s) {
          slots_.push_back({SlotKind::PriorRaw, v.id, {}, kMinRaw, 1.0});
        }
        continue;
      }
      slots_.push_back({SlotKind::Leak, v.id, {}, kMinLeak, kMaxLeak});
      for (const auto& p : parents) {
        for (std::size_t k = 0; k < influence_order(v.id, p).size(); ++k) {
          slots_.push_back({SlotKind::Increment, v.id, p, 0.0, 1.0});
        }
      }
    }
  }

  std::size_t size() const { return slots_.size(); }
  const Slot& slot(std::size_t i) const { return slots_[i]; }

  CptParamSet decode(const std::vector<double>& x) const {
    CptParamSet params;
    std::size_t i = 0;
    while (i < slots_.size()) {
      const Slot& s = slots_[i];
      if (s.kind == SlotKind::PriorRaw) {
        std::vector<double> row;
        double sum = 0.0;
        for (; i < slots_.size() && slots_[i].kind == SlotKind::PriorRaw && slots_[i].child == s.child; ++i) {
          row.push_back(x[i]);
          sum += x[i];
        }
        for (double& p : row) p /= sum;
        params.priors[s.child] = std::move(row);
        continue;
      }
      if (s.kind == SlotKind::Leak) {
        params.causal[s.child].leak = x[i++];
        continue;
      }
      const auto& order = influence_order(s.child, s.parent);
      const auto& states = state_labels(s.parent);
      std::vector<double> weights(states.size(), 0.0);
      double u = 0.0;
      for (const auto& label : order) {
        u += (1.0 - u) * x[i++];
        weights[position(states, label)] = kMaxWeight * u;
      }
      params.causal[s.child].weights[s.parent] = std::move(weights);
    }
    return params;
  }

  std::vector<double> encode(const CptParamSet& params) const {
    std::vector<double> x(slots_.size());
    std::size_t i = 0;
    while (i < slots_.size()) {
      const Slot& s = slots_[i];
      if (s.kind == SlotKind::PriorRaw) {
        const auto& row = params.priors.at(s.child);
        const double top = *std::max_element(row.begin(), row.end());
        for (double p : row) x[i++] = std::clamp(top > 0.0 ? p / top : 1.0, kMinRaw, 1.0);
        continue;
      }
      if (s.kind == SlotKind::Leak) {
        x[i++] = std::clamp(params.causal.at(s.child).leak, kMinLeak, kMaxLeak);
        continue;
      }
      const auto& order = influence_order(s.child, s.parent);
      const auto& states = state_labels(s.parent);
      const auto& weights = params.causal.at(s.child).weights.at(s.parent);
      double u = 0.0;
      for (const auto& label : order) {
        const double target = std::min(1.0, weights[position(states, label)] / kMaxWeight);
        const double inc = u < 1.0 ? (target - u) / (1.0 - u) : 0.0;
        x[i] = std::clamp(inc, 0.0, 1.0);
        u += (1.0 - u) * x[i++];
      }
    }
    return x;
  }

 private:
  static const std::vector<std::string>& state_labels(const std::string& id) {
    for (const auto& v : requisites_variables()) {
      if (v.id == id) return v.states;
    }
    throw std::logic_error("unknown variable " + id);
  }
  static std::size_t position(const std::vector<std::string>& states, const std::string& label) {
    return static_cast<std::size_t>(std::find(states.begin(), states.end(), label) - states.begin());
  }

  std::vector<Slot> slots_;
};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Constraints sharing evidence and target share one posterior computation.
struct Query {
  bn::Evidence evidence;
  std::string target;
  std::vector<std::pair<std::string, std::size_t>> terms;  // (state, constraint index)
};

std::vector<Query> group(std::span<const CalibrationConstraint> constraints) {
  std::map<std::pair<bn::Evidence, std::string>, std::size_t> index;
  std::vector<Query> out;
  for (std::size_t c = 0; c < constraints.size(); ++c) {
    const auto key = std::pair(constraints[c].evidence, constraints[c].target);
    auto [it, fresh] = index.emplace(key, out.size());
    if (fresh) out.push_back({constraints[c].evidence, constraints[c].target, {}});
    out[it->second].terms.emplace_back(constraints[c].target_state, c);
  }
  return out;
}

double objective(const CptParamSet& params, std::span<const CalibrationConstraint> constraints,
                 const std::vector<Query>& queries) {
  const auto net = build_requisites(params);
  double total = 0.0;
  for (const auto& q : queries) {
    const auto post = bn::posterior(net, q.evidence, q.target);
    for (const auto& [state, c] : q.terms) {
      const double diff = post.probability(state) - constraints[c].target_prob;
      total += constraints[c].weight * diff * diff;
    }
  }
  return total;
}

}  // namespace

void validate_constraints(std::span<const CalibrationConstraint> constraints) {
  const auto& vars = requisites_variables();
  auto states_of = [&](const std::string& id) -> const std::vector<std::string>& {
    for (const auto& v : vars) {
      if (v.id == id) return v.states;
    }
    throw std::invalid_argument("constraint names unknown variable '" + id + "'");
  };
  auto legal = [&](const std::string& id, const std::string& state) {
    const auto& st = states_of(id);
    if (std::find(st.begin(), st.end(), state) == st.end()) {
      throw std::invalid_argument("'" + state + "' is not a state of " + id);
    }
  };
  for (const auto& c : constraints) {
    for (const auto& [id, state] : c.evidence) legal(id, state);
    legal(c.target, c.target_state);
    if (c.evidence.contains(c.target)) {
      throw std::invalid_argument("constraint target '" + c.target + "' is also observed");
    }
    if (!(c.target_prob >= 0.0 && c.target_prob <= 1.0)) {
      throw std::invalid_argument("constraint probability must lie in [0,1]");
    }
    if (!(c.weight >= 0.0)) throw std::invalid_argument("constraint weight must be non-negative");
  }
}

double calibration_objective(const CptParamSet& params,
                             std::span<const CalibrationConstraint> constraints) {
  return objective(params, constraints, group(constraints));
}

CalibrationResult calibrate(std::span<const CalibrationConstraint> constraints,
                            const CptParamSet& initial, const CalibrationOptions& options) {
  validate_constraints(constraints);
  validate_params(initial);
  if (options.budget < 1) throw std::invalid_argument("calibration budget must be at least 1");

  const auto queries = group(constraints);
  CalibrationResult result;
  result.params = initial;
  result.residual = objective(initial, constraints, queries);
  result.evaluations = 1;
  result.trace.push_back(result.residual);
  if (constraints.empty() || result.residual <= options.tolerance) return result;

  const SearchSpace space;
  std::mt19937_64 rng(options.seed);
  std::vector<double> x = space.encode(initial);

  auto evaluate = [&](const std::vector<double>& point) {
    ++result.evaluations;
    return objective(space.decode(point), constraints, queries);
  };
  auto done = [&] {
    return result.evaluations >= options.budget || result.residual <= options.tolerance;
  };

  while (!done()) {
    double fx = evaluate(x);
    if (fx < result.residual) {
      result.residual = fx;
      result.params = space.decode(x);
    }
    double step = options.initial_step;
    while (step >= options.min_step && !done()) {
      bool improved = false;
      for (std::size_t i = 0; i < space.size() && !done(); ++i) {
        const Slot& s = space.slot(i);
        for (double dir : {1.0, -1.0}) {
          if (done()) break;
          auto y = x;
          y[i] = std::clamp(x[i] + dir * step, s.lo, s.hi);
          if (y[i] == x[i]) continue;
          double fy = evaluate(y);
          if (fy < fx) {
            // Keep going downhill along this coordinate with a doubling stride.
            double stride = step;
            while (!done()) {
              stride *= 2.0;
              auto z = y;
              z[i] = std::clamp(y[i] + dir * stride, s.lo, s.hi);
              if (z[i] == y[i]) break;
              const double fz = evaluate(z);
              if (!(fz < fy)) break;
              y = std::move(z);
              fy = fz;
            }
            x = std::move(y);
            fx = fy;
            improved = true;
            break;
          }
        }
      }
      if (fx < result.residual) {
        result.residual = fx;
        result.params = space.decode(x);
      }
      result.trace.push_back(result.residual);
      if (!improved) step *= 0.5;
    }
    if (done()) break;

    ++result.restarts;
    for (std::size_t i = 0; i < space.size(); ++i) {
      const Slot& s = space.slot(i);
      x[i] = s.lo + (s.hi - s.lo) * uniform01(rng);
    }
  }
  return result;
}

std::vector<CalibrationConstraint> constraints_from_json(const nlohmann::json& doc) {
  std::vector<CalibrationConstraint> out;
  try {
    for (const auto& item : doc.at("constraints")) {
      CalibrationConstraint c;
      c.evidence = item.value("evidence", nlohmann::json::object()).get<bn::Evidence>();
      c.target = item.at("target").get<std::string>();
      c.target_state = item.at("state").get<std::string>();
      c.target_prob = item.at("probability").get<double>();
      c.weight = item.value("weight", 1.0);
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw bn::BnError(bn::ErrorCode::ParseError, std::string("constraint file: ") + e.what());
  }
  validate_constraints(out);
  return out;
}

nlohmann::json constraints_to_json(std::span<const CalibrationConstraint> constraints) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : constraints) {
    list.push_back({{"evidence", c.evidence},
                    {"target", c.target},
                    {"state", c.target_state},
                    {"probability", c.target_prob},
                    {"weight", c.weight}});
  }
  return {{"constraints", std::move(list)}};
}

}  // namespace requisites::model
