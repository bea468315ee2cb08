#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "requisites/model/requisites.hpp"

namespace requisites::model {

// Asks that P(target = target_state | evidence) equal target_prob.
struct CalibrationConstraint {
  bn::Evidence evidence;
  std::string target;
  std::string target_state;
  double target_prob = 0.0;
  double weight = 1.0;
};

struct CalibrationOptions {
  std::uint64_t seed = 0;
  std::size_t budget = 200000;  // objective evaluations, all restarts together
  double initial_step = 0.25;
  double min_step = 1e-7;       // a restart ends once the step falls below this
  double tolerance = 0.0;       // stop early once the residual is at or below this
};

struct CalibrationResult {
  CptParamSet params;
  double residual = 0.0;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
  std::vector<double> trace;  // best objective after each coordinate sweep

  bool operator==(const CalibrationResult&) const = default;
};

// Throws std::invalid_argument for constraints that do not fit the model.
void validate_constraints(std::span<const CalibrationConstraint> constraints);

// Sum of weight * (posterior - target)^2.
double calibration_objective(const CptParamSet& params,
                             std::span<const CalibrationConstraint> constraints);

// Random-restart coordinate hill-climbing with step halving over the
// parameter set, starting from `initial`. Later restarts start from points
// drawn from a generator seeded with options.seed, so equal inputs give
// identical results. Per-parent weights are searched as non-negative
// increments along influence_order(), keeping every learned dependency
// monotone in its documented direction.
CalibrationResult calibrate(std::span<const CalibrationConstraint> constraints,
                            const CptParamSet& initial, const CalibrationOptions& options);

// Constraint file: {"constraints": [{"evidence": {...}, "target": "...",
// "state": "...", "probability": p, "weight": w}, ...]}
std::vector<CalibrationConstraint> constraints_from_json(const nlohmann::json& doc);
nlohmann::json constraints_to_json(std::span<const CalibrationConstraint> constraints);

}  // namespace requisites::model
