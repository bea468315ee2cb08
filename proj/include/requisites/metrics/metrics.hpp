#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "requisites/bn/network.hpp"
#include "requisites/metrics/dataset.hpp"

namespace requisites::metrics {

// Objective id -> share (0..100) of its features that have at least one
// specific requirement. Objectives without features score 0.
std::map<std::string, double> detail_percentage(const Hierarchy& hierarchy);

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between order statistics: position (n-1)p of the
// sorted sample.
double quantile(std::vector<double> sample, double p);
Quartiles quartiles(std::span<const double> sample);

struct HomogeneityResult {
  std::string state;  // yes | no
  Quartiles stats;
  std::map<std::string, double> percentages;
};

inline constexpr double kHomogeneityThreshold = 50.0;

// 'yes' iff Q1 of the detail percentages reaches kHomogeneityThreshold.
HomogeneityResult homogeneity(const Hierarchy& hierarchy);

struct BinnedItem {
  double mean = 0;
  std::string bin;  // high | medium | low
};

struct BinnedResult {
  std::string state;  // modal bin
  double share = 0;   // fraction of items in the modal bin
  std::map<std::string, BinnedItem> items;
};

// 0..5 rating mean, rounded half up, then {0,1} low, {2,3} medium, {4,5} high.
std::string rating_bin(long sum, long count);
// 1..8 salience mean against thirds of the range: [1,10/3) low,
// [10/3,17/3) medium, [17/3,8] high.
std::string salience_bin(long sum, long count);

// Per objective, every rating on the objective or any descendant.
BinnedResult objective_specificity(const Hierarchy& hierarchy, std::span<const Rating> ratings);
// Per recommended stakeholder, the mean salience received.
BinnedResult stakeholder_expertise(std::span<const Recommendation> recommendations);

// Discretizes `value` against equal-width thirds of [lo, hi]; 'medium' when
// lo == hi.
std::string tercile_bin(double value, double lo, double hi);

struct EvidenceEntry {
  std::optional<std::string> state;  // nullopt: MANUAL
  std::map<std::string, double> statistics;
  std::string note;

  bool manual() const { return !state.has_value(); }
};

struct EvidenceReport {
  std::map<std::string, EvidenceEntry> entries;  // all eleven variables except the class

  // Extracted (non-manual) states only.
  bn::Evidence evidence() const;
};

// Fills the Requisites variables Table-2 style. Empty ratings or
// recommendations leave their variable MANUAL; activity-derived variables
// are MANUAL without an activity log.
EvidenceReport extract_evidence(const Hierarchy& hierarchy, std::span<const Rating> ratings,
                                std::span<const Recommendation> recommendations,
                                const std::optional<ActivityLog>& activity = std::nullopt);
EvidenceReport extract_evidence(const ProjectDataset& dataset);

nlohmann::json report_to_json(const EvidenceReport& report);

}  // namespace requisites::metrics
