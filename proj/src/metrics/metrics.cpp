#include "requisites/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <tuple>

namespace requisites::metrics {

namespace {

const std::vector<std::string> kBins{"high", "medium", "low"};

std::string percent(double share) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * share);
  return buf;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Modal bin with ties going to the earlier entry of kBins.
void settle_mode(BinnedResult& result) {
  std::map<std::string, std::size_t> count;
  for (const auto& [id, item] : result.items) ++count[item.bin];
  std::size_t best = 0;
  for (const auto& b : kBins) {
    if (count[b] > best) {
      best = count[b];
      result.state = b;
    }
  }
  result.share = result.items.empty() ? 0.0 : static_cast<double>(best) / static_cast<double>(result.items.size());
}

void add_bin_counts(EvidenceEntry& e, const BinnedResult& r) {
  std::map<std::string, double> count{{"high", 0}, {"medium", 0}, {"low", 0}};
  for (const auto& [id, item] : r.items) count[item.bin] += 1;
  for (const auto& [bin, n] : count) e.statistics["count_" + bin] = n;
  e.statistics["modal_share"] = r.share;
}

EvidenceEntry manual(std::string note) { return {std::nullopt, {}, std::move(note)}; }

struct RequirementActivity {
  std::set<std::string> commenters;
  std::set<std::string> changers;
  std::size_t changes = 0;
  std::size_t flips = 0;
  std::optional<EventType> status;
};

std::map<std::string, RequirementActivity> summarize(const Hierarchy& hierarchy, std::vector<ActivityEvent> events) {
  // A full ordering key keeps the result independent of record order.
  std::sort(events.begin(), events.end(), [](const ActivityEvent& a, const ActivityEvent& b) {
    return std::tie(a.requirement, a.timestamp, a.type, a.stakeholder) <
           std::tie(b.requirement, b.timestamp, b.type, b.stakeholder);
  });
  std::map<std::string, RequirementActivity> out;
  for (const auto& n : hierarchy) out[n.id];
  for (const auto& e : events) {
    auto& a = out[e.requirement];
    switch (e.type) {
      case EventType::Comment: a.commenters.insert(e.stakeholder); break;
      case EventType::Change:
        a.changers.insert(e.stakeholder);
        ++a.changes;
        break;
      case EventType::Accepted:
      case EventType::Rejected:
        if (a.status && *a.status != e.type) ++a.flips;
        a.status = e.type;
        break;
    }
  }
  return out;
}

// Mean of per-requirement scores against thirds of their own range.
EvidenceEntry tercile_entry(const std::vector<double>& scores, const std::string& what) {
  EvidenceEntry e;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  double sum = 0;
  for (double s : scores) sum += s;
  const double mean = sum / static_cast<double>(scores.size());
  e.state = tercile_bin(mean, *lo, *hi);
  e.statistics = {{"mean", mean}, {"min", *lo}, {"max", *hi}, {"requirements", static_cast<double>(scores.size())}};
  e.note = "mean " + what + " " + fixed2(mean) + " within [" + fixed2(*lo) + ", " + fixed2(*hi) + "]";
  if (*lo == *hi) e.note += "; range is degenerate";
  return e;
}

}  // namespace

std::map<std::string, double> detail_percentage(const Hierarchy& hierarchy) {
  std::map<std::string, double> out;
  std::map<std::string, std::pair<int, int>> tally;  // objective -> (features, detailed features)
  std::set<std::string> detailed;
  for (const auto& n : hierarchy) {
    if (n.level == Level::Objective) tally[n.id];
    if (n.level == Level::Specific && n.parent) detailed.insert(*n.parent);
  }
  if (tally.empty()) throw MetricsError(ErrorKind::EmptyHierarchy, "hierarchy has no objectives");
  for (const auto& n : hierarchy) {
    if (n.level != Level::Feature || !n.parent) continue;
    const auto it = tally.find(*n.parent);
    if (it == tally.end()) continue;
    ++it->second.first;
    if (detailed.contains(n.id)) ++it->second.second;
  }
  for (const auto& [id, t] : tally) {
    out[id] = t.first == 0 ? 0.0 : 100.0 * t.second / t.first;
  }
  return out;
}

double quantile(std::vector<double> sample, double p) {
  if (sample.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double h = (static_cast<double>(sample.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sample.size()) return sample.back();
  return sample[lo] + (h - static_cast<double>(lo)) * (sample[lo + 1] - sample[lo]);
}

Quartiles quartiles(std::span<const double> sample) {
  std::vector<double> v(sample.begin(), sample.end());
  if (v.empty()) throw std::invalid_argument("quartiles of an empty sample");
  std::sort(v.begin(), v.end());
  return {v.front(), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), v.back()};
}

HomogeneityResult homogeneity(const Hierarchy& hierarchy) {
  HomogeneityResult r;
  r.percentages = detail_percentage(hierarchy);
  std::vector<double> values;
  for (const auto& [id, pct] : r.percentages) values.push_back(pct);
  r.stats = quartiles(values);
  r.state = r.stats.q1 >= kHomogeneityThreshold ? "yes" : "no";
  return r;
}

std::string rating_bin(long sum, long count) {
  const long rounded = (2 * sum + count) / (2 * count);
  if (rounded <= 1) return "low";
  if (rounded <= 3) return "medium";
  return "high";
}

std::string salience_bin(long sum, long count) {
  if (3 * sum < 10 * count) return "low";
  if (3 * sum < 17 * count) return "medium";
  return "high";
}

std::string tercile_bin(double value, double lo, double hi) {
  if (!(hi > lo)) return "medium";
  const double width = (hi - lo) / 3.0;
  if (value < lo + width) return "low";
  if (value < lo + 2.0 * width) return "medium";
  return "high";
}

BinnedResult objective_specificity(const Hierarchy& hierarchy, std::span<const Rating> ratings) {
  std::map<std::string, const RequirementNode*> by_id;
  for (const auto& n : hierarchy) by_id[n.id] = &n;
  auto objective_of = [&](const std::string& id) -> std::string {
    const RequirementNode* n = by_id.at(id);
    for (int hop = 0; hop < 3 && n->level != Level::Objective; ++hop) {
      const auto it = by_id.find(n->parent.value_or(""));
      if (it == by_id.end()) break;
      n = it->second;
    }
    if (n->level != Level::Objective) {
      throw MetricsError(ErrorKind::SemanticError, "'" + id + "' is not under an objective");
    }
    return n->id;
  };

  std::map<std::string, std::pair<long, long>> tally;  // objective -> (sum, count)
  for (const auto& n : hierarchy) {
    if (n.level == Level::Objective) tally[n.id];
  }
  if (tally.empty()) throw MetricsError(ErrorKind::EmptyHierarchy, "hierarchy has no objectives");
  for (const auto& r : ratings) {
    if (!by_id.contains(r.requirement)) {
      throw MetricsError(ErrorKind::SemanticError, "rating for unknown requirement '" + r.requirement + "'");
    }
    auto& t = tally[objective_of(r.requirement)];
    t.first += r.rating;
    ++t.second;
  }

  BinnedResult out;
  for (const auto& [id, t] : tally) {
    if (t.second == 0) throw MetricsError(ErrorKind::UnratedObjective, "objective '" + id + "' has no ratings");
    out.items[id] = {static_cast<double>(t.first) / static_cast<double>(t.second), rating_bin(t.first, t.second)};
  }
  settle_mode(out);
  return out;
}

BinnedResult stakeholder_expertise(std::span<const Recommendation> recommendations) {
  if (recommendations.empty()) throw MetricsError(ErrorKind::NoRecommendations, "no salience recommendations");
  std::map<std::string, std::pair<long, long>> tally;
  for (const auto& r : recommendations) {
    auto& t = tally[r.to];
    t.first += r.salience;
    ++t.second;
  }
  BinnedResult out;
  for (const auto& [id, t] : tally) {
    out.items[id] = {static_cast<double>(t.first) / static_cast<double>(t.second), salience_bin(t.first, t.second)};
  }
  settle_mode(out);
  return out;
}

bn::Evidence EvidenceReport::evidence() const {
  bn::Evidence out;
  for (const auto& [id, e] : entries) {
    if (e.state) out[id] = *e.state;
  }
  return out;
}

EvidenceReport extract_evidence(const Hierarchy& hierarchy, std::span<const Rating> ratings,
                                std::span<const Recommendation> recommendations,
                                const std::optional<ActivityLog>& activity) {
  EvidenceReport report;
  auto& entries = report.entries;

  {
    const auto h = homogeneity(hierarchy);
    auto& e = entries["homogeneity_of_description"];
    e.state = h.state;
    e.statistics = {{"min", h.stats.min},       {"q1", h.stats.q1},   {"median", h.stats.median},
                    {"q3", h.stats.q3},         {"max", h.stats.max}, {"threshold", kHomogeneityThreshold},
                    {"objectives", static_cast<double>(h.percentages.size())}};
    e.note = "Q1 of objective detail percentages is " + fixed2(h.stats.q1) +
             (h.state == "yes" ? " (at least " : " (below ") + fixed2(kHomogeneityThreshold) + ")";
  }

  if (ratings.empty()) {
    entries["specificity"] = manual("No ratings supplied.");
  } else {
    const auto s = objective_specificity(hierarchy, ratings);
    auto& e = entries["specificity"];
    e.state = s.state;
    add_bin_counts(e, s);
    e.statistics["objectives"] = static_cast<double>(s.items.size());
    e.note = percent(s.share) + " of objectives bin '" + s.state + "' by mean rating";
  }

  if (recommendations.empty()) {
    entries["stakeholders_expertise"] = manual("No salience recommendations supplied.");
  } else {
    const auto x = stakeholder_expertise(recommendations);
    auto& e = entries["stakeholders_expertise"];
    e.state = x.state;
    add_bin_counts(e, x);
    e.statistics["stakeholders"] = static_cast<double>(x.items.size());
    e.note = percent(x.share) + " of stakeholders bin '" + x.state + "' by mean received salience";
  }

  entries["domain_expertise"] = manual("Manual assignment.");
  entries["reused_requirement"] = manual("Not measurable from project data.");
  entries["unexpected_dependencies"] = manual("Not measurable from project data.");

  const bool has_events = activity && !activity->events.empty();
  if (!has_events) {
    const std::string why = "No activity log supplied.";
    entries["degree_of_commitment"] = manual(why);
    entries["unclear_cost_benefit"] = manual(why);
    entries["requirement_variability"] = manual(why);
  } else {
    const auto acts = summarize(hierarchy, activity->events);
    std::vector<double> commitment, unclear, changes;
    double accepted_shared = 0, flipped = 0, multi_commented = 0;
    std::map<std::string, std::set<std::string>> touched;  // stakeholder -> requirements
    for (const auto& e : activity->events) touched[e.stakeholder].insert(e.requirement);
    for (const auto& [id, a] : acts) {
      const bool several_commenters = a.commenters.size() >= 2;
      const bool several = several_commenters || a.changers.size() >= 2;
      commitment.push_back(several ? 1.0 : 0.0);
      unclear.push_back(a.flips > 0 || several_commenters ? 1.0 : 0.0);
      changes.push_back(static_cast<double>(a.changes));
      flipped += a.flips > 0 ? 1 : 0;
      multi_commented += several_commenters ? 1 : 0;
      std::set<std::string> people = a.commenters;
      people.insert(a.changers.begin(), a.changers.end());
      if (a.status == EventType::Accepted && people.size() >= 2) accepted_shared += 1;
    }
    entries["degree_of_commitment"] = tercile_entry(commitment, "share of requirements with several contributors");
    entries["unclear_cost_benefit"] = tercile_entry(unclear, "share of requirements with status flips or several commenters");
    entries["unclear_cost_benefit"].statistics["flipped_requirements"] = flipped;
    entries["unclear_cost_benefit"].statistics["multi_commenter_requirements"] = multi_commented;
    entries["requirement_variability"] = tercile_entry(changes, "changes per requirement");

    if (entries["specificity"].state) {
      entries["specificity"].statistics["accepted_multi_stakeholder_requirements"] = accepted_shared;
    }
    auto& se = entries["stakeholders_expertise"];
    double touched_sum = 0;
    for (const auto& [who, reqs] : touched) touched_sum += static_cast<double>(reqs.size());
    se.statistics["mean_touched_requirements"] = touched_sum / static_cast<double>(touched.size());
  }

  if (activity && !activity->assignments.empty()) {
    double projects = 0;
    for (const auto& [who, n] : activity->assignments) projects += n;
    entries["stakeholders_expertise"].statistics["mean_projects"] =
        projects / static_cast<double>(activity->assignments.size());
  }

  if (!activity || activity->template_fill.empty()) {
    entries["requirement_completeness"] = manual("No template fill ratios supplied.");
  } else {
    // Requirements absent from the fill file have no template fields filled.
    std::vector<double> ratios;
    for (const auto& n : hierarchy) {
      const auto it = activity->template_fill.find(n.id);
      ratios.push_back(it == activity->template_fill.end() ? 0.0 : it->second);
    }
    entries["requirement_completeness"] = tercile_entry(ratios, "template fill ratio");
  }
  return report;
}

EvidenceReport extract_evidence(const ProjectDataset& dataset) {
  return extract_evidence(dataset.hierarchy, dataset.ratings, dataset.recommendations, dataset.activity);
}

nlohmann::json report_to_json(const EvidenceReport& report) {
  nlohmann::json vars = nlohmann::json::object();
  for (const auto& [id, e] : report.entries) {
    vars[id] = {{"state", e.state ? nlohmann::json(*e.state) : nlohmann::json(nullptr)},
                {"manual", e.manual()},
                {"statistics", e.statistics},
                {"note", e.note}};
  }
  return {{"variables", std::move(vars)}, {"evidence", report.evidence()}};
}

}  // namespace requisites::metrics
