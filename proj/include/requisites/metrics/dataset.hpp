#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace requisites::metrics {

enum class ErrorKind {
  ParseError,         // file does not follow the column grammar
  SemanticError,      // well-formed but violates a dataset invariant
  EmptyHierarchy,
  UnratedObjective,
  NoRecommendations,
};

std::string_view to_string(ErrorKind kind);

struct SourceLocation {
  std::string file;
  std::size_t line = 0;    // 1-based; 0 when not tied to a line
  std::size_t column = 0;  // 1-based field number; 0 when not tied to a field
};

class MetricsError : public std::runtime_error {
 public:
  MetricsError(ErrorKind kind, const std::string& message, SourceLocation where = {});

  ErrorKind kind() const noexcept { return kind_; }
  const SourceLocation& where() const noexcept { return where_; }
  // The message without the location prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  SourceLocation where_;
  std::string detail_;
};

enum class Level { Objective, Feature, Specific };

std::string_view to_string(Level level);

struct RequirementNode {
  std::string id;
  Level level = Level::Objective;
  std::optional<std::string> parent;
};

using Hierarchy = std::vector<RequirementNode>;

struct Rating {
  std::string stakeholder;
  std::string requirement;
  int rating = 0;  // 0..5
};

struct Recommendation {
  std::string from;
  std::string to;
  int salience = 1;  // 1..8
};

enum class EventType { Comment, Change, Accepted, Rejected };

std::string_view to_string(EventType type);

struct ActivityEvent {
  std::string requirement;
  EventType type = EventType::Comment;
  std::string stakeholder;
  std::string timestamp;  // ISO 8601; compared as text
};

struct ActivityLog {
  std::vector<ActivityEvent> events;
  std::map<std::string, double> template_fill;  // requirement -> ratio in [0,1]
  std::map<std::string, int> assignments;       // stakeholder -> number of projects
};

struct ProjectDataset {
  Hierarchy hierarchy;
  std::vector<Rating> ratings;
  std::vector<Recommendation> recommendations;
  std::optional<ActivityLog> activity;  // present when any activity file is
};

// File names inside a dataset directory.
namespace files {
inline constexpr const char* kHierarchy = "hierarchy.csv";
inline constexpr const char* kRatings = "ratings.csv";
inline constexpr const char* kRecommendations = "recommendations.csv";
inline constexpr const char* kActivity = "activity.csv";
inline constexpr const char* kTemplateFill = "template_fill.csv";
inline constexpr const char* kAssignments = "assignments.csv";
}  // namespace files

// Row parsers. `name` is used in error locations only. Each throws
// MetricsError(ParseError) for grammar violations and SemanticError for
// out-of-scale values and duplicate keys inside the file.
Hierarchy parse_hierarchy(std::istream& in, const std::string& name = files::kHierarchy);
std::vector<Rating> parse_ratings(std::istream& in, const std::string& name = files::kRatings);
std::vector<Recommendation> parse_recommendations(std::istream& in,
                                                  const std::string& name = files::kRecommendations);
std::vector<ActivityEvent> parse_activity(std::istream& in, const std::string& name = files::kActivity);
std::map<std::string, double> parse_template_fill(std::istream& in,
                                                  const std::string& name = files::kTemplateFill);
std::map<std::string, int> parse_assignments(std::istream& in,
                                             const std::string& name = files::kAssignments);

// Cross-file checks: hierarchy shape (no orphans, correct parent levels,
// unique ids) and references from the other files to known ids.
void validate_dataset(const ProjectDataset& dataset);

// Builds a dataset from file name -> file content (unknown names are a
// ParseError). hierarchy.csv is required; the rest are optional.
ProjectDataset parse_dataset(const std::map<std::string, std::string>& contents);
// Reads a dataset directory. Throws std::ios_base::failure when the
// directory cannot be read.
ProjectDataset load_dataset(const std::filesystem::path& dir);

}  // namespace requisites::metrics
