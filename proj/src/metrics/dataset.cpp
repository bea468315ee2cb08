#include "requisites/metrics/dataset.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace requisites::metrics {

namespace {

std::string describe(const SourceLocation& at, const std::string& message) {
  if (at.file.empty()) return message;
  std::string out = at.file;
  if (at.line > 0) out += ":" + std::to_string(at.line);
  if (at.column > 0) out += ":" + std::to_string(at.column);
  return out + ": " + message;
}

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// Comma-separated records with optional double-quoted fields ("" escapes a
// quote). Blank lines are skipped; a trailing CR is dropped.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  bool next(Row& row) {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (line_ == 1 && text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
      if (text.empty()) continue;
      row.line = line_;
      row.fields = split(text);
      return true;
    }
    return false;
  }

  SourceLocation at(std::size_t line, std::size_t column) const { return {name_, line, column}; }
  const std::string& name() const { return name_; }

 private:
  std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out(1);
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (quoted) {
        if (c != '"') {
          out.back() += c;
        } else if (i + 1 < text.size() && text[i + 1] == '"') {
          out.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else if (c == ',') {
        out.emplace_back();
        was_quoted = false;
      } else if (c == '"' && out.back().empty() && !was_quoted) {
        quoted = was_quoted = true;
      } else if (was_quoted) {
        throw MetricsError(ErrorKind::ParseError, "text after closing quote", at(line_, out.size()));
      } else {
        out.back() += c;
      }
    }
    if (quoted) throw MetricsError(ErrorKind::ParseError, "unterminated quoted field", at(line_, out.size()));
    return out;
  }

  std::istream& in_;
  std::string name_;
  std::size_t line_ = 0;
};

// Reads the header and hands every data row (with the right field count) to fn.
template <typename Fn>
void read_table(std::istream& in, const std::string& name, const std::vector<std::string>& header, Fn fn) {
  CsvReader reader(in, name);
  Row row;
  if (!reader.next(row)) {
    throw MetricsError(ErrorKind::ParseError, "missing header row", reader.at(1, 0));
  }
  if (row.fields != header) {
    std::string expected;
    for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
    throw MetricsError(ErrorKind::ParseError, "header must be '" + expected + "'", reader.at(row.line, 0));
  }
  while (reader.next(row)) {
    if (row.fields.size() != header.size()) {
      throw MetricsError(ErrorKind::ParseError,
                         "expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(row.fields.size()),
                         reader.at(row.line, std::min(row.fields.size(), header.size()) + 1));
    }
    fn(row, reader);
  }
}

void require_token(const Row& row, const CsvReader& reader, std::size_t col, const char* what) {
  if (row.fields[col].empty()) {
    throw MetricsError(ErrorKind::ParseError, std::string(what) + " must not be empty", reader.at(row.line, col + 1));
  }
}

long parse_integer(const Row& row, const CsvReader& reader, std::size_t col) {
  const auto& s = row.fields[col];
  long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw MetricsError(ErrorKind::ParseError, "'" + s + "' is not an integer", reader.at(row.line, col + 1));
  }
  return v;
}

double parse_number(const Row& row, const CsvReader& reader, std::size_t col) {
  const auto& s = row.fields[col];
  double v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw MetricsError(ErrorKind::ParseError, "'" + s + "' is not a number", reader.at(row.line, col + 1));
  }
  return v;
}

ProjectDataset assemble(const std::map<std::string, std::string>& contents) {
  static const std::set<std::string> known{files::kHierarchy,  files::kRatings,      files::kRecommendations,
                                           files::kActivity,   files::kTemplateFill, files::kAssignments};
  for (const auto& [name, text] : contents) {
    if (!known.contains(name)) {
      throw MetricsError(ErrorKind::ParseError, "unexpected dataset file", {name});
    }
  }
  const auto h = contents.find(files::kHierarchy);
  if (h == contents.end()) {
    throw MetricsError(ErrorKind::ParseError, "required file is missing", {files::kHierarchy});
  }

  auto stream = [&](const char* name) -> std::optional<std::istringstream> {
    const auto it = contents.find(name);
    if (it == contents.end()) return std::nullopt;
    return std::istringstream(it->second);
  };

  ProjectDataset ds;
  std::istringstream hs(h->second);
  ds.hierarchy = parse_hierarchy(hs);
  if (auto s = stream(files::kRatings)) ds.ratings = parse_ratings(*s);
  if (auto s = stream(files::kRecommendations)) ds.recommendations = parse_recommendations(*s);

  auto activity = stream(files::kActivity);
  auto fill = stream(files::kTemplateFill);
  auto assignments = stream(files::kAssignments);
  if (activity || fill || assignments) {
    ActivityLog log;
    if (activity) log.events = parse_activity(*activity);
    if (fill) log.template_fill = parse_template_fill(*fill);
    if (assignments) log.assignments = parse_assignments(*assignments);
    ds.activity = std::move(log);
  }
  validate_dataset(ds);
  return ds;
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SemanticError: return "SemanticError";
    case ErrorKind::EmptyHierarchy: return "EmptyHierarchy";
    case ErrorKind::UnratedObjective: return "UnratedObjective";
    case ErrorKind::NoRecommendations: return "NoRecommendations";
  }
  return "Unknown";
}

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Objective: return "objective";
    case Level::Feature: return "feature";
    case Level::Specific: return "specific";
  }
  return "unknown";
}

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::Comment: return "comment";
    case EventType::Change: return "change";
    case EventType::Accepted: return "accepted";
    case EventType::Rejected: return "rejected";
  }
  return "unknown";
}

MetricsError::MetricsError(ErrorKind kind, const std::string& message, SourceLocation where)
    : std::runtime_error(describe(where, message)), kind_(kind), where_(std::move(where)), detail_(message) {}

Hierarchy parse_hierarchy(std::istream& in, const std::string& name) {
  Hierarchy out;
  std::set<std::string> ids;
  read_table(in, name, {"id", "level", "parent"}, [&](const Row& row, const CsvReader& r) {
    require_token(row, r, 0, "id");
    RequirementNode node;
    node.id = row.fields[0];
    const auto& level = row.fields[1];
    if (level == "objective") {
      node.level = Level::Objective;
    } else if (level == "feature") {
      node.level = Level::Feature;
    } else if (level == "specific") {
      node.level = Level::Specific;
    } else {
      throw MetricsError(ErrorKind::ParseError, "level must be objective, feature or specific, not '" + level + "'",
                         r.at(row.line, 2));
    }
    if (!row.fields[2].empty()) node.parent = row.fields[2];
    if (!ids.insert(node.id).second) {
      throw MetricsError(ErrorKind::SemanticError, "duplicate requirement id '" + node.id + "'", r.at(row.line, 1));
    }
    out.push_back(std::move(node));
  });
  return out;
}

std::vector<Rating> parse_ratings(std::istream& in, const std::string& name) {
  std::vector<Rating> out;
  std::set<std::pair<std::string, std::string>> seen;
  read_table(in, name, {"stakeholder", "requirement", "rating"}, [&](const Row& row, const CsvReader& r) {
    require_token(row, r, 0, "stakeholder");
    require_token(row, r, 1, "requirement");
    const long v = parse_integer(row, r, 2);
    if (v < 0 || v > 5) {
      throw MetricsError(ErrorKind::SemanticError, "rating " + std::to_string(v) + " is outside 0..5", r.at(row.line, 3));
    }
    if (!seen.emplace(row.fields[0], row.fields[1]).second) {
      throw MetricsError(ErrorKind::SemanticError,
                         "second rating by '" + row.fields[0] + "' for '" + row.fields[1] + "'", r.at(row.line, 1));
    }
    out.push_back({row.fields[0], row.fields[1], static_cast<int>(v)});
  });
  return out;
}

std::vector<Recommendation> parse_recommendations(std::istream& in, const std::string& name) {
  std::vector<Recommendation> out;
  read_table(in, name, {"from", "to", "salience"}, [&](const Row& row, const CsvReader& r) {
    require_token(row, r, 0, "from");
    require_token(row, r, 1, "to");
    const long v = parse_integer(row, r, 2);
    if (v < 1 || v > 8) {
      throw MetricsError(ErrorKind::SemanticError, "salience " + std::to_string(v) + " is outside 1..8",
                         r.at(row.line, 3));
    }
    if (row.fields[0] == row.fields[1]) {
      throw MetricsError(ErrorKind::SemanticError, "stakeholder '" + row.fields[0] + "' recommends themselves",
                         r.at(row.line, 2));
    }
    out.push_back({row.fields[0], row.fields[1], static_cast<int>(v)});
  });
  return out;
}

std::vector<ActivityEvent> parse_activity(std::istream& in, const std::string& name) {
  std::vector<ActivityEvent> out;
  read_table(in, name, {"requirement", "event_type", "stakeholder", "timestamp"},
             [&](const Row& row, const CsvReader& r) {
               require_token(row, r, 0, "requirement");
               require_token(row, r, 2, "stakeholder");
               require_token(row, r, 3, "timestamp");
               ActivityEvent e;
               const auto& t = row.fields[1];
               if (t == "comment") {
                 e.type = EventType::Comment;
               } else if (t == "change") {
                 e.type = EventType::Change;
               } else if (t == "accepted") {
                 e.type = EventType::Accepted;
               } else if (t == "rejected") {
                 e.type = EventType::Rejected;
               } else {
                 throw MetricsError(ErrorKind::ParseError,
                                    "event_type must be comment, change, accepted or rejected, not '" + t + "'",
                                    r.at(row.line, 2));
               }
               e.requirement = row.fields[0];
               e.stakeholder = row.fields[2];
               e.timestamp = row.fields[3];
               out.push_back(std::move(e));
             });
  return out;
}

std::map<std::string, double> parse_template_fill(std::istream& in, const std::string& name) {
  std::map<std::string, double> out;
  read_table(in, name, {"requirement", "ratio"}, [&](const Row& row, const CsvReader& r) {
    require_token(row, r, 0, "requirement");
    const double v = parse_number(row, r, 1);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw MetricsError(ErrorKind::SemanticError, "fill ratio must lie in [0,1]", r.at(row.line, 2));
    }
    if (!out.emplace(row.fields[0], v).second) {
      throw MetricsError(ErrorKind::SemanticError, "second fill ratio for '" + row.fields[0] + "'", r.at(row.line, 1));
    }
  });
  return out;
}

std::map<std::string, int> parse_assignments(std::istream& in, const std::string& name) {
  std::map<std::string, int> out;
  read_table(in, name, {"stakeholder", "projects"}, [&](const Row& row, const CsvReader& r) {
    require_token(row, r, 0, "stakeholder");
    const long v = parse_integer(row, r, 1);
    if (v < 0) throw MetricsError(ErrorKind::SemanticError, "project count is negative", r.at(row.line, 2));
    if (!out.emplace(row.fields[0], static_cast<int>(v)).second) {
      throw MetricsError(ErrorKind::SemanticError, "second entry for '" + row.fields[0] + "'", r.at(row.line, 1));
    }
  });
  return out;
}

void validate_dataset(const ProjectDataset& ds) {
  std::map<std::string, Level> level_of;
  for (const auto& n : ds.hierarchy) {
    if (!level_of.emplace(n.id, n.level).second) {
      throw MetricsError(ErrorKind::SemanticError, "duplicate requirement id '" + n.id + "'", {files::kHierarchy});
    }
  }
  for (const auto& n : ds.hierarchy) {
    if (n.level == Level::Objective) {
      if (n.parent) {
        throw MetricsError(ErrorKind::SemanticError, "objective '" + n.id + "' has a parent", {files::kHierarchy});
      }
      continue;
    }
    if (!n.parent) {
      throw MetricsError(ErrorKind::SemanticError, std::string(to_string(n.level)) + " '" + n.id + "' has no parent",
                         {files::kHierarchy});
    }
    const auto it = level_of.find(*n.parent);
    if (it == level_of.end()) {
      throw MetricsError(ErrorKind::SemanticError, "'" + n.id + "' names unknown parent '" + *n.parent + "'",
                         {files::kHierarchy});
    }
    const Level expected = n.level == Level::Feature ? Level::Objective : Level::Feature;
    if (it->second != expected) {
      throw MetricsError(ErrorKind::SemanticError,
                         std::string(to_string(n.level)) + " '" + n.id + "' must hang under a " +
                             std::string(to_string(expected)) + ", not a " + std::string(to_string(it->second)),
                         {files::kHierarchy});
    }
  }
  auto known = [&](const std::string& id, const char* file) {
    if (!level_of.contains(id)) {
      throw MetricsError(ErrorKind::SemanticError, "unknown requirement '" + id + "'", {file});
    }
  };
  for (const auto& r : ds.ratings) known(r.requirement, files::kRatings);
  for (const auto& rec : ds.recommendations) {
    if (rec.from == rec.to) {
      throw MetricsError(ErrorKind::SemanticError, "stakeholder '" + rec.from + "' recommends themselves",
                         {files::kRecommendations});
    }
    if (rec.salience < 1 || rec.salience > 8) {
      throw MetricsError(ErrorKind::SemanticError, "salience outside 1..8", {files::kRecommendations});
    }
  }
  for (const auto& r : ds.ratings) {
    if (r.rating < 0 || r.rating > 5) {
      throw MetricsError(ErrorKind::SemanticError, "rating outside 0..5", {files::kRatings});
    }
  }
  if (ds.activity) {
    for (const auto& e : ds.activity->events) known(e.requirement, files::kActivity);
    for (const auto& [id, ratio] : ds.activity->template_fill) {
      known(id, files::kTemplateFill);
      if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw MetricsError(ErrorKind::SemanticError, "fill ratio must lie in [0,1]", {files::kTemplateFill});
      }
    }
  }
}

ProjectDataset parse_dataset(const std::map<std::string, std::string>& contents) { return assemble(contents); }

ProjectDataset load_dataset(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw std::ios_base::failure("not a readable directory: " + dir.string());
  }
  std::map<std::string, std::string> contents;
  for (const char* name : {files::kHierarchy, files::kRatings, files::kRecommendations, files::kActivity,
                           files::kTemplateFill, files::kAssignments}) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path, ec)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    contents.emplace(name, text.str());
  }
  return assemble(contents);
}

}  // namespace requisites::metrics
