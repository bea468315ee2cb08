#include "requisites/bn/model_io.hpp"

#include <fstream>
#include <sstream>

namespace requisites::bn {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& what) {
  throw BnError(ErrorCode::ParseError, what);
}

const json& field(const json& obj, const char* key, json::value_t type, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) parse_fail(where + ": missing \"" + key + "\"");
  const json& v = obj.at(key);
  const bool ok = type == json::value_t::number_float ? v.is_number() : v.type() == type;
  if (!ok) parse_fail(where + ": \"" + key + "\" has the wrong type");
  return v;
}

std::vector<std::string> string_list(const json& arr, const std::string& where) {
  std::vector<std::string> out;
  for (const auto& s : arr) {
    if (!s.is_string()) parse_fail(where + ": expected a string");
    out.push_back(s.get<std::string>());
  }
  return out;
}

}  // namespace

json network_to_json(const BayesianNetwork& net) {
  json doc;
  doc["format"] = kNetworkFormat;
  doc["version"] = 1;
  json vars = json::array();
  for (const auto& v : net.variables()) vars.push_back({{"id", v.id}, {"states", v.states}});
  doc["variables"] = std::move(vars);
  json edges = json::array();
  for (const auto& e : net.edges()) edges.push_back(json::array({e.parent, e.child}));
  doc["edges"] = std::move(edges);
  json cpts = json::array();
  for (const auto& c : net.cpts()) {
    cpts.push_back({{"child", c.child}, {"parents", c.parents}, {"rows", c.rows}});
  }
  doc["cpts"] = std::move(cpts);
  return doc;
}

BayesianNetwork network_from_json(const json& doc) {
  if (!doc.is_object()) parse_fail("network document must be a JSON object");
  const auto& format = field(doc, "format", json::value_t::string, "document");
  if (format.get<std::string>() != kNetworkFormat) {
    parse_fail("unsupported format \"" + format.get<std::string>() + "\"");
  }

  std::vector<Variable> variables;
  for (const auto& v : field(doc, "variables", json::value_t::array, "document")) {
    Variable var;
    var.id = field(v, "id", json::value_t::string, "variable").get<std::string>();
    var.states = string_list(field(v, "states", json::value_t::array, "variable " + var.id),
                             "variable " + var.id);
    variables.push_back(std::move(var));
  }

  std::vector<Edge> edges;
  for (const auto& e : field(doc, "edges", json::value_t::array, "document")) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      parse_fail("edges must be [parent, child] string pairs");
    }
    edges.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
  }

  std::vector<Cpt> cpts;
  for (const auto& c : field(doc, "cpts", json::value_t::array, "document")) {
    Cpt cpt;
    cpt.child = field(c, "child", json::value_t::string, "cpt").get<std::string>();
    const std::string where = "cpt " + cpt.child;
    cpt.parents = string_list(field(c, "parents", json::value_t::array, where), where);
    for (const auto& row : field(c, "rows", json::value_t::array, where)) {
      if (!row.is_array()) parse_fail(where + ": each row must be an array");
      std::vector<double> r;
      for (const auto& p : row) {
        if (!p.is_number()) parse_fail(where + ": probabilities must be numbers");
        r.push_back(p.get<double>());
      }
      cpt.rows.push_back(std::move(r));
    }
    cpts.push_back(std::move(cpt));
  }
  return build_network(std::move(variables), std::move(edges), std::move(cpts));
}

BayesianNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    parse_fail(path.string() + ": " + e.what());
  }
  return network_from_json(doc);
}

void save_network(const BayesianNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << dump_json(network_to_json(net));
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace requisites::bn
