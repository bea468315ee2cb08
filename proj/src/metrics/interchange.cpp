#include "requisites/metrics/interchange.hpp"

#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace requisites::metrics {

namespace pt = boost::property_tree;

std::string evidence_to_xml(const bn::BayesianNetwork& net, const bn::Evidence& evidence) {
  net.resolve(evidence);  // rejects unknown variables and states
  pt::ptree root;
  auto& body = root.put_child("evidence", pt::ptree{});
  for (const auto& v : net.variables()) {
    const auto it = evidence.find(v.id);
    if (it == evidence.end()) continue;
    pt::ptree item;
    item.put("<xmlattr>.state", it->second);
    body.add_child(v.id, item);
  }
  std::ostringstream out;
  pt::write_xml(out, root, pt::xml_writer_make_settings<std::string>(' ', 2));
  return out.str();
}

bn::Evidence evidence_from_xml(const bn::BayesianNetwork& net, const std::string& xml) {
  pt::ptree root;
  std::istringstream in(xml);
  try {
    pt::read_xml(in, root, pt::xml_parser::trim_whitespace | pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw bn::BnError(bn::ErrorCode::ParseError, std::string("evidence XML: ") + e.what());
  }
  if (root.size() != 1 || root.front().first != "evidence") {
    throw bn::BnError(bn::ErrorCode::ParseError, "evidence XML must have a single <evidence> root");
  }
  const auto& body = root.front().second;
  if (!body.data().empty()) throw bn::BnError(bn::ErrorCode::ParseError, "<evidence> must not contain text");

  bn::Evidence out;
  for (const auto& [name, node] : body) {
    if (name == "<xmlattr>") continue;
    if (!net.find(name)) throw bn::BnError(bn::ErrorCode::UnknownVariable, "unknown variable <" + name + ">");
    const auto state = node.get_optional<std::string>("<xmlattr>.state");
    if (!state) throw bn::BnError(bn::ErrorCode::ParseError, "<" + name + "> needs a state attribute");
    for (const auto& [child, sub] : node) {
      if (child != "<xmlattr>") throw bn::BnError(bn::ErrorCode::ParseError, "<" + name + "> must be empty");
    }
    if (!node.data().empty()) throw bn::BnError(bn::ErrorCode::ParseError, "<" + name + "> must be empty");
    if (!out.emplace(name, *state).second) {
      throw bn::BnError(bn::ErrorCode::ParseError, "variable <" + name + "> appears twice");
    }
  }
  net.resolve(out);
  return out;
}

}  // namespace requisites::metrics
