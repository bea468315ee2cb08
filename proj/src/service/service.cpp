#include "requisites/service/service.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>

#include <httplib.h>

#include "requisites/bn/inference.hpp"
#include "requisites/bn/model_io.hpp"
#include "requisites/metrics/dataset.hpp"
#include "requisites/metrics/interchange.hpp"
#include "requisites/metrics/metrics.hpp"

namespace requisites::service {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

struct HttpError {
  int status;
  std::string code;
  std::string message;
  json detail = nullptr;
};

[[noreturn]] void fail(int status, std::string code, std::string message, json detail = nullptr) {
  throw HttpError{status, std::move(code), std::move(message), std::move(detail)};
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

int status_for(bn::ErrorCode code) {
  return code == bn::ErrorCode::InconsistentEvidence ? 422 : 400;
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const HttpError& e) {
      send(res, e.status, {{"code", e.code}, {"message", e.message}, {"detail", e.detail}});
    } catch (const bn::BnError& e) {
      send(res, status_for(e.code()),
           {{"code", std::string(bn::to_string(e.code()))}, {"message", e.what()}, {"detail", nullptr}});
    } catch (const json::exception& e) {
      send(res, 400, {{"code", "MalformedJson"}, {"message", e.what()}, {"detail", nullptr}});
    } catch (const std::exception& e) {
      send(res, 500, {{"code", "InternalError"}, {"message", e.what()}, {"detail", nullptr}});
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body);
  if (!body.is_object()) fail(400, "MalformedJson", "request body must be a JSON object");
  return body;
}

enum class Mode { Analytic, Exploratory };

struct Session {
  std::mutex mu;
  std::string id;
  Mode mode = Mode::Analytic;
  std::optional<std::string> target;
  bn::Evidence evidence;
  json project_values = nullptr;
};

}  // namespace

json posterior_to_json(const bn::Posterior& post) {
  json probs = json::object();
  for (std::size_t i = 0; i < post.states.size(); ++i) probs[post.states[i]] = post.probabilities[i];
  return {{"variable", post.variable}, {"states", post.states}, {"probabilities", std::move(probs)}};
}

struct Server::Impl {
  bn::BayesianNetwork net;
  ServiceOptions options;
  httplib::Server http;
  bool bound = false;

  mutable std::shared_mutex store_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::mt19937_64 id_rng{std::random_device{}()};

  mutable std::mutex report_mu;
  json latest_report = nullptr;

  Impl(bn::BayesianNetwork n, ServiceOptions o) : net(std::move(n)), options(std::move(o)) {
    if (!net.find(options.class_variable)) {
      throw std::invalid_argument("network has no variable '" + options.class_variable + "'");
    }
    if (!options.snapshot.empty() && std::filesystem::exists(options.snapshot)) load_snapshot();
    routes();
  }

  // ---- evidence helpers -------------------------------------------------

  // Object of variable -> state (or null when allowed). Validates names.
  std::map<std::string, std::optional<std::string>> read_assignments(const json& obj, bool allow_null) const {
    if (!obj.is_object()) fail(400, "MalformedJson", "evidence must be a JSON object");
    std::map<std::string, std::optional<std::string>> out;
    for (const auto& [id, value] : obj.items()) {
      const auto idx = net.find(id);
      if (!idx) fail(400, "UnknownVariable", "unknown variable '" + id + "'");
      if (value.is_null() && allow_null) {
        out[id] = std::nullopt;
        continue;
      }
      if (!value.is_string()) fail(400, "MalformedJson", "state for '" + id + "' must be a string");
      const auto state = value.get<std::string>();
      const auto& states = net.variable(*idx).states;
      if (std::find(states.begin(), states.end(), state) == states.end()) {
        fail(400, "IllegalState", "'" + state + "' is not a state of " + id);
      }
      out[id] = state;
    }
    return out;
  }

  bn::Evidence read_evidence(const json& obj) const {
    bn::Evidence ev;
    for (const auto& [id, state] : read_assignments(obj, false)) ev[id] = *state;
    return ev;
  }

  void check_consistent(const bn::Evidence& ev) const {
    if (!(bn::evidence_probability(net, ev) > 0.0)) {
      fail(422, "InconsistentEvidence", "evidence has probability zero", ev);
    }
  }

  void check_blanket(const Session& s, const bn::Evidence& ev) const {
    if (s.mode != Mode::Exploratory) return;
    const auto blanket = bn::markov_blanket(net, *s.target);
    json outside = json::array();
    for (const auto& [id, state] : ev) {
      if (!blanket.contains(id)) outside.push_back(id);
    }
    if (!outside.empty()) {
      fail(409, "OutsideMarkovBlanket",
           "exploratory sessions accept evidence only on the Markov blanket of '" + *s.target + "'",
           {{"variables", outside}, {"blanket", blanket}});
    }
  }

  json propagate(const bn::Evidence& ev, const std::vector<std::string>& targets) const {
    check_consistent(ev);
    json posts = json::object();
    for (const auto& t : targets) posts[t] = posterior_to_json(bn::posterior(net, ev, t));
    const auto revision = bn::posterior(net, ev, options.class_variable);
    return {{"posteriors", std::move(posts)},
            {"revision", posterior_to_json(revision)},
            {"prediction", revision.states[revision.argmax()]},
            {"evidence", ev}};
  }

  // ---- sessions ---------------------------------------------------------

  std::shared_ptr<Session> session(const std::string& id) const {
    std::shared_lock lock(store_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "SessionNotFound", "no session '" + id + "'");
    return it->second;
  }

  json session_json(const Session& s) const {
    json out{{"id", s.id},
             {"mode", s.mode == Mode::Analytic ? "analytic" : "exploratory"},
             {"target", s.target ? json(*s.target) : json(nullptr)},
             {"evidence", s.evidence},
             {"project_values", s.project_values}};
    if (s.mode == Mode::Exploratory) out["relevant_variables"] = bn::markov_blanket(net, *s.target);
    return out;
  }

  std::string new_id() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int word = 0; word < 2; ++word) {
      auto bits = id_rng();
      for (int i = 0; i < 16; ++i, bits >>= 4) id += kHex[bits & 0xF];
    }
    return id;
  }

  json current_report() const {
    std::lock_guard lock(report_mu);
    return latest_report;
  }

  // ---- snapshot ---------------------------------------------------------

  void load_snapshot() {
    std::ifstream in(options.snapshot);
    if (!in) throw std::ios_base::failure("cannot read snapshot " + options.snapshot.string());
    const json doc = json::parse(in);
    latest_report = doc.value("project_values", json(nullptr));
    for (const auto& item : doc.at("sessions")) {
      auto s = std::make_shared<Session>();
      s->id = item.at("id").get<std::string>();
      s->mode = item.at("mode").get<std::string>() == "exploratory" ? Mode::Exploratory : Mode::Analytic;
      if (!item.at("target").is_null()) s->target = item.at("target").get<std::string>();
      if (s->mode == Mode::Exploratory && !s->target) {
        throw bn::BnError(bn::ErrorCode::ParseError, "snapshot session '" + s->id + "' lacks a target");
      }
      s->evidence = item.at("evidence").get<bn::Evidence>();
      net.resolve(s->evidence);
      s->project_values = item.value("project_values", json(nullptr));
      sessions[s->id] = std::move(s);
    }
  }

  void save_snapshot() const {
    if (options.snapshot.empty()) return;
    json list = json::array();
    {
      std::shared_lock lock(store_mu);
      for (const auto& [id, s] : sessions) {
        std::lock_guard guard(s->mu);
        list.push_back(session_json(*s));
      }
    }
    const json doc{{"sessions", std::move(list)}, {"project_values", current_report()}};
    const auto tmp = options.snapshot.string() + ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw std::ios_base::failure("cannot write snapshot " + tmp);
      out << bn::dump_json(doc);
    }
    std::filesystem::rename(tmp, options.snapshot);
  }

  // ---- routes -----------------------------------------------------------

  void routes() {
    http.Get("/network", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json doc = bn::network_to_json(net);
      doc.erase("format");
      doc.erase("version");
      if (req.get_param_value("cpts") != "true") doc.erase("cpts");
      doc["class_variable"] = options.class_variable;
      send(res, 200, doc);
    }));

    http.Post("/infer", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const auto ev = read_evidence(body.value("evidence", json::object()));
      std::vector<std::string> targets;
      const json t = body.value("targets", json::array());
      if (!t.is_array()) fail(400, "MalformedJson", "targets must be an array of variable ids");
      for (const auto& id : t) {
        if (!id.is_string()) fail(400, "MalformedJson", "targets must be an array of variable ids");
        if (!net.find(id.get<std::string>())) fail(400, "UnknownVariable", "unknown variable '" + id.get<std::string>() + "'");
        targets.push_back(id.get<std::string>());
      }
      send(res, 200, propagate(ev, targets));
    }));

    http.Get("/markov-blanket/:var", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto& var = req.path_params.at("var");
      if (!net.find(var)) fail(404, "UnknownVariable", "unknown variable '" + var + "'");
      const auto blanket = bn::markov_blanket(net, var);
      json out{{"variable", var}, {"blanket", blanket}};
      const json report = current_report();
      if (!report.is_null()) {
        json values = json::object();
        for (const auto& id : blanket) {
          if (report["variables"].contains(id)) values[id] = report["variables"][id];
        }
        out["project_values"] = std::move(values);
      }
      send(res, 200, out);
    }));

    http.Post("/metrics/extract", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::shared_ptr<Session> target;
      if (req.has_param("session")) target = session(req.get_param_value("session"));
      metrics::ProjectDataset ds;
      try {
        if (req.is_multipart_form_data()) {
          std::map<std::string, std::string> contents;
          for (const auto& [field, file] : req.files) contents[file.filename.empty() ? field : file.filename] = file.content;
          ds = metrics::parse_dataset(contents);
        } else {
          const json body = parse_body(req);
          if (!body.contains("path") || !body["path"].is_string()) {
            fail(400, "MalformedJson", "expected {\"path\": dataset directory} or a multipart upload");
          }
          ds = metrics::load_dataset(body["path"].get<std::string>());
        }
      } catch (const metrics::MetricsError& e) {
        const json where{{"file", e.where().file}, {"line", e.where().line}, {"column", e.where().column}};
        const int status = e.kind() == metrics::ErrorKind::ParseError ? 400 : 422;
        fail(status, std::string(metrics::to_string(e.kind())), e.detail(), where);
      } catch (const std::ios_base::failure& e) {
        fail(400, "DatasetUnreadable", e.what());
      }
      json report;
      try {
        report = metrics::report_to_json(metrics::extract_evidence(ds));
      } catch (const metrics::MetricsError& e) {
        fail(422, std::string(metrics::to_string(e.kind())), e.detail());
      }
      {
        std::lock_guard lock(report_mu);
        latest_report = report;
      }
      if (target) {
        std::lock_guard lock(target->mu);
        target->project_values = report;
      }
      send(res, 200, report);
    }));

    http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      auto s = std::make_shared<Session>();
      const std::string mode = body.value("mode", "analytic");
      if (mode == "exploratory") {
        s->mode = Mode::Exploratory;
      } else if (mode != "analytic") {
        fail(400, "InvalidMode", "mode must be 'analytic' or 'exploratory'");
      }
      if (body.contains("target") && !body["target"].is_null()) {
        if (!body["target"].is_string()) fail(400, "MalformedJson", "target must be a variable id");
        const auto t = body["target"].get<std::string>();
        if (!net.find(t)) fail(400, "UnknownVariable", "unknown variable '" + t + "'");
        s->target = t;
      }
      if (s->mode == Mode::Exploratory && !s->target) {
        fail(400, "MissingTarget", "exploratory sessions need a target variable");
      }
      const auto ev = read_evidence(body.value("evidence", json::object()));
      check_blanket(*s, ev);
      check_consistent(ev);
      s->evidence = ev;
      s->project_values = current_report();
      {
        std::unique_lock lock(store_mu);
        do {
          s->id = new_id();
        } while (sessions.contains(s->id));
        sessions[s->id] = s;
      }
      send(res, 201, session_json(*s));
    }));

    http.Get("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req.path_params.at("id"));
      std::lock_guard lock(s->mu);
      send(res, 200, session_json(*s));
    }));

    http.Delete("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::unique_lock lock(store_mu);
      if (sessions.erase(req.path_params.at("id")) == 0) {
        fail(404, "SessionNotFound", "no session '" + req.path_params.at("id") + "'");
      }
      res.status = 204;
    }));

    http.Patch("/sessions/:id/evidence", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req.path_params.at("id"));
      const auto changes = read_assignments(parse_body(req), true);
      std::lock_guard lock(s->mu);
      bn::Evidence merged = s->evidence;
      for (const auto& [id, state] : changes) {
        if (state) {
          merged[id] = *state;
        } else {
          merged.erase(id);
        }
      }
      check_blanket(*s, merged);
      check_consistent(merged);
      s->evidence = std::move(merged);
      send(res, 200, session_json(*s));
    }));

    http.Post("/sessions/:id/propagate", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req.path_params.at("id"));
      bn::Evidence ev;
      std::vector<std::string> targets;
      {
        std::lock_guard lock(s->mu);
        ev = s->evidence;
        if (s->mode == Mode::Analytic) {
          for (const auto& v : net.variables()) targets.push_back(v.id);
        } else {
          targets.push_back(*s->target);
          for (const auto& id : bn::markov_blanket(net, *s->target)) {
            if (!ev.contains(id)) targets.push_back(id);
          }
        }
      }
      send(res, 200, propagate(ev, targets));
    }));

    http.Get("/sessions/:id/evidence.xml", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req.path_params.at("id"));
      std::lock_guard lock(s->mu);
      res.status = 200;
      res.set_content(metrics::evidence_to_xml(net, s->evidence), "application/xml");
    }));

    http.Post("/sessions/:id/evidence.xml", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto s = session(req.path_params.at("id"));
      bn::Evidence ev;
      try {
        ev = metrics::evidence_from_xml(net, req.body);
      } catch (const bn::BnError& e) {
        fail(400, "SchemaViolation", e.what());
      }
      std::lock_guard lock(s->mu);
      check_blanket(*s, ev);
      check_consistent(ev);
      s->evidence = std::move(ev);
      send(res, 200, session_json(*s));
    }));
  }
};

Server::Server(bn::BayesianNetwork net, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(net), std::move(options))) {}

Server::~Server() = default;

int Server::bind(const std::string& host, int port) {
  // httplib defaults to SO_REUSEPORT, which lets a second server share the port.
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  int bound = -1;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (impl_->http.bind_to_port(host, port)) {
    bound = port;
  }
  impl_->bound = bound > 0;
  return bound > 0 ? bound : -1;
}

bool Server::run() {
  if (!impl_->bound) return false;
  return impl_->http.listen_after_bind();
}

void Server::stop() { impl_->http.stop(); }

bool Server::running() const { return impl_->http.is_running(); }

void Server::save_snapshot() const { impl_->save_snapshot(); }

std::size_t Server::session_count() const {
  std::shared_lock lock(impl_->store_mu);
  return impl_->sessions.size();
}

const bn::BayesianNetwork& Server::network() const { return impl_->net; }

}  // namespace requisites::service
