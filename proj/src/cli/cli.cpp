#include "requisites/cli/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "requisites/bn/inference.hpp"
#include "requisites/bn/model_io.hpp"
#include "requisites/metrics/interchange.hpp"
#include "requisites/metrics/metrics.hpp"
#include "requisites/model/calibration.hpp"
#include "requisites/model/requisites.hpp"
#include "requisites/service/service.hpp"

namespace requisites::cli {

using nlohmann::json;

namespace {

constexpr const char* kClass = "degree_of_revision";

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string model;
  std::string format = "table";
  int verbosity = 0;
  bool json() const { return format == "json"; }
};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text)) throw std::ios_base::failure("cannot write " + path);
}

bn::BayesianNetwork load_model(const Config& cfg, std::ostream& err) {
  if (cfg.model.empty()) {
    if (cfg.verbosity > 0) err << "model: shipped default\n";
    return model::default_network();
  }
  if (cfg.verbosity > 0) err << "model: " << cfg.model << "\n";
  const json doc = read_json_file(cfg.model);
  if (doc.is_object() && doc.value("format", "") == model::kParamsFormat) {
    return model::build_requisites(model::params_from_json(doc));
  }
  return bn::network_from_json(doc);
}

bn::Evidence parse_evidence(const std::vector<std::string>& pairs) {
  bn::Evidence ev;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == p.size()) {
      throw InputError("evidence must be var=state, got '" + p + "'");
    }
    if (!ev.emplace(p.substr(0, eq), p.substr(eq + 1)).second) {
      throw InputError("variable '" + p.substr(0, eq) + "' given twice");
    }
  }
  return ev;
}

void print_posterior_row(std::ostream& out, const bn::Posterior& post, std::size_t width) {
  out << pad(post.variable, width);
  for (std::size_t i = 0; i < post.states.size(); ++i) {
    out << "  " << post.states[i] << "=" << fixed(post.probabilities[i]);
  }
  out << "\n";
}

// ---- commands -----------------------------------------------------------

int model_show(const Config& cfg, std::ostream& out, std::ostream& err) {
  const auto net = load_model(cfg, err);
  if (cfg.json()) {
    json doc = bn::network_to_json(net);
    doc.erase("cpts");
    out << bn::dump_json(doc);
    return kOk;
  }
  std::size_t width = 0;
  for (const auto& v : net.variables()) width = std::max(width, v.id.size());
  out << "variables (" << net.size() << ")\n";
  for (const auto& v : net.variables()) {
    out << "  " << pad(v.id, width) << "  ";
    for (std::size_t i = 0; i < v.states.size(); ++i) out << (i ? ", " : "") << v.states[i];
    out << "\n";
  }
  out << "edges (" << net.edges().size() << ")\n";
  for (const auto& e : net.edges()) out << "  " << e.parent << " -> " << e.child << "\n";
  return kOk;
}

int model_export(const Config& cfg, const std::string& path, std::ostream& out, std::ostream& err) {
  const auto text = bn::dump_json(bn::network_to_json(load_model(cfg, err)));
  if (path.empty()) {
    out << text;
  } else {
    write_file(path, text);
  }
  return kOk;
}

int model_validate(const Config& cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto net = load_model(cfg, err);
    if (cfg.json()) {
      out << bn::dump_json({{"valid", true}, {"variables", net.size()}, {"edges", net.edges().size()}});
    } else {
      out << "valid: " << net.size() << " variables, " << net.edges().size() << " edges\n";
    }
    return kOk;
  } catch (const bn::BnError& e) {
    if (cfg.json()) {
      out << bn::dump_json({{"valid", false}, {"code", std::string(bn::to_string(e.code()))}, {"message", e.what()}});
    }
    err << "invalid: " << e.what() << "\n";
    return kInput;
  } catch (const std::invalid_argument& e) {
    if (cfg.json()) out << bn::dump_json({{"valid", false}, {"code", "InvalidParameters"}, {"message", e.what()}});
    err << "invalid: " << e.what() << "\n";
    return kInput;
  }
}

int infer(const Config& cfg, const std::vector<std::string>& pairs, std::vector<std::string> targets,
          std::ostream& out, std::ostream& err) {
  const auto net = load_model(cfg, err);
  const auto ev = parse_evidence(pairs);
  net.resolve(ev);
  for (const auto& t : targets) net.index_of(t);
  if (targets.empty()) {
    for (const auto& v : net.variables()) targets.push_back(v.id);
  }
  if (!(bn::evidence_probability(net, ev) > 0.0)) {
    throw bn::BnError(bn::ErrorCode::InconsistentEvidence, "evidence has probability zero");
  }
  std::vector<bn::Posterior> posts;
  for (const auto& t : targets) posts.push_back(bn::posterior(net, ev, t));
  std::optional<bn::Posterior> revision;
  if (net.find(kClass)) revision = bn::posterior(net, ev, kClass);

  if (cfg.json()) {
    json doc{{"evidence", ev}, {"posteriors", json::object()}};
    for (const auto& p : posts) doc["posteriors"][p.variable] = service::posterior_to_json(p);
    if (revision) {
      doc["revision"] = service::posterior_to_json(*revision);
      doc["prediction"] = revision->states[revision->argmax()];
    }
    out << bn::dump_json(doc);
    return kOk;
  }
  std::size_t width = std::string(kClass).size();
  for (const auto& p : posts) width = std::max(width, p.variable.size());
  for (const auto& p : posts) print_posterior_row(out, p, width);
  if (revision) {
    out << "\n";
    if (std::find(targets.begin(), targets.end(), kClass) == targets.end()) print_posterior_row(out, *revision, width);
    out << pad("prediction", width) << "  " << revision->states[revision->argmax()] << "\n";
  }
  return kOk;
}

int blanket(const Config& cfg, const std::string& var, std::ostream& out, std::ostream& err) {
  const auto net = load_model(cfg, err);
  const auto b = bn::markov_blanket(net, var);
  if (cfg.json()) {
    out << bn::dump_json({{"variable", var}, {"blanket", b}});
  } else {
    for (const auto& id : b) out << id << "\n";
  }
  return kOk;
}

int metrics_cmd(const Config& cfg, const std::string& dir, const std::string& emit, std::ostream& out,
                std::ostream& err) {
  const auto report = metrics::extract_evidence(metrics::load_dataset(dir));
  if (!emit.empty()) {
    const auto net = load_model(cfg, err);
    write_file(emit, metrics::evidence_to_xml(net, report.evidence()));
  }
  if (cfg.json()) {
    out << bn::dump_json(metrics::report_to_json(report));
    return kOk;
  }
  std::size_t width = 0;
  for (const auto& [id, e] : report.entries) width = std::max(width, id.size());
  for (const auto& [id, e] : report.entries) {
    out << pad(id, width) << "  " << pad(e.state.value_or("MANUAL"), 7) << "  " << e.note << "\n";
    for (const auto& [k, v] : e.statistics) {
      out << pad("", width) << "    " << k << " = " << (v == std::floor(v) ? fixed(v, 0) : fixed(v)) << "\n";
    }
  }
  return kOk;
}

int calibrate_cmd(const Config& cfg, const std::string& constraints_path, const model::CalibrationOptions& options,
                  const std::string& initial_path, const std::string& out_path, const std::string& trace_path,
                  std::ostream& out, std::ostream& err) {
  const auto constraints = model::constraints_from_json(read_json_file(constraints_path));
  const auto initial =
      initial_path.empty() ? model::graded_params() : model::params_from_json(read_json_file(initial_path));
  if (cfg.verbosity > 0) err << "calibrating " << constraints.size() << " constraints\n";
  const auto result = model::calibrate(constraints, initial, options);

  const json summary{{"seed", options.seed},
                     {"budget", options.budget},
                     {"initial_step", options.initial_step},
                     {"residual", result.residual},
                     {"evaluations", result.evaluations},
                     {"restarts", result.restarts}};
  if (!out_path.empty()) {
    json doc = model::params_to_json(result.params);
    doc["calibration"] = summary;
    write_file(out_path, bn::dump_json(doc));
  }
  if (!trace_path.empty()) write_file(trace_path, bn::dump_json(result.trace));

  if (cfg.json()) {
    json doc = summary;
    doc["trace"] = result.trace;
    doc["params"] = model::params_to_json(result.params);
    out << bn::dump_json(doc);
    return kOk;
  }
  char residual[32];
  std::snprintf(residual, sizeof residual, "%.6e", result.residual);
  out << "residual     " << residual << "\n"
      << "evaluations  " << result.evaluations << "\n"
      << "restarts     " << result.restarts << "\n"
      << "sweeps       " << (result.trace.size() - 1) << "\n";
  const auto net = model::build_requisites(result.params);
  for (const auto& c : constraints) {
    const double got = bn::posterior(net, c.evidence, c.target).probability(c.target_state);
    std::string given;
    for (const auto& [id, state] : c.evidence) given += (given.empty() ? "" : ", ") + id + "=" + state;
    out << "  P(" << c.target << "=" << c.target_state << " | " << given << ") = " << fixed(got) << "  target "
        << fixed(c.target_prob) << "\n";
  }
  return kOk;
}

std::vector<std::pair<std::string, std::string>> read_steps(const std::string& path) {
  const json doc = read_json_file(path);
  std::vector<std::pair<std::string, std::string>> steps;
  try {
    for (const auto& s : doc.at("steps")) {
      steps.emplace_back(s.at("variable").get<std::string>(), s.at("state").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return steps;
}

int trajectory_cmd(const Config& cfg, const std::string& steps_path, std::ostream& out, std::ostream& err) {
  const auto net = load_model(cfg, err);
  const auto steps = read_steps(steps_path);
  bn::Evidence all;
  for (const auto& [id, state] : steps) all[id] = state;
  net.resolve(all);
  const auto traj = model::evidence_trajectory(net, steps);

  if (cfg.json()) {
    json rows = json::array();
    for (std::size_t k = 0; k < traj.size(); ++k) {
      json row{{"step", k}, {"posterior", service::posterior_to_json(traj[k])}};
      row["added"] = k == 0 ? json(nullptr) : json{{"variable", steps[k - 1].first}, {"state", steps[k - 1].second}};
      rows.push_back(std::move(row));
    }
    out << bn::dump_json({{"trajectory", rows}});
    return kOk;
  }
  std::size_t width = std::string("(prior)").size();
  for (const auto& [id, state] : steps) width = std::max(width, id.size() + state.size() + 2);
  out << pad("step", 5) << pad("added", width + 2);
  for (const auto& s : traj[0].states) out << pad(s, 8);
  out << "\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << pad(std::to_string(k), 5)
        << pad(k == 0 ? "(prior)" : "+" + steps[k - 1].first + "=" + steps[k - 1].second, width + 2);
    for (double p : traj[k].probabilities) out << pad(fixed(p), 8);
    out << "\n";
  }
  return kOk;
}

int serve(const Config& cfg, const std::string& host, int port, const std::string& snapshot, std::ostream& out,
          std::ostream& err) {
  service::ServiceOptions options;
  options.snapshot = snapshot;
  service::Server server(load_model(cfg, err), options);

  // Signals are taken synchronously by this thread; every thread started
  // from here on inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int bound = server.bind(host, port);
  if (bound < 0) {
    err << "cannot listen on " << host << ":" << port << "\n";
    return kEnvironment;
  }
  const pthread_t main_thread = pthread_self();
  std::thread worker([&] {
    server.run();
    pthread_kill(main_thread, SIGUSR1);
  });
  out << "listening on http://" << host << ":" << bound << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  worker.join();
  server.save_snapshot();
  if (cfg.verbosity > 0) err << "stopped\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Requisites: predicts whether a requirements specification needs revision."};
  app.name("requisites");
  app.require_subcommand(1);
  app.fallthrough();

  Config cfg;
  app.add_option("--model", cfg.model, "Network (requisites-bn) or parameter (requisites-params) file")
      ->envname("REQUISITES_MODEL");
  app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"table", "json"}));
  app.add_flag("-v,--verbose", cfg.verbosity, "Diagnostics on stderr");

  std::function<int()> action;

  auto* model_cmd = app.add_subcommand("model", "Inspect or validate a model file");
  model_cmd->require_subcommand(1);
  model_cmd->add_subcommand("show", "Print variables, states and edges")->callback([&] {
    action = [&] { return model_show(cfg, out, err); };
  });
  std::string export_path;
  auto* export_cmd = model_cmd->add_subcommand("export", "Write the full network, CPTs included, as requisites-bn");
  export_cmd->add_option("--out", export_path, "Output file (default stdout)");
  export_cmd->callback([&] { action = [&] { return model_export(cfg, export_path, out, err); }; });
  model_cmd->add_subcommand("validate", "Check the model and report the first violation")->callback([&] {
    action = [&] { return model_validate(cfg, out, err); };
  });

  std::vector<std::string> evidence, targets;
  auto* infer_cmd = app.add_subcommand("infer", "Posterior probabilities given evidence");
  infer_cmd->add_option("-e,--evidence", evidence, "var=state (repeatable)");
  infer_cmd->add_option("-t,--target", targets, "Variable to report (repeatable; default all)");
  infer_cmd->callback([&] { action = [&] { return infer(cfg, evidence, targets, out, err); }; });

  std::string var;
  auto* blanket_cmd = app.add_subcommand("blanket", "Markov blanket of a variable");
  blanket_cmd->add_option("var", var, "Variable id")->required();
  blanket_cmd->callback([&] { action = [&] { return blanket(cfg, var, out, err); }; });

  std::string dataset, emit;
  auto* metrics_sub = app.add_subcommand("metrics", "Extract evidence from a project dataset directory");
  metrics_sub->add_option("dataset", dataset, "Dataset directory")->required();
  metrics_sub->add_option("--emit", emit, "Also write the extracted evidence as XML");
  metrics_sub->callback([&] { action = [&] { return metrics_cmd(cfg, dataset, emit, out, err); }; });

  std::string constraints, initial, out_path, trace_path;
  model::CalibrationOptions copt;
  copt.seed = 2018;
  copt.budget = 20000;
  auto* cal = app.add_subcommand("calibrate", "Fit model parameters to posterior constraints");
  cal->add_option("--constraints", constraints, "Constraint file")->required();
  cal->add_option("--seed", copt.seed, "Random seed")->capture_default_str();
  cal->add_option("--budget", copt.budget, "Objective evaluations")->capture_default_str()->check(CLI::PositiveNumber);
  cal->add_option("--step", copt.initial_step, "Initial coordinate step")->capture_default_str()->check(
      CLI::Range(1e-6, 1.0));
  cal->add_option("--tolerance", copt.tolerance, "Stop once the residual is at or below this")->capture_default_str();
  cal->add_option("--initial", initial, "Starting parameter file (default: graded start)");
  cal->add_option("--out", out_path, "Write the fitted parameters here");
  cal->add_option("--trace", trace_path, "Write the per-sweep best residuals here");
  cal->callback([&] {
    action = [&] { return calibrate_cmd(cfg, constraints, copt, initial, out_path, trace_path, out, err); };
  });

  std::string steps;
  auto* traj = app.add_subcommand("trajectory", "Posterior of degree_of_revision as evidence accumulates");
  traj->add_option("--steps", steps, "Steps file")->required();
  traj->callback([&] { action = [&] { return trajectory_cmd(cfg, steps, out, err); }; });

  std::string host = "127.0.0.1", snapshot;
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->envname("REQUISITES_PORT")->capture_default_str()
      ->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Listen address")->capture_default_str();
  serve_cmd->add_option("--snapshot", snapshot, "Session snapshot file, read at start and written at shutdown");
  serve_cmd->callback([&] { action = [&] { return serve(cfg, host, port, snapshot, out, err); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInput;
  }

  try {
    return action();
  } catch (const bn::BnError& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == bn::ErrorCode::InconsistentEvidence ? kInconsistent : kInput;
  } catch (const metrics::MetricsError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kEnvironment;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kEnvironment;
  }
}

}  // namespace requisites::cli
