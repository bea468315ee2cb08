#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "requisites/bn/network.hpp"

namespace requisites::service {

struct ServiceOptions {
  // Variable whose posterior and prediction accompany every propagation.
  std::string class_variable = "degree_of_revision";
  // Sessions are loaded from here at start-up and written back by
  // save_snapshot(); empty disables persistence.
  std::filesystem::path snapshot;
};

// JSON encoding shared by the HTTP responses and the CLI:
//   {"variable": id, "states": [...], "probabilities": {state: p, ...}}
nlohmann::json posterior_to_json(const bn::Posterior& post);

// HTTP/JSON facade over one immutable network. Routes:
//   GET    /network[?cpts=true]
//   POST   /infer
//   GET    /markov-blanket/{var}
//   POST   /metrics/extract
//   POST   /sessions
//   GET    /sessions/{id}
//   DELETE /sessions/{id}
//   PATCH  /sessions/{id}/evidence
//   POST   /sessions/{id}/propagate
//   GET    /sessions/{id}/evidence.xml
//   POST   /sessions/{id}/evidence.xml
// Errors answer {"code", "message", "detail"} with 400, 404, 409 or 422.
class Server {
 public:
  // Throws std::invalid_argument when the class variable is not in `net`
  // and bn::BnError / nlohmann::json::exception for an unreadable snapshot.
  explicit Server(bn::BayesianNetwork net, ServiceOptions options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds the listening socket; port 0 picks a free port. Returns the bound
  // port or -1 on failure.
  int bind(const std::string& host, int port);
  // Serves until stop(); returns false if the socket was never bound.
  bool run();
  void stop();
  bool running() const;

  void save_snapshot() const;
  std::size_t session_count() const;
  const bn::BayesianNetwork& network() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace requisites::service
