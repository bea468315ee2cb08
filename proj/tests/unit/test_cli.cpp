#include <doctest.h>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "requisites/bn/inference.hpp"
#include "requisites/bn/model_io.hpp"
#include "requisites/cli/cli.hpp"
#include "requisites/metrics/interchange.hpp"
#include "requisites/model/requisites.hpp"

extern char** environ;

using namespace requisites;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

const std::string kBinary = REQUISITES_BIN;
const std::string kData = REQUISITES_DATA_DIR;
const std::string kFixture = REQUISITES_TEST_DATA "/project_fixture";

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("requisites_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Outcome run(const std::vector<std::string>& args) {
  const auto out = scratch("stdout"), err = scratch("stderr");
  std::string cmd = quote(kBinary);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

// Child process with stdout on a pipe.
struct Child {
  pid_t pid = -1;
  FILE* out = nullptr;

  explicit Child(const std::vector<std::string>& args) {
    int fds[2];
    REQUIRE(::pipe(fds) == 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    std::vector<std::string> all{kBinary};
    all.insert(all.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : all) argv.push_back(a.data());
    argv.push_back(nullptr);
    REQUIRE(posix_spawn(&pid, kBinary.c_str(), &actions, nullptr, argv.data(), environ) == 0);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    out = ::fdopen(fds[0], "r");
  }
  ~Child() {
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
    }
    if (out) std::fclose(out);
  }
  std::string line() {
    char buf[512];
    return std::fgets(buf, sizeof buf, out) ? std::string(buf) : std::string();
  }
  int wait() {
    int status = 0;
    ::waitpid(pid, &status, 0);
    pid = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

int port_from(const std::string& ready) {
  const auto colon = ready.rfind(':');
  REQUIRE(colon != std::string::npos);
  return std::stoi(ready.substr(colon + 1));
}

}  // namespace

TEST_CASE("model show and validate") {
  auto r = run({"model", "validate"});
  CHECK(r.code == 0);
  CHECK(r.out.find("11 variables") != std::string::npos);

  r = run({"--format", "json", "model", "show"});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["variables"].size() == 11);
  CHECK(r.err.empty());

  r = run({"model", "show"});
  CHECK(r.out.find("degree_of_commitment -> specificity") != std::string::npos);

  json cyclic = bn::network_to_json(
      bn::build_network({{"A", {"a", "b"}}, {"B", {"a", "b"}}}, {{"A", "B"}},
                        {{"A", {}, {{0.5, 0.5}}}, {"B", {"A"}, {{0.5, 0.5}, {0.5, 0.5}}}}));
  cyclic["edges"].push_back({"B", "A"});
  cyclic["cpts"][0]["parents"] = {"B"};
  cyclic["cpts"][0]["rows"] = {{0.5, 0.5}, {0.5, 0.5}};
  const auto path = scratch("cyclic.json");
  std::ofstream(path) << cyclic.dump();
  r = run({"--model", path.string(), "model", "validate"});
  CHECK(r.code == 2);
  CHECK(r.err.find("CycleDetected") != std::string::npos);

  r = run({"--model", "/no/such/model.json", "model", "validate"});
  CHECK(r.code == 1);

  r = run({"--model", kData + "/requisites.bn.json", "model", "validate"});
  CHECK(r.code == 0);
  r = run({"--model", kData + "/requisites.params.json", "model", "validate"});
  CHECK(r.code == 0);
}

TEST_CASE("shipped network file matches the shipped parameters") {
  const auto shipped = bn::load_network(kData + "/requisites.bn.json");
  CHECK(bn::network_to_json(shipped) == bn::network_to_json(model::default_network()));
}

TEST_CASE("infer") {
  auto r = run({"infer", "--evidence", "homogeneity_of_description=yes"});
  CHECK(r.code == 0);
  CHECK(r.out.find("yes=0.4600  no=0.5400") != std::string::npos);

  r = run({"--format", "json", "infer", "-e", "homogeneity_of_description=yes", "-t", "specificity"});
  const auto doc = json::parse(r.out);
  CHECK(std::abs(doc["revision"]["probabilities"]["no"].get<double>() - 0.54) <= 0.01);
  CHECK(doc["posteriors"].size() == 1);

  r = run({"--format", "json", "infer"});
  const auto priors = json::parse(r.out);
  CHECK(priors["posteriors"].size() == 11);
  const auto marg = bn::prior_marginals(model::default_network());
  CHECK(priors["posteriors"]["specificity"]["probabilities"]["high"].get<double>() ==
        marg.at("specificity").probability("high"));

  CHECK(run({"infer", "--evidence", "foo=bar"}).code == 2);
  CHECK(run({"infer", "--evidence", "specificity=huge"}).code == 2);
  CHECK(run({"infer", "--evidence", "specificity"}).code == 2);
  CHECK(run({"infer", "--target", "nope"}).code == 2);
  CHECK(run({"infer", "--bogus"}).code == 2);
  CHECK(run({"--format", "yaml", "infer"}).code == 2);

  // A deterministic model where the evidence below is impossible.
  const auto path = scratch("det.json");
  std::ofstream(path) << bn::dump_json(bn::network_to_json(
      bn::build_network({{"A", {"a0", "a1"}}, {"B", {"b0", "b1"}}}, {{"A", "B"}},
                        {{"A", {}, {{0.5, 0.5}}}, {"B", {"A"}, {{0.0, 1.0}, {1.0, 0.0}}}})));
  r = run({"--model", path.string(), "infer", "-e", "A=a1", "-e", "B=b1"});
  CHECK(r.code == 3);
  CHECK(r.out.empty());
  CHECK(r.err.find("InconsistentEvidence") != std::string::npos);
}

TEST_CASE("machine-readable output is byte-stable") {
  const std::vector<std::string> args{"--format", "json", "infer", "-e", "specificity=low"};
  CHECK(run(args).out == run(args).out);
}

TEST_CASE("blanket") {
  auto r = run({"blanket", "degree_of_revision"});
  CHECK(r.code == 0);
  std::string expected;
  std::vector<std::string> parents = model::requisites_parents("degree_of_revision");
  std::sort(parents.begin(), parents.end());
  for (const auto& p : parents) expected += p + "\n";
  CHECK(r.out == expected);
  CHECK(run({"blanket", "nope"}).code == 2);
}

TEST_CASE("metrics") {
  const auto xml = scratch("evidence.xml");
  auto r = run({"metrics", kFixture, "--emit", xml.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("homogeneity_of_description  yes") != std::string::npos);
  CHECK(r.out.find("q1 = 50.9615") != std::string::npos);
  CHECK(r.out.find("90.0% of objectives") != std::string::npos);
  CHECK(r.out.find("92.0% of stakeholders") != std::string::npos);
  const auto ev = metrics::evidence_from_xml(model::default_network(), slurp(xml));
  CHECK(ev == bn::Evidence{{"homogeneity_of_description", "yes"},
                           {"specificity", "high"},
                           {"stakeholders_expertise", "low"}});

  const auto empty = scratch("empty_dataset");
  fs::create_directories(empty);
  r = run({"metrics", empty.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("hierarchy.csv") != std::string::npos);

  const auto broken = scratch("broken_dataset");
  fs::create_directories(broken);
  std::ofstream(broken / "hierarchy.csv") << "id,level,parent\nO1,objective,\nF1,feature,O1,extra\n";
  r = run({"metrics", broken.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("hierarchy.csv:3") != std::string::npos);
}

TEST_CASE("calibrate and trajectory") {
  const auto empty = scratch("none.json");
  std::ofstream(empty) << R"({"constraints": []})";
  const auto out = scratch("params.json");
  auto r = run({"--format", "json", "calibrate", "--constraints", empty.string(), "--out", out.string()});
  CHECK(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["residual"] == 0.0);
  CHECK(model::params_from_json(json::parse(slurp(out))) == model::graded_params());

  const auto trace = scratch("trace.json");
  const std::vector<std::string> args{"--format", "json", "calibrate", "--constraints",
                                      kData + "/calibration/trajectory.json", "--budget", "300",
                                      "--trace", trace.string()};
  r = run(args);
  CHECK(r.code == 0);
  const auto a = json::parse(r.out);
  CHECK(a["evaluations"] == 300);
  CHECK(json::parse(slurp(trace)) == a["trace"]);
  CHECK(run(args).out == r.out);

  const auto bad = scratch("bad.json");
  std::ofstream(bad) << "{ nope";
  CHECK(run({"calibrate", "--constraints", bad.string()}).code == 2);
  CHECK(run({"calibrate", "--constraints", "/no/such/file"}).code == 1);
  CHECK(run({"calibrate"}).code == 2);

  r = run({"trajectory", "--steps", kData + "/trajectory.steps.json"});
  CHECK(r.code == 0);
  CHECK(r.out.find("+stakeholders_expertise=low      0.5200  0.4800") != std::string::npos);
  r = run({"--format", "json", "trajectory", "--steps", kData + "/trajectory.steps.json"});
  const auto rows = json::parse(r.out)["trajectory"];
  REQUIRE(rows.size() == 4);
  CHECK(std::abs(rows[3]["posterior"]["probabilities"]["no"].get<double>() - 0.48) <= 0.01);
}

TEST_CASE("serve") {
  Child server({"serve", "--port", "0"});
  const auto ready = server.line();
  REQUIRE(ready.starts_with("listening on http://127.0.0.1:"));
  const int port = port_from(ready);

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/network");
  REQUIRE(res);
  CHECK(res->status == 200);

  // A second server on the same port fails to bind.
  auto clash = run({"serve", "--port", std::to_string(port)});
  CHECK(clash.code == 1);

  ::kill(server.pid, SIGINT);
  CHECK(server.wait() == 0);
}

TEST_CASE("in-process entry point") {
  std::ostringstream out, err;
  const char* argv[] = {"requisites", "blanket", "specificity"};
  CHECK(cli::run(3, argv, out, err) == cli::kOk);
  CHECK(out.str().find("degree_of_commitment\n") != std::string::npos);
  const char* help[] = {"requisites", "--help"};
  std::ostringstream hout, herr;
  CHECK(cli::run(2, help, hout, herr) == cli::kOk);
  CHECK(hout.str().find("calibrate") != std::string::npos);
}
