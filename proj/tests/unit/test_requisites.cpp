#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "requisites/bn/inference.hpp"
#include "requisites/model/calibration.hpp"
#include "requisites/model/requisites.hpp"

using namespace requisites;
using namespace requisites::model;

namespace {

double p(const bn::BayesianNetwork& net, const bn::Evidence& ev, const std::string& target,
         const std::string& state) {
  return bn::posterior(net, ev, target).probability(state);
}

double binomial_pmf(int n, int k, double w) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
  return c * std::pow(w, k) * std::pow(1.0 - w, n - k);
}

// Brute-force noisy-MAX row: enumerate every joint level of leak and causes.
std::vector<double> oracle_row(const std::vector<std::string>& child_states,
                               const std::vector<std::string>& ladder, double leak,
                               const std::vector<double>& weights) {
  const int n = static_cast<int>(ladder.size()) - 1;
  std::vector<double> by_level(ladder.size(), 0.0);
  std::vector<double> all{leak};
  all.insert(all.end(), weights.begin(), weights.end());
  std::vector<int> lv(all.size(), 0);
  while (true) {
    double pr = 1.0;
    int top = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      pr *= binomial_pmf(n, lv[i], all[i]);
      top = std::max(top, lv[i]);
    }
    by_level[static_cast<std::size_t>(top)] += pr;
    std::size_t d = 0;
    while (d < lv.size() && ++lv[d] > n) lv[d++] = 0;
    if (d == lv.size()) break;
  }
  std::vector<double> row(child_states.size());
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const auto pos = std::find(child_states.begin(), child_states.end(), ladder[k]) - child_states.begin();
    row[static_cast<std::size_t>(pos)] = by_level[k];
  }
  return row;
}

const std::vector<std::string>& states_of(const std::string& id) {
  for (const auto& v : requisites_variables()) {
    if (v.id == id) return v.states;
  }
  throw std::logic_error(id);
}

CptParamSet random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto params = uniform_params();
  for (auto& [id, row] : params.priors) {
    double s = 0;
    for (double& x : row) s += (x = 0.05 + u(rng));
    for (double& x : row) x /= s;
  }
  for (auto& [child, c] : params.causal) {
    c.leak = u(rng);
    for (auto& [parent, w] : c.weights) {
      for (double& x : w) x = u(rng);
    }
  }
  return params;
}

}  // namespace

TEST_CASE("structure matches the frozen edge fixture") {
  const std::set<std::pair<std::string, std::string>> expected{
      {"degree_of_commitment", "specificity"},
      {"stakeholders_expertise", "unclear_cost_benefit"},
      {"domain_expertise", "requirement_completeness"},
      {"stakeholders_expertise", "requirement_completeness"},
      {"domain_expertise", "homogeneity_of_description"},
      {"stakeholders_expertise", "homogeneity_of_description"},
      {"unexpected_dependencies", "requirement_variability"},
      {"unclear_cost_benefit", "requirement_variability"},
      {"requirement_completeness", "requirement_variability"},
      {"degree_of_commitment", "requirement_variability"},
      {"specificity", "degree_of_revision"},
      {"homogeneity_of_description", "degree_of_revision"},
      {"requirement_variability", "degree_of_revision"},
      {"requirement_completeness", "degree_of_revision"},
      {"reused_requirement", "degree_of_revision"},
  };
  std::set<std::pair<std::string, std::string>> got;
  for (const auto& e : requisites_edges()) got.emplace(e.parent, e.child);
  CHECK(got == expected);
  CHECK(requisites_edges().size() == 15);

  const auto& vars = requisites_variables();
  REQUIRE(vars.size() == 11);
  CHECK(states_of("stakeholders_expertise") == std::vector<std::string>{"high", "medium", "low"});
  CHECK(states_of("reused_requirement") == std::vector<std::string>{"many", "few", "none"});
  CHECK(states_of("unexpected_dependencies") == std::vector<std::string>{"yes", "no"});
  CHECK(states_of("degree_of_revision") == std::vector<std::string>{"yes", "no"});

  CHECK(is_root("domain_expertise"));
  CHECK_FALSE(is_root("degree_of_revision"));
  CHECK(requisites_parents("degree_of_revision").size() == 5);
}

TEST_CASE("expansion matches brute-force noisy-max and rows are normalized") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto params = random_params(rng);
    for (const auto& [child, c] : params.causal) {
      const auto parents = requisites_parents(child);
      const auto rows = expand_causal(child, c);
      std::size_t expected_rows = 1;
      for (const auto& pa : parents) expected_rows *= states_of(pa).size();
      REQUIRE(rows.size() == expected_rows);

      std::vector<std::size_t> digit(parents.size(), 0);
      for (const auto& row : rows) {
        double sum = 0;
        for (double x : row) {
          CHECK(x >= 0.0);
          sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        std::vector<double> w;
        for (std::size_t i = 0; i < parents.size(); ++i) w.push_back(c.weights.at(parents[i])[digit[i]]);
        const auto expected = oracle_row(states_of(child), escalation_order(child), c.leak, w);
        for (std::size_t k = 0; k < row.size(); ++k) CHECK(std::abs(row[k] - expected[k]) < 1e-12);

        for (std::size_t d = parents.size(); d-- > 0;) {
          if (++digit[d] < states_of(parents[d]).size()) break;
          digit[d] = 0;
        }
      }
    }
  }
}

TEST_CASE("uniform params build a normalized network") {
  const auto net = build_requisites(uniform_params());
  const auto marg = bn::prior_marginals(net);
  REQUIRE(marg.size() == 11);
  for (const auto& [id, post] : marg) {
    double s = 0;
    for (double x : post.probabilities) s += x;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  CHECK(marg.at("stakeholders_expertise").probability("medium") == doctest::Approx(1.0 / 3));
}

TEST_CASE("params validation") {
  auto params = uniform_params();
  params.priors["domain_expertise"] = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(validate_params(params), std::invalid_argument);

  params = uniform_params();
  params.causal["specificity"].leak = 1.5;
  CHECK_THROWS_AS(build_requisites(params), std::invalid_argument);

  params = uniform_params();
  params.causal["specificity"].weights["degree_of_commitment"] = {0.1, 0.2};
  CHECK_THROWS_AS(validate_params(params), std::invalid_argument);

  params = uniform_params();
  params.priors.erase("reused_requirement");
  CHECK_THROWS_AS(validate_params(params), std::invalid_argument);

  CHECK_NOTHROW(validate_params(graded_params()));
  CHECK_NOTHROW(validate_params(default_params()));
}

TEST_CASE("graded params rise along the influence order") {
  const auto params = graded_params();
  for (const auto& [child, c] : params.causal) {
    CHECK(c.leak == 0.1);
    for (const auto& [parent, w] : c.weights) {
      const auto& order = influence_order(child, parent);
      const auto& st = states_of(parent);
      double prev = -1.0;
      for (const auto& label : order) {
        const double x = w[static_cast<std::size_t>(std::find(st.begin(), st.end(), label) - st.begin())];
        CHECK(x > prev);
        prev = x;
      }
      CHECK(prev == doctest::Approx(0.6));
    }
  }
}

TEST_CASE("default network reproduces the reference trajectory") {
  const auto& net = default_network();
  const auto traj = evidence_trajectory(net, {{"homogeneity_of_description", "yes"},
                                              {"specificity", "high"},
                                              {"stakeholders_expertise", "low"}});
  REQUIRE(traj.size() == 4);
  CHECK(std::abs(traj[1].probability("no") - 0.54) <= 0.01);
  CHECK(std::abs(traj[2].probability("yes") - 0.45) <= 0.01);
  CHECK(std::abs(traj[2].probability("no") - 0.55) <= 0.01);
  CHECK(std::abs(traj[3].probability("yes") - 0.52) <= 0.01);
  CHECK(std::abs(traj[3].probability("no") - 0.48) <= 0.01);
  for (const auto& post : traj) CHECK(std::abs(post.probabilities[0] + post.probabilities[1] - 1.0) < 1e-9);
  CHECK(bn::map_predict(net,
                        {{"homogeneity_of_description", "yes"},
                         {"specificity", "high"},
                         {"stakeholders_expertise", "low"}},
                        "degree_of_revision") == "yes");

  const auto prior = evidence_trajectory(net, {});
  REQUIRE(prior.size() == 1);
  CHECK(prior[0].probabilities == bn::posterior(net, {}, "degree_of_revision").probabilities);

  CHECK_THROWS_AS(evidence_trajectory(net, {{"specificity", "high"}, {"specificity", "low"}}),
                  std::invalid_argument);
  CHECK(&default_network() == &net);
}

TEST_CASE("default network monotonicity") {
  const auto& net = default_network();
  const std::string spec = "specificity", commit = "degree_of_commitment";
  CHECK(p(net, {{commit, "low"}}, spec, "high") > p(net, {{commit, "high"}}, spec, "high"));
  CHECK(p(net, {{commit, "medium"}}, spec, "high") >= p(net, {{commit, "high"}}, spec, "high"));
  CHECK(p(net, {{commit, "low"}}, spec, "high") >= p(net, {{commit, "medium"}}, spec, "high"));

  const std::string se = "stakeholders_expertise", ucb = "unclear_cost_benefit";
  CHECK(p(net, {{se, "medium"}}, ucb, "high") >= p(net, {{se, "high"}}, ucb, "high"));
  CHECK(p(net, {{se, "low"}}, ucb, "high") >= p(net, {{se, "medium"}}, ucb, "high"));

  const std::string ud = "unexpected_dependencies", var = "requirement_variability";
  CHECK(p(net, {{ud, "yes"}}, var, "high") >= p(net, {{ud, "no"}}, var, "high"));

  const std::string reuse = "reused_requirement", rev = "degree_of_revision";
  CHECK(p(net, {{reuse, "many"}}, rev, "yes") <= p(net, {{reuse, "few"}}, rev, "yes"));
  CHECK(p(net, {{reuse, "many"}}, rev, "yes") <= p(net, {{reuse, "none"}}, rev, "yes"));

  const std::string hom = "homogeneity_of_description";
  CHECK(p(net, {{hom, "yes"}}, rev, "no") > p(net, {{hom, "no"}}, rev, "no"));
}

TEST_CASE("calibration: empty constraints return the initial params") {
  const auto init = graded_params();
  const auto r = calibrate({}, init, {});
  CHECK(r.params == init);
  CHECK(r.residual == 0.0);
  CHECK(r.evaluations == 1);
}

TEST_CASE("calibration is deterministic and never worsens") {
  std::vector<CalibrationConstraint> cons{
      {{{"homogeneity_of_description", "yes"}}, "degree_of_revision", "no", 0.54, 1.0},
      {{{"degree_of_commitment", "low"}}, "specificity", "high", 0.6, 1.0},
  };
  CalibrationOptions opt;
  opt.seed = 11;
  opt.budget = 600;
  const auto init = uniform_params();
  const auto a = calibrate(cons, init, opt);
  const auto b = calibrate(cons, init, opt);
  CHECK(a == b);
  CHECK(a.evaluations <= opt.budget);
  CHECK(a.residual <= calibration_objective(init, cons));
  CHECK(a.residual == doctest::Approx(calibration_objective(a.params, cons)).epsilon(1e-12));
  REQUIRE(!a.trace.empty());
  for (std::size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i] <= a.trace[i - 1]);
  CHECK_NOTHROW(build_requisites(a.params));

  opt.seed = 12;
  const auto c = calibrate(cons, init, opt);
  CHECK(c.residual <= calibration_objective(init, cons));
}

TEST_CASE("calibration results stay monotone") {
  std::vector<CalibrationConstraint> cons{
      // Asks for the opposite of the encoded direction; the search cannot comply.
      {{{"degree_of_commitment", "high"}}, "specificity", "high", 0.9, 1.0},
      {{{"degree_of_commitment", "low"}}, "specificity", "high", 0.1, 1.0},
  };
  CalibrationOptions opt;
  opt.budget = 400;
  const auto r = calibrate(cons, graded_params(), opt);
  const auto net = build_requisites(r.params);
  CHECK(p(net, {{"degree_of_commitment", "low"}}, "specificity", "high") >=
        p(net, {{"degree_of_commitment", "high"}}, "specificity", "high") - 1e-12);
}

TEST_CASE("constraint validation and file round trip") {
  std::vector<CalibrationConstraint> bad{{{{"specificity", "high"}}, "specificity", "low", 0.5, 1.0}};
  CHECK_THROWS_AS(validate_constraints(bad), std::invalid_argument);
  bad = {{{{"specificity", "huge"}}, "degree_of_revision", "yes", 0.5, 1.0}};
  CHECK_THROWS_AS(validate_constraints(bad), std::invalid_argument);
  bad = {{{}, "degree_of_revision", "yes", 1.5, 1.0}};
  CHECK_THROWS_AS(validate_constraints(bad), std::invalid_argument);
  bad = {{{}, "nope", "yes", 0.5, 1.0}};
  CHECK_THROWS_AS(validate_constraints(bad), std::invalid_argument);

  std::vector<CalibrationConstraint> good{
      {{{"homogeneity_of_description", "yes"}}, "degree_of_revision", "no", 0.54, 2.0}};
  const auto back = constraints_from_json(constraints_to_json(good));
  REQUIRE(back.size() == 1);
  CHECK(back[0].evidence == good[0].evidence);
  CHECK(back[0].target_prob == 0.54);
  CHECK(back[0].weight == 2.0);

  CHECK_THROWS_AS(constraints_from_json(nlohmann::json::parse(R"({"constraints":[{"target":1}]})")),
                  bn::BnError);
}

TEST_CASE("shipped constraint file is met by the shipped params") {
  std::ifstream in(REQUISITES_DATA_DIR "/calibration/trajectory.json");
  REQUIRE(in);
  const auto cons = constraints_from_json(nlohmann::json::parse(in));
  CHECK(cons.size() >= 5);
  CHECK(calibration_objective(default_params(), cons) < 1e-4);
}

TEST_CASE("params json round trip is lossless") {
  std::mt19937_64 rng(3);
  const auto params = random_params(rng);
  const auto text = params_to_json(params).dump();
  CHECK(params_from_json(nlohmann::json::parse(text)) == params);
  CHECK(params_from_json(params_to_json(default_params())) == default_params());
  CHECK_THROWS_AS(params_from_json(nlohmann::json::parse(R"({"format":"other"})")), bn::BnError);
  CHECK_THROWS_AS(params_from_json(nlohmann::json::parse(R"({"format":"requisites-params"})")),
                  bn::BnError);
}
