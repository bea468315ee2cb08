#include <cmath>
#include <random>

#include "doctest.h"
#include "random_network.hpp"
#include "requisites/bn/inference.hpp"

using namespace requisites::bn;
using testing_support::NetworkDefinition;

namespace {

BayesianNetwork coin() {
  return build_network({{"coin", {"yes", "no"}}}, {}, {{"coin", {}, {{0.5, 0.5}}}});
}

// A -> B with P(a) = 0.3, P(b|a) = 0.8, P(b|~a) = 0.1.
BayesianNetwork chain() {
  return build_network({{"A", {"a", "not_a"}}, {"B", {"b", "not_b"}}}, {{"A", "B"}},
                       {{"A", {}, {{0.3, 0.7}}}, {"B", {"A"}, {{0.8, 0.2}, {0.1, 0.9}}}});
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const BnError& e) {
    return e.code();
  }
  FAIL("expected BnError");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("build_network accepts a minimal network") {
  const auto net = coin();
  CHECK(net.size() == 1);
  CHECK(net.parents(0).empty());
}

TEST_CASE("build_network rejects structural errors") {
  const std::vector<Variable> ab{{"A", {"x", "y"}}, {"B", {"x", "y"}}};
  const Cpt a{"A", {}, {{0.5, 0.5}}};
  const Cpt b{"B", {}, {{0.5, 0.5}}};

  SUBCASE("two-node cycle") {
    CHECK(code_of([&] {
            build_network(ab, {{"A", "B"}, {"B", "A"}},
                          {{"A", {"B"}, {{0.5, 0.5}, {0.5, 0.5}}},
                           {"B", {"A"}, {{0.5, 0.5}, {0.5, 0.5}}}});
          }) == ErrorCode::CycleDetected);
  }
  SUBCASE("self loop") {
    CHECK(code_of([&] { build_network(ab, {{"A", "A"}}, {a, b}); }) == ErrorCode::CycleDetected);
  }
  SUBCASE("row not normalized") {
    CHECK(code_of([&] { build_network({ab[0]}, {}, {{"A", {}, {{0.6, 0.5}}}}); }) ==
          ErrorCode::RowNotNormalized);
  }
  SUBCASE("negative entry") {
    CHECK(code_of([&] { build_network({ab[0]}, {}, {{"A", {}, {{1.5, -0.5}}}}); }) ==
          ErrorCode::RowNotNormalized);
  }
  SUBCASE("CPT parents differ from graph") {
    CHECK(code_of([&] { build_network(ab, {{"A", "B"}}, {a, b}); }) == ErrorCode::CptMismatch);
  }
  SUBCASE("wrong row count") {
    CHECK(code_of([&] { build_network(ab, {{"A", "B"}}, {a, {"B", {"A"}, {{0.5, 0.5}}}}); }) ==
          ErrorCode::CptMismatch);
  }
  SUBCASE("wrong column count") {
    CHECK(code_of([&] { build_network({ab[0]}, {}, {{"A", {}, {{0.2, 0.3, 0.5}}}}); }) ==
          ErrorCode::CptMismatch);
  }
  SUBCASE("missing CPT") {
    CHECK(code_of([&] { build_network(ab, {}, {a}); }) == ErrorCode::CptMismatch);
  }
  SUBCASE("unknown edge endpoint") {
    CHECK(code_of([&] { build_network(ab, {{"A", "C"}}, {a, b}); }) ==
          ErrorCode::UnknownVariable);
  }
  SUBCASE("duplicate edge") {
    CHECK(code_of([&] {
            build_network(ab, {{"A", "B"}, {"A", "B"}},
                          {a, {"B", {"A"}, {{0.5, 0.5}, {0.5, 0.5}}}});
          }) == ErrorCode::DuplicateEdge);
  }
  SUBCASE("repeated state label") {
    CHECK(code_of([&] { build_network({{"A", {"x", "x"}}}, {}, {a}); }) ==
          ErrorCode::InvalidVariable);
  }
  SUBCASE("single state") {
    CHECK(code_of([&] { build_network({{"A", {"x"}}}, {}, {{"A", {}, {{1.0}}}}); }) ==
          ErrorCode::InvalidVariable);
  }
}

TEST_CASE("joint_probability") {
  CHECK(joint_probability(coin(), {{"coin", "yes"}}) == doctest::Approx(0.5));
  CHECK(joint_probability(chain(), {{"A", "a"}, {"B", "b"}}) == doctest::Approx(0.24));
  CHECK(code_of([] { joint_probability(chain(), {{"A", "a"}}); }) ==
        ErrorCode::IncompleteAssignment);
  CHECK(code_of([] { joint_probability(chain(), {{"A", "a"}, {"B", "c"}}); }) ==
        ErrorCode::IllegalState);
}

TEST_CASE("joint sums to one over all assignments on small random networks") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const auto def = testing_support::random_network(rng, 6);
    const auto net = def.build();
    double total = 0.0;
    testing_support::for_each_assignment(def, [&](const std::vector<std::size_t>& states) {
      Evidence full;
      for (std::size_t i = 0; i < states.size(); ++i) {
        full[def.variables[i].id] = def.variables[i].states[states[i]];
      }
      total += joint_probability(net, full);
    });
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("posterior basics") {
  SUBCASE("root with empty evidence returns its prior row") {
    const auto p = posterior(chain(), {}, "A");
    CHECK(p.probabilities[0] == doctest::Approx(0.3));
    CHECK(p.probabilities[1] == doctest::Approx(0.7));
  }
  SUBCASE("observed target is a point mass") {
    const auto p = posterior(chain(), {{"A", "not_a"}}, "A");
    CHECK(p.probabilities == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("diagnostic reasoning on the chain") {
    // P(a | b) = 0.24 / 0.31
    const auto p = posterior(chain(), {{"B", "b"}}, "A");
    CHECK(p.probability("a") == doctest::Approx(0.24 / 0.31).epsilon(1e-12));
  }
  SUBCASE("zero-probability evidence is reported") {
    const auto net =
        build_network({{"A", {"a", "b"}}, {"B", {"x", "y"}}}, {{"A", "B"}},
                      {{"A", {}, {{1.0, 0.0}}}, {"B", {"A"}, {{1.0, 0.0}, {0.5, 0.5}}}});
    CHECK(code_of([&] { posterior(net, {{"B", "y"}}, "A"); }) == ErrorCode::InconsistentEvidence);
    CHECK(code_of([&] { posterior(net, {{"A", "b"}}, "A"); }) == ErrorCode::InconsistentEvidence);
  }
  SUBCASE("unknown names") {
    CHECK(code_of([] { posterior(chain(), {}, "C"); }) == ErrorCode::UnknownVariable);
    CHECK(code_of([] { posterior(chain(), {{"A", "maybe"}}, "B"); }) == ErrorCode::IllegalState);
  }
}

TEST_CASE("prior_marginals") {
  const auto coin_priors = prior_marginals(coin());
  CHECK(coin_priors.at("coin").probabilities == std::vector<double>{0.5, 0.5});

  // Total probability by hand: 0.3 * 0.8 + 0.7 * 0.1.
  const auto priors = prior_marginals(chain());
  CHECK(priors.at("B").probability("b") == doctest::Approx(0.31).epsilon(1e-12));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = testing_support::random_network(rng, 8).build();
    for (const auto& [id, post] : prior_marginals(net)) {
      double sum = 0.0;
      for (double p : post.probabilities) sum += p;
      CHECK(std::abs(sum - 1.0) <= 1e-9);
      CHECK(post.probabilities == posterior(net, {}, id).probabilities);
    }
  }
}

TEST_CASE("variable elimination matches enumeration and is order independent") {
  std::mt19937_64 rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const auto def = testing_support::random_network(rng, 8, trial % 3 == 0 ? 0.2 : 0.0);
    const auto net = def.build();
    const auto evidence = testing_support::random_evidence(rng, def, 0.3);
    const auto& target = def.variables[testing_support::pick(rng, def.variables.size())].id;

    const auto expected = testing_support::oracle_posterior(def, evidence, target);
    if (!expected) {
      CHECK(code_of([&] { posterior(net, evidence, target); }) ==
            ErrorCode::InconsistentEvidence);
      continue;
    }
    const auto got = posterior(net, evidence, target);
    for (std::size_t s = 0; s < got.probabilities.size(); ++s) {
      CHECK(std::abs(got.probabilities[s] - (*expected)[s]) <= 1e-9);
    }

    EliminationOptions shuffled;
    shuffled.prune_irrelevant = false;
    for (const auto& v : def.variables) shuffled.order.push_back(v.id);
    std::shuffle(shuffled.order.begin(), shuffled.order.end(), rng);
    const auto other = posterior(net, evidence, target, shuffled);
    for (std::size_t s = 0; s < got.probabilities.size(); ++s) {
      CHECK(std::abs(got.probabilities[s] - other.probabilities[s]) <= 1e-9);
    }
    ++compared;
  }
  CHECK(compared > 60);
}

TEST_CASE("markov_blanket") {
  CHECK(markov_blanket(coin(), "coin").empty());
  CHECK(markov_blanket(chain(), "A") == std::set<std::string>{"B"});
  CHECK(markov_blanket(chain(), "B") == std::set<std::string>{"A"});
  CHECK(code_of([] { markov_blanket(chain(), "Z"); }) == ErrorCode::UnknownVariable);

  // Co-parent is included: A -> C <- B, C -> D.
  const auto net = build_network(
      {{"A", {"0", "1"}}, {"B", {"0", "1"}}, {"C", {"0", "1"}}, {"D", {"0", "1"}}},
      {{"A", "C"}, {"B", "C"}, {"C", "D"}},
      {{"A", {}, {{0.5, 0.5}}},
       {"B", {}, {{0.5, 0.5}}},
       {"C", {"A", "B"}, {{0.1, 0.9}, {0.2, 0.8}, {0.3, 0.7}, {0.4, 0.6}}},
       {"D", {"C"}, {{0.5, 0.5}, {0.9, 0.1}}}});
  CHECK(markov_blanket(net, "A") == std::set<std::string>{"B", "C"});
  CHECK(markov_blanket(net, "C") == std::set<std::string>{"A", "B", "D"});
}

TEST_CASE("blanket evidence screens off the rest of the network") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const auto def = testing_support::random_network(rng, 8);
    const auto net = def.build();
    const auto& var = def.variables[testing_support::pick(rng, def.variables.size())].id;
    const auto blanket = markov_blanket(net, var);
    CHECK_FALSE(blanket.contains(var));

    Evidence on_blanket;
    for (const auto& b : blanket) {
      const auto& st = net.variable(net.index_of(b)).states;
      on_blanket[b] = st[testing_support::pick(rng, st.size())];
    }
    Evidence extended = on_blanket;
    for (const auto& v : def.variables) {
      if (v.id != var && !blanket.contains(v.id) && testing_support::uniform01(rng) < 0.6) {
        extended[v.id] = v.states[testing_support::pick(rng, v.states.size())];
      }
    }
    const auto base = posterior(net, on_blanket, var);
    const auto more = posterior(net, extended, var);
    for (std::size_t s = 0; s < base.probabilities.size(); ++s) {
      CHECK(std::abs(base.probabilities[s] - more.probabilities[s]) <= 1e-9);
    }
  }
}

TEST_CASE("map_predict") {
  const auto skewed = build_network({{"c", {"yes", "no"}}}, {}, {{"c", {}, {{0.7, 0.3}}}});
  CHECK(map_predict(skewed, {}, "c") == "yes");
  const auto flipped = build_network({{"c", {"yes", "no"}}}, {}, {{"c", {}, {{0.3, 0.7}}}});
  CHECK(map_predict(flipped, {}, "c") == "no");
  CHECK(map_predict(coin(), {}, "coin") == "yes");
  CHECK(code_of([] { map_predict(coin(), {{"coin", "no"}}, "coin"); }) ==
        ErrorCode::ClassObserved);
}
