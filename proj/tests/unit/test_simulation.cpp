#include <doctest.h>

#include <cmath>
#include <memory>

#include "fixtures.hpp"
#include "hpomdp/errors.hpp"
#include "hpomdp/simulation.hpp"

using namespace hpomdp;

namespace {

HpomdpModel single_concept(double learn, std::vector<double> initial = {}) {
  ConceptGraph g({"k"}, {});
  SimpleModelSpec spec;
  spec.learn = {learn};
  spec.initial = std::move(initial);
  return make_simple_model(g, StateMode::full, one_question_per_concept(g), spec);
}

HpomdpModel chain2_model() {
  const auto graph = test::chain_graph(2);
  SimpleModelSpec spec;
  spec.learn = {0.5, 0.1};
  spec.initial = {0.7, 0.2, 0.1};
  spec.guess = 0.15;
  spec.fluency = 0.9;
  return make_simple_model(graph, StateMode::filtered, test::questions_per_concept(graph, 2),
                           spec);
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("deterministic truth masters in one step") {
  auto truth = single_concept(1.0);
  truth.observation.guess = {0.0};
  truth.observation.fluency = {1.0};
  const FixedActionPolicy policy(truth.questions, 0);
  const auto r = simulate_cohort(truth, policy, 1, 200, 5);
  CHECK(r.final_state_distribution[1] == 1.0);
  CHECK(r.episodes == 200);
  CHECK(r.mastered_counts.size() == 200);
}

TEST_CASE("frozen students keep their initial distribution") {
  const auto truth = single_concept(0.0, {0.35, 0.65});
  const RandomPolicy policy(truth.questions);
  const std::size_t n = 10000;
  const auto r = simulate_cohort(truth, policy, 4, n, 6);
  const double sigma = std::sqrt(0.35 * 0.65 / n);
  CHECK(std::abs(r.final_state_distribution[0] - 0.35) < 3 * sigma);
}

TEST_CASE("geometric mastery matches the closed form") {
  const auto truth = single_concept(0.3);
  const FixedActionPolicy policy(truth.questions, 0);
  const std::size_t n = 10000;
  const auto r = simulate_cohort(truth, policy, 2, n, 7);
  const double p = 1.0 - 0.7 * 0.7;
  CHECK(std::abs(r.final_state_distribution[1] - p) < 3 * std::sqrt(p * (1 - p) / n));
  double total = 0.0;
  for (double x : r.final_state_distribution) total += x;
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("strategy metrics by hand") {
  const auto graph = test::flat_graph(2);
  CohortResult r;
  r.states = build_state_space(graph, StateMode::full);  // 00, 01, 10, 11
  r.final_state_distribution = {0.2, 0.0, 0.3, 0.5};
  const auto m = strategy_metrics(r, graph);
  CHECK(std::abs(m.proficiency[0] - 0.8) < 1e-12);
  CHECK(std::abs(m.proficiency[1] - 0.5) < 1e-12);
  CHECK(std::abs(m.pro_sum - 1.3) < 1e-12);
  CHECK(std::abs(m.variance - 0.61) < 1e-12);

  r.final_state_distribution = {0, 0, 0, 1};
  const auto full = strategy_metrics(r, graph);
  CHECK(full.proficiency == std::vector<double>{1.0, 1.0});
  CHECK(full.pro_sum == 2.0);
  CHECK(full.variance == 0.0);
}

TEST_CASE("two-sample t") {
  const std::vector<int> a = {3, 1}, b = {1, 1};
  const auto r = two_sample_t(a, b);
  CHECK(std::abs(r.t - 1.0) < 1e-12);
  CHECK(r.degrees_of_freedom == 2);
  // Two degrees of freedom: P(|T| > t) = 1 - t / sqrt(2 + t^2).
  CHECK(std::abs(r.p_value - (1.0 - 1.0 / std::sqrt(3.0))) < 1e-12);
  const std::vector<int> c = {2, 2, 2, 2}, d = {0, 0, 0, 0};
  const auto inf = two_sample_t(c, d);
  CHECK(inf.infinite);
  CHECK(std::isinf(inf.t));
  CHECK(inf.t > 0);
  const auto same = two_sample_t(c, c);
  CHECK(same.t == 0.0);
  CHECK_FALSE(same.infinite);
  const std::vector<int> e = {1, 2, 4, 0}, f = {1, 2, 4, 0};
  CHECK(two_sample_t(e, f).t == 0.0);
  const std::vector<int> empty;
  CHECK_THROWS_AS(two_sample_t(empty, a), ContractError);
}

TEST_CASE("cohorts are reproducible across thread counts") {
  const auto truth = chain2_model();
  auto policy_model = std::make_shared<const HpomdpModel>(truth);
  const PlannerPolicy planner(policy_model, PlannerConfig{.horizon = 3, .receding_depth = 2});
  const auto a = simulate_cohort(truth, planner, 4, 300, 11, 1);
  const auto b = simulate_cohort(truth, planner, 4, 300, 11, 3);
  CHECK(a.final_state_distribution == b.final_state_distribution);
  CHECK(a.mastered_counts == b.mastered_counts);
  const auto c = simulate_cohort(truth, planner, 4, 300, 12, 1);
  CHECK(a.mastered_counts != c.mastered_counts);
}

TEST_CASE("filtered cohorts respect prerequisites") {
  Rng rng = make_rng(51, 0);
  for (int trial = 0; trial < 5; ++trial) {
    auto truth = test::random_model(rng, 3, 2);
    const RandomPolicy policy(truth.questions);
    const auto r = simulate_cohort(truth, policy, 6, 500, trial);
    for (const auto& s : r.states) CHECK(truth.space.find(s));
    const auto m = strategy_metrics(r, truth.graph);
    if (truth.space.mode() == StateMode::filtered) {
      for (const auto& [p, c] : truth.graph.edges()) {
        CHECK(m.proficiency[p] >= m.proficiency[c] - 1e-12);
      }
    }
  }
}

TEST_CASE("planner beats random on the chain fixture") {
  const auto truth = chain2_model();
  auto policy_model = std::make_shared<const HpomdpModel>(truth);
  const PlannerPolicy planner(policy_model, PlannerConfig{.horizon = 4, .receding_depth = 3});
  const RandomPolicy random(truth.questions);
  const auto p = simulate_cohort(truth, planner, 4, 2000, 13);
  const auto r = simulate_cohort(truth, random, 4, 2000, 13);
  const auto mp = strategy_metrics(p, truth.graph);
  const auto mr = strategy_metrics(r, truth.graph);
  CHECK(mp.pro_sum > mr.pro_sum);
  CHECK(two_sample_t(p.mastered_counts, r.mastered_counts).t > 2.0);
}

TEST_CASE("unknown policy actions are rejected") {
  const auto truth = single_concept(0.3);
  const FixedActionPolicy stranger(QuestionCatalog({{"zz", 0}}, 1), 0);
  CHECK_THROWS_AS(simulate_cohort(truth, stranger, 2, 10, 1), ContractError);
  const FixedActionPolicy policy(truth.questions, 0);
  CHECK_THROWS_AS(simulate_cohort(truth, policy, 0, 10, 1), ContractError);
  CHECK_THROWS_AS(simulate_cohort(truth, policy, 2, 0, 1), ContractError);
}

TEST_CASE("sampled datasets") {
  const auto gen = test::mixture_generator({0.6, 0.1});
  const auto a = sample_dataset(gen, 20, 5, 3);
  const auto b = sample_dataset(gen, 20, 5, 3);
  CHECK(a.patterns == b.patterns);
  REQUIRE(a.dataset.trajectories.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(a.dataset.trajectories[i].steps == b.dataset.trajectories[i].steps);
    CHECK(a.dataset.trajectories[i].steps.size() == 5);
  }
  CHECK(a.dataset.trajectories[0].student < a.dataset.trajectories[19].student);
}

}  // TEST_SUITE
