#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "hpomdp/errors.hpp"
#include "hpomdp/inference.hpp"
#include "hpomdp/learning.hpp"
#include "hpomdp/simulation.hpp"
#include "oracles.hpp"

using namespace hpomdp;

namespace {

// One concept, two questions, interior parameters.
HpomdpModel two_question_model() {
  ConceptGraph g({"k"}, {});
  QuestionCatalog cat({{"q1", 0}, {"q2", 0}}, 1);
  SimpleModelSpec spec;
  spec.initial = {0.6, 0.4};
  spec.learn = {0.3};
  auto m = make_simple_model(g, StateMode::full, cat, spec);
  m.observation.guess = {0.2, 0.25};
  m.observation.fluency = {0.85, 0.9};
  return m;
}

std::vector<Trajectory> three_sequences() {
  return {
      {"a", {{0, false}, {1, false}, {0, true}, {1, true}}},
      {"b", {{1, true}, {0, false}, {0, true}, {1, true}, {0, true}}},
      {"c", {{0, false}, {0, false}, {1, false}, {1, true}}},
  };
}

Dataset dataset_of(const HpomdpModel& m, std::vector<Trajectory> t) {
  return Dataset{m.graph, m.questions, std::move(t)};
}

double max_param_diff(const HpomdpModel& a, const HpomdpModel& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.pattern_count(); ++j) {
    for (std::size_t s = 0; s < a.space.size(); ++s) {
      d = std::max(d, std::abs(a.components[j].initial[s] - b.components[j].initial[s]));
      for (ConceptIndex c = 0; c < a.space.concept_count(); ++c) {
        d = std::max(d, std::abs(learn_probability(a.space, a.components[j], c, s) -
                                 learn_probability(b.space, b.components[j], c, s)));
      }
    }
  }
  for (std::size_t q = 0; q < a.questions.size(); ++q) {
    d = std::max(d, std::abs(a.observation.guess[q] - b.observation.guess[q]));
    d = std::max(d, std::abs(a.observation.fluency[q] - b.observation.fluency[q]));
  }
  return d;
}

}  // namespace

TEST_SUITE("learning") {

TEST_CASE("k = 1 step reproduces an independent Baum-Welch update") {
  const auto model = two_question_model();
  const auto data = three_sequences();
  const auto oracle = test::apply_update(model, test::baum_welch_step(model, data));
  const auto step = em_step(data, model, EmConfig{.k = 1});
  CHECK(max_param_diff(step.model, oracle) < 1e-10);
  for (const auto& row : step.model.membership) CHECK(row == std::vector<double>{1.0});
}

TEST_CASE("toy1 single step sets D to the posterior") {
  const auto model = test::toy1();
  const auto step = em_step(std::vector<Trajectory>{{"s", {{0, true}}}}, model, EmConfig{.k = 1});
  CHECK(std::abs(step.model.components[0].initial[0] - 0.25) < 1e-12);
  CHECK(std::abs(step.log_likelihood - std::log(0.48)) < 1e-12);
}

TEST_CASE("identical components stay identical") {
  auto model = two_question_model();
  model.components.push_back(model.components[0]);
  const auto data = three_sequences();
  const auto step = em_step(data, model, EmConfig{.k = 2});
  CHECK(step.model.components[0].transition == step.model.components[1].transition);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK(step.model.components[0].initial[s] == step.model.components[1].initial[s]);
  }
  for (const auto& row : step.model.membership) {
    CHECK(row[0] == doctest::Approx(0.5));
    CHECK(row[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("membership rules") {
  auto model = test::mixture_generator({0.6, 0.1});
  Rng rng = make_rng(3, 0);
  std::vector<Trajectory> data;
  for (int i = 0; i < 4; ++i) data.push_back(test::sampled_trajectory(rng, model, i % 2, 6));
  model.set_membership(std::vector<std::vector<double>>(4, {0.9, 0.1}));
  const auto derived = em_step(data, model, EmConfig{.k = 2});
  const auto likelihood_only =
      em_step(data, model, EmConfig{.k = 2, .membership_rule = MembershipRule::likelihood_only});
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double l0 = sequence_log_likelihood(model, 0, data[i]);
    const double l1 = sequence_log_likelihood(model, 1, data[i]);
    const double p_likelihood = 1.0 / (1.0 + std::exp(l1 - l0));
    const double p_derived = 0.9 / (0.9 + 0.1 * std::exp(l1 - l0));
    CHECK(likelihood_only.model.membership[i][0] == doctest::Approx(p_likelihood).epsilon(1e-12));
    CHECK(derived.model.membership[i][0] == doctest::Approx(p_derived).epsilon(1e-12));
  }
}

TEST_CASE("infinite threshold stops after one iteration") {
  const auto model = two_question_model();
  EmConfig cfg{.k = 1, .convergence_threshold = std::numeric_limits<double>::infinity()};
  cfg.restarts = 1;
  const auto fit = em_fit(dataset_of(model, three_sequences()), cfg);
  CHECK(fit.iterations == 1);
  CHECK(fit.converged);
  CHECK(fit.log_likelihood_trace.size() == 2);
}

TEST_CASE("unknown actions are rejected before fitting") {
  const auto model = two_question_model();
  auto data = three_sequences();
  data[1].steps[2].action = 7;
  CHECK_THROWS_AS(em_fit(dataset_of(model, data), EmConfig{.k = 2}), ContractError);
  CHECK_THROWS_AS(em_fit(dataset_of(model, {}), EmConfig{.k = 2}), ContractError);
  CHECK_THROWS_AS(em_fit(dataset_of(model, three_sequences()), EmConfig{.k = 0}), ContractError);
}

TEST_CASE("baseline equals em_fit with k = 1") {
  const auto gen = test::mixture_generator({0.5, 0.1});
  const auto sampled = sample_dataset(gen, 40, 8, 2);
  EmConfig cfg{.k = 1, .restarts = 2, .seed = 4};
  const auto a = em_fit(sampled.dataset, cfg);
  const auto b = fit_baseline_pomdp(sampled.dataset, EmConfig{.k = 3, .restarts = 2, .seed = 4});
  CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
  CHECK(max_param_diff(a.model, b.model) == 0.0);
  const auto c = fit_baseline_pomdp(sampled.dataset);
  const auto d = em_fit(sampled.dataset, EmConfig{.k = 1});
  CHECK(c.log_likelihood_trace == d.log_likelihood_trace);
}

TEST_CASE("fits are monotone, valid and reproducible") {
  const auto gen = test::mixture_generator({0.6, 0.1});
  const auto sampled = sample_dataset(gen, 60, 10, 7);
  EmConfig cfg{.k = 2, .restarts = 2, .seed = 9};
  const auto fit = em_fit(sampled.dataset, cfg);
  for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i) {
    CHECK(fit.log_likelihood_trace[i] >= fit.log_likelihood_trace[i - 1] - 1e-9);
  }
  CHECK(validate_model(fit.model).empty());
  for (const auto& row : fit.model.membership) {
    CHECK(std::abs(row[0] + row[1] - 1.0) < 1e-12);
  }
  for (std::size_t q = 0; q < fit.model.questions.size(); ++q) {
    CHECK(fit.model.observation.fluency[q] >= fit.model.observation.guess[q] + 1e-3 - 1e-12);
  }
  const auto again = em_fit(sampled.dataset, cfg);
  CHECK(again.log_likelihood_trace == fit.log_likelihood_trace);
  cfg.threads = 3;
  const auto threaded = em_fit(sampled.dataset, cfg);
  CHECK(threaded.log_likelihood_trace == fit.log_likelihood_trace);
}

TEST_CASE("em_step is label-symmetric") {
  Rng rng = make_rng(8, 0);
  auto model = test::random_model(rng, 2, 2);
  std::vector<Trajectory> data;
  for (int i = 0; i < 50; ++i) data.push_back(test::sampled_trajectory(rng, model, i % 2, 5));
  model.set_membership(std::vector<std::vector<double>>(50, {0.3, 0.7}));
  auto swapped = model;
  std::swap(swapped.components[0], swapped.components[1]);
  swapped.set_membership(std::vector<std::vector<double>>(50, {0.7, 0.3}));
  const auto a = em_step(data, model, EmConfig{.k = 2});
  const auto b = em_step(data, swapped, EmConfig{.k = 2});
  CHECK(std::abs(a.log_likelihood - b.log_likelihood) < 1e-9);
  for (std::size_t s = 0; s < model.space.size(); ++s) {
    CHECK(std::abs(a.model.components[0].initial[s] - b.model.components[1].initial[s]) < 1e-12);
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(std::abs(a.model.membership[i][0] - b.model.membership[i][1]) < 1e-12);
  }
}

TEST_CASE("collapsed component is reseeded and recorded") {
  auto model = two_question_model();
  model.components.push_back(model.components[0]);
  model.components[1].transition =
      make_transitions(model.space, [](ConceptIndex, StateIndex) { return 0.8; });
  const auto data = three_sequences();
  model.set_membership(std::vector<std::vector<double>>(data.size(), {1.0, 0.0}));
  EmConfig cfg{.k = 2, .max_iterations = 5};
  const auto fit = em_fit_from(data, model, cfg);
  REQUIRE_FALSE(fit.reinitialized_at.empty());
  CHECK(fit.reinitialized_at.front() == 1);
  CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("full-table observation models are not re-estimated") {
  auto model = test::toy1();
  model.observation.full_table = {{0.2, 0.9}};
  CHECK_THROWS_AS(em_step(std::vector<Trajectory>{{"s", {{0, true}}}}, model, EmConfig{.k = 1}),
                  ContractError);
}

TEST_CASE("apply_constraints: forgetting mass returns to the self-loop") {
  StateSpace space(ConceptGraph({"k"}, {}), StateMode::full);
  QuestionCatalog cat({{"q", 0}}, 1);
  RawParameters raw;
  raw.transition = {{{0.7, 0.3}, {0.1, 0.9}}};
  raw.guess = {0.2};
  raw.fluency = {0.9};
  const auto out = apply_constraints(raw, space, cat);
  const auto& mastered_row = out.transition[0][1];
  REQUIRE(mastered_row.size() == 1);
  CHECK(mastered_row[0].to == 1);
  CHECK(mastered_row[0].probability == doctest::Approx(1.0));
  CHECK(out.transition[0][0][1].probability == doctest::Approx(0.3));
}

TEST_CASE("apply_constraints: same-concept questions are pooled") {
  StateSpace space(ConceptGraph({"k"}, {}), StateMode::full);
  QuestionCatalog cat({{"q1", 0}, {"q2", 0}}, 1);
  RawParameters raw;
  raw.transition = {{{7, 3}, {0, 10}}, {{7, 3}, {0, 10}}};
  raw.guess = {0.2, 0.2};
  raw.fluency = {0.9, 0.9};
  const auto out = apply_constraints(raw, space, cat);
  CHECK(out.transition[0][0][1].probability == doctest::Approx(0.3));

  raw.transition = {{{9, 1}, {0, 1}}, {{5, 5}, {0, 1}}};
  CHECK(apply_constraints(raw, space, cat).transition[0][0][1].probability ==
        doctest::Approx(0.3));
}

TEST_CASE("apply_constraints: off-target flips are removed") {
  StateSpace space(test::flat_graph(2), StateMode::full);  // 00, 01, 10, 11
  QuestionCatalog cat({{"a", 0}}, 2);
  RawParameters raw;
  // From 00 acting on A: mass to 01 (B flips) is forbidden.
  raw.transition = {{{0.5, 0.2, 0.3, 0.0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
  raw.guess = {0.2};
  raw.fluency = {0.9};
  const auto out = apply_constraints(raw, space, cat);
  const auto& row = out.transition[0][0];
  REQUIRE(row.size() == 2);
  CHECK(row[0].probability == doctest::Approx(0.7));
  CHECK(row[1].to == 2);
  CHECK(row[1].probability == doctest::Approx(0.3));
}

TEST_CASE("fluency gap: swap then clamp") {
  const auto [g, f] = enforce_fluency_gap(0.8, 0.3, 1e-3);
  CHECK(g == doctest::Approx(0.3));
  CHECK(f == doctest::Approx(0.8));
  const auto [g2, f2] = enforce_fluency_gap(0.5, 0.5, 1e-3);
  CHECK(f2 - g2 >= 1e-3 - 1e-15);
  const auto [g3, f3] = enforce_fluency_gap(0.2, 0.9, 1e-3);
  CHECK(g3 == 0.2);
  CHECK(f3 == 0.9);
}

TEST_CASE("swap keeps the likelihood on an exchangeable fixture") {
  // D uniform and no learning make the two state labels exchangeable, so exchanging guess and
  // fluency leaves the data likelihood untouched, while shrinking them together does not.
  auto raw = test::toy1();
  raw.components[0].initial = {0.5, 0.5};
  raw.components[0].transition =
      make_transitions(raw.space, [](ConceptIndex, StateIndex) { return 0.0; });
  raw.observation.guess = {0.8};
  raw.observation.fluency = {0.3};
  const std::vector<Trajectory> data = {{"a", {{0, true}, {0, true}, {0, true}}},
                                        {"b", {{0, true}, {0, true}, {0, true}}},
                                        {"c", {{0, false}, {0, false}, {0, false}}},
                                        {"d", {{0, false}, {0, false}, {0, false}}}};
  auto swapped = raw;
  const auto [g, f] = enforce_fluency_gap(0.8, 0.3, 1e-3);
  swapped.observation.guess = {g};
  swapped.observation.fluency = {f};
  auto clamped = raw;
  clamped.observation.guess = {0.55 - 5e-4};
  clamped.observation.fluency = {0.55 + 5e-4};
  const double l_raw = total_log_likelihood(data, raw);
  CHECK(std::abs(total_log_likelihood(data, swapped) - l_raw) < 1e-12);
  CHECK(total_log_likelihood(data, clamped) < l_raw - 1e-3);
}

TEST_CASE("floored distribution") {
  const std::vector<double> counts = {10.0, 0.0, 5.0};
  const auto d = floored_distribution(counts, 0.01);
  CHECK(d[1] == doctest::Approx(0.01));
  CHECK(d[0] + d[1] + d[2] == doctest::Approx(1.0));
  CHECK(d[0] / d[2] == doctest::Approx(2.0));
  const std::vector<double> interior = {3.0, 1.0};
  const auto e = floored_distribution(interior, 1e-6);
  CHECK(e[0] == doctest::Approx(0.75));
}

TEST_CASE("constrained observation update maximizes the pair objective") {
  auto objective = [](double cg, double tg, double cf, double tf, double g, double f) {
    return cg * std::log(g) + (tg - cg) * std::log(1 - g) + cf * std::log(f) +
           (tf - cf) * std::log(1 - f);
  };
  // Unconstrained optimum g = 0.7, f = 0.4 violates the gap.
  const double cg = 7, tg = 10, cf = 4, tf = 10;
  const auto [g, f] = constrained_observation_update(cg, tg, cf, tf, 0.2, 0.9, 1e-6, 1e-3);
  CHECK(f - g == doctest::Approx(1e-3));
  const double best = objective(cg, tg, cf, tf, g, f);
  for (double x = 0.01; x < 0.98; x += 0.001) {
    CHECK(objective(cg, tg, cf, tf, x, x + 1e-3) <= best + 1e-9);
  }
  const auto [g2, f2] = constrained_observation_update(2, 10, 9, 10, 0.2, 0.9, 1e-6, 1e-3);
  CHECK(g2 == doctest::Approx(0.2));
  CHECK(f2 == doctest::Approx(0.9));
  const auto [g3, f3] = constrained_observation_update(0, 0, 9, 10, 0.3, 0.8, 1e-6, 1e-3);
  CHECK(g3 == 0.3);
  CHECK(f3 == doctest::Approx(0.9));
}

}  // TEST_SUITE
