#include "fixtures.hpp"

#include <algorithm>

namespace hpomdp::test {

HpomdpModel toy1() {
  ConceptGraph graph({"k"}, {});
  QuestionCatalog catalog({{"q", 0}}, 1);
  SimpleModelSpec spec;
  spec.initial = {0.6, 0.4};
  spec.learn = {0.3};
  spec.guess = 0.2;
  spec.fluency = 0.9;
  return make_simple_model(graph, StateMode::full, catalog, spec);
}

ConceptGraph chain_graph(std::size_t concepts) {
  std::vector<std::string> names;
  std::vector<ConceptGraph::Edge> edges;
  for (std::size_t c = 0; c < concepts; ++c) {
    names.push_back(std::string(1, static_cast<char>('A' + c)));
    if (c > 0) edges.emplace_back(names[c - 1], names[c]);
  }
  return ConceptGraph(names, edges);
}

ConceptGraph flat_graph(std::size_t concepts) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < concepts; ++c) names.push_back(std::string(1, static_cast<char>('A' + c)));
  return ConceptGraph(names, {});
}

QuestionCatalog questions_per_concept(const ConceptGraph& graph, std::size_t per_concept) {
  std::vector<Question> qs;
  for (ConceptIndex c = 0; c < graph.size(); ++c) {
    for (std::size_t n = 1; n <= per_concept; ++n) qs.push_back({graph.name(c) + std::to_string(n), c});
  }
  return QuestionCatalog(qs, graph.size());
}

HpomdpModel mixture_generator(const std::vector<double>& learn, std::size_t concepts) {
  const auto graph = flat_graph(concepts);
  SimpleModelSpec spec;
  spec.learn = learn;
  spec.guess = 0.02;
  spec.fluency = 0.98;
  return make_simple_model(graph, StateMode::filtered, questions_per_concept(graph, 2), spec);
}

namespace {

std::vector<double> random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) sum += (x = 0.05 + uniform01(rng));
  for (auto& x : v) x /= sum;
  return v;
}

}  // namespace

HpomdpModel random_model(Rng& rng, std::size_t concepts, std::size_t patterns,
                         std::size_t max_states) {
  for (;;) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < concepts; ++c) names.push_back("c" + std::to_string(c));
    std::vector<ConceptGraph::Edge> edges;
    for (std::size_t a = 0; a < concepts; ++a) {
      for (std::size_t b = a + 1; b < concepts; ++b) {
        if (uniform01(rng) < 0.4) edges.emplace_back(names[a], names[b]);
      }
    }
    ConceptGraph graph(names, edges);
    const StateMode mode = uniform01(rng) < 0.5 ? StateMode::full : StateMode::filtered;
    StateSpace space(graph, mode);
    if (space.size() > max_states) continue;

    std::vector<Question> qs;
    for (ConceptIndex c = 0; c < concepts; ++c) {
      const std::size_t n = 1 + static_cast<std::size_t>(uniform01(rng) * 3.0);
      for (std::size_t i = 0; i < n; ++i) qs.push_back({names[c] + "_q" + std::to_string(i), c});
    }
    QuestionCatalog catalog(qs, concepts);
    ObservationFunction obs;
    for (std::size_t a = 0; a < catalog.size(); ++a) {
      const double g = 0.05 + 0.4 * uniform01(rng);
      obs.guess.push_back(g);
      obs.fluency.push_back(g + 0.05 + (0.95 - g - 0.05) * uniform01(rng));
    }
    std::vector<PatternComponent> components;
    for (std::size_t j = 0; j < patterns; ++j) {
      PatternComponent comp;
      comp.initial = random_distribution(rng, space.size());
      comp.transition = make_transitions(space, [&](ConceptIndex, StateIndex) {
        return 0.02 + 0.9 * uniform01(rng);
      });
      components.push_back(std::move(comp));
    }
    auto reward = RewardSpec::mastered_count(space);
    auto prior = random_distribution(rng, patterns);
    return HpomdpModel{std::move(graph), std::move(space), std::move(catalog),
                       std::move(components), std::move(obs), std::move(reward),
                       1.0, {}, std::move(prior), std::nullopt};
  }
}

Trajectory random_trajectory(Rng& rng, const HpomdpModel& model, std::size_t length,
                             const std::string& student) {
  Trajectory t{student, {}};
  for (std::size_t i = 0; i < length; ++i) {
    const auto a = std::min(model.questions.size() - 1,
                            static_cast<std::size_t>(uniform01(rng) * model.questions.size()));
    t.steps.push_back({a, uniform01(rng) < 0.5});
  }
  return t;
}

Trajectory sampled_trajectory(Rng& rng, const HpomdpModel& model, std::size_t j,
                              std::size_t length, const std::string& student) {
  auto pick = [&rng](const std::vector<double>& p) {
    double u = uniform01(rng), acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return p.size() - 1;
  };
  Trajectory t{student, {}};
  StateIndex s = pick(model.components[j].initial);
  for (std::size_t i = 0; i < length; ++i) {
    const auto a = std::min(model.questions.size() - 1,
                            static_cast<std::size_t>(uniform01(rng) * model.questions.size()));
    const bool correct = uniform01(rng) < model.p_correct(a, s);
    t.steps.push_back({a, correct});
    std::vector<double> row(model.space.size(), 0.0);
    for (const auto& e : model.transition_row(j, a, s)) row[e.to] += e.probability;
    s = pick(row);
  }
  return t;
}

}  // namespace hpomdp::test
