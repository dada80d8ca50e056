#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "hpomdp/belief.hpp"
#include "hpomdp/inference.hpp"
#include "hpomdp/learning.hpp"
#include "hpomdp/planning.hpp"
#include "hpomdp/simulation.hpp"

using namespace hpomdp;

namespace {

// Flat graph with `concepts` concepts and two questions each.
HpomdpModel flat_model(std::size_t concepts, std::size_t patterns) {
  std::vector<std::string> names;
  std::vector<Question> questions;
  for (std::size_t c = 0; c < concepts; ++c) {
    names.push_back("c" + std::to_string(c));
    questions.push_back({names.back() + "a", c});
    questions.push_back({names.back() + "b", c});
  }
  ConceptGraph graph(names, {});
  SimpleModelSpec spec;
  for (std::size_t j = 0; j < patterns; ++j) spec.learn.push_back(0.1 + 0.6 * j / patterns);
  return make_simple_model(graph, StateMode::full, QuestionCatalog(questions, concepts), spec);
}

void BM_ForwardBackward(benchmark::State& state) {
  const auto model = flat_model(static_cast<std::size_t>(state.range(0)), 1);
  const auto data = sample_dataset(model, 1, static_cast<std::size_t>(state.range(1)), 1);
  const auto& traj = data.dataset.trajectories[0];
  for (auto _ : state) benchmark::DoNotOptimize(posterior_marginals(model, 0, traj));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_ForwardBackward)->Args({2, 20})->Args({4, 20})->Args({6, 20})->Args({4, 200});

void BM_EmStep(benchmark::State& state) {
  const auto model = flat_model(3, static_cast<std::size_t>(state.range(0)));
  const auto data = sample_dataset(model, static_cast<std::size_t>(state.range(1)), 20, 2);
  const EmConfig config{.k = model.pattern_count(), .state_mode = StateMode::full};
  for (auto _ : state) {
    benchmark::DoNotOptimize(em_step(data.dataset.trajectories, model, config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_EmStep)->Args({1, 500})->Args({3, 500})->Unit(benchmark::kMillisecond);

void BM_BestAction(benchmark::State& state) {
  const auto model = flat_model(static_cast<std::size_t>(state.range(0)), 3);
  const auto belief = init_belief(model);
  const auto depth = static_cast<std::size_t>(state.range(1));
  const PlannerConfig config{.horizon = 10, .receding_depth = depth};
  for (auto _ : state) benchmark::DoNotOptimize(best_action(model, belief, config));
}
BENCHMARK(BM_BestAction)->Args({3, 2})->Args({3, 3})->Args({5, 3})->Unit(benchmark::kMicrosecond);

void BM_BeliefUpdate(benchmark::State& state) {
  const auto model = flat_model(static_cast<std::size_t>(state.range(0)), 3);
  const auto belief = init_belief(model);
  for (auto _ : state) benchmark::DoNotOptimize(update_belief(model, belief, 0, true));
}
BENCHMARK(BM_BeliefUpdate)->Arg(3)->Arg(6)->Arg(10);

}  // namespace
BENCHMARK_MAIN();
