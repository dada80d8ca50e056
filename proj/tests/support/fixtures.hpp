#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hpomdp/domain.hpp"
#include "hpomdp/random.hpp"

namespace hpomdp::test {

// One concept "k", one question "q"; D(unmastered) = 0.6, guess 0.2, fluency 0.9, learn 0.3.
HpomdpModel toy1();

ConceptGraph chain_graph(std::size_t concepts);
ConceptGraph flat_graph(std::size_t concepts);

// `per_concept` questions per concept, named <concept><n>.
QuestionCatalog questions_per_concept(const ConceptGraph& graph, std::size_t per_concept);

// Synthetic student population: independent concepts, two questions each, near-deterministic
// answers (guess 0.02, fluency 0.98), everyone starts with nothing mastered.
HpomdpModel mixture_generator(const std::vector<double>& learn, std::size_t concepts = 2);

// Random small model. Graph on `concepts` concepts with random forward edges, random mode,
// 1-3 questions per concept, random D, learn, guess < fluency, and `patterns` components
// with a random membership prior.
HpomdpModel random_model(Rng& rng, std::size_t concepts, std::size_t patterns,
                         std::size_t max_states = 1u << 20);

Trajectory random_trajectory(Rng& rng, const HpomdpModel& model, std::size_t length,
                             const std::string& student = "s");

// Random trajectory sampled from pattern `j` of the model, so it is always feasible.
Trajectory sampled_trajectory(Rng& rng, const HpomdpModel& model, std::size_t j,
                              std::size_t length, const std::string& student = "s");

}  // namespace hpomdp::test
