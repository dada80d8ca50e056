#include "hpomdp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <boost/math/distributions/students_t.hpp>

#include "hpomdp/errors.hpp"
#include "parallel.hpp"

namespace hpomdp {
namespace {

std::size_t sample_categorical(std::span<const double> weights, double u) {
  double cumulative = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cumulative += weights[i];
    if (u < cumulative) return i;
  }
  // Rounding left u above the final cumulative sum: take the last non-zero entry.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

StateIndex sample_transition(const TransitionRow& row, StateIndex from, double u) {
  double cumulative = 0.0;
  for (const auto& e : row) {
    cumulative += e.probability;
    if (u < cumulative) return e.to;
  }
  for (auto it = row.rbegin(); it != row.rend(); ++it) {
    if (it->probability > 0.0) return it->to;
  }
  return from;
}

class PlannerSession final : public PolicySession {
 public:
  PlannerSession(std::shared_ptr<const HpomdpModel> model, PlannerConfig config)
      : model_(std::move(model)), config_(config), belief_(init_belief(*model_)) {}

  ActionIndex next_action(std::size_t steps_remaining) override {
    PlannerConfig step = config_;
    step.horizon = std::max<std::size_t>(1, std::min(config_.horizon, steps_remaining));
    step.receding_depth = std::min(config_.receding_depth, step.horizon);
    return best_action(*model_, belief_, step);
  }

  void observe(ActionIndex action, bool correct) override {
    belief_ = update_belief(*model_, belief_, action, correct);
  }

 private:
  std::shared_ptr<const HpomdpModel> model_;
  PlannerConfig config_;
  Belief belief_;
};

class RandomSession final : public PolicySession {
 public:
  RandomSession(std::size_t actions, std::uint64_t seed) : actions_(actions), rng_(seed) {}
  ActionIndex next_action(std::size_t) override {
    return std::min(actions_ - 1, static_cast<std::size_t>(uniform01(rng_) * actions_));
  }
  void observe(ActionIndex, bool) override {}

 private:
  std::size_t actions_;
  Rng rng_;
};

class FixedSession final : public PolicySession {
 public:
  explicit FixedSession(ActionIndex action) : action_(action) {}
  ActionIndex next_action(std::size_t) override { return action_; }
  void observe(ActionIndex, bool) override {}

 private:
  ActionIndex action_;
};

}  // namespace

PlannerPolicy::PlannerPolicy(std::shared_ptr<const HpomdpModel> model, PlannerConfig config,
                             std::string label)
    : model_(std::move(model)), config_(config), label_(std::move(label)) {
  if (!model_) throw ContractError("planner policy needs a model");
  validate_config(config_);
}

std::unique_ptr<PolicySession> PlannerPolicy::start(std::uint64_t) const {
  return std::make_unique<PlannerSession>(model_, config_);
}

RandomPolicy::RandomPolicy(QuestionCatalog catalog, std::string label)
    : catalog_(std::move(catalog)), label_(std::move(label)) {
  if (catalog_.empty()) throw ContractError("random policy needs a non-empty catalog");
}

std::unique_ptr<PolicySession> RandomPolicy::start(std::uint64_t stream_seed) const {
  return std::make_unique<RandomSession>(catalog_.size(), stream_seed);
}

FixedActionPolicy::FixedActionPolicy(QuestionCatalog catalog, ActionIndex action,
                                     std::string label)
    : catalog_(std::move(catalog)), action_(action), label_(std::move(label)) {
  if (action_ >= catalog_.size()) throw ContractError("fixed policy action outside its catalog");
}

std::unique_ptr<PolicySession> FixedActionPolicy::start(std::uint64_t) const {
  return std::make_unique<FixedSession>(action_);
}

CohortResult simulate_cohort(const HpomdpModel& truth, const Policy& policy, std::size_t horizon,
                             std::size_t students, std::uint64_t seed, std::size_t threads) {
  if (horizon < 1) throw ContractError("simulation horizon must be >= 1");
  if (students < 1) throw ContractError("simulation needs at least one student");
  if (truth.pattern_count() == 0) throw ContractError("truth model has no pattern");

  const auto& policy_catalog = policy.catalog();
  std::vector<std::optional<ActionIndex>> to_truth(policy_catalog.size());
  for (ActionIndex a = 0; a < policy_catalog.size(); ++a) {
    to_truth[a] = truth.questions.find(policy_catalog[a].id);
  }
  const auto pattern_prior = truth.initial_pattern_belief();

  std::vector<StateIndex> finals(students, 0);
  detail::parallel_for(students, threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, 2 * static_cast<std::uint64_t>(i));
    auto session = policy.start(derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1));
    const std::size_t pattern = sample_categorical(pattern_prior, uniform01(rng));
    StateIndex state = sample_categorical(truth.components[pattern].initial, uniform01(rng));
    for (std::size_t step = 0; step < horizon; ++step) {
      const ActionIndex proposed = session->next_action(horizon - step);
      if (proposed >= to_truth.size() || !to_truth[proposed]) {
        throw ContractError("policy '" + policy.label() + "' proposed question " +
                            (proposed < policy_catalog.size() ? "'" + policy_catalog[proposed].id + "'"
                                                              : std::to_string(proposed)) +
                            " unknown to the truth model");
      }
      const ActionIndex action = *to_truth[proposed];
      const bool correct = uniform01(rng) < truth.p_correct(action, state);
      state = sample_transition(truth.transition_row(pattern, action, state), state, uniform01(rng));
      session->observe(proposed, correct);
    }
    finals[i] = state;
  });

  CohortResult result;
  result.states = truth.space.states();
  result.final_state_distribution.assign(truth.space.size(), 0.0);
  result.mastered_counts.reserve(students);
  std::vector<std::size_t> counts(truth.space.size(), 0);
  for (StateIndex s : finals) {
    ++counts[s];
    result.mastered_counts.push_back(truth.space.state(s).mastered_count());
  }
  for (StateIndex s = 0; s < counts.size(); ++s) {
    result.final_state_distribution[s] =
        static_cast<double>(counts[s]) / static_cast<double>(students);
  }
  result.episodes = students;
  result.policy_label = policy.label();
  return result;
}

StrategyMetrics strategy_metrics(const CohortResult& result, const ConceptGraph& graph) {
  if (result.states.size() != result.final_state_distribution.size()) {
    throw ContractError("cohort distribution does not align with its state list");
  }
  StrategyMetrics m;
  m.proficiency.assign(graph.size(), 0.0);
  for (std::size_t s = 0; s < result.states.size(); ++s) {
    const auto& state = result.states[s];
    if (state.concept_count() != graph.size()) {
      throw ContractError("cohort state " + state.to_string() + " does not match the graph");
    }
    const double p = result.final_state_distribution[s];
    for (ConceptIndex c = 0; c < graph.size(); ++c) {
      if (state.mastered(c)) m.proficiency[c] += p;
    }
    m.pro_sum += state.mastered_count() * p;
  }
  for (std::size_t s = 0; s < result.states.size(); ++s) {
    const double d = m.pro_sum - result.states[s].mastered_count();
    m.variance += d * d * result.final_state_distribution[s];
  }
  return m;
}

TTestResult two_sample_t(std::span<const int> a, std::span<const int> b) {
  if (a.empty() || b.empty()) throw ContractError("t-test needs two non-empty samples");
  if (a.size() + b.size() < 3) throw ContractError("t-test needs at least three observations");
  auto mean = [](std::span<const int> x) {
    double s = 0.0;
    for (int v : x) s += v;
    return s / static_cast<double>(x.size());
  };
  auto squares = [](std::span<const int> x, double m) {
    double s = 0.0;
    for (int v : x) s += (v - m) * (v - m);
    return s;
  };
  const double ma = mean(a);
  const double mb = mean(b);
  TTestResult r;
  r.degrees_of_freedom = a.size() + b.size() - 2;
  const double pooled = (squares(a, ma) + squares(b, mb)) / static_cast<double>(r.degrees_of_freedom);
  const double diff = ma - mb;
  if (pooled == 0.0) {
    if (diff == 0.0) return r;
    r.infinite = true;
    r.t = diff > 0.0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.t = diff / std::sqrt(pooled * (1.0 / static_cast<double>(a.size()) +
                                   1.0 / static_cast<double>(b.size())));
  const boost::math::students_t dist(static_cast<double>(r.degrees_of_freedom));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

SampledDataset sample_dataset(const HpomdpModel& generator, std::size_t sequences,
                              std::size_t length, std::uint64_t seed) {
  if (length < 1) throw ContractError("sampled trajectories need length >= 1");
  if (generator.questions.empty()) throw ContractError("generator has an empty catalog");
  SampledDataset out{Dataset{generator.graph, generator.questions, {}}, {}};
  out.dataset.trajectories.reserve(sequences);
  const auto prior = generator.initial_pattern_belief();
  const std::size_t width = std::to_string(sequences).size();
  for (std::size_t i = 0; i < sequences; ++i) {
    Rng rng = make_rng(seed, i);
    const std::size_t pattern = sample_categorical(prior, uniform01(rng));
    StateIndex state = sample_categorical(generator.components[pattern].initial, uniform01(rng));
    std::string id = std::to_string(i);
    Trajectory traj{"s" + std::string(width - id.size(), '0') + id, {}};
    for (std::size_t t = 0; t < length; ++t) {
      const ActionIndex action = std::min(
          generator.questions.size() - 1,
          static_cast<std::size_t>(uniform01(rng) * generator.questions.size()));
      const bool correct = uniform01(rng) < generator.p_correct(action, state);
      traj.steps.push_back({action, correct});
      state = sample_transition(generator.transition_row(pattern, action, state), state,
                                uniform01(rng));
    }
    out.dataset.trajectories.push_back(std::move(traj));
    out.patterns.push_back(pattern);
  }
  return out;
}

}  // namespace hpomdp
