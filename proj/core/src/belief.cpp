#include "hpomdp/belief.hpp"

#include <algorithm>
#include <numeric>

#include "hpomdp/errors.hpp"

namespace hpomdp {

Belief init_belief(const HpomdpModel& model) {
  Belief b;
  b.pattern = model.initial_pattern_belief();
  b.state.reserve(model.pattern_count());
  for (const auto& comp : model.components) b.state.push_back(comp.initial);
  return b;
}

Belief update_belief(const HpomdpModel& model, const Belief& belief, ActionIndex action,
                     bool correct) {
  if (action >= model.questions.size()) {
    throw ContractError("unknown action index " + std::to_string(action));
  }
  const std::size_t k = model.pattern_count();
  const std::size_t n = model.space.size();
  Belief next;
  next.pattern.assign(k, 0.0);
  next.state.assign(k, std::vector<double>(n, 0.0));

  std::vector<double> weighted(n);
  double evidence_total = 0.0;
  for (std::size_t m = 0; m < k; ++m) {
    const auto& bs = belief.state[m];
    double evidence = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
      weighted[s] = bs[s] * model.p_observation(action, s, correct);
      evidence += weighted[s];
    }
    next.pattern[m] = belief.pattern[m] * evidence;
    evidence_total += next.pattern[m];

    // With zero evidence the pattern is ruled out; its state belief carries the prior forward.
    const auto& source = evidence > 0.0 ? weighted : bs;
    auto& out = next.state[m];
    for (StateIndex s = 0; s < n; ++s) {
      if (source[s] == 0.0) continue;
      for (const auto& e : model.transition_row(m, action, s)) out[e.to] += source[s] * e.probability;
    }
    const double norm = std::accumulate(out.begin(), out.end(), 0.0);
    if (norm > 0.0) {
      for (auto& v : out) v /= norm;
    }
  }
  if (!(evidence_total > 0.0)) {
    throw ImpossibleEvidenceError("observation '" + std::string(correct ? "correct" : "incorrect") +
                                  "' on question '" + model.questions[action].id +
                                  "' has probability zero under every pattern");
  }
  for (auto& v : next.pattern) v /= evidence_total;
  return next;
}

double predict_response(const HpomdpModel& model, const Belief& belief, ActionIndex action) {
  if (action >= model.questions.size()) {
    throw ContractError("unknown action index " + std::to_string(action));
  }
  double p = 0.0;
  for (std::size_t m = 0; m < belief.pattern.size(); ++m) {
    if (belief.pattern[m] == 0.0) continue;
    double inner = 0.0;
    for (StateIndex s = 0; s < belief.state[m].size(); ++s) {
      inner += belief.state[m][s] * model.p_correct(action, s);
    }
    p += belief.pattern[m] * inner;
  }
  return std::clamp(p, 0.0, 1.0);
}

double expected_terminal_reward(const HpomdpModel& model, const Belief& belief) {
  double value = 0.0;
  for (std::size_t m = 0; m < belief.pattern.size(); ++m) {
    if (belief.pattern[m] == 0.0) continue;
    double inner = 0.0;
    for (StateIndex s = 0; s < belief.state[m].size(); ++s) {
      inner += belief.state[m][s] * model.reward.terminal[s];
    }
    value += belief.pattern[m] * inner;
  }
  return value;
}

std::vector<double> state_marginal(const Belief& belief) {
  std::vector<double> out(belief.state.empty() ? 0 : belief.state.front().size(), 0.0);
  for (std::size_t m = 0; m < belief.pattern.size(); ++m) {
    for (std::size_t s = 0; s < out.size(); ++s) out[s] += belief.pattern[m] * belief.state[m][s];
  }
  return out;
}

}  // namespace hpomdp
