#include "hpomdp/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "hpomdp/errors.hpp"

namespace hpomdp {
namespace {

constexpr double kTieTolerance = 1e-12;

double informativeness(const HpomdpModel& model, ActionIndex a) {
  if (!model.observation.is_full_table()) {
    return model.observation.fluency[a] - model.observation.guess[a];
  }
  const ConceptIndex c = model.questions.concept_of(a);
  double mastered = 0.0, unmastered = 0.0;
  std::size_t nm = 0, nu = 0;
  for (StateIndex s = 0; s < model.space.size(); ++s) {
    if (model.space.mastered(s, c)) {
      mastered += model.p_correct(a, s);
      ++nm;
    } else {
      unmastered += model.p_correct(a, s);
      ++nu;
    }
  }
  return (nm ? mastered / nm : 0.0) - (nu ? unmastered / nu : 0.0);
}

class Expectimax {
 public:
  Expectimax(const HpomdpModel& model, std::vector<ActionIndex> actions, double discount)
      : model_(model), actions_(std::move(actions)), discount_(discount) {}

  double value(const Belief& belief, std::size_t depth) const {
    if (depth == 0) return expected_terminal_reward(model_, belief);
    double best = -std::numeric_limits<double>::infinity();
    for (ActionIndex a : actions_) best = std::max(best, q(belief, a, depth));
    return best;
  }

  double q(const Belief& belief, ActionIndex a, std::size_t depth) const {
    if (discount_ == 0.0) return 0.0;
    const double p_correct = predict_response(model_, belief, a);
    double total = 0.0;
    for (bool correct : {true, false}) {
      const double p = correct ? p_correct : 1.0 - p_correct;
      if (p <= 0.0) continue;
      total += p * value(update_belief(model_, belief, a, correct), depth - 1);
    }
    return discount_ * total;
  }

 private:
  const HpomdpModel& model_;
  std::vector<ActionIndex> actions_;
  double discount_;
};

void check_budget(std::size_t actions, std::size_t depth, const char* what) {
  const double tree = std::pow(2.0 * static_cast<double>(actions), static_cast<double>(depth));
  if (tree > kPlanningTreeBudget) {
    throw CapacityError(std::string(what) + ": expectimax tree of (2*" + std::to_string(actions) +
                        ")^" + std::to_string(depth) +
                        " nodes exceeds the 1e7 budget; use receding mode with a smaller depth");
  }
}

}  // namespace

void validate_config(const PlannerConfig& config) {
  if (config.horizon < 1) throw ContractError("planning horizon must be >= 1");
  if (config.mode == PlannerMode::receding &&
      (config.receding_depth < 1 || config.receding_depth > config.horizon)) {
    throw ContractError("receding depth must satisfy 1 <= depth <= horizon");
  }
  if (!(config.discount >= 0.0 && config.discount <= 1.0)) {
    throw ContractError("discount must lie in [0, 1]");
  }
}

std::vector<ActionIndex> candidate_actions(const HpomdpModel& model, ActionReduction reduction) {
  std::vector<ActionIndex> out;
  if (reduction == ActionReduction::full_catalog) {
    for (ActionIndex a = 0; a < model.questions.size(); ++a) out.push_back(a);
    return out;
  }
  const std::size_t concepts = model.space.concept_count();
  std::vector<std::optional<ActionIndex>> representative(concepts);
  for (ActionIndex a = 0; a < model.questions.size(); ++a) {
    auto& slot = representative[model.questions.concept_of(a)];
    if (!slot || informativeness(model, a) > informativeness(model, *slot)) slot = a;
  }
  for (const auto& r : representative) {
    if (r) out.push_back(*r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t search_depth(const PlannerConfig& config) {
  return config.mode == PlannerMode::exact ? config.horizon
                                           : std::min(config.receding_depth, config.horizon);
}

double action_value(const HpomdpModel& model, const Belief& belief, ActionIndex action,
                    const PlannerConfig& config) {
  validate_config(config);
  if (action >= model.questions.size()) {
    throw ContractError("unknown action index " + std::to_string(action));
  }
  auto actions = candidate_actions(model, config.reduction);
  const std::size_t depth = search_depth(config);
  check_budget(actions.size(), depth, "action_value");
  return Expectimax(model, std::move(actions), config.discount).q(belief, action, depth);
}

std::vector<RankedAction> rank_actions(const HpomdpModel& model, const Belief& belief,
                                       const PlannerConfig& config) {
  validate_config(config);
  auto actions = candidate_actions(model, config.reduction);
  if (actions.empty()) throw ContractError("no candidate actions: the question catalog is empty");
  const std::size_t depth = search_depth(config);
  check_budget(actions.size(), depth, "best_action");
  const Expectimax search(model, actions, config.discount);
  std::vector<RankedAction> ranked;
  ranked.reserve(actions.size());
  for (ActionIndex a : actions) ranked.push_back({a, search.q(belief, a, depth)});
  return ranked;
}

ActionIndex best_action(const HpomdpModel& model, const Belief& belief,
                        const PlannerConfig& config) {
  const auto ranked = rank_actions(model, belief, config);
  double top = ranked.front().value;
  for (const auto& r : ranked) top = std::max(top, r.value);
  const double slack = kTieTolerance * std::max(1.0, std::abs(top));
  for (const auto& r : ranked) {
    if (r.value >= top - slack) return r.action;
  }
  return ranked.front().action;
}

double exact_value(const HpomdpModel& model, const Belief& belief, std::size_t horizon,
                   ActionReduction reduction, double discount) {
  if (horizon < 1) throw ContractError("exact_value needs horizon >= 1");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ContractError("discount must lie in [0, 1]");
  auto actions = candidate_actions(model, reduction);
  if (actions.empty()) throw ContractError("no candidate actions: the question catalog is empty");
  check_budget(actions.size(), horizon, "exact_value");
  return Expectimax(model, std::move(actions), discount).value(belief, horizon);
}

}  // namespace hpomdp
