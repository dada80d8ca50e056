#pragma once

#include <cstddef>
#include <vector>

#include "hpomdp/belief.hpp"
#include "hpomdp/domain.hpp"

namespace hpomdp {

enum class PlannerMode { exact, receding };

// per_concept keeps one representative question per concept: the one with the largest
// fluency - guess gap (lowest index on ties). Transitions are concept-indexed, so the
// representative loses nothing on the transition side.
enum class ActionReduction { per_concept, full_catalog };

struct PlannerConfig {
  std::size_t horizon = 10;  // remaining questions
  double discount = 1.0;
  PlannerMode mode = PlannerMode::receding;
  std::size_t receding_depth = 3;
  ActionReduction reduction = ActionReduction::per_concept;
};

// Largest expectimax tree, (2 |A|)^depth, the planner agrees to expand.
inline constexpr double kPlanningTreeBudget = 1e7;

// Throws ContractError unless horizon >= 1, 1 <= depth <= horizon (receding) and
// discount in [0, 1].
void validate_config(const PlannerConfig& config);

std::vector<ActionIndex> candidate_actions(const HpomdpModel& model, ActionReduction reduction);

// Search depth the config implies: the horizon in exact mode, min(depth, horizon) otherwise.
std::size_t search_depth(const PlannerConfig& config);

// Q(b, a) = gamma Σ_o P(o | b, a) V(b'_{a,o}), expanded to search_depth(config); leaves are
// valued by the expected terminal reward under the leaf belief.
double action_value(const HpomdpModel& model, const Belief& belief, ActionIndex action,
                    const PlannerConfig& config);

struct RankedAction {
  ActionIndex action = 0;
  double value = 0.0;
};

// Action values of every candidate, in candidate (catalog) order.
std::vector<RankedAction> rank_actions(const HpomdpModel& model, const Belief& belief,
                                       const PlannerConfig& config);

// Argmax of action_value over the candidates; ties go to the lowest catalog index.
// Throws ContractError when the catalog is empty.
ActionIndex best_action(const HpomdpModel& model, const Belief& belief,
                        const PlannerConfig& config);

// Full expectimax V_H(b). Throws CapacityError when (2 |A_reduced|)^H exceeds the budget.
double exact_value(const HpomdpModel& model, const Belief& belief, std::size_t horizon,
                   ActionReduction reduction = ActionReduction::per_concept,
                   double discount = 1.0);

}  // namespace hpomdp
