#pragma once

#include <vector>

#include "hpomdp/domain.hpp"

namespace hpomdp {

// Hierarchical belief: pattern belief bm over k patterns, and per pattern a state
// belief bs(. | m) over S.
struct Belief {
  std::vector<double> pattern;             // bm
  std::vector<std::vector<double>> state;  // bs, [pattern][state]
};

// bm_1 = column means of the fitted membership (uniform without one); bs_1(. | m) = D_m.
Belief init_belief(const HpomdpModel& model);

// One observation step. bm is reweighted by the one-step evidence of each pattern under the
// prior bs; bs is observation-reweighted, pushed through T_m and renormalized per pattern.
// Throws ImpossibleEvidenceError if the observation has probability zero under every pattern.
Belief update_belief(const HpomdpModel& model, const Belief& belief, ActionIndex action,
                     bool correct);

// P(correct | belief, action) = Σ_m bm(m) Σ_s bs(s | m) O(correct | s, action).
double predict_response(const HpomdpModel& model, const Belief& belief, ActionIndex action);

// Σ_m bm(m) Σ_s bs(s | m) R(s).
double expected_terminal_reward(const HpomdpModel& model, const Belief& belief);

// Σ_m bm(m) bs(. | m): state marginal with the pattern integrated out.
std::vector<double> state_marginal(const Belief& belief);

}  // namespace hpomdp
