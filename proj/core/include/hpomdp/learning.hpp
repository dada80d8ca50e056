#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpomdp/domain.hpp"
#include "hpomdp/random.hpp"

namespace hpomdp {

// How membership degrees are re-estimated in the E-step.
//   derived: w_ij ∝ w̄_ij P(O_i | m_j)   (Lagrange solution of the membership term)
//   likelihood_only: w_ij ∝ P(O_i | m_j)  (omits the prior membership)
enum class MembershipRule { derived, likelihood_only };

// How D_j is re-estimated.
//   responsibility_weighted: Σ_i w_ij gamma_ij[0] / Σ_i w_ij
//   unweighted: (1/l) Σ_i gamma_ij[0], regardless of membership
enum class InitialDistributionRule { responsibility_weighted, unweighted };

struct EmConfig {
  std::size_t k = 3;
  std::size_t max_iterations = 200;
  // Stop once the largest absolute change of any D, T, guess or fluency entry falls below this.
  double convergence_threshold = 1e-4;
  std::size_t restarts = 5;
  std::uint64_t seed = 0;
  MembershipRule membership_rule = MembershipRule::derived;
  InitialDistributionRule initial_rule = InitialDistributionRule::responsibility_weighted;
  double floor_probability = 1e-6;
  // Minimum fluency - guess gap maintained by the M-step.
  double fluency_gap = 1e-3;
  StateMode state_mode = StateMode::filtered;
  std::size_t threads = 1;
};

// Throws ContractError on k == 0, non-positive thresholds, or a floor outside (0, 0.5).
void validate_config(const EmConfig& config);

struct EmStepResult {
  HpomdpModel model;                  // updated parameters and membership
  double log_likelihood = 0.0;        // objective at the input parameters
  double max_parameter_change = 0.0;  // over D, T, guess and fluency
  std::vector<std::size_t> degenerate_components;
};

// Objective Σ_i log Σ_j w_ij P(O_i | m_j, A_i). Uses model.membership when it has one row
// per trajectory, otherwise the model's initial pattern belief for every row.
double total_log_likelihood(std::span<const Trajectory> data, const HpomdpModel& model);

// One E+M sweep over `data`. The M-step is the exact maximizer of the expected
// complete-data log-likelihood over the feasible set of apply_constraints plus the probability
// floor, so the objective never decreases under the default rules.
EmStepResult em_step(std::span<const Trajectory> data, const HpomdpModel& current,
                     const EmConfig& config);

struct FitResult {
  HpomdpModel model;
  std::vector<double> log_likelihood_trace;  // one entry per iteration plus the final model
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t restart_index = 0;
  std::vector<std::size_t> reinitialized_at;  // iterations after which a component was reseeded
  std::vector<std::string> warnings;

  double final_log_likelihood() const { return log_likelihood_trace.back(); }
};

// Iterates em_step from `initial` until convergence or max_iterations.
FitResult em_fit_from(std::span<const Trajectory> data, HpomdpModel initial,
                      const EmConfig& config);

// Runs `restarts` independent initializations and returns the one with the highest final
// objective. For k > 1 every restart jitters a pooled k = 1 fit.
FitResult em_fit(const Dataset& dataset, const EmConfig& config);

// Single-POMDP Baum-Welch fit: em_fit with k forced to 1.
FitResult fit_baseline_pomdp(const Dataset& dataset, EmConfig config = {});

// Random single-pattern starting point: jittered uniform D, learn probabilities in
// [0.05, 0.5], guess in [0.05, 0.35], fluency in [0.65, 0.95].
HpomdpModel random_initial_model(const Dataset& dataset, const EmConfig& config, Rng& rng);

// k-pattern starting point around a pooled fit: D_j rescaled by random factors, learn
// probabilities shifted in logit space by a per-component offset plus per-row noise, shared O
// copied, memberships uniform + noise.
HpomdpModel jittered_mixture(const HpomdpModel& pooled, std::size_t k, std::size_t sequences,
                             const EmConfig& config, Rng& rng);

// Unconstrained parameter tables, e.g. from a naive per-question estimate.
struct RawParameters {
  // Expected transition counts (or probabilities) per question, [question][from][to].
  std::vector<std::vector<std::vector<double>>> transition;
  std::vector<double> guess;    // per question
  std::vector<double> fluency;  // per question
};

struct ConstrainedParameters {
  std::vector<std::vector<TransitionRow>> transition;  // [concept][state]
  std::vector<double> guess;
  std::vector<double> fluency;
};

// Projects raw tables onto the feasible set:
//   single flip: mass on anything but the acted concept's feasible 0->1 flip moves to the
//                self-loop; rows are renormalized.
//   shared concept: rows of questions sharing a concept are pooled before normalizing.
//   mastery helps: fluency >= guess + epsilon, by swapping then clamping.
// Rows without any mass become pure self-loops.
ConstrainedParameters apply_constraints(const RawParameters& raw, const StateSpace& space,
                                        const QuestionCatalog& catalog, double epsilon = 1e-3);

// Swap-then-clamp projection of one (guess, fluency) pair.
std::pair<double, double> enforce_fluency_gap(double guess, double fluency, double epsilon);

// KKT solution of max Σ n_s log D_s subject to D_s >= floor and Σ D_s = 1.
std::vector<double> floored_distribution(std::span<const double> counts, double floor);

// Maximizer of the Bernoulli pair objective
//   cg log g + (tg-cg) log(1-g) + cf log f + (tf-cf) log(1-f)
// over floor <= g, f <= 1-floor and f >= g + gap. Zero totals leave the previous value.
std::pair<double, double> constrained_observation_update(double correct_unmastered,
                                                         double total_unmastered,
                                                         double correct_mastered,
                                                         double total_mastered,
                                                         double previous_guess,
                                                         double previous_fluency, double floor,
                                                         double gap);

}  // namespace hpomdp
