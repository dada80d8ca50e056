#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hpomdp/belief.hpp"
#include "hpomdp/domain.hpp"
#include "hpomdp/planning.hpp"
#include "hpomdp/random.hpp"

namespace hpomdp {

// One tutoring episode from the policy's side: it proposes questions and sees the answers.
class PolicySession {
 public:
  virtual ~PolicySession() = default;
  // Catalog index (in the policy's own catalog) of the next question.
  virtual ActionIndex next_action(std::size_t steps_remaining) = 0;
  virtual void observe(ActionIndex action, bool correct) = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string label() const = 0;
  virtual const QuestionCatalog& catalog() const = 0;
  // `stream_seed` seeds any randomness the session uses.
  virtual std::unique_ptr<PolicySession> start(std::uint64_t stream_seed) const = 0;
};

// Replans every step over its own model's hierarchical belief; the planning horizon is the
// number of remaining steps, capped by config.horizon.
class PlannerPolicy final : public Policy {
 public:
  PlannerPolicy(std::shared_ptr<const HpomdpModel> model, PlannerConfig config,
                std::string label = "planner");
  std::string label() const override { return label_; }
  const QuestionCatalog& catalog() const override { return model_->questions; }
  std::unique_ptr<PolicySession> start(std::uint64_t stream_seed) const override;

 private:
  std::shared_ptr<const HpomdpModel> model_;
  PlannerConfig config_;
  std::string label_;
};

// Uniformly random question from the catalog.
class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(QuestionCatalog catalog, std::string label = "random");
  std::string label() const override { return label_; }
  const QuestionCatalog& catalog() const override { return catalog_; }
  std::unique_ptr<PolicySession> start(std::uint64_t stream_seed) const override;

 private:
  QuestionCatalog catalog_;
  std::string label_;
};

// Always asks the same question.
class FixedActionPolicy final : public Policy {
 public:
  FixedActionPolicy(QuestionCatalog catalog, ActionIndex action, std::string label = "fixed");
  std::string label() const override { return label_; }
  const QuestionCatalog& catalog() const override { return catalog_; }
  std::unique_ptr<PolicySession> start(std::uint64_t stream_seed) const override;

 private:
  QuestionCatalog catalog_;
  ActionIndex action_;
  std::string label_;
};

struct CohortResult {
  std::vector<KnowledgeState> states;              // truth model's state space
  std::vector<double> final_state_distribution;    // P(s_T), aligned with states
  std::vector<int> mastered_counts;                // per student
  std::size_t episodes = 0;                        // SN
  std::string policy_label;
};

// Samples `students` ground-truth students from `truth` (pattern from bm_1, initial state
// from D_m) and runs `horizon` tutoring steps each. Student i uses streams derived from
// (seed, i), so results do not depend on `threads`. Throws ContractError when the policy
// proposes a question id unknown to the truth model.
CohortResult simulate_cohort(const HpomdpModel& truth, const Policy& policy, std::size_t horizon,
                             std::size_t students, std::uint64_t seed, std::size_t threads = 1);

struct StrategyMetrics {
  std::vector<double> proficiency;  // pro(kc), per concept
  double pro_sum = 0.0;
  double variance = 0.0;            // VAR
};

StrategyMetrics strategy_metrics(const CohortResult& result, const ConceptGraph& graph);

struct TTestResult {
  double t = 0.0;  // ±inf when the pooled variance is zero and the means differ
  std::size_t degrees_of_freedom = 0;
  bool infinite = false;
  double p_value = 1.0;  // two-tailed
};

// Pooled-variance two-sample t statistic, df = n_a + n_b - 2.
TTestResult two_sample_t(std::span<const int> a, std::span<const int> b);

// Sampled dataset from a generator model, with the generating pattern of every trajectory.
struct SampledDataset {
  Dataset dataset;
  std::vector<std::size_t> patterns;
};

// Students answer uniformly random questions; the pattern is drawn from the model's bm_1.
SampledDataset sample_dataset(const HpomdpModel& generator, std::size_t sequences,
                              std::size_t length, std::uint64_t seed);

}  // namespace hpomdp
