#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hpomdp {

using ConceptIndex = std::size_t;
using StateIndex = std::size_t;
using ActionIndex = std::size_t;

// Largest concept count the state space supports (2^20 states in full mode).
inline constexpr std::size_t kMaxConcepts = 20;

// Knowledge concepts with prerequisite edges (parent -> child). Validated on construction:
// identifiers unique, endpoints declared, no cycles, at least one concept.
class ConceptGraph {
 public:
  using Edge = std::pair<std::string, std::string>;

  ConceptGraph(std::vector<std::string> concepts, const std::vector<Edge>& prerequisites);

  std::size_t size() const noexcept { return concepts_.size(); }
  const std::vector<std::string>& concepts() const noexcept { return concepts_; }
  const std::string& name(ConceptIndex c) const { return concepts_.at(c); }

  std::optional<ConceptIndex> find(std::string_view concept_id) const;
  // Throws ContractError for an undeclared concept.
  ConceptIndex index_of(std::string_view concept_id) const;

  const std::vector<std::pair<ConceptIndex, ConceptIndex>>& edges() const noexcept {
    return edges_;
  }
  const std::vector<ConceptIndex>& parents(ConceptIndex c) const { return parents_.at(c); }
  std::uint32_t parent_mask(ConceptIndex c) const { return parent_masks_.at(c); }

  friend bool operator==(const ConceptGraph& a, const ConceptGraph& b) {
    return a.concepts_ == b.concepts_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<std::string> concepts_;
  std::vector<std::pair<ConceptIndex, ConceptIndex>> edges_;
  std::vector<std::vector<ConceptIndex>> parents_;
  std::vector<std::uint32_t> parent_masks_;
  std::unordered_map<std::string, ConceptIndex> lookup_;
};

// Mastery bit-vector over K concepts; bit c set means concept c is mastered.
class KnowledgeState {
 public:
  KnowledgeState() = default;
  KnowledgeState(std::uint32_t bits, std::size_t concept_count);

  // Parses "101" (concept 0 first).
  static KnowledgeState parse(std::string_view text);

  std::uint32_t bits() const noexcept { return bits_; }
  std::size_t concept_count() const noexcept { return size_; }
  bool mastered(ConceptIndex c) const noexcept { return (bits_ >> c) & 1u; }
  KnowledgeState with_mastered(ConceptIndex c) const noexcept {
    return KnowledgeState(bits_ | (1u << c), size_);
  }
  int mastered_count() const noexcept;

  // Concept 0 first, e.g. "110".
  std::string to_string() const;

  friend bool operator==(const KnowledgeState&, const KnowledgeState&) = default;
  // Lexicographic on the bit-vector read concept 0 first.
  friend std::strong_ordering operator<=>(const KnowledgeState& a, const KnowledgeState& b);

 private:
  std::uint32_t bits_ = 0;
  std::size_t size_ = 0;
};

enum class StateMode { full, filtered };

std::string_view to_string(StateMode mode);
StateMode parse_state_mode(std::string_view text);

// Full mode: all 2^K vectors. Filtered mode: exactly the downward-closed subsets.
// Both in canonical lexicographic order.
std::vector<KnowledgeState> build_state_space(const ConceptGraph& graph, StateMode mode);

// Enumerated state space with index lookup and the single-bit flip structure that
// transitions are restricted to.
class StateSpace {
 public:
  StateSpace(const ConceptGraph& graph, StateMode mode);

  std::size_t size() const noexcept { return states_.size(); }
  std::size_t concept_count() const noexcept { return concept_count_; }
  StateMode mode() const noexcept { return mode_; }
  const std::vector<KnowledgeState>& states() const noexcept { return states_; }
  const KnowledgeState& state(StateIndex s) const { return states_.at(s); }

  std::optional<StateIndex> find(const KnowledgeState& state) const;
  // The state reached by mastering c from s, when c is unmastered and the result
  // stays inside the space.
  std::optional<StateIndex> flip_target(StateIndex s, ConceptIndex c) const;
  bool mastered(StateIndex s, ConceptIndex c) const { return states_[s].mastered(c); }

 private:
  StateMode mode_;
  std::size_t concept_count_;
  std::vector<KnowledgeState> states_;
  std::unordered_map<std::uint32_t, StateIndex> lookup_;
  std::vector<std::vector<std::optional<StateIndex>>> flips_;  // [state][concept]
};

struct Question {
  std::string id;
  ConceptIndex concept_index = 0;
};

class QuestionCatalog {
 public:
  QuestionCatalog() = default;
  // Throws ContractError for duplicate ids or concepts outside [0, concept_count).
  QuestionCatalog(std::vector<Question> questions, std::size_t concept_count);

  std::size_t size() const noexcept { return questions_.size(); }
  bool empty() const noexcept { return questions_.empty(); }
  const Question& operator[](ActionIndex a) const { return questions_.at(a); }
  const std::vector<Question>& questions() const noexcept { return questions_; }
  ConceptIndex concept_of(ActionIndex a) const { return questions_.at(a).concept_index; }
  std::optional<ActionIndex> find(std::string_view id) const;
  ActionIndex index_of(std::string_view id) const;

 private:
  std::vector<Question> questions_;
  std::unordered_map<std::string, ActionIndex> lookup_;
};

struct Step {
  ActionIndex action = 0;
  bool correct = false;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  std::string student;
  std::vector<Step> steps;
};

// Throws ContractError if the trajectory is empty or names an action outside the catalog.
void validate_trajectory(const Trajectory& trajectory, const QuestionCatalog& catalog);

struct Dataset {
  ConceptGraph graph;
  QuestionCatalog catalog;
  std::vector<Trajectory> trajectories;
};

// One entry of a transition row: probability of moving to `to`.
struct TransitionEntry {
  StateIndex to = 0;
  double probability = 0.0;

  friend bool operator==(const TransitionEntry&, const TransitionEntry&) = default;
};
using TransitionRow = std::vector<TransitionEntry>;

// One cognitive pattern: initial distribution D_j and concept-indexed transitions T_j.
struct PatternComponent {
  std::vector<double> initial;                      // [state]
  std::vector<std::vector<TransitionRow>> transition;  // [concept][state]
};

// Builds rows of the form {self: 1 - p, flip: p}, with p = learn(concept, state) on rows
// whose flip is feasible and a pure self-loop elsewhere.
template <typename LearnFn>
std::vector<std::vector<TransitionRow>> make_transitions(const StateSpace& space,
                                                         LearnFn&& learn) {
  std::vector<std::vector<TransitionRow>> table(space.concept_count());
  for (ConceptIndex c = 0; c < space.concept_count(); ++c) {
    table[c].resize(space.size());
    for (StateIndex s = 0; s < space.size(); ++s) {
      if (auto target = space.flip_target(s, c)) {
        const double p = learn(c, s);
        table[c][s] = {{s, 1.0 - p}, {*target, p}};
      } else {
        table[c][s] = {{s, 1.0}};
      }
    }
  }
  return table;
}

// Probability mass on the feasible flip of row (c, s); 0 when there is none.
double learn_probability(const StateSpace& space, const PatternComponent& component,
                         ConceptIndex c, StateIndex s);

// Shared observation function. Parameterized per question by guess/fluency through the
// mastery bit of the question's concept; `full_table`, when non-empty, overrides with
// P(correct | state, question) indexed [question][state].
struct ObservationFunction {
  std::vector<double> guess;
  std::vector<double> fluency;
  std::vector<std::vector<double>> full_table;

  bool is_full_table() const noexcept { return !full_table.empty(); }
};

// Terminal reward per final state; per-step reward is zero.
struct RewardSpec {
  std::vector<double> terminal;  // [state]

  static RewardSpec mastered_count(const StateSpace& space);
};

struct FitMetadata {
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
  bool converged = false;
};

// A mixture of k POMDPs sharing S, A, Omega, O and R, differing in D_j and T_j.
struct HpomdpModel {
  ConceptGraph graph;
  StateSpace space;
  QuestionCatalog questions;
  std::vector<PatternComponent> components;
  ObservationFunction observation;
  RewardSpec reward;
  double discount = 1.0;
  // Membership degrees w (l x k) retained from fitting; empty for hand-built or loaded models.
  std::vector<std::vector<double>> membership;
  // Column means of the membership matrix; empty means uniform.
  std::vector<double> pattern_prior;
  std::optional<FitMetadata> fit;

  std::size_t pattern_count() const noexcept { return components.size(); }

  double p_correct(ActionIndex a, StateIndex s) const;
  double p_observation(ActionIndex a, StateIndex s, bool correct) const {
    const double p = p_correct(a, s);
    return correct ? p : 1.0 - p;
  }
  const TransitionRow& transition_row(std::size_t pattern, ActionIndex a, StateIndex s) const {
    return components[pattern].transition[questions.concept_of(a)][s];
  }

  // bm_1: column means of the membership, or uniform when no membership is known.
  std::vector<double> initial_pattern_belief() const;

  // Replaces the membership matrix and refreshes pattern_prior.
  void set_membership(std::vector<std::vector<double>> w);
};

struct Violation {
  std::string invariant;
  std::string location;
  double residual = 0.0;
};

inline constexpr double kStochasticTolerance = 1e-9;

// Diagnoses every structural and stochastic invariant of the model. Never throws.
std::vector<Violation> validate_model(const HpomdpModel& model);

// Hand-built model with one component per entry of `learn`, each component using a
// constant learn probability on every feasible flip.
struct SimpleModelSpec {
  std::vector<double> initial;           // empty: point mass on the all-unmastered state
  std::vector<double> learn;             // per pattern
  std::vector<std::vector<double>> initial_per_pattern;  // overrides `initial` when set
  double guess = 0.2;
  double fluency = 0.9;
};
HpomdpModel make_simple_model(const ConceptGraph& graph, StateMode mode,
                              const QuestionCatalog& questions, const SimpleModelSpec& spec);

// One question per concept named "q_<concept>".
QuestionCatalog one_question_per_concept(const ConceptGraph& graph);

}  // namespace hpomdp
