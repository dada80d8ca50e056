#include "hpomdp/domain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hpomdp/errors.hpp"

namespace hpomdp {

ConceptGraph::ConceptGraph(std::vector<std::string> concepts,
                           const std::vector<Edge>& prerequisites)
    : concepts_(std::move(concepts)) {
  if (concepts_.empty()) throw StructuralError("concept graph has no concepts");
  if (concepts_.size() > kMaxConcepts) {
    throw CapacityError("concept graph has " + std::to_string(concepts_.size()) +
                        " concepts; at most " + std::to_string(kMaxConcepts) + " are supported");
  }
  for (ConceptIndex c = 0; c < concepts_.size(); ++c) {
    if (concepts_[c].empty()) throw StructuralError("concept identifier is empty");
    if (!lookup_.emplace(concepts_[c], c).second) {
      throw StructuralError("duplicate concept identifier '" + concepts_[c] + "'");
    }
  }
  parents_.resize(concepts_.size());
  parent_masks_.assign(concepts_.size(), 0);
  for (const auto& [parent, child] : prerequisites) {
    const auto p = find(parent);
    const auto c = find(child);
    if (!p || !c) {
      throw StructuralError("prerequisite edge " + parent + " -> " + child +
                            " names an undeclared concept");
    }
    if (*p == *c) throw StructuralError("self-loop on concept '" + parent + "'");
    if (parent_masks_[*c] & (1u << *p)) continue;
    edges_.emplace_back(*p, *c);
    parents_[*c].push_back(*p);
    parent_masks_[*c] |= 1u << *p;
  }
  std::sort(edges_.begin(), edges_.end());

  // Kahn's algorithm.
  std::vector<std::size_t> indegree(concepts_.size(), 0);
  for (const auto& e : edges_) ++indegree[e.second];
  std::vector<ConceptIndex> ready;
  for (ConceptIndex c = 0; c < concepts_.size(); ++c) {
    if (indegree[c] == 0) ready.push_back(c);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const ConceptIndex c = ready.back();
    ready.pop_back();
    ++visited;
    for (const auto& e : edges_) {
      if (e.first == c && --indegree[e.second] == 0) ready.push_back(e.second);
    }
  }
  if (visited != concepts_.size()) throw StructuralError("prerequisite graph contains a cycle");
}

std::optional<ConceptIndex> ConceptGraph::find(std::string_view concept_id) const {
  const auto it = lookup_.find(std::string(concept_id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

ConceptIndex ConceptGraph::index_of(std::string_view concept_id) const {
  if (auto c = find(concept_id)) return *c;
  throw ContractError("unknown concept '" + std::string(concept_id) + "'");
}

KnowledgeState::KnowledgeState(std::uint32_t bits, std::size_t concept_count)
    : bits_(bits), size_(concept_count) {}

KnowledgeState KnowledgeState::parse(std::string_view text) {
  if (text.empty() || text.size() > kMaxConcepts) {
    throw ContractError("invalid knowledge state '" + std::string(text) + "'");
  }
  std::uint32_t bits = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '1') {
      bits |= 1u << i;
    } else if (text[i] != '0') {
      throw ContractError("invalid knowledge state '" + std::string(text) + "'");
    }
  }
  return KnowledgeState(bits, text.size());
}

int KnowledgeState::mastered_count() const noexcept { return std::popcount(bits_); }

std::string KnowledgeState::to_string() const {
  std::string out(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (mastered(i)) out[i] = '1';
  }
  return out;
}

std::strong_ordering operator<=>(const KnowledgeState& a, const KnowledgeState& b) {
  const std::size_t n = std::min(a.size_, b.size_);
  for (std::size_t i = 0; i < n; ++i) {
    if (a.mastered(i) != b.mastered(i)) {
      return a.mastered(i) ? std::strong_ordering::greater : std::strong_ordering::less;
    }
  }
  return a.size_ <=> b.size_;
}

std::string_view to_string(StateMode mode) {
  return mode == StateMode::full ? "full" : "filtered";
}

StateMode parse_state_mode(std::string_view text) {
  if (text == "full") return StateMode::full;
  if (text == "filtered" || text == "prerequisite-filtered") return StateMode::filtered;
  throw ContractError("unknown state-space mode '" + std::string(text) + "'");
}

std::vector<KnowledgeState> build_state_space(const ConceptGraph& graph, StateMode mode) {
  const std::size_t k = graph.size();
  std::vector<KnowledgeState> states;
  const std::uint32_t count = 1u << k;
  for (std::uint32_t bits = 0; bits < count; ++bits) {
    bool closed = true;
    if (mode == StateMode::filtered) {
      for (ConceptIndex c = 0; c < k && closed; ++c) {
        if ((bits >> c) & 1u) closed = (bits & graph.parent_mask(c)) == graph.parent_mask(c);
      }
    }
    if (closed) states.emplace_back(bits, k);
  }
  std::sort(states.begin(), states.end());
  return states;
}

StateSpace::StateSpace(const ConceptGraph& graph, StateMode mode)
    : mode_(mode), concept_count_(graph.size()), states_(build_state_space(graph, mode)) {
  lookup_.reserve(states_.size());
  for (StateIndex s = 0; s < states_.size(); ++s) lookup_.emplace(states_[s].bits(), s);
  flips_.assign(states_.size(), std::vector<std::optional<StateIndex>>(concept_count_));
  for (StateIndex s = 0; s < states_.size(); ++s) {
    for (ConceptIndex c = 0; c < concept_count_; ++c) {
      if (!states_[s].mastered(c)) flips_[s][c] = find(states_[s].with_mastered(c));
    }
  }
}

std::optional<StateIndex> StateSpace::find(const KnowledgeState& state) const {
  if (state.concept_count() != concept_count_) return std::nullopt;
  const auto it = lookup_.find(state.bits());
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<StateIndex> StateSpace::flip_target(StateIndex s, ConceptIndex c) const {
  return flips_.at(s).at(c);
}

QuestionCatalog::QuestionCatalog(std::vector<Question> questions, std::size_t concept_count)
    : questions_(std::move(questions)) {
  for (ActionIndex a = 0; a < questions_.size(); ++a) {
    const auto& q = questions_[a];
    if (q.id.empty()) throw ContractError("question with empty id");
    if (q.concept_index >= concept_count) {
      throw ContractError("question '" + q.id + "' references concept index " +
                          std::to_string(q.concept_index) + " outside the graph");
    }
    if (!lookup_.emplace(q.id, a).second) {
      throw ContractError("duplicate question id '" + q.id + "'");
    }
  }
}

std::optional<ActionIndex> QuestionCatalog::find(std::string_view id) const {
  const auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

ActionIndex QuestionCatalog::index_of(std::string_view id) const {
  if (auto a = find(id)) return *a;
  throw ContractError("unknown question '" + std::string(id) + "'");
}

void validate_trajectory(const Trajectory& trajectory, const QuestionCatalog& catalog) {
  if (trajectory.steps.empty()) {
    throw ContractError("trajectory for student '" + trajectory.student + "' is empty");
  }
  for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
    if (trajectory.steps[t].action >= catalog.size()) {
      throw ContractError("trajectory for student '" + trajectory.student + "' step " +
                          std::to_string(t) + " references unknown action index " +
                          std::to_string(trajectory.steps[t].action));
    }
  }
}

double learn_probability(const StateSpace& space, const PatternComponent& component,
                         ConceptIndex c, StateIndex s) {
  const auto target = space.flip_target(s, c);
  if (!target) return 0.0;
  for (const auto& e : component.transition.at(c).at(s)) {
    if (e.to == *target) return e.probability;
  }
  return 0.0;
}

RewardSpec RewardSpec::mastered_count(const StateSpace& space) {
  RewardSpec reward;
  reward.terminal.reserve(space.size());
  for (const auto& state : space.states()) reward.terminal.push_back(state.mastered_count());
  return reward;
}

double HpomdpModel::p_correct(ActionIndex a, StateIndex s) const {
  if (observation.is_full_table()) return observation.full_table[a][s];
  return space.mastered(s, questions.concept_of(a)) ? observation.fluency[a]
                                                    : observation.guess[a];
}

std::vector<double> HpomdpModel::initial_pattern_belief() const {
  const std::size_t k = pattern_count();
  if (pattern_prior.size() == k && k > 0) return pattern_prior;
  if (!membership.empty()) {
    std::vector<double> means(k, 0.0);
    for (const auto& row : membership) {
      for (std::size_t j = 0; j < k && j < row.size(); ++j) means[j] += row[j];
    }
    for (auto& m : means) m /= static_cast<double>(membership.size());
    return means;
  }
  return std::vector<double>(k, k > 0 ? 1.0 / static_cast<double>(k) : 0.0);
}

void HpomdpModel::set_membership(std::vector<std::vector<double>> w) {
  membership = std::move(w);
  pattern_prior.clear();
  pattern_prior = initial_pattern_belief();
}

namespace {

std::string component_location(std::size_t j) { return "component[" + std::to_string(j) + "]"; }

void check_distribution(std::vector<Violation>& out, const std::vector<double>& values,
                        const std::string& invariant, const std::string& location) {
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      out.push_back({"non-negative probability", location + "[" + std::to_string(i) + "]",
                     values[i] < 0.0 ? -values[i] : 0.0});
    }
    sum += values[i];
  }
  if (!(std::abs(sum - 1.0) <= kStochasticTolerance)) {
    out.push_back({invariant, location, std::abs(sum - 1.0)});
  }
}

}  // namespace

std::vector<Violation> validate_model(const HpomdpModel& model) {
  std::vector<Violation> out;
  const auto& space = model.space;
  const std::size_t n_states = space.size();
  const std::size_t n_concepts = space.concept_count();
  const std::size_t n_questions = model.questions.size();

  if (n_concepts != model.graph.size()) {
    out.push_back({"state space matches graph", "space", 0.0});
    return out;
  }
  if (model.components.empty()) out.push_back({"at least one pattern", "components", 0.0});
  if (!(model.discount >= 0.0 && model.discount <= 1.0)) {
    out.push_back({"discount in [0,1]", "discount", model.discount});
  }

  for (std::size_t j = 0; j < model.components.size(); ++j) {
    const auto& comp = model.components[j];
    const std::string where = component_location(j);
    if (comp.initial.size() != n_states) {
      out.push_back({"Phi: shared state space", where + ".initial", 0.0});
    } else {
      check_distribution(out, comp.initial, "initial distribution sums to 1", where + ".initial");
    }
    if (comp.transition.size() != n_concepts) {
      out.push_back({"Phi: transitions indexed by every concept", where + ".transition", 0.0});
      continue;
    }
    for (ConceptIndex c = 0; c < n_concepts; ++c) {
      const auto& rows = comp.transition[c];
      const std::string cwhere = where + ".transition[" + model.graph.name(c) + "]";
      if (rows.size() != n_states) {
        out.push_back({"Phi: shared state space", cwhere, 0.0});
        continue;
      }
      for (StateIndex s = 0; s < n_states; ++s) {
        const std::string rwhere = cwhere + "[" + space.state(s).to_string() + "]";
        double sum = 0.0;
        for (const auto& e : rows[s]) {
          if (e.to >= n_states) {
            out.push_back({"transition target inside state space", rwhere, 0.0});
            continue;
          }
          if (!(e.probability >= 0.0)) {
            out.push_back({"non-negative probability", rwhere + "->" + space.state(e.to).to_string(),
                           -e.probability});
          }
          const bool allowed = e.to == s || space.flip_target(s, c) == e.to;
          if (!allowed && e.probability > 0.0) {
            out.push_back({"single flip: only the acted concept's 0->1 flip or self-loop",
                           rwhere + "->" + space.state(e.to).to_string(), e.probability});
          }
          sum += e.probability;
        }
        if (!(std::abs(sum - 1.0) <= kStochasticTolerance)) {
          out.push_back({"Psi: row-stochastic transition", rwhere, std::abs(sum - 1.0)});
        }
      }
    }
  }

  const auto& obs = model.observation;
  if (obs.is_full_table()) {
    if (obs.full_table.size() != n_questions) {
      out.push_back({"observation table covers catalog", "observation.table", 0.0});
    } else {
      for (ActionIndex a = 0; a < n_questions; ++a) {
        const std::string where = "observation.table[" + model.questions[a].id + "]";
        if (obs.full_table[a].size() != n_states) {
          out.push_back({"observation table covers state space", where, 0.0});
          continue;
        }
        double worst_unmastered = 0.0;
        double best_mastered_min = 1.0;
        bool any_m = false;
        bool any_u = false;
        const ConceptIndex c = model.questions.concept_of(a);
        for (StateIndex s = 0; s < n_states; ++s) {
          const double p = obs.full_table[a][s];
          if (!(p >= 0.0 && p <= 1.0)) out.push_back({"observation in [0,1]", where, p});
          if (space.mastered(s, c)) {
            best_mastered_min = any_m ? std::min(best_mastered_min, p) : p;
            any_m = true;
          } else {
            worst_unmastered = any_u ? std::max(worst_unmastered, p) : p;
            any_u = true;
          }
        }
        if (any_m && any_u && !(best_mastered_min > worst_unmastered)) {
          out.push_back({"mastery helps: mastered answers beat unmastered", where,
                         worst_unmastered - best_mastered_min});
        }
      }
    }
  } else {
    if (obs.guess.size() != n_questions || obs.fluency.size() != n_questions) {
      out.push_back({"observation parameters cover catalog", "observation", 0.0});
    } else {
      for (ActionIndex a = 0; a < n_questions; ++a) {
        const std::string where = "observation[" + model.questions[a].id + "]";
        const double g = obs.guess[a];
        const double f = obs.fluency[a];
        if (!(g >= 0.0 && g <= 1.0)) out.push_back({"guess in [0,1]", where, g});
        if (!(f >= 0.0 && f <= 1.0)) out.push_back({"fluency in [0,1]", where, f});
        if (!(f > g)) {
          out.push_back({"mastery helps: fluency > guess", where, g - f});
        }
      }
    }
  }

  if (model.reward.terminal.size() != n_states) {
    out.push_back({"reward defined for every state", "reward", 0.0});
  }

  const std::size_t k = model.components.size();
  for (std::size_t i = 0; i < model.membership.size(); ++i) {
    const std::string where = "membership[" + std::to_string(i) + "]";
    if (model.membership[i].size() != k) {
      out.push_back({"membership row has k entries", where, 0.0});
      continue;
    }
    check_distribution(out, model.membership[i], "membership row sums to 1", where);
  }
  if (!model.pattern_prior.empty()) {
    if (model.pattern_prior.size() != k) {
      out.push_back({"pattern prior has k entries", "pattern_prior", 0.0});
    } else {
      check_distribution(out, model.pattern_prior, "pattern prior sums to 1", "pattern_prior");
    }
  }
  return out;
}

QuestionCatalog one_question_per_concept(const ConceptGraph& graph) {
  std::vector<Question> qs;
  for (ConceptIndex c = 0; c < graph.size(); ++c) qs.push_back({"q_" + graph.name(c), c});
  return QuestionCatalog(std::move(qs), graph.size());
}

HpomdpModel make_simple_model(const ConceptGraph& graph, StateMode mode,
                              const QuestionCatalog& questions, const SimpleModelSpec& spec) {
  StateSpace space(graph, mode);
  if (spec.learn.empty()) throw ContractError("make_simple_model needs at least one pattern");
  std::vector<PatternComponent> components;
  for (std::size_t j = 0; j < spec.learn.size(); ++j) {
    PatternComponent comp;
    if (!spec.initial_per_pattern.empty()) {
      comp.initial = spec.initial_per_pattern.at(j);
    } else if (!spec.initial.empty()) {
      comp.initial = spec.initial;
    } else {
      comp.initial.assign(space.size(), 0.0);
      comp.initial[0] = 1.0;  // all-unmastered sorts first
    }
    if (comp.initial.size() != space.size()) {
      throw ContractError("initial distribution size does not match the state space");
    }
    const double p = spec.learn[j];
    comp.transition = make_transitions(space, [p](ConceptIndex, StateIndex) { return p; });
    components.push_back(std::move(comp));
  }
  ObservationFunction obs;
  obs.guess.assign(questions.size(), spec.guess);
  obs.fluency.assign(questions.size(), spec.fluency);
  RewardSpec reward = RewardSpec::mastered_count(space);
  return HpomdpModel{graph,     std::move(space), questions, std::move(components),
                     std::move(obs), std::move(reward), 1.0,       {},
                     {},        std::nullopt};
}

}  // namespace hpomdp
