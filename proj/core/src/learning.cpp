#include "hpomdp/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "forward_backward.hpp"
#include "hpomdp/errors.hpp"
#include "parallel.hpp"

namespace hpomdp {
namespace {

constexpr std::size_t kBlockSize = 32;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct TransitionStat {
  double flip = 0.0;
  double total = 0.0;
};

// Expected sufficient statistics of one E-step, summed over a block of trajectories.
struct Statistics {
  std::vector<std::vector<double>> initial;             // [j][s], responsibility-weighted
  std::vector<std::vector<double>> initial_unweighted;  // [j][s]
  std::vector<std::vector<std::vector<TransitionStat>>> transition;  // [j][c][s]
  std::vector<double> guess_correct, guess_total;      // [q]
  std::vector<double> fluency_correct, fluency_total;  // [q]
  double objective = 0.0;

  Statistics(std::size_t k, std::size_t states, std::size_t concepts, std::size_t questions)
      : initial(k, std::vector<double>(states, 0.0)),
        initial_unweighted(k, std::vector<double>(states, 0.0)),
        transition(k, std::vector<std::vector<TransitionStat>>(
                          concepts, std::vector<TransitionStat>(states))),
        guess_correct(questions, 0.0),
        guess_total(questions, 0.0),
        fluency_correct(questions, 0.0),
        fluency_total(questions, 0.0) {}

  void merge(const Statistics& o) {
    for (std::size_t j = 0; j < initial.size(); ++j) {
      for (std::size_t s = 0; s < initial[j].size(); ++s) {
        initial[j][s] += o.initial[j][s];
        initial_unweighted[j][s] += o.initial_unweighted[j][s];
      }
      for (std::size_t c = 0; c < transition[j].size(); ++c) {
        for (std::size_t s = 0; s < transition[j][c].size(); ++s) {
          transition[j][c][s].flip += o.transition[j][c][s].flip;
          transition[j][c][s].total += o.transition[j][c][s].total;
        }
      }
    }
    for (std::size_t q = 0; q < guess_correct.size(); ++q) {
      guess_correct[q] += o.guess_correct[q];
      guess_total[q] += o.guess_total[q];
      fluency_correct[q] += o.fluency_correct[q];
      fluency_total[q] += o.fluency_total[q];
    }
    objective += o.objective;
  }
};

double log_sum_exp(std::span<const double> values) {
  double top = kNegInf;
  for (double v : values) top = std::max(top, v);
  if (top == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

std::vector<double> prior_row(const HpomdpModel& model, std::size_t i, std::size_t sequences,
                              const std::vector<double>& fallback) {
  if (model.membership.size() == sequences) return model.membership[i];
  return fallback;
}

void accumulate(const HpomdpModel& model, std::size_t j, const Trajectory& traj,
                const detail::ForwardPass& fwd, const std::vector<double>& beta, double weight,
                Statistics& stats) {
  const std::size_t n = fwd.states;
  const auto& space = model.space;
  for (StateIndex s = 0; s < n; ++s) {
    const double g = fwd.a(0, s) * beta[s];
    stats.initial_unweighted[j][s] += g;
    stats.initial[j][s] += weight * g;
  }
  if (weight <= 0.0) return;
  for (std::size_t t = 0; t < fwd.steps; ++t) {
    const Step& step = traj.steps[t];
    const ConceptIndex c = model.questions.concept_of(step.action);
    double mastered = 0.0;
    double unmastered = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
      const double g = fwd.a(t, s) * beta[t * n + s];
      (space.mastered(s, c) ? mastered : unmastered) += g;
    }
    stats.fluency_total[step.action] += weight * mastered;
    stats.guess_total[step.action] += weight * unmastered;
    if (step.correct) {
      stats.fluency_correct[step.action] += weight * mastered;
      stats.guess_correct[step.action] += weight * unmastered;
    }
    if (t + 1 == fwd.steps) continue;
    const Step& next = traj.steps[t + 1];
    auto& rows = stats.transition[j][c];
    for (StateIndex s = 0; s < n; ++s) {
      const auto target = space.flip_target(s, c);
      if (!target) continue;
      const double from = fwd.a(t, s);
      if (from == 0.0) continue;
      const double p = learn_probability(space, model.components[j], c, s);
      const double xi = from * p * model.p_observation(next.action, *target, next.correct) *
                        beta[(t + 1) * n + *target] / fwd.scale[t + 1];
      rows[s].flip += weight * xi;
      rows[s].total += weight * from * beta[t * n + s];
    }
  }
}

double clamp_probability(double p, double floor) { return std::clamp(p, floor, 1.0 - floor); }

void check_model_for_em(const HpomdpModel& model) {
  if (model.observation.is_full_table()) {
    throw ContractError("EM fits the guess/fluency observation parameterization; "
                        "full-table observation models cannot be re-estimated");
  }
  const auto violations = validate_model(model);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw ContractError("model fails validation before EM: " + v.invariant + " at " + v.location +
                        " (residual " + std::to_string(v.residual) + ")");
  }
}

double standard_normal(Rng& rng) {
  // Box-Muller on our own uniform source for cross-library reproducibility.
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Responsibility-weighted spread of per-step log-likelihood within each component.
std::size_t highest_variance_component(const std::vector<std::vector<double>>& per_step_ll,
                                       const std::vector<std::vector<double>>& w,
                                       const std::vector<bool>& excluded) {
  const std::size_t k = excluded.size();
  std::size_t best = k;
  double best_var = -1.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (excluded[j]) continue;
    double mass = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(per_step_ll[i][j])) continue;
      mass += w[i][j];
      mean += w[i][j] * per_step_ll[i][j];
    }
    if (mass <= 0.0) continue;
    mean /= mass;
    double var = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(per_step_ll[i][j])) continue;
      var += w[i][j] * (per_step_ll[i][j] - mean) * (per_step_ll[i][j] - mean);
    }
    var /= mass;
    if (var > best_var) {
      best_var = var;
      best = j;
    }
  }
  return best;
}

struct StepInternals {
  EmStepResult result;
  std::vector<std::vector<double>> per_step_log_likelihood;  // [i][j]
};

StepInternals em_step_impl(std::span<const Trajectory> data, const HpomdpModel& current,
                           const EmConfig& config) {
  const std::size_t l = data.size();
  const std::size_t k = current.pattern_count();
  const std::size_t n = current.space.size();
  const std::size_t concepts = current.space.concept_count();
  const std::size_t questions = current.questions.size();
  const auto fallback = current.initial_pattern_belief();

  std::vector<std::vector<double>> new_w(l, std::vector<double>(k, 0.0));
  std::vector<std::vector<double>> per_step(l, std::vector<double>(k, kNegInf));
  const std::size_t blocks = (l + kBlockSize - 1) / kBlockSize;
  std::vector<Statistics> partial(blocks, Statistics(k, n, concepts, questions));

  detail::parallel_for(blocks, config.threads, [&](std::size_t b) {
    Statistics& stats = partial[b];
    const std::size_t end = std::min(l, (b + 1) * kBlockSize);
    std::vector<detail::ForwardPass> fwd(k);
    std::vector<double> joint(k), proposal(k);
    for (std::size_t i = b * kBlockSize; i < end; ++i) {
      const Trajectory& traj = data[i];
      const auto prior = prior_row(current, i, l, fallback);
      for (std::size_t j = 0; j < k; ++j) {
        fwd[j] = detail::forward(current, j, traj);
        const double log_prior = prior[j] > 0.0 ? std::log(prior[j]) : kNegInf;
        joint[j] = log_prior + fwd[j].log_likelihood;
        proposal[j] = config.membership_rule == MembershipRule::derived ? joint[j]
                                                                         : fwd[j].log_likelihood;
        per_step[i][j] = fwd[j].log_likelihood / static_cast<double>(traj.steps.size());
      }
      const double objective = log_sum_exp(joint);
      const double normalizer = log_sum_exp(proposal);
      if (objective == kNegInf || normalizer == kNegInf) {
        throw ImpossibleEvidenceError("trajectory " + std::to_string(i) + " (student '" +
                                      traj.student + "') has zero likelihood under every pattern");
      }
      stats.objective += objective;
      for (std::size_t j = 0; j < k; ++j) new_w[i][j] = std::exp(proposal[j] - normalizer);
      for (std::size_t j = 0; j < k; ++j) {
        if (!fwd[j].feasible) continue;
        const bool needed = new_w[i][j] > 0.0 ||
                            config.initial_rule == InitialDistributionRule::unweighted;
        if (!needed) continue;
        const auto beta = detail::backward(current, j, traj, fwd[j]);
        accumulate(current, j, traj, fwd[j], beta, new_w[i][j], stats);
      }
    }
  });

  Statistics total(k, n, concepts, questions);
  for (const auto& p : partial) total.merge(p);

  StepInternals out{EmStepResult{current, total.objective, 0.0, {}}, std::move(per_step)};
  HpomdpModel& next = out.result.model;
  double change = 0.0;
  const double floor = config.floor_probability;

  for (std::size_t j = 0; j < k; ++j) {
    double responsibility = 0.0;
    for (std::size_t i = 0; i < l; ++i) responsibility += new_w[i][j];
    if (responsibility < static_cast<double>(k) * floor) {
      out.result.degenerate_components.push_back(j);
    }

    auto& comp = next.components[j];
    const auto& prev = current.components[j];
    std::vector<double> counts = total.initial[j];
    if (config.initial_rule == InitialDistributionRule::unweighted) {
      counts = total.initial_unweighted[j];
      for (auto& c : counts) c /= static_cast<double>(l);
    }
    if (std::accumulate(counts.begin(), counts.end(), 0.0) > 0.0) {
      comp.initial = floored_distribution(counts, floor);
    }
    for (StateIndex s = 0; s < n; ++s) {
      change = std::max(change, std::abs(comp.initial[s] - prev.initial[s]));
    }

    const auto& stats = total.transition[j];
    comp.transition = make_transitions(current.space, [&](ConceptIndex c, StateIndex s) {
      const double before = learn_probability(current.space, prev, c, s);
      const auto& st = stats[c][s];
      const double p = st.total > 0.0 ? clamp_probability(st.flip / st.total, floor) : before;
      change = std::max(change, std::abs(p - before));
      return p;
    });
  }

  for (ActionIndex a = 0; a < questions; ++a) {
    const auto [g, f] = constrained_observation_update(
        total.guess_correct[a], total.guess_total[a], total.fluency_correct[a],
        total.fluency_total[a], current.observation.guess[a], current.observation.fluency[a],
        floor, config.fluency_gap);
    change = std::max({change, std::abs(g - current.observation.guess[a]),
                       std::abs(f - current.observation.fluency[a])});
    next.observation.guess[a] = g;
    next.observation.fluency[a] = f;
  }

  next.set_membership(std::move(new_w));
  out.result.max_parameter_change = change;
  return out;
}

std::vector<bool> degenerate_mask(const std::vector<std::size_t>& indices, std::size_t k) {
  std::vector<bool> mask(k, false);
  for (auto j : indices) mask[j] = true;
  return mask;
}

// Replaces component j by a jittered copy of `donor` and splits the donor's membership.
void reseed_component(HpomdpModel& model, std::size_t j, std::size_t donor,
                      const EmConfig& config, Rng& rng) {
  const double floor = config.floor_probability;
  const auto& source = model.components[donor];
  PatternComponent fresh;
  std::vector<double> counts(source.initial.size());
  for (std::size_t s = 0; s < counts.size(); ++s) {
    counts[s] = source.initial[s] * (0.5 + uniform01(rng));
  }
  fresh.initial = floored_distribution(counts, floor);
  fresh.transition = make_transitions(model.space, [&](ConceptIndex c, StateIndex s) {
    const double p = clamp_probability(learn_probability(model.space, source, c, s), 1e-3);
    return clamp_probability(logistic(logit(p) + standard_normal(rng)), floor);
  });
  model.components[j] = std::move(fresh);
  auto w = model.membership;
  for (auto& row : w) {
    const double shared = 0.5 * (row[donor] + row[j]);
    row[donor] = shared;
    row[j] = shared;
  }
  model.set_membership(std::move(w));
}

}  // namespace

void validate_config(const EmConfig& config) {
  if (config.k == 0) throw ContractError("pattern count k must be >= 1");
  if (config.restarts == 0) throw ContractError("restarts must be >= 1");
  if (config.max_iterations == 0) throw ContractError("max_iterations must be >= 1");
  if (!(config.convergence_threshold > 0.0)) {
    throw ContractError("convergence threshold must be > 0");
  }
  if (!(config.floor_probability > 0.0 && config.floor_probability < 0.25)) {
    throw ContractError("floor probability must lie in (0, 0.25)");
  }
  if (!(config.fluency_gap > 0.0 && config.fluency_gap + 2 * config.floor_probability < 1.0)) {
    throw ContractError("fluency gap must be positive and leave room inside [floor, 1-floor]");
  }
}

std::vector<double> floored_distribution(std::span<const double> counts, double floor) {
  const std::size_t n = counts.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  if (floor * static_cast<double>(n) >= 1.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(n));
    return out;
  }
  std::vector<bool> pinned(n, false);
  std::size_t pinned_count = 0;
  for (;;) {
    double free_mass = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (!pinned[s]) free_mass += std::max(counts[s], 0.0);
    }
    const double budget = 1.0 - floor * static_cast<double>(pinned_count);
    bool moved = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (pinned[s]) continue;
      const double value = free_mass > 0.0 ? std::max(counts[s], 0.0) * budget / free_mass : 0.0;
      if (value < floor) {
        pinned[s] = true;
        ++pinned_count;
        moved = true;
      }
    }
    if (moved) continue;
    for (std::size_t s = 0; s < n; ++s) {
      out[s] = pinned[s] ? floor : std::max(counts[s], 0.0) * budget / free_mass;
    }
    return out;
  }
}

std::pair<double, double> enforce_fluency_gap(double guess, double fluency, double epsilon) {
  double g = std::clamp(guess, 0.0, 1.0);
  double f = std::clamp(fluency, 0.0, 1.0);
  if (f < g) std::swap(f, g);
  if (f < g + epsilon) {
    f = g + epsilon;
    if (f > 1.0) {
      f = 1.0;
      g = 1.0 - epsilon;
    }
  }
  return {g, f};
}

std::pair<double, double> constrained_observation_update(double cg, double tg, double cf,
                                                         double tf, double previous_guess,
                                                         double previous_fluency, double floor,
                                                         double gap) {
  const double hi = 1.0 - floor;
  double g = tg > 0.0 ? std::clamp(cg / tg, floor, hi) : previous_guess;
  double f = tf > 0.0 ? std::clamp(cf / tf, floor, hi) : previous_fluency;
  if (f >= g + gap) return {g, f};

  if (tg <= 0.0 && tf <= 0.0) return enforce_fluency_gap(previous_guess, previous_fluency, gap);
  if (tg <= 0.0) {
    // Only fluency is informed; the guess value does not affect the objective.
    f = std::max(f, floor + gap);
    return {std::min(std::max(previous_guess, floor), f - gap), f};
  }
  if (tf <= 0.0) {
    g = std::min(g, hi - gap);
    return {g, std::min(std::max(previous_fluency, g + gap), hi)};
  }

  // Constraint active: maximize the concave h(x) = L(x, x + gap) on [floor, hi - gap].
  const double bg = tg - cg;
  const double bf = tf - cf;
  auto slope = [&](double x) {
    return cg / x - bg / (1.0 - x) + cf / (x + gap) - bf / (1.0 - x - gap);
  };
  double lo = floor;
  double up = hi - gap;
  if (slope(lo) <= 0.0) return {lo, lo + gap};
  if (slope(up) >= 0.0) return {up, up + gap};
  for (int iter = 0; iter < 200 && up - lo > 1e-16; ++iter) {
    const double mid = 0.5 * (lo + up);
    (slope(mid) > 0.0 ? lo : up) = mid;
  }
  const double x = 0.5 * (lo + up);
  return {x, x + gap};
}

double total_log_likelihood(std::span<const Trajectory> data, const HpomdpModel& model) {
  const std::size_t k = model.pattern_count();
  const auto fallback = model.initial_pattern_belief();
  double total = 0.0;
  std::vector<double> joint(k);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto prior = prior_row(model, i, data.size(), fallback);
    for (std::size_t j = 0; j < k; ++j) {
      const double log_prior = prior[j] > 0.0 ? std::log(prior[j]) : kNegInf;
      joint[j] = log_prior + detail::forward(model, j, data[i]).log_likelihood;
    }
    total += log_sum_exp(joint);
  }
  return total;
}

EmStepResult em_step(std::span<const Trajectory> data, const HpomdpModel& current,
                     const EmConfig& config) {
  validate_config(config);
  if (data.empty()) throw ContractError("em_step needs a non-empty dataset");
  check_model_for_em(current);
  for (const auto& t : data) validate_trajectory(t, current.questions);
  return em_step_impl(data, current, config).result;
}

FitResult em_fit_from(std::span<const Trajectory> data, HpomdpModel initial,
                      const EmConfig& config) {
  validate_config(config);
  if (data.empty()) throw ContractError("em_fit needs a non-empty dataset");
  check_model_for_em(initial);
  for (const auto& t : data) validate_trajectory(t, initial.questions);

  const std::size_t k = initial.pattern_count();
  if (initial.membership.size() != data.size()) {
    initial.set_membership(std::vector<std::vector<double>>(data.size(),
                                                            initial.initial_pattern_belief()));
  }

  FitResult fit{std::move(initial), {}, 0, false, 0, {}, {}};
  std::vector<int> reseeded(k, 0);
  std::vector<bool> frozen(k, false);
  for (std::size_t iteration = 1; iteration <= config.max_iterations; ++iteration) {
    auto step = em_step_impl(data, fit.model, config);
    for (std::size_t j = 0; j < k; ++j) {
      if (frozen[j]) step.result.model.components[j] = fit.model.components[j];
    }
    fit.log_likelihood_trace.push_back(step.result.log_likelihood);
    fit.iterations = iteration;
    const auto& degenerate = step.result.degenerate_components;
    fit.model = std::move(step.result.model);

    bool reseeded_now = false;
    if (k > 1 && !degenerate.empty()) {
      const auto mask = degenerate_mask(degenerate, k);
      for (std::size_t j : degenerate) {
        if (frozen[j]) continue;
        if (reseeded[j] == 0) {
          const std::size_t donor = highest_variance_component(
              step.per_step_log_likelihood, fit.model.membership, mask);
          if (donor == k) continue;
          Rng rng = make_rng(config.seed, 0x5eed0000ULL + iteration * 131 + j);
          reseed_component(fit.model, j, donor, config, rng);
          reseeded[j] = 1;
          reseeded_now = true;
          fit.reinitialized_at.push_back(iteration);
          fit.warnings.push_back("component " + std::to_string(j) + " collapsed at iteration " +
                                 std::to_string(iteration) + "; reinitialized from component " +
                                 std::to_string(donor));
        } else {
          frozen[j] = true;
          fit.warnings.push_back("component " + std::to_string(j) +
                                 " collapsed again at iteration " + std::to_string(iteration) +
                                 "; frozen");
        }
      }
    }
    if (!reseeded_now && step.result.max_parameter_change < config.convergence_threshold) {
      fit.converged = true;
      break;
    }
  }
  fit.log_likelihood_trace.push_back(total_log_likelihood(data, fit.model));
  fit.model.fit = FitMetadata{config.seed, fit.iterations, fit.log_likelihood_trace.back(),
                              fit.converged};
  return fit;
}

HpomdpModel random_initial_model(const Dataset& dataset, const EmConfig& config, Rng& rng) {
  StateSpace space(dataset.graph, config.state_mode);
  PatternComponent comp;
  std::vector<double> counts(space.size());
  for (auto& c : counts) c = 1.0 + 0.5 * uniform01(rng);
  comp.initial = floored_distribution(counts, config.floor_probability);
  comp.transition = make_transitions(space, [&](ConceptIndex, StateIndex) {
    return 0.05 + 0.45 * uniform01(rng);
  });
  ObservationFunction obs;
  for (std::size_t a = 0; a < dataset.catalog.size(); ++a) {
    obs.guess.push_back(0.05 + 0.3 * uniform01(rng));
    obs.fluency.push_back(0.65 + 0.3 * uniform01(rng));
  }
  RewardSpec reward = RewardSpec::mastered_count(space);
  HpomdpModel model{dataset.graph, std::move(space), dataset.catalog, {std::move(comp)},
                    std::move(obs), std::move(reward), 1.0, {}, {}, std::nullopt};
  model.set_membership(
      std::vector<std::vector<double>>(dataset.trajectories.size(), std::vector<double>{1.0}));
  return model;
}

HpomdpModel jittered_mixture(const HpomdpModel& pooled, std::size_t k, std::size_t sequences,
                             const EmConfig& config, Rng& rng) {
  if (pooled.pattern_count() == 0) throw ContractError("pooled model has no pattern");
  const double floor = config.floor_probability;
  const auto& base = pooled.components.front();
  HpomdpModel model = pooled;
  model.components.clear();
  for (std::size_t j = 0; j < k; ++j) {
    PatternComponent comp;
    std::vector<double> counts(base.initial.size());
    for (std::size_t s = 0; s < counts.size(); ++s) {
      counts[s] = (base.initial[s] + 1e-3) * (0.5 + uniform01(rng));
    }
    comp.initial = floored_distribution(counts, floor);
    // A shared offset per component separates fast and slow learners from the start.
    const double offset = standard_normal(rng);
    comp.transition = make_transitions(model.space, [&](ConceptIndex c, StateIndex s) {
      const double p = clamp_probability(learn_probability(model.space, base, c, s), 1e-3);
      return clamp_probability(logistic(logit(p) + offset + 0.5 * standard_normal(rng)), floor);
    });
    model.components.push_back(std::move(comp));
  }
  std::vector<std::vector<double>> w(sequences, std::vector<double>(k));
  for (auto& row : w) {
    double sum = 0.0;
    for (auto& v : row) sum += (v = 1.0 + 0.1 * uniform01(rng));
    for (auto& v : row) v /= sum;
  }
  model.set_membership(std::move(w));
  model.fit.reset();
  return model;
}

FitResult em_fit(const Dataset& dataset, const EmConfig& config) {
  validate_config(config);
  if (dataset.trajectories.empty()) throw ContractError("em_fit needs a non-empty dataset");
  for (const auto& t : dataset.trajectories) validate_trajectory(t, dataset.catalog);
  const std::span<const Trajectory> data(dataset.trajectories);

  EmConfig inner = config;
  const bool parallel_restarts = config.threads > 1 && config.restarts > 1;
  if (parallel_restarts) inner.threads = 1;

  std::optional<HpomdpModel> pooled;
  if (config.k > 1) {
    EmConfig single = config;
    single.k = 1;
    Rng rng = make_rng(config.seed, 0x9001);
    pooled = em_fit_from(data, random_initial_model(dataset, single, rng), single).model;
  }

  std::vector<std::optional<FitResult>> runs(config.restarts);
  detail::parallel_for(config.restarts, parallel_restarts ? config.threads : 1,
                       [&](std::size_t r) {
                         Rng rng = make_rng(config.seed, r);
                         HpomdpModel start =
                             pooled ? jittered_mixture(*pooled, config.k, data.size(), config, rng)
                                    : random_initial_model(dataset, config, rng);
                         runs[r] = em_fit_from(data, std::move(start), inner);
                         runs[r]->restart_index = r;
                       });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r]->final_log_likelihood() > runs[best]->final_log_likelihood()) best = r;
  }
  return std::move(*runs[best]);
}

FitResult fit_baseline_pomdp(const Dataset& dataset, EmConfig config) {
  config.k = 1;
  return em_fit(dataset, config);
}

ConstrainedParameters apply_constraints(const RawParameters& raw, const StateSpace& space,
                                        const QuestionCatalog& catalog, double epsilon) {
  const std::size_t n = space.size();
  const std::size_t q_count = catalog.size();
  if (raw.transition.size() != q_count || raw.guess.size() != q_count ||
      raw.fluency.size() != q_count) {
    throw ContractError("raw parameter tables do not cover the question catalog");
  }
  std::vector<std::vector<std::vector<double>>> pooled(
      space.concept_count(), std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
  for (ActionIndex a = 0; a < q_count; ++a) {
    const auto& table = raw.transition[a];
    if (table.size() != n) throw ContractError("raw transition table has the wrong row count");
    auto& target = pooled[catalog.concept_of(a)];
    for (StateIndex s = 0; s < n; ++s) {
      if (table[s].size() != n) throw ContractError("raw transition row has the wrong width");
      for (StateIndex t = 0; t < n; ++t) target[s][t] += std::max(table[s][t], 0.0);
    }
  }

  ConstrainedParameters out;
  out.transition = make_transitions(space, [&](ConceptIndex c, StateIndex s) {
    const auto& row = pooled[c][s];
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    return total > 0.0 ? row[*space.flip_target(s, c)] / total : 0.0;
  });
  out.guess.resize(q_count);
  out.fluency.resize(q_count);
  for (ActionIndex a = 0; a < q_count; ++a) {
    std::tie(out.guess[a], out.fluency[a]) = enforce_fluency_gap(raw.guess[a], raw.fluency[a], epsilon);
  }
  return out;
}

}  // namespace hpomdp
