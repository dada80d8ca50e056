#include "hpomdp/inference.hpp"

#include <limits>

#include "forward_backward.hpp"
#include "hpomdp/errors.hpp"

namespace hpomdp {
namespace detail {

ForwardPass forward(const HpomdpModel& model, std::size_t pattern, const Trajectory& trajectory) {
  const auto& comp = model.components.at(pattern);
  const std::size_t n = model.space.size();
  const std::size_t steps = trajectory.steps.size();
  ForwardPass fwd;
  fwd.steps = steps;
  fwd.states = n;
  fwd.alpha.assign(steps * n, 0.0);
  fwd.scale.assign(steps, 0.0);

  std::vector<double> predicted(comp.initial);
  for (std::size_t t = 0; t < steps; ++t) {
    const Step& step = trajectory.steps[t];
    if (t > 0) {
      const ActionIndex prev = trajectory.steps[t - 1].action;
      std::fill(predicted.begin(), predicted.end(), 0.0);
      for (StateIndex s = 0; s < n; ++s) {
        const double mass = fwd.alpha[(t - 1) * n + s];
        if (mass == 0.0) continue;
        for (const auto& e : model.transition_row(pattern, prev, s)) {
          predicted[e.to] += mass * e.probability;
        }
      }
    }
    double total = 0.0;
    double* row = &fwd.alpha[t * n];
    for (StateIndex s = 0; s < n; ++s) {
      row[s] = predicted[s] * model.p_observation(step.action, s, step.correct);
      total += row[s];
    }
    fwd.scale[t] = total;
    if (!(total > 0.0)) {
      fwd.feasible = false;
      fwd.log_likelihood = -std::numeric_limits<double>::infinity();
      return fwd;
    }
    for (StateIndex s = 0; s < n; ++s) row[s] /= total;
    fwd.log_likelihood += std::log(total);
  }
  return fwd;
}

std::vector<double> backward(const HpomdpModel& model, std::size_t pattern,
                             const Trajectory& trajectory, const ForwardPass& fwd) {
  const std::size_t n = fwd.states;
  const std::size_t steps = fwd.steps;
  std::vector<double> beta(steps * n, 0.0);
  for (StateIndex s = 0; s < n; ++s) beta[(steps - 1) * n + s] = 1.0;
  std::vector<double> weighted(n);
  for (std::size_t t = steps - 1; t-- > 0;) {
    const Step& next = trajectory.steps[t + 1];
    for (StateIndex s = 0; s < n; ++s) {
      weighted[s] = model.p_observation(next.action, s, next.correct) * beta[(t + 1) * n + s] /
                    fwd.scale[t + 1];
    }
    const ActionIndex a = trajectory.steps[t].action;
    for (StateIndex s = 0; s < n; ++s) {
      double acc = 0.0;
      for (const auto& e : model.transition_row(pattern, a, s)) acc += e.probability * weighted[e.to];
      beta[t * n + s] = acc;
    }
  }
  return beta;
}

}  // namespace detail

namespace {

void check_inputs(const HpomdpModel& model, std::size_t pattern, const Trajectory& trajectory) {
  if (pattern >= model.pattern_count()) {
    throw ContractError("pattern index " + std::to_string(pattern) + " out of range");
  }
  validate_trajectory(trajectory, model.questions);
}

}  // namespace

double sequence_log_likelihood(const HpomdpModel& model, std::size_t pattern,
                               const Trajectory& trajectory) {
  check_inputs(model, pattern, trajectory);
  return detail::forward(model, pattern, trajectory).log_likelihood;
}

PosteriorTables posterior_marginals(const HpomdpModel& model, std::size_t pattern,
                                    const Trajectory& trajectory) {
  check_inputs(model, pattern, trajectory);
  const auto fwd = detail::forward(model, pattern, trajectory);
  PosteriorTables out;
  out.log_likelihood = fwd.log_likelihood;
  out.scaling = fwd.scale;
  if (!fwd.feasible) return out;

  const auto beta = detail::backward(model, pattern, trajectory, fwd);
  const std::size_t n = fwd.states;
  const std::size_t steps = fwd.steps;
  out.gamma.assign(steps, std::vector<double>(n, 0.0));
  for (std::size_t t = 0; t < steps; ++t) {
    for (StateIndex s = 0; s < n; ++s) out.gamma[t][s] = fwd.a(t, s) * beta[t * n + s];
  }
  if (steps > 1) out.xi.assign(steps - 1, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
  for (std::size_t t = 0; t + 1 < steps; ++t) {
    const Step& next = trajectory.steps[t + 1];
    const ActionIndex a = trajectory.steps[t].action;
    for (StateIndex s = 0; s < n; ++s) {
      const double from = fwd.a(t, s);
      if (from == 0.0) continue;
      for (const auto& e : model.transition_row(pattern, a, s)) {
        out.xi[t][s][e.to] += from * e.probability *
                              model.p_observation(next.action, e.to, next.correct) *
                              beta[(t + 1) * n + e.to] / fwd.scale[t + 1];
      }
    }
  }
  return out;
}

}  // namespace hpomdp
