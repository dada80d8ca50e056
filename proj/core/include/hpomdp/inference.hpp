#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hpomdp/domain.hpp"

namespace hpomdp {

// State posteriors of one trajectory under one pattern component.
//   gamma[t][s]     = P(s_t = s | O, A, m_j)
//   xi[t][s][s']    = P(s_t = s, s_{t+1} = s' | O, A, m_j), t < T - 1
//   scaling[t]      = per-step normalizer of the forward pass; log_likelihood = sum of logs
// When the trajectory is impossible under the component, log_likelihood is -inf and the
// tables are left empty.
struct PosteriorTables {
  std::vector<std::vector<double>> gamma;
  std::vector<std::vector<std::vector<double>>> xi;
  double log_likelihood = 0.0;
  std::vector<double> scaling;

  bool feasible() const noexcept { return std::isfinite(log_likelihood); }
};

// log P(O | m_j, A) with per-step rescaling. Returns -inf for impossible trajectories.
// Throws ContractError for an empty trajectory or an action outside the catalog.
double sequence_log_likelihood(const HpomdpModel& model, std::size_t pattern,
                               const Trajectory& trajectory);

PosteriorTables posterior_marginals(const HpomdpModel& model, std::size_t pattern,
                                    const Trajectory& trajectory);

}  // namespace hpomdp
