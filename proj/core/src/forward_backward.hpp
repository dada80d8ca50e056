#pragma once

// Scaled forward-backward recursions shared by inference and learning.

#include <cstddef>
#include <vector>

#include "hpomdp/domain.hpp"

namespace hpomdp::detail {

struct ForwardPass {
  std::size_t steps = 0;
  std::size_t states = 0;
  std::vector<double> alpha;  // [t * states + s], each row normalized
  std::vector<double> scale;  // c_t
  double log_likelihood = 0.0;
  bool feasible = true;

  double a(std::size_t t, std::size_t s) const { return alpha[t * states + s]; }
};

ForwardPass forward(const HpomdpModel& model, std::size_t pattern, const Trajectory& trajectory);

// Scaled backward variables matching `fwd`; requires fwd.feasible.
std::vector<double> backward(const HpomdpModel& model, std::size_t pattern,
                             const Trajectory& trajectory, const ForwardPass& fwd);

}  // namespace hpomdp::detail
