#pragma once

#include <string>
#include <vector>

#include "lgn/tensor.hpp"

namespace lgn {

struct GradCheckResult {
  std::string name;
  double max_relative_error = 0.0;
};

// Finite-difference verification of every differentiable core operation on
// random inputs, per seed.
std::vector<GradCheckResult> core_op_gradient_suite(std::uint64_t seed);

// The same check through the whole pipeline: encoder, visual head, fusion,
// localizer and loss on a tiny configuration, one result per parameter.
std::vector<GradCheckResult> full_model_gradient_suite(std::uint64_t seed);

}  // namespace lgn
