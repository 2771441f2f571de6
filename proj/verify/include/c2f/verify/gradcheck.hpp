#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "c2f/tape.hpp"

namespace c2f::verify {

struct GradcheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  double min_grad = 1e-6;
  int max_elements = 48;  // sampled per input tensor
  std::uint64_t seed = 11;
};

struct GradcheckReport {
  std::string name;
  int checked = 0;
  int nondifferentiable = 0;  // finite differences straddle a kink at every step size
  double max_rel_error = 0;
  std::string worst;

  bool passed(double tolerance = 1e-3) const {
    return checked > 0 && max_rel_error < tolerance && nondifferentiable * 10 <= checked;
  }
};

using GradInputs = std::vector<std::pair<std::string, Tensor<double>*>>;

/// Builds the graph on a fresh tape; inputs must be bound with tape.param().
using GraphBuilder = std::function<Var<double>(Tape<double>&)>;

/// Checks d(sum(out * R))/d(input) for a fixed random R against central
/// differences. When the central difference changes between step h and
/// h/10 the step is shrunk; elements that never settle are counted as
/// non-differentiable instead of compared.
GradcheckReport gradcheck(const std::string& name, const GradInputs& inputs,
                          const GraphBuilder& build, const GradcheckOptions& opts = {});

}  // namespace c2f::verify
