#pragma once

#include <functional>
#include <vector>

#include "chirpfuse/autodiff.hpp"

namespace chirpfuse {

// Central finite-difference checks of tape gradients. The reported error
// per coordinate is |analytic - numeric| / max(1, |analytic|); the return
// value is the maximum over all checked coordinates.

// f rebuilds the graph from the current value of point and returns a scalar.
// It runs once on a tape (analytic gradient) and twice per coordinate with
// tape = nullptr (perturbed forwards).
double grad_check(const std::function<TensorPtr(Tape*, const TensorPtr&)>& f,
                  const TensorPtr& point, double eps = 1e-4);

// Same check over every element of a set of parameters; forward rebuilds
// the loss from their current values.
double grad_check_params(const std::function<TensorPtr(Tape*)>& forward,
                         const std::vector<TensorPtr>& params, double eps = 1e-4);

} // namespace chirpfuse
