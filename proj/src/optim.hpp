#pragma once

#include <functional>

#include "portes/numeric.hpp"

namespace portes::detail {

struct OptimResult {
  Vector x;
  double f = 0.0;
  Vector grad;
  int iterations = 0;
  bool converged = false;  // gradient tolerance reached
};

struct OptimOptions {
  int max_iter = 400;
  double grad_tol = 1e-9;  // infinity norm of the gradient
  double step_tol = 1e-12;
};

/// Minimizes f with a dense BFGS update and Armijo backtracking line
/// search. fn must fill grad with the gradient at x and return f(x).
OptimResult minimize_bfgs(
    const std::function<double(const Vector& x, Vector& grad)>& fn,
    const Vector& x0, const OptimOptions& opts = {});

}  // namespace portes::detail
