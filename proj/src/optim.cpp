#include "optim.hpp"

#include <cmath>
#include <limits>

namespace portes::detail {

OptimResult minimize_bfgs(
    const std::function<double(const Vector& x, Vector& grad)>& fn,
    const Vector& x0, const OptimOptions& opts) {
  const Eigen::Index d = x0.size();
  OptimResult res;
  res.x = x0;
  res.grad = Vector::Zero(d);
  res.f = fn(res.x, res.grad);

  Matrix hinv = Matrix::Identity(d, d);
  Vector g_new = Vector::Zero(d);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    res.iterations = iter;
    if (res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      return res;
    }

    Vector dir = -(hinv * res.grad);
    double slope = dir.dot(res.grad);
    if (!(slope < 0.0)) {  // reset on loss of descent direction
      hinv.setIdentity();
      dir = -res.grad;
      slope = dir.dot(res.grad);
    }

    // Armijo backtracking
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Vector x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = fn(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step * dir.lpNorm<Eigen::Infinity>() < opts.step_tol) break;
    }
    if (!accepted) {
      // no further progress possible along any tried step
      res.converged = res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol;
      return res;
    }

    const Vector s = x_new - res.x;
    const Vector y = g_new - res.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Vector hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }

    res.x = x_new;
    res.f = f_new;
    res.grad = g_new;
  }
  res.converged = res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol;
  return res;
}

}  // namespace portes::detail
