#pragma once

#include <string>

#include "json.hpp"
#include "portes/dgp.hpp"
#include "portes/numeric.hpp"

namespace portes {

/// Null-model family fitted by Gaussian QMLE: ARMA(p, q) conditional mean
/// (optional intercept) with constant, ARCH(b) or GARCH(b, a) conditional
/// variance. Parameter vector layout:
///   [intercept] [phi_1..phi_p] [theta_1..theta_q]
///   [sigma2]                       when b = a = 0
///   [omega] [alpha_1..b] [beta_1..a]  otherwise
struct ModelSpec {
  int p = 0, q = 0;
  bool intercept = false;
  int b = 0, a = 0;

  bool constant_variance() const { return b == 0 && a == 0; }
  int mean_params() const { return (intercept ? 1 : 0) + p + q; }
  int var_params() const { return constant_variance() ? 1 : 1 + b + a; }
  int n_params() const { return mean_params() + var_params(); }
  /// ARMA order count used in degrees-of-freedom adjustments; intercept
  /// and variance parameters never count.
  int mean_df() const { return p + q; }

  std::string to_string() const;
};

ModelSpec model_spec_from_string(const std::string& text);

struct FilterOutput {
  Vector eps;  // residuals
  Vector h;    // conditional variances
  Vector xi;   // standardized residuals eps / sqrt(h)
  double loglik = 0.0;
};

/// Forward mean/variance recursion under the presample convention
/// (z, eps presample zero; h presample at the implied unconditional
/// variance). Throws std::domain_error when theta violates the
/// positivity / stationarity constraints.
FilterOutput filter(const ModelSpec& spec, const Vector& theta,
                    const TimeSeries& series);

struct Derivatives {
  Matrix dmu;  // n x l gradients of mu_t
  Matrix dh;   // n x l gradients of h_t
};

/// Analytic forward-recursion gradients of mu_t and h_t in theta,
/// differentiating the filter exactly as implemented (including the
/// parameter dependence of the presample variance).
Derivatives model_derivatives(const ModelSpec& spec, const Vector& theta,
                              const TimeSeries& series);

struct FittedModel {
  ModelSpec spec;
  Vector theta;
  Vector eps, h, xi;
  double loglik = 0.0;
  Matrix sigma;      // per-observation information matrix estimate
  Matrix sigma_inv;  // its (possibly regularized) inverse
  Matrix dmu, dh;    // n x l gradients at theta
  bool converged = false;
  bool boundary = false;           // solution at the constraint boundary
  bool sigma_regularized = false;  // ridge applied when inverting sigma
  int iterations = 0;

  std::size_t n() const { return static_cast<std::size_t>(eps.size()); }
};

struct FitOptions {
  int max_iter = 400;
  /// Converged when ||grad loglik||_inf / n <= scale * max(1, |loglik| / n).
  double grad_tol_scale = 1e-5;
};

/// Gaussian quasi-maximum likelihood fit. Pure-AR constant-variance
/// models are solved in closed form (least squares); everything else runs
/// BFGS on an unconstrained reparameterization.
FittedModel fit_qmle(const ModelSpec& spec, const TimeSeries& series,
                     const FitOptions& options = {});

/// Score of the Gaussian log-likelihood at theta.
Vector score(const ModelSpec& spec, const Vector& theta,
             const TimeSeries& series);

/// Conditional-expectation information estimate
/// n^-1 sum_t [ dh dh' / (2 h^2) + dmu dmu' / h ].
Matrix information_matrix(const Vector& h, const Matrix& dmu,
                          const Matrix& dh);

/// BIC scan over AR(p), p in {0, ..., floor(8 (n/100)^(1/4))}, intercept
/// included; ties break toward smaller p.
int select_order_bic(const TimeSeries& series);

nlohmann::json to_json(const FittedModel& fit);

}  // namespace portes
