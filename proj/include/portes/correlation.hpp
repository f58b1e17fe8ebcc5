#pragma once

#include <iosfwd>
#include <optional>

#include "portes/numeric.hpp"

namespace portes {

/// Auto- and cross-correlations of standardized residuals at powers
/// (1,1), (2,2), (1,2), (2,1), lags 1..m, plus the fourth-moment scale
/// sigma2_hat = n^-1 sum (xi_t^2 - mean(xi^2))^2.
struct CorrelationSet {
  int m = 0;
  Vector r11, r22, r12, r21;
  double sigma2_hat = 0.0;
  std::size_t n = 0;
};

/// n^-1 sum (xi_t^2 - mean(xi^2))^2, the sample estimate of E(xi^4) - 1.
/// Throws on degenerate input (constant xi^2).
double sigma2_hat(const Vector& xi);

/// Simplified correlation estimators on standardized residuals:
///   r11(k) = n^-1 sum xi_t xi_{t-k}
///   r22(k) = (n sigma^2)^-1 sum (xi_t^2 - 1)(xi_{t-k}^2 - 1)
///   r12(k) = (n sigma)^-1  sum xi_t (xi_{t-k}^2 - 1)
///   r21(k) = (n sigma)^-1  sum (xi_t^2 - 1) xi_{t-k}
/// Sums run over t = k+1..n. sigma2_override fixes sigma^2 (e.g. at its
/// Gaussian limit 2) instead of estimating it.
Vector cross_correlation(const Vector& xi, int r, int s, int m,
                         std::optional<double> sigma2_override = {});

CorrelationSet correlation_set(const Vector& xi, int m,
                               std::optional<double> sigma2_override = {});

/// Ljung-Box style standardization r~(k) = sqrt((n+2)/(n-k)) r(k).
CorrelationSet standardize(const CorrelationSet& rset);

/// General mean-subtracted sample cross-correlation between x^r at t and
/// x^s at t-k; accepts negative k through the reflection
/// gamma_rs(-k) = gamma_sr(k). Exploratory companion to the simplified
/// estimators above.
double generalized_correlation(const Vector& x, int r, int s, int k);

/// CSV export: lag, r11, r22, r12, r21.
void write_csv(const CorrelationSet& rset, std::ostream& os);

}  // namespace portes
