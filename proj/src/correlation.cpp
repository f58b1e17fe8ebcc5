#include "portes/correlation.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace portes {

double sigma2_hat(const Vector& xi) {
  const std::size_t n = static_cast<std::size_t>(xi.size());
  if (n == 0) throw std::domain_error("sigma2_hat: empty input");
  double mean_sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) mean_sq += xi[t] * xi[t];
  mean_sq /= static_cast<double>(n);
  double s = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double d = xi[t] * xi[t] - mean_sq;
    s += d * d;
  }
  s /= static_cast<double>(n);
  if (!(s > 0.0))
    throw std::domain_error("sigma2_hat: degenerate input (xi^2 constant)");
  return s;
}

Vector cross_correlation(const Vector& xi, int r, int s, int m,
                         std::optional<double> sigma2_override) {
  const long n = xi.size();
  if (m >= n) throw std::domain_error("cross_correlation: need m < n");
  if (m < 1) throw std::domain_error("cross_correlation: need m >= 1");
  if ((r != 1 && r != 2) || (s != 1 && s != 2))
    throw std::domain_error("cross_correlation: powers must be 1 or 2");

  const bool needs_sigma = r == 2 || s == 2;
  double sig2 = 0.0, sig = 0.0;
  if (needs_sigma) {
    sig2 = sigma2_override ? *sigma2_override : sigma2_hat(xi);
    sig = std::sqrt(sig2);
  }

  Vector out(m);
  for (int k = 1; k <= m; ++k) {
    double sum = 0.0;
    for (long t = k; t < n; ++t) {
      const double at = r == 1 ? xi[t] : xi[t] * xi[t] - 1.0;
      const double bt =
          s == 1 ? xi[t - k] : xi[t - k] * xi[t - k] - 1.0;
      sum += at * bt;
    }
    double scale = static_cast<double>(n);
    if (r == 2 && s == 2)
      scale *= sig2;
    else if (r == 2 || s == 2)
      scale *= sig;
    out[k - 1] = sum / scale;
  }
  return out;
}

CorrelationSet correlation_set(const Vector& xi, int m,
                               std::optional<double> sigma2_override) {
  CorrelationSet rs;
  rs.m = m;
  rs.n = static_cast<std::size_t>(xi.size());
  rs.sigma2_hat = sigma2_override ? *sigma2_override : sigma2_hat(xi);
  rs.r11 = cross_correlation(xi, 1, 1, m, rs.sigma2_hat);
  rs.r22 = cross_correlation(xi, 2, 2, m, rs.sigma2_hat);
  rs.r12 = cross_correlation(xi, 1, 2, m, rs.sigma2_hat);
  rs.r21 = cross_correlation(xi, 2, 1, m, rs.sigma2_hat);
  return rs;
}

CorrelationSet standardize(const CorrelationSet& rset) {
  CorrelationSet out = rset;
  const double n = static_cast<double>(rset.n);
  for (int k = 1; k <= rset.m; ++k) {
    const double f = std::sqrt((n + 2.0) / (n - k));
    out.r11[k - 1] *= f;
    out.r22[k - 1] *= f;
    out.r12[k - 1] *= f;
    out.r21[k - 1] *= f;
  }
  return out;
}

double generalized_correlation(const Vector& x, int r, int s, int k) {
  if (k < 0) return generalized_correlation(x, s, r, -k);
  const long n = x.size();
  if (k >= n) throw std::domain_error("generalized_correlation: lag too large");

  const auto pow_mean = [&](int e) {
    double m = 0.0;
    for (long t = 0; t < n; ++t) m += e == 1 ? x[t] : x[t] * x[t];
    return m / static_cast<double>(n);
  };
  const double mr = pow_mean(r), ms = pow_mean(s);

  const auto gamma = [&](int a, int b, double ma, double mb, int lag) {
    double g = 0.0;
    for (long t = lag; t < n; ++t) {
      const double xa = a == 1 ? x[t] : x[t] * x[t];
      const double xb = b == 1 ? x[t - lag] : x[t - lag] * x[t - lag];
      g += (xa - ma) * (xb - mb);
    }
    return g / static_cast<double>(n);
  };

  const double g_rs = gamma(r, s, mr, ms, k);
  const double g_rr = gamma(r, r, mr, mr, 0);
  const double g_ss = gamma(s, s, ms, ms, 0);
  if (!(g_rr > 0.0) || !(g_ss > 0.0))
    throw std::domain_error("generalized_correlation: degenerate input");
  return g_rs / (std::sqrt(g_rr) * std::sqrt(g_ss));
}

void write_csv(const CorrelationSet& rset, std::ostream& os) {
  os << "lag,r11,r22,r12,r21\n";
  for (int k = 1; k <= rset.m; ++k)
    os << k << ',' << rset.r11[k - 1] << ',' << rset.r22[k - 1] << ','
       << rset.r12[k - 1] << ',' << rset.r21[k - 1] << '\n';
}

}  // namespace portes
