#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "portes/correlation.hpp"
#include "portes/numeric.hpp"

using namespace portes;

namespace {

Vector draws(std::uint64_t stream, std::size_t n, const Innovation& law) {
  RngStream rng(314, stream);
  auto v = rng.draw_n(law, n);
  return Eigen::Map<const Vector>(v.data(), v.size());
}

// brute-force recomputation of the four simplified estimators
double brute(const Vector& xi, int r, int s, int k, double s2) {
  const int n = static_cast<int>(xi.size());
  const double sig = std::sqrt(s2);
  double acc = 0.0;
  for (int t = k; t < n; ++t) {
    const double a = r == 1 ? xi[t] : xi[t] * xi[t] - 1.0;
    const double b = s == 1 ? xi[t - k] : xi[t - k] * xi[t - k] - 1.0;
    acc += a * b;
  }
  double scale = n;
  if (r == 2) scale *= sig;
  if (s == 2) scale *= sig;
  return acc / scale;
}

}  // namespace

TEST_CASE("alternating series hand value") {
  Vector xi(4);
  xi << 1.0, -1.0, 1.0, -1.0;
  Vector r = cross_correlation(xi, 1, 1, 1);
  CHECK(r[0] == doctest::Approx(-0.75));
}

TEST_CASE("iid residual correlations stay in the null band") {
  const int n = 10000;
  Vector xi = draws(1, n, Innovation{Law::Normal});
  auto rset = correlation_set(xi, 10);
  const double bound = 5.0 / std::sqrt(static_cast<double>(n));
  CHECK(rset.r11.cwiseAbs().maxCoeff() < bound);
  CHECK(rset.r22.cwiseAbs().maxCoeff() < bound);
  CHECK(rset.r12.cwiseAbs().maxCoeff() < bound);
  CHECK(rset.r21.cwiseAbs().maxCoeff() < bound);
}

TEST_CASE("time reversal swaps the cross estimators") {
  Vector xi = draws(2, 500, Innovation{Law::StudentT, 8.0});
  Vector rev = xi.reverse();
  for (int k = 1; k <= 6; ++k) {
    const double r12 = cross_correlation(xi, 1, 2, k)[k - 1];
    const double r21r = cross_correlation(rev, 2, 1, k)[k - 1];
    CHECK(std::fabs(r12 - r21r) < 1e-12);
  }
}

TEST_CASE("ljung-box standardization") {
  CorrelationSet rset;
  rset.m = 1;
  rset.n = 100;
  rset.r11 = rset.r22 = rset.r12 = rset.r21 = Vector::Constant(1, 0.1);
  auto st = standardize(rset);
  CHECK(st.r11[0] == doctest::Approx(0.10150).epsilon(1e-4));
  CHECK(st.r11[0] > rset.r11[0]);  // factor exceeds one at every lag

  rset.r11.setZero();
  auto z = standardize(rset);
  CHECK(z.r11[0] == 0.0);
}

TEST_CASE("sigma2_hat oracles") {
  Vector g = draws(3, 100000, Innovation{Law::Normal});
  CHECK(std::fabs(sigma2_hat(g) - 2.0) < 0.1);

  // standardized t(10): E xi^4 = 3 (df-2)/(df-4) = 4, so sigma2 -> 3
  Vector t10 = draws(4, 100000, Innovation{Law::StudentT, 10.0});
  CHECK(sigma2_hat(t10) == doctest::Approx(3.0).epsilon(0.15));

  Vector flat = Vector::Constant(50, 1.0);
  CHECK_THROWS_AS(sigma2_hat(flat), std::domain_error);
}

TEST_CASE("generalized correlation: lag zero and reflection") {
  Vector x = draws(5, 400, Innovation{Law::Normal});
  CHECK(generalized_correlation(x, 1, 1, 0) == doctest::Approx(1.0));
  CHECK(generalized_correlation(x, 2, 2, 0) == doctest::Approx(1.0));
  for (int k = 1; k <= 5; ++k) {
    CHECK(generalized_correlation(x, 1, 2, -k) ==
          doctest::Approx(generalized_correlation(x, 2, 1, k)).epsilon(1e-12));
    CHECK(generalized_correlation(x, 1, 1, -k) ==
          doctest::Approx(generalized_correlation(x, 1, 1, k)).epsilon(1e-12));
  }
}

TEST_CASE("simplified and general estimators agree on standardized input") {
  const int n = 2000;
  Vector xi = draws(6, n, Innovation{Law::Normal});
  // enforce exact mean zero / unit variance so the simplified forms apply
  xi.array() -= xi.mean();
  xi /= std::sqrt(xi.squaredNorm() / n);
  auto rset = correlation_set(xi, 8);
  for (int k = 1; k <= 8; ++k) {
    CHECK(std::fabs(rset.r11[k - 1] - generalized_correlation(xi, 1, 1, k)) <
          5.0 / n);
    CHECK(std::fabs(rset.r22[k - 1] - generalized_correlation(xi, 2, 2, k)) <
          5.0 / n);
    CHECK(std::fabs(rset.r12[k - 1] - generalized_correlation(xi, 1, 2, k)) <
          5.0 / n);
    CHECK(std::fabs(rset.r21[k - 1] - generalized_correlation(xi, 2, 1, k)) <
          5.0 / n);
  }
}

TEST_CASE("brute force recomputation at 1e-15") {
  Vector xi = draws(7, 300, Innovation{Law::SkewNormal, 10.0, 3.0});
  auto rset = correlation_set(xi, 12);
  const double s2 = sigma2_hat(xi);
  CHECK(rset.sigma2_hat == doctest::Approx(s2).epsilon(1e-14));
  for (int k = 1; k <= 12; ++k) {
    CHECK(std::fabs(rset.r11[k - 1] - brute(xi, 1, 1, k, s2)) < 1e-14);
    CHECK(std::fabs(rset.r22[k - 1] - brute(xi, 2, 2, k, s2)) < 1e-14);
    CHECK(std::fabs(rset.r12[k - 1] - brute(xi, 1, 2, k, s2)) < 1e-14);
    CHECK(std::fabs(rset.r21[k - 1] - brute(xi, 2, 1, k, s2)) < 1e-14);
  }
}

TEST_CASE("sigma2 override replaces the estimate") {
  Vector xi = draws(8, 400, Innovation{Law::Normal});
  auto est = correlation_set(xi, 3);
  auto fixed = correlation_set(xi, 3, 2.0);
  CHECK(fixed.sigma2_hat == 2.0);
  const double ratio = est.sigma2_hat / 2.0;
  for (int k = 0; k < 3; ++k) {
    CHECK(fixed.r22[k] == doctest::Approx(est.r22[k] * ratio).epsilon(1e-12));
    CHECK(fixed.r12[k] ==
          doctest::Approx(est.r12[k] * std::sqrt(ratio)).epsilon(1e-12));
  }
}

TEST_CASE("argument validation") {
  Vector xi = draws(9, 20, Innovation{Law::Normal});
  CHECK_THROWS(cross_correlation(xi, 1, 1, 0));
  CHECK_THROWS(cross_correlation(xi, 1, 1, 20));
  CHECK_THROWS(cross_correlation(xi, 3, 1, 2));
  CHECK_NOTHROW(cross_correlation(xi, 1, 1, 19));
}

TEST_CASE("csv export shape") {
  Vector xi = draws(10, 100, Innovation{Law::Normal});
  auto rset = correlation_set(xi, 4);
  std::ostringstream os;
  write_csv(rset, os);
  const std::string text = os.str();
  CHECK(text.rfind("lag,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 4 lags
}
