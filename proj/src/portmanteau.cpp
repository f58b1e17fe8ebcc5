#include "portes/portmanteau.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace portes {

namespace {

// Omega blocks are on the correlation scale (unit diagonal baseline), so
// an absolute spectral floor is meaningful: eigenvalue estimates below it
// carry more sampling noise than signal and their reciprocals explode.
constexpr double kSpectralFloor = 0.20;

// Lift eigenvalues below the ridge floor; keeps the matrix usable when a
// sample covariance block dips slightly negative at small n.
bool make_positive_definite(Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector ev = es.eigenvalues();
  const double largest = std::max(ev.cwiseAbs().maxCoeff(), 1e-12);
  if (ev.minCoeff() > 1e-10 * largest) return false;
  const double floor_v =
      std::max(1e-8 * a.trace() / static_cast<double>(a.rows()), 1e-10);
  Vector clipped = ev.cwiseMax(floor_v);
  a = es.eigenvectors() * clipped.asDiagonal() *
      es.eigenvectors().transpose();
  a = 0.5 * (a + a.transpose());
  return true;
}

int adjusted_df(int raw, bool* flagged) {
  if (raw >= 1) return raw;
  *flagged = true;
  return 1;
}

TestResult finish(TestId id, int m, double stat, int df, bool omega_reg,
                  bool df_adj) {
  TestResult r;
  r.id = id;
  r.m = m;
  r.statistic = std::max(stat, 0.0);
  r.df = df;
  r.p_value = chi_square_sf(r.statistic, df);
  r.omega_regularized = omega_reg;
  r.df_adjusted = df_adj;
  return r;
}

const Vector& pick(const CorrelationSet& rset, std::pair<int, int> pair) {
  if (pair == std::make_pair(1, 1)) return rset.r11;
  if (pair == std::make_pair(2, 2)) return rset.r22;
  if (pair == std::make_pair(1, 2)) return rset.r12;
  if (pair == std::make_pair(2, 1)) return rset.r21;
  throw std::domain_error("unknown correlation pair");
}

}  // namespace

std::string to_string(TestId id) {
  switch (id) {
    case TestId::Q11: return "Q11";
    case TestId::Q22: return "Q22";
    case TestId::Q12: return "Q12";
    case TestId::Q21: return "Q21";
    case TestId::WL: return "WL";
    case TestId::Cdot12: return "Cdot12";
    case TestId::Cdot21: return "Cdot21";
    case TestId::C12: return "C12";
    case TestId::C21: return "C21";
  }
  throw std::logic_error("unknown test id");
}

TestId test_id_from_string(const std::string& name) {
  static const std::map<std::string, TestId> ids = {
      {"Q11", TestId::Q11},       {"Q22", TestId::Q22},
      {"Q12", TestId::Q12},       {"Q21", TestId::Q21},
      {"WL", TestId::WL},         {"Cdot12", TestId::Cdot12},
      {"Cdot21", TestId::Cdot21}, {"C12", TestId::C12},
      {"C21", TestId::C21}};
  const auto it = ids.find(name);
  if (it == ids.end())
    throw std::invalid_argument("unknown test id: " + name);
  return it->second;
}

Matrix x_block(const FittedModel& fitted, int r, int s, int m) {
  const long n = fitted.eps.size();
  if (m >= n) throw std::domain_error("x_block: need m < n");
  const int l = static_cast<int>(fitted.dmu.cols());
  Matrix x = Matrix::Zero(m, l);

  for (int k = 1; k <= m; ++k) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(l);
    for (long t = k; t < n; ++t) {
      if (r == 1 && s == 1) {
        acc += fitted.dmu.row(t) / std::sqrt(fitted.h[t]) * fitted.xi[t - k];
      } else if (r == 2 && s == 2) {
        acc += fitted.dh.row(t) / fitted.h[t] *
               (fitted.xi[t - k] * fitted.xi[t - k] - 1.0);
      } else if (r == 1 && s == 2) {
        acc += fitted.dmu.row(t) / std::sqrt(fitted.h[t]) *
               (fitted.xi[t - k] * fitted.xi[t - k] - 1.0);
      } else if (r == 2 && s == 1) {
        acc += fitted.dmu.row(t - k) / std::sqrt(fitted.h[t - k]) *
               (fitted.xi[t] * fitted.xi[t] - 1.0);
      } else {
        throw std::domain_error("x_block: powers must be 1 or 2");
      }
    }
    x.row(k - 1) = acc / static_cast<double>(n);
  }
  return x;
}

OmegaMatrix omega_matrix(const FittedModel& fitted, std::pair<int, int> rs,
                         int m, const SigmaScaling& scaling) {
  if (rs != std::make_pair(1, 2) && rs != std::make_pair(2, 1))
    throw std::domain_error("omega_matrix: rs must be (1,2) or (2,1)");
  const Matrix& sinv = fitted.sigma_inv;
  const Matrix eye = Matrix::Identity(m, m);

  Matrix b1 = eye, b2 = eye, b3 = eye;
  const Matrix x11 = x_block(fitted, 1, 1, m);
  b1 -= x11 * sinv * x11.transpose();

  if (!fitted.spec.constant_variance()) {
    double s2;
    if (scaling.gaussian_limits) {
      s2 = 2.0;
    } else {
      s2 = sigma2_hat(fitted.xi);
    }
    const Matrix x22 = x_block(fitted, 2, 2, m);
    b2 -= (1.0 / (s2 * s2)) * x22 * sinv * x22.transpose();
    const Matrix xrs = x_block(fitted, rs.first, rs.second, m);
    b3 -= (1.0 / s2) * xrs * sinv * xrs.transpose();
  }
  // constant-variance fits: X22 and X_rs are treated as structurally zero,
  // leaving blocks 2 and 3 at the identity

  OmegaMatrix out;
  out.rs = rs;
  out.value = Matrix::Zero(3 * m, 3 * m);
  out.value.block(0, 0, m, m) = 0.5 * (b1 + b1.transpose());
  out.value.block(m, m, m, m) = 0.5 * (b2 + b2.transpose());
  out.value.block(2 * m, 2 * m, m, m) = 0.5 * (b3 + b3.transpose());
  out.regularized = make_positive_definite(out.value);
  return out;
}

TestResult q_statistic(const CorrelationSet& rset, std::pair<int, int> pair,
                       int mean_df) {
  const Vector& r = pick(rset, pair);
  const double n = static_cast<double>(rset.n);
  double stat = 0.0;
  for (int k = 1; k <= rset.m; ++k)
    stat += r[k - 1] * r[k - 1] / (n - k);
  stat *= n * (n + 2.0);

  TestId id;
  int df = rset.m;
  bool df_adj = false;
  if (pair == std::make_pair(1, 1)) {
    id = TestId::Q11;
    df = adjusted_df(rset.m - mean_df, &df_adj);
  } else if (pair == std::make_pair(2, 2)) {
    id = TestId::Q22;
  } else if (pair == std::make_pair(1, 2)) {
    id = TestId::Q12;
  } else {
    id = TestId::Q21;
  }
  return finish(id, rset.m, stat, df, false, df_adj);
}

namespace {

TestResult wl_statistic_impl(const FittedModel& fitted,
                             const CorrelationSet& rset) {
  const int m = rset.m;
  const double n = static_cast<double>(rset.n);
  const Matrix eye = Matrix::Identity(m, m);

  Matrix b2 = eye;
  if (!fitted.spec.constant_variance()) {
    const Matrix x22 = x_block(fitted, 2, 2, m);
    b2 -= 0.25 * x22 * fitted.sigma_inv * x22.transpose();
    b2 = 0.5 * (b2 + b2.transpose());
  }
  // same spectral-floor guard as the C statistics: the weight block can
  // dip indefinite in sample, and reciprocals of near-zero eigenvalues
  // would dominate the quadratic form
  Eigen::SelfAdjointEigenSolver<Matrix> es(b2);
  const Vector ev = es.eigenvalues();
  const Vector proj = es.eigenvectors().transpose() * rset.r22;
  bool reg = false;
  double stat = n * rset.r11.squaredNorm();
  for (int i = 0; i < m; ++i) {
    if (ev[i] < kSpectralFloor) {
      reg = true;
      continue;
    }
    stat += n * proj[i] * proj[i] / ev[i];
  }

  bool df_adj = false;
  const int df = adjusted_df(2 * m - fitted.spec.mean_df(), &df_adj);
  return finish(TestId::WL, m, stat, df, reg, df_adj);
}

TestResult c_statistic_impl(const FittedModel& fitted,
                            const CorrelationSet& raw,
                            std::pair<int, int> rs, bool standardized,
                            const SigmaScaling& scaling) {
  const int m = raw.m;
  const double n = static_cast<double>(raw.n);
  const CorrelationSet rset = standardized ? standardize(raw) : raw;

  Vector stacked(3 * m);
  stacked << rset.r11, rset.r22, pick(rset, rs);

  OmegaMatrix omega = omega_matrix(fitted, rs, m, scaling);

  // Estimating the p+q ARMA coefficients annihilates as many directions of
  // the residual autocorrelations, so Omega has that many eigenvalues near
  // zero (the same reduction the chi-squared df applies). Invert on the
  // complement of those directions: a rank-truncated pseudo-inverse. Any
  // further eigenvalue below the spectral floor is a sampling artifact of a
  // genuinely small variance (the estimate can even dip negative); those
  // directions are dropped too rather than letting 1/lambda explode.
  Eigen::SelfAdjointEigenSolver<Matrix> es(omega.value);
  const Vector ev = es.eigenvalues();  // ascending
  const Vector proj = es.eigenvectors().transpose() * stacked;
  const int drop = std::min(fitted.spec.mean_df(), 3 * m - 1);
  bool floored = false;
  double stat = 0.0;
  for (int i = drop; i < 3 * m; ++i) {
    if (ev[i] < kSpectralFloor) {
      floored = true;
      continue;
    }
    stat += n * proj[i] * proj[i] / ev[i];
  }

  bool df_adj = false;
  const int df = adjusted_df(3 * m - fitted.spec.mean_df(), &df_adj);
  const TestId id = rs == std::make_pair(1, 2)
                        ? (standardized ? TestId::C12 : TestId::Cdot12)
                        : (standardized ? TestId::C21 : TestId::Cdot21);
  return finish(id, m, stat, df, omega.regularized || floored, df_adj);
}

}  // namespace

TestResult wl_statistic(const FittedModel& fitted, int m) {
  const CorrelationSet rset = correlation_set(fitted.xi, m);
  return wl_statistic_impl(fitted, rset);
}

TestResult c_statistic(const FittedModel& fitted, std::pair<int, int> rs,
                       int m, bool standardized, const SigmaScaling& scaling) {
  const CorrelationSet rset = correlation_set(fitted.xi, m);
  return c_statistic_impl(fitted, rset, rs, standardized, scaling);
}

std::vector<TestResult> run_battery(const FittedModel& fitted,
                                    const std::vector<int>& m_list,
                                    const std::vector<TestId>& tests,
                                    const SigmaScaling& scaling) {
  std::vector<TestResult> out;
  const int mean_df = fitted.spec.mean_df();
  for (int m : m_list) {
    const CorrelationSet rset = correlation_set(fitted.xi, m);
    for (TestId id : tests) {
      switch (id) {
        case TestId::Q11:
          out.push_back(q_statistic(rset, {1, 1}, mean_df));
          break;
        case TestId::Q22:
          out.push_back(q_statistic(rset, {2, 2}, mean_df));
          break;
        case TestId::Q12:
          out.push_back(q_statistic(rset, {1, 2}, mean_df));
          break;
        case TestId::Q21:
          out.push_back(q_statistic(rset, {2, 1}, mean_df));
          break;
        case TestId::WL:
          out.push_back(wl_statistic_impl(fitted, rset));
          break;
        case TestId::Cdot12:
          out.push_back(c_statistic_impl(fitted, rset, {1, 2}, false, scaling));
          break;
        case TestId::Cdot21:
          out.push_back(c_statistic_impl(fitted, rset, {2, 1}, false, scaling));
          break;
        case TestId::C12:
          out.push_back(c_statistic_impl(fitted, rset, {1, 2}, true, scaling));
          break;
        case TestId::C21:
          out.push_back(c_statistic_impl(fitted, rset, {2, 1}, true, scaling));
          break;
      }
    }
  }
  return out;
}

nlohmann::json to_json(const TestResult& r) {
  return {{"test", to_string(r.id)},
          {"m", r.m},
          {"statistic", r.statistic},
          {"df", r.df},
          {"p_value", r.p_value},
          {"omega_regularized", r.omega_regularized},
          {"df_adjusted", r.df_adjusted}};
}

nlohmann::json to_json(const std::vector<TestResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  return arr;
}

std::string format_table(const std::vector<TestResult>& results) {
  std::vector<int> ms;
  std::vector<TestId> ids;
  for (const auto& r : results) {
    if (std::find(ms.begin(), ms.end(), r.m) == ms.end()) ms.push_back(r.m);
    if (std::find(ids.begin(), ids.end(), r.id) == ids.end())
      ids.push_back(r.id);
  }
  std::sort(ms.begin(), ms.end());

  std::ostringstream os;
  os << std::setw(4) << "m";
  for (TestId id : ids) os << std::setw(9) << to_string(id);
  os << '\n';
  for (int m : ms) {
    os << std::setw(4) << m;
    for (TestId id : ids) {
      double p = std::nan("");
      for (const auto& r : results)
        if (r.m == m && r.id == id) p = r.p_value;
      os << std::setw(9) << std::fixed << std::setprecision(4) << p;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace portes
