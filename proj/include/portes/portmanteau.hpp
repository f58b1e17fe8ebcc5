#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "portes/correlation.hpp"
#include "portes/estimation.hpp"

namespace portes {

enum class TestId { Q11, Q22, Q12, Q21, WL, Cdot12, Cdot21, C12, C21 };

std::string to_string(TestId id);
TestId test_id_from_string(const std::string& name);

struct TestResult {
  TestId id;
  int m = 0;
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;
  bool omega_regularized = false;
  bool df_adjusted = false;  // adjustment hit the df floor of 1
};

/// Scaling of the squared/cross blocks of the asymptotic covariance: by
/// default the estimated sigma2_hat enters; gaussian_limits pins the
/// factors at their Gaussian values (1/4 and 1/2).
struct SigmaScaling {
  bool gaussian_limits = false;
};

/// Time-average regressor blocks X_rs, one row per lag k = 1..m:
///   X11(k) = n^-1 sum h_t^-1/2 dmu_t xi_{t-k}
///   X22(k) = n^-1 sum h_t^-1   dh_t (xi_{t-k}^2 - 1)
///   X12(k) = n^-1 sum h_t^-1/2 dmu_t (xi_{t-k}^2 - 1)
///   X21(k) = n^-1 sum h_{t-k}^-1/2 dmu_{t-k} (xi_t^2 - 1)
Matrix x_block(const FittedModel& fitted, int r, int s, int m);

struct OmegaMatrix {
  Matrix value;  // 3m x 3m block diagonal
  std::pair<int, int> rs;
  bool regularized = false;
};

/// Block-diagonal covariance estimate of the stacked correlation vectors
/// (R11, R22, R_rs). Constant-variance fits use the convention X22 = 0 and
/// X_rs = 0, so their second and third blocks are exactly the identity.
/// Eigenvalues below the ridge floor are lifted to it and flagged.
OmegaMatrix omega_matrix(const FittedModel& fitted, std::pair<int, int> rs,
                         int m, const SigmaScaling& scaling = {});

/// Ljung-Box / McLeod-Li style statistic
/// Q_rs = n (n+2) sum_k (n-k)^-1 r_rs(k)^2. The (1,1) pair loses the
/// fitted ARMA order from its degrees of freedom.
TestResult q_statistic(const CorrelationSet& rset, std::pair<int, int> pair,
                       int mean_df);

/// Quadratic form in (R11, R22) with weight blkdiag(I, I - X22 S X22'/4).
TestResult wl_statistic(const FittedModel& fitted, int m);

/// Mixed portmanteau statistic n R' Omega^+ R on the stacked
/// (R11, R22, R_rs); standardized = true uses the Ljung-Box scaled
/// correlations. Omega^+ is the rank-truncated pseudo-inverse that drops
/// the p+q smallest eigenvalues — the directions annihilated by ARMA
/// coefficient estimation, whose sample eigenvalues sit at (or slightly
/// below) zero. df = 3m - (p+q) matches the retained rank.
TestResult c_statistic(const FittedModel& fitted, std::pair<int, int> rs,
                       int m, bool standardized,
                       const SigmaScaling& scaling = {});

/// Every requested test at every requested lag, sharing one
/// CorrelationSet per lag.
std::vector<TestResult> run_battery(const FittedModel& fitted,
                                    const std::vector<int>& m_list,
                                    const std::vector<TestId>& tests,
                                    const SigmaScaling& scaling = {});

nlohmann::json to_json(const TestResult& result);
nlohmann::json to_json(const std::vector<TestResult>& results);

/// Aligned p-value table: one row per lag m, one column per test.
std::string format_table(const std::vector<TestResult>& results);

}  // namespace portes
