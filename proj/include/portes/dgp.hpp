#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "portes/numeric.hpp"

namespace portes {

struct TimeSeries {
  std::vector<double> values;
  std::vector<std::string> timestamps;  // optional, empty when absent

  std::size_t size() const { return values.size(); }
};

// ---- conditional mean recursions -------------------------------------

struct MeanNone {};

/// ARMA(p, q): mu_t = c + sum phi_i z_{t-i} + sum theta_j eps_{t-j}.
/// Covers pure AR (ma empty) and pure MA (ar empty).
struct MeanArma {
  double intercept = 0.0;
  std::vector<double> ar;
  std::vector<double> ma;
};

/// Two-regime threshold AR; regime 2 is active when z_{t-d} > threshold
/// (strict inequality).
struct MeanTar {
  double intercept1 = 0.0, intercept2 = 0.0;
  std::vector<double> ar1, ar2;
  double threshold = 0.0;
  int delay = 1;
};

enum class StarTransition { Logistic, Exponential };

/// Smooth transition AR with logistic or exponential transition in
/// (z_{t-d} - c) / sigma_scale. The exponential form keeps the outer
/// reciprocal exactly as the source defines it.
struct MeanStar {
  double intercept1 = 0.0, intercept2 = 0.0;
  std::vector<double> ar1, ar2;
  StarTransition transition = StarTransition::Logistic;
  double gamma = 1.0;
  double c = 0.0;
  int delay = 1;
  double sigma_scale = 1.0;
};

/// z_t = intercept + ar1 * z_{t-1} + eps_t + cross * z_{t-1} * eps_{t-1}.
struct MeanBilinear {
  double intercept = 0.0;
  double ar1 = 0.0;
  double cross = 0.0;
};

/// Random coefficient AR(1): z_t = (ar1 + coeff_noise * eta_t) z_{t-1} + eps_t
/// with eta_t an independent standard normal stream.
struct MeanRca {
  double ar1 = 0.0;
  double coeff_noise = 0.0;
};

using MeanPart =
    std::variant<MeanNone, MeanArma, MeanTar, MeanStar, MeanBilinear, MeanRca>;

// ---- conditional variance recursions ----------------------------------

struct VarConstant {
  double sigma2 = 1.0;
};

/// GARCH(b, a); beta empty gives ARCH(b).
struct VarGarch {
  double omega = 1.0;
  std::vector<double> alpha;
  std::vector<double> beta;
};

/// GJR-GARCH with leverage terms gamma_i * I{eps_{t-i} < 0} * eps_{t-i}^2.
struct VarGjr {
  double omega = 1.0;
  std::vector<double> alpha, gamma, beta;
};

using VariancePart = std::variant<VarConstant, VarGarch, VarGjr>;

struct DgpSpec {
  MeanPart mean = MeanNone{};
  VariancePart variance = VarConstant{};
  Innovation innovation;
};

/// Throws std::domain_error when the spec violates stationarity or
/// positivity constraints.
void validate(const DgpSpec& spec);

/// Spectral radius of the companion matrix of 1 - sum a_i z^i; < 1 means
/// all polynomial roots lie outside the unit circle.
double companion_spectral_radius(const std::vector<double>& coeffs);

struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

/// Generates n + burn_in points and returns the last n. Presample z and
/// eps start at zero; presample h starts at the unconditional variance.
TimeSeries simulate(const DgpSpec& spec, std::size_t n, std::size_t burn_in,
                    RngStream& stream);

/// Adds i.i.d. standardized Student-t(10) measurement noise with variance
/// omega_sq times the sample variance of the input.
TimeSeries contaminate(const TimeSeries& series, double omega_sq,
                       RngStream& stream);

/// Named built-in processes (A1-A4, B1-B4, C1-C2, D1-D4, L1-L5). The swept
/// coefficient of B1, B2, C1, C2 can be overridden through param.
DgpSpec preset(const std::string& name, std::optional<double> param = {});
std::vector<std::string> preset_names();

nlohmann::json to_json(const DgpSpec& spec);
DgpSpec dgp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Innovation& law);
Innovation innovation_from_json(const nlohmann::json& j);

}  // namespace portes
