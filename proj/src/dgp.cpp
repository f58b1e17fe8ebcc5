#include "portes/dgp.hpp"

#include <cmath>
#include <stdexcept>

namespace portes {

namespace {

double lagged(const std::vector<double>& v, std::size_t t, int lag,
              double presample = 0.0) {
  return static_cast<long>(t) - lag >= 0 ? v[t - lag] : presample;
}

double unconditional_variance(const VariancePart& var) {
  if (const auto* c = std::get_if<VarConstant>(&var)) return c->sigma2;
  if (const auto* g = std::get_if<VarGarch>(&var)) {
    double s = 0.0;
    for (double a : g->alpha) s += a;
    for (double b : g->beta) s += b;
    return g->omega / (1.0 - s);
  }
  const auto& g = std::get<VarGjr>(var);
  double s = 0.0;
  for (double a : g.alpha) s += a;
  for (double b : g.beta) s += b;
  return g.omega / (1.0 - s);
}

void validate_garch_coeffs(double omega, const std::vector<double>& alpha,
                           const std::vector<double>& beta,
                           const std::vector<double>& gamma = {}) {
  if (!(omega > 0.0)) throw std::domain_error("variance: omega must be > 0");
  double s = 0.0;
  for (double a : alpha) {
    if (a < 0.0) throw std::domain_error("variance: alpha must be >= 0");
    s += a;
  }
  for (double b : beta) {
    if (b < 0.0) throw std::domain_error("variance: beta must be >= 0");
    s += b;
  }
  for (double g : gamma)
    if (g < 0.0) throw std::domain_error("variance: gamma must be >= 0");
  if (!(s < 1.0))
    throw std::domain_error("variance: sum(alpha) + sum(beta) must be < 1");
}

}  // namespace

double companion_spectral_radius(const std::vector<double>& coeffs) {
  const int p = static_cast<int>(coeffs.size());
  if (p == 0) return 0.0;
  Matrix c = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) c(0, i) = coeffs[i];
  for (int i = 1; i < p; ++i) c(i, i - 1) = 1.0;
  return c.eigenvalues().cwiseAbs().maxCoeff();
}

void validate(const DgpSpec& spec) {
  validate(spec.innovation);

  if (const auto* arma = std::get_if<MeanArma>(&spec.mean)) {
    if (companion_spectral_radius(arma->ar) >= 1.0)
      throw std::domain_error("mean: AR polynomial roots inside unit circle");
    std::vector<double> neg_ma(arma->ma.size());
    for (std::size_t i = 0; i < arma->ma.size(); ++i) neg_ma[i] = -arma->ma[i];
    if (companion_spectral_radius(neg_ma) >= 1.0)
      throw std::domain_error("mean: MA polynomial roots inside unit circle");
  } else if (const auto* star = std::get_if<MeanStar>(&spec.mean)) {
    if (!(star->gamma > 0.0))
      throw std::domain_error("mean: STAR gamma must be > 0");
    if (star->delay < 1) throw std::domain_error("mean: delay must be >= 1");
  } else if (const auto* tar = std::get_if<MeanTar>(&spec.mean)) {
    if (tar->delay < 1) throw std::domain_error("mean: delay must be >= 1");
  }

  if (const auto* c = std::get_if<VarConstant>(&spec.variance)) {
    if (!(c->sigma2 > 0.0))
      throw std::domain_error("variance: sigma2 must be > 0");
  } else if (const auto* g = std::get_if<VarGarch>(&spec.variance)) {
    validate_garch_coeffs(g->omega, g->alpha, g->beta);
  } else if (const auto* g2 = std::get_if<VarGjr>(&spec.variance)) {
    validate_garch_coeffs(g2->omega, g2->alpha, g2->beta, g2->gamma);
  }
}

TimeSeries simulate(const DgpSpec& spec, std::size_t n, std::size_t burn_in,
                    RngStream& stream) {
  validate(spec);
  const std::size_t total = n + burn_in;

  // Innovations first, then any auxiliary stream, so that degenerate specs
  // reproduce exactly the path of the model they reduce to.
  std::vector<double> xi = stream.draw_n(spec.innovation, total);
  std::vector<double> eta;
  if (std::holds_alternative<MeanRca>(spec.mean))
    eta = stream.draw_n(Innovation{Law::Normal}, total);

  const double hbar = unconditional_variance(spec.variance);
  std::vector<double> z(total), eps(total), h(total);

  for (std::size_t t = 0; t < total; ++t) {
    // conditional variance
    double ht;
    if (const auto* c = std::get_if<VarConstant>(&spec.variance)) {
      ht = c->sigma2;
    } else if (const auto* g = std::get_if<VarGarch>(&spec.variance)) {
      ht = g->omega;
      for (std::size_t i = 0; i < g->alpha.size(); ++i) {
        const double e = lagged(eps, t, static_cast<int>(i) + 1);
        ht += g->alpha[i] * e * e;
      }
      for (std::size_t j = 0; j < g->beta.size(); ++j)
        ht += g->beta[j] * lagged(h, t, static_cast<int>(j) + 1, hbar);
    } else {
      const auto& gj = std::get<VarGjr>(spec.variance);
      ht = gj.omega;
      for (std::size_t i = 0; i < gj.alpha.size(); ++i) {
        const double e = lagged(eps, t, static_cast<int>(i) + 1);
        const double lev = e < 0.0 ? gj.gamma[i] : 0.0;
        ht += (gj.alpha[i] + lev) * e * e;
      }
      for (std::size_t j = 0; j < gj.beta.size(); ++j)
        ht += gj.beta[j] * lagged(h, t, static_cast<int>(j) + 1, hbar);
    }
    h[t] = ht;
    eps[t] = xi[t] * std::sqrt(ht);

    // conditional mean
    double mu = 0.0;
    if (const auto* arma = std::get_if<MeanArma>(&spec.mean)) {
      mu = arma->intercept;
      for (std::size_t i = 0; i < arma->ar.size(); ++i)
        mu += arma->ar[i] * lagged(z, t, static_cast<int>(i) + 1);
      for (std::size_t j = 0; j < arma->ma.size(); ++j)
        mu += arma->ma[j] * lagged(eps, t, static_cast<int>(j) + 1);
    } else if (const auto* tar = std::get_if<MeanTar>(&spec.mean)) {
      const double s = lagged(z, t, tar->delay);
      const bool upper = s > tar->threshold;
      const double c0 = upper ? tar->intercept2 : tar->intercept1;
      const auto& ar = upper ? tar->ar2 : tar->ar1;
      mu = c0;
      for (std::size_t i = 0; i < ar.size(); ++i)
        mu += ar[i] * lagged(z, t, static_cast<int>(i) + 1);
    } else if (const auto* star = std::get_if<MeanStar>(&spec.mean)) {
      const double s =
          (lagged(z, t, star->delay) - star->c) / star->sigma_scale;
      double f;
      if (star->transition == StarTransition::Logistic) {
        f = 1.0 / (1.0 + std::exp(-star->gamma * s));
      } else {
        f = 1.0 / (1.0 - std::exp(-star->gamma * s * s));
      }
      double m1 = star->intercept1, m2 = star->intercept2;
      for (std::size_t i = 0; i < star->ar1.size(); ++i)
        m1 += star->ar1[i] * lagged(z, t, static_cast<int>(i) + 1);
      for (std::size_t i = 0; i < star->ar2.size(); ++i)
        m2 += star->ar2[i] * lagged(z, t, static_cast<int>(i) + 1);
      mu = (1.0 - f) * m1 + f * m2;
    } else if (const auto* bl = std::get_if<MeanBilinear>(&spec.mean)) {
      mu = bl->intercept + bl->ar1 * lagged(z, t, 1) +
           bl->cross * lagged(z, t, 1) * lagged(eps, t, 1);
    } else if (const auto* rca = std::get_if<MeanRca>(&spec.mean)) {
      mu = (rca->ar1 + rca->coeff_noise * eta[t]) * lagged(z, t, 1);
    }

    z[t] = mu + eps[t];
    if (!std::isfinite(z[t]) || !std::isfinite(h[t]))
      throw GenerationError("simulate: overflow at index " + std::to_string(t));
  }

  TimeSeries out;
  out.values.assign(z.begin() + static_cast<long>(burn_in), z.end());
  return out;
}

TimeSeries contaminate(const TimeSeries& series, double omega_sq,
                       RngStream& stream) {
  if (omega_sq < 0.0)
    throw std::domain_error("contaminate: omega_sq must be >= 0");
  if (series.values.empty())
    throw std::domain_error("contaminate: empty series");
  if (omega_sq == 0.0) return series;

  const std::size_t n = series.size();
  double mean = 0.0;
  for (double v : series.values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : series.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);

  const double sd = std::sqrt(omega_sq * var);
  const Innovation t10{Law::StudentT, 10.0, 0.0};
  TimeSeries out = series;
  for (auto& v : out.values) v += sd * stream.draw(t10);
  return out;
}

DgpSpec preset(const std::string& name, std::optional<double> param) {
  DgpSpec s;
  const auto p = [&](double fallback) { return param.value_or(fallback); };
  bool sweepable = false;

  if (name == "A1" || name == "L1") {
    s.mean = MeanArma{0.0, {0.5}, {}};
  } else if (name == "A2") {
    s.variance = VarGarch{0.1, {0.3}, {0.5}};
  } else if (name == "A3") {
    s.mean = MeanArma{0.0, {0.5}, {}};
    s.variance = VarGarch{0.1, {0.4}, {}};
  } else if (name == "A4") {
    s.mean = MeanArma{0.0, {0.5}, {}};
    s.variance = VarGarch{0.1, {0.3}, {0.5}};
  } else if (name == "B1") {
    s.mean = MeanBilinear{0.2, 0.4, p(1.0)};
    sweepable = true;
  } else if (name == "B2") {
    s.mean = MeanRca{0.2, p(1.0)};
    sweepable = true;
  } else if (name == "B3") {
    s.mean = MeanTar{0.0, 0.0, {0.8}, {-0.8}, -1.0, 1};
  } else if (name == "B4") {
    s.mean = MeanArma{0.0, {0.2}, {}};
    s.variance = VarGarch{0.2, {0.2, 0.2}, {}};
  } else if (name == "C1") {
    s.mean = MeanArma{0.0, {}, {p(0.5)}};
    s.variance = VarGarch{0.1, {0.3}, {0.5}};
    sweepable = true;
  } else if (name == "C2") {
    s.mean = MeanArma{0.0, {p(0.5)}, {}};
    s.variance = VarGarch{0.3, {0.3}, {0.3}};
    sweepable = true;
  } else if (name == "D1") {
    s.mean = MeanArma{0.0, {0.5}, {}};
    s.variance = VarGarch{0.01, {0.4, 0.3}, {}};
  } else if (name == "D2") {
    s.mean = MeanArma{0.0, {0.5}, {}};
    s.variance = VarGarch{0.01, {0.4}, {0.5}};
  } else if (name == "D3") {
    s.mean = MeanArma{0.0, {0.5, 0.2}, {}};
    s.variance = VarGarch{0.01, {0.4, 0.2}, {}};
  } else if (name == "D4") {
    s.mean = MeanTar{0.0, 0.0, {0.4}, {0.9}, 0.0, 1};
    s.variance = VarGjr{0.1, {0.3}, {0.4}, {0.4}};
  } else if (name == "L2") {
    s.mean = MeanArma{0.0, {-0.5}, {}};
  } else if (name == "L3") {
    s.mean = MeanArma{0.0, {}, {0.8}};
  } else if (name == "L4") {
    s.mean = MeanArma{0.0, {0.6}, {0.4}};
  } else if (name == "L5") {
    s.mean = MeanArma{0.0, {0.5, 0.3}, {}};
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }

  if (param && !sweepable)
    throw std::invalid_argument("preset " + name +
                                " has no sweepable parameter");
  return s;
}

std::vector<std::string> preset_names() {
  return {"A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4", "C1",
          "C2", "D1", "D2", "D3", "D4", "L1", "L2", "L3", "L4", "L5"};
}

// ---- JSON ---------------------------------------------------------------

nlohmann::json to_json(const Innovation& law) {
  switch (law.law) {
    case Law::Normal:
      return {{"law", "normal"}};
    case Law::StudentT:
      return {{"law", "student_t"}, {"df", law.df}};
    case Law::SkewNormal:
      return {{"law", "skew_normal"}, {"kappa", law.kappa}};
  }
  throw std::logic_error("unknown innovation law");
}

Innovation innovation_from_json(const nlohmann::json& j) {
  Innovation law;
  const std::string name = j.at("law").get<std::string>();
  if (name == "normal") {
    law.law = Law::Normal;
  } else if (name == "student_t") {
    law.law = Law::StudentT;
    law.df = j.at("df").get<double>();
  } else if (name == "skew_normal") {
    law.law = Law::SkewNormal;
    law.kappa = j.at("kappa").get<double>();
  } else {
    throw std::invalid_argument("unknown innovation law: " + name);
  }
  return law;
}

nlohmann::json to_json(const DgpSpec& spec) {
  nlohmann::json mean, variance;

  if (std::holds_alternative<MeanNone>(spec.mean)) {
    mean = {{"type", "none"}};
  } else if (const auto* a = std::get_if<MeanArma>(&spec.mean)) {
    mean = {{"type", "arma"},
            {"intercept", a->intercept},
            {"ar", a->ar},
            {"ma", a->ma}};
  } else if (const auto* t = std::get_if<MeanTar>(&spec.mean)) {
    mean = {{"type", "tar"},         {"intercept1", t->intercept1},
            {"intercept2", t->intercept2}, {"ar1", t->ar1},
            {"ar2", t->ar2},         {"threshold", t->threshold},
            {"delay", t->delay}};
  } else if (const auto* st = std::get_if<MeanStar>(&spec.mean)) {
    mean = {{"type", "star"},
            {"intercept1", st->intercept1},
            {"intercept2", st->intercept2},
            {"ar1", st->ar1},
            {"ar2", st->ar2},
            {"transition", st->transition == StarTransition::Logistic
                               ? "logistic"
                               : "exponential"},
            {"gamma", st->gamma},
            {"c", st->c},
            {"delay", st->delay},
            {"sigma_scale", st->sigma_scale}};
  } else if (const auto* b = std::get_if<MeanBilinear>(&spec.mean)) {
    mean = {{"type", "bilinear"},
            {"intercept", b->intercept},
            {"ar1", b->ar1},
            {"cross", b->cross}};
  } else if (const auto* r = std::get_if<MeanRca>(&spec.mean)) {
    mean = {{"type", "rca"}, {"ar1", r->ar1}, {"coeff_noise", r->coeff_noise}};
  }

  if (const auto* c = std::get_if<VarConstant>(&spec.variance)) {
    variance = {{"type", "constant"}, {"sigma2", c->sigma2}};
  } else if (const auto* g = std::get_if<VarGarch>(&spec.variance)) {
    variance = {{"type", "garch"},
                {"omega", g->omega},
                {"alpha", g->alpha},
                {"beta", g->beta}};
  } else if (const auto* g2 = std::get_if<VarGjr>(&spec.variance)) {
    variance = {{"type", "gjr"},
                {"omega", g2->omega},
                {"alpha", g2->alpha},
                {"gamma", g2->gamma},
                {"beta", g2->beta}};
  }

  return {{"mean", mean}, {"variance", variance},
          {"innovation", to_json(spec.innovation)}};
}

DgpSpec dgp_from_json(const nlohmann::json& j) {
  DgpSpec spec;
  const auto& mean = j.at("mean");
  const std::string mtype = mean.at("type").get<std::string>();
  if (mtype == "none") {
    spec.mean = MeanNone{};
  } else if (mtype == "arma") {
    MeanArma a;
    a.intercept = mean.value("intercept", 0.0);
    a.ar = mean.value("ar", std::vector<double>{});
    a.ma = mean.value("ma", std::vector<double>{});
    spec.mean = a;
  } else if (mtype == "tar") {
    MeanTar t;
    t.intercept1 = mean.value("intercept1", 0.0);
    t.intercept2 = mean.value("intercept2", 0.0);
    t.ar1 = mean.value("ar1", std::vector<double>{});
    t.ar2 = mean.value("ar2", std::vector<double>{});
    t.threshold = mean.value("threshold", 0.0);
    t.delay = mean.value("delay", 1);
    spec.mean = t;
  } else if (mtype == "star") {
    MeanStar st;
    st.intercept1 = mean.value("intercept1", 0.0);
    st.intercept2 = mean.value("intercept2", 0.0);
    st.ar1 = mean.value("ar1", std::vector<double>{});
    st.ar2 = mean.value("ar2", std::vector<double>{});
    const std::string tr = mean.value("transition", std::string("logistic"));
    if (tr == "logistic") {
      st.transition = StarTransition::Logistic;
    } else if (tr == "exponential") {
      st.transition = StarTransition::Exponential;
    } else {
      throw std::invalid_argument("unknown STAR transition: " + tr);
    }
    st.gamma = mean.value("gamma", 1.0);
    st.c = mean.value("c", 0.0);
    st.delay = mean.value("delay", 1);
    st.sigma_scale = mean.value("sigma_scale", 1.0);
    spec.mean = st;
  } else if (mtype == "bilinear") {
    MeanBilinear b;
    b.intercept = mean.value("intercept", 0.0);
    b.ar1 = mean.value("ar1", 0.0);
    b.cross = mean.value("cross", 0.0);
    spec.mean = b;
  } else if (mtype == "rca") {
    MeanRca r;
    r.ar1 = mean.value("ar1", 0.0);
    r.coeff_noise = mean.value("coeff_noise", 0.0);
    spec.mean = r;
  } else {
    throw std::invalid_argument("unknown mean type: " + mtype);
  }

  const auto& variance = j.at("variance");
  const std::string vtype = variance.at("type").get<std::string>();
  if (vtype == "constant") {
    spec.variance = VarConstant{variance.value("sigma2", 1.0)};
  } else if (vtype == "garch") {
    VarGarch g;
    g.omega = variance.at("omega").get<double>();
    g.alpha = variance.value("alpha", std::vector<double>{});
    g.beta = variance.value("beta", std::vector<double>{});
    spec.variance = g;
  } else if (vtype == "gjr") {
    VarGjr g;
    g.omega = variance.at("omega").get<double>();
    g.alpha = variance.value("alpha", std::vector<double>{});
    g.gamma = variance.value("gamma", std::vector<double>{});
    g.beta = variance.value("beta", std::vector<double>{});
    spec.variance = g;
  } else {
    throw std::invalid_argument("unknown variance type: " + vtype);
  }

  if (j.contains("innovation"))
    spec.innovation = innovation_from_json(j.at("innovation"));
  validate(spec);
  return spec;
}

}  // namespace portes
