#include "portes/estimation.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "optim.hpp"

namespace portes {

namespace {

struct ParamView {
  double intercept = 0.0;
  std::vector<double> phi, theta_ma;
  double sigma2 = 0.0;  // constant-variance case
  double omega = 0.0;
  std::vector<double> alpha, beta;
};

ParamView unpack(const ModelSpec& spec, const Vector& theta) {
  if (theta.size() != spec.n_params())
    throw std::domain_error("parameter vector length mismatch");
  ParamView v;
  int i = 0;
  if (spec.intercept) v.intercept = theta[i++];
  for (int k = 0; k < spec.p; ++k) v.phi.push_back(theta[i++]);
  for (int k = 0; k < spec.q; ++k) v.theta_ma.push_back(theta[i++]);
  if (spec.constant_variance()) {
    v.sigma2 = theta[i++];
  } else {
    v.omega = theta[i++];
    for (int k = 0; k < spec.b; ++k) v.alpha.push_back(theta[i++]);
    for (int k = 0; k < spec.a; ++k) v.beta.push_back(theta[i++]);
  }
  return v;
}

void validate_theta(const ModelSpec& spec, const ParamView& v) {
  if (companion_spectral_radius(v.phi) >= 1.0 + 1e-10)
    throw std::domain_error("filter: nonstationary AR parameters");
  std::vector<double> neg_ma(v.theta_ma.size());
  for (std::size_t i = 0; i < neg_ma.size(); ++i) neg_ma[i] = -v.theta_ma[i];
  if (companion_spectral_radius(neg_ma) >= 1.0 + 1e-10)
    throw std::domain_error("filter: noninvertible MA parameters");
  if (spec.constant_variance()) {
    if (!(v.sigma2 > 0.0))
      throw std::domain_error("filter: sigma2 must be > 0");
  } else {
    if (!(v.omega > 0.0)) throw std::domain_error("filter: omega must be > 0");
    double s = 0.0;
    for (double a : v.alpha) {
      if (a < 0.0) throw std::domain_error("filter: alpha must be >= 0");
      s += a;
    }
    for (double b : v.beta) {
      if (b < 0.0) throw std::domain_error("filter: beta must be >= 0");
      s += b;
    }
    if (!(s < 1.0))
      throw std::domain_error("filter: sum(alpha) + sum(beta) must be < 1");
  }
}

// core recursion shared by filter / derivatives; constraint checks optional
// so that fits can evaluate boundary-adjacent points.
FilterOutput run_filter(const ModelSpec& spec, const ParamView& v,
                        const TimeSeries& series) {
  const std::size_t n = series.size();
  FilterOutput out;
  out.eps = Vector::Zero(n);
  out.h = Vector::Zero(n);
  out.xi = Vector::Zero(n);

  double hbar = 0.0;
  if (!spec.constant_variance()) {
    double s = 0.0;
    for (double a : v.alpha) s += a;
    for (double b : v.beta) s += b;
    hbar = v.omega / (1.0 - s);
  }

  double ll = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double mu = spec.intercept ? v.intercept : 0.0;
    for (int i = 1; i <= spec.p; ++i)
      if (t >= static_cast<std::size_t>(i))
        mu += v.phi[i - 1] * series.values[t - i];
    for (int j = 1; j <= spec.q; ++j)
      if (t >= static_cast<std::size_t>(j))
        mu += v.theta_ma[j - 1] * out.eps[t - j];
    out.eps[t] = series.values[t] - mu;

    double ht;
    if (spec.constant_variance()) {
      ht = v.sigma2;
    } else {
      ht = v.omega;
      for (int i = 1; i <= spec.b; ++i) {
        const double e = t >= static_cast<std::size_t>(i) ? out.eps[t - i] : 0.0;
        ht += v.alpha[i - 1] * e * e;
      }
      for (int j = 1; j <= spec.a; ++j)
        ht += v.beta[j - 1] *
              (t >= static_cast<std::size_t>(j) ? out.h[t - j] : hbar);
    }
    if (!(ht > 0.0))
      throw std::runtime_error("filter: nonpositive conditional variance at " +
                               std::to_string(t));
    out.h[t] = ht;
    out.xi[t] = out.eps[t] / std::sqrt(ht);
    ll += -0.5 * std::log(ht) - out.eps[t] * out.eps[t] / (2.0 * ht);
  }
  out.loglik = ll;
  return out;
}

Derivatives run_derivatives(const ModelSpec& spec, const ParamView& v,
                            const TimeSeries& series,
                            const FilterOutput& flt) {
  const std::size_t n = series.size();
  const int l = spec.n_params();
  Derivatives d;
  d.dmu = Matrix::Zero(n, l);
  d.dh = Matrix::Zero(n, l);

  const int i_c = spec.intercept ? 0 : -1;
  const int i_phi = spec.intercept ? 1 : 0;
  const int i_ma = i_phi + spec.p;
  const int i_var = spec.mean_params();

  // presample variance hbar = omega / (1 - s) depends on the variance
  // parameters; its gradient feeds the beta recursion.
  double hbar = 0.0;
  Vector dhbar = Vector::Zero(l);
  if (!spec.constant_variance()) {
    double s = 0.0;
    for (double a : v.alpha) s += a;
    for (double b : v.beta) s += b;
    hbar = v.omega / (1.0 - s);
    dhbar[i_var] = 1.0 / (1.0 - s);
    const double dds = v.omega / ((1.0 - s) * (1.0 - s));
    for (int i = 0; i < spec.b; ++i) dhbar[i_var + 1 + i] = dds;
    for (int j = 0; j < spec.a; ++j) dhbar[i_var + 1 + spec.b + j] = dds;
  }

  for (std::size_t t = 0; t < n; ++t) {
    // mean gradient: direct terms minus MA feedback through eps = z - mu
    auto row_mu = d.dmu.row(t);
    if (spec.intercept) row_mu[i_c] = 1.0;
    for (int i = 1; i <= spec.p; ++i)
      if (t >= static_cast<std::size_t>(i))
        row_mu[i_phi + i - 1] = series.values[t - i];
    for (int j = 1; j <= spec.q; ++j)
      if (t >= static_cast<std::size_t>(j)) {
        row_mu[i_ma + j - 1] += flt.eps[t - j];
        row_mu -= v.theta_ma[j - 1] * d.dmu.row(t - j);
      }

    auto row_h = d.dh.row(t);
    if (spec.constant_variance()) {
      row_h[i_var] = 1.0;
      continue;
    }
    row_h[i_var] = 1.0;
    for (int i = 1; i <= spec.b; ++i) {
      if (t >= static_cast<std::size_t>(i)) {
        const double e = flt.eps[t - i];
        row_h[i_var + 1 + i - 1] += e * e;
        // chain through eps_{t-i}: d eps = -d mu
        row_h -= v.alpha[i - 1] * 2.0 * e * d.dmu.row(t - i);
      }
    }
    for (int j = 1; j <= spec.a; ++j) {
      if (t >= static_cast<std::size_t>(j)) {
        row_h[i_var + 1 + spec.b + j - 1] += flt.h[t - j];
        row_h += v.beta[j - 1] * d.dh.row(t - j);
      } else {
        row_h[i_var + 1 + spec.b + j - 1] += hbar;
        row_h += v.beta[j - 1] * dhbar.transpose();
      }
    }
  }
  return d;
}

// ---- unconstrained reparameterization ----------------------------------

// Monahan's partial-autocorrelation map: unconstrained x -> coefficients of
// a polynomial 1 - sum(a_i z^i) with all roots outside the unit circle.
std::vector<double> pacf_to_coeffs(const std::vector<double>& r) {
  std::vector<double> a;
  for (std::size_t k = 0; k < r.size(); ++k) {
    std::vector<double> next(k + 1);
    next[k] = r[k];
    for (std::size_t i = 0; i < k; ++i) next[i] = a[i] - r[k] * a[k - 1 - i];
    a = std::move(next);
  }
  return a;
}

std::vector<double> coeffs_to_pacf(std::vector<double> a) {
  std::vector<double> r(a.size());
  for (std::size_t k = a.size(); k-- > 0;) {
    double rk = a[k];
    if (rk >= 0.95) rk = 0.95;  // clamp nonstationary starts into the region
    if (rk <= -0.95) rk = -0.95;
    r[k] = rk;
    if (k == 0) break;
    std::vector<double> prev(k);
    const double denom = 1.0 - rk * rk;
    for (std::size_t i = 0; i < k; ++i)
      prev[i] = (a[i] + rk * a[k - 1 - i]) / denom;
    a = std::move(prev);
  }
  return r;
}

class Transform {
 public:
  explicit Transform(const ModelSpec& spec) : spec_(spec) {}

  Vector to_natural(const Vector& x) const {
    const ModelSpec& s = spec_;
    Vector theta(s.n_params());
    int i = 0;
    if (s.intercept) theta[i] = x[i], ++i;
    if (s.p > 0) {
      std::vector<double> r(s.p);
      for (int k = 0; k < s.p; ++k) r[k] = std::tanh(x[i + k]);
      const auto phi = pacf_to_coeffs(r);
      for (int k = 0; k < s.p; ++k) theta[i + k] = phi[k];
      i += s.p;
    }
    if (s.q > 0) {
      std::vector<double> r(s.q);
      for (int k = 0; k < s.q; ++k) r[k] = std::tanh(x[i + k]);
      const auto m = pacf_to_coeffs(r);
      for (int k = 0; k < s.q; ++k) theta[i + k] = -m[k];
      i += s.q;
    }
    if (s.constant_variance()) {
      theta[i] = std::exp(x[i]);
    } else {
      theta[i] = std::exp(x[i]);  // omega
      const int nab = s.b + s.a;
      double denom = 1.0;
      for (int k = 0; k < nab; ++k) denom += std::exp(x[i + 1 + k]);
      for (int k = 0; k < nab; ++k)
        theta[i + 1 + k] = std::exp(x[i + 1 + k]) / denom;
    }
    return theta;
  }

  Vector to_unconstrained(const Vector& theta) const {
    const ModelSpec& s = spec_;
    Vector x(s.n_params());
    int i = 0;
    if (s.intercept) x[i] = theta[i], ++i;
    if (s.p > 0) {
      std::vector<double> phi(s.p);
      for (int k = 0; k < s.p; ++k) phi[k] = theta[i + k];
      const auto r = coeffs_to_pacf(phi);
      for (int k = 0; k < s.p; ++k) x[i + k] = std::atanh(r[k]);
      i += s.p;
    }
    if (s.q > 0) {
      std::vector<double> m(s.q);
      for (int k = 0; k < s.q; ++k) m[k] = -theta[i + k];
      const auto r = coeffs_to_pacf(m);
      for (int k = 0; k < s.q; ++k) x[i + k] = std::atanh(r[k]);
      i += s.q;
    }
    if (s.constant_variance()) {
      x[i] = std::log(std::max(theta[i], 1e-12));
    } else {
      x[i] = std::log(std::max(theta[i], 1e-12));
      const int nab = s.b + s.a;
      double sum = 0.0;
      for (int k = 0; k < nab; ++k) sum += theta[i + 1 + k];
      sum = std::min(sum, 0.999);
      for (int k = 0; k < nab; ++k) {
        const double c = std::max(theta[i + 1 + k], 1e-8);
        x[i + 1 + k] = std::log(c / (1.0 - sum));
      }
    }
    return x;
  }

  // dtheta/dx by central differences; the map is smooth and cheap.
  Matrix jacobian(const Vector& x) const {
    const int l = static_cast<int>(x.size());
    Matrix j(l, l);
    const double step = 1e-6;
    for (int k = 0; k < l; ++k) {
      Vector xp = x, xm = x;
      xp[k] += step;
      xm[k] -= step;
      j.col(k) = (to_natural(xp) - to_natural(xm)) / (2.0 * step);
    }
    return j;
  }

 private:
  ModelSpec spec_;
};

Vector score_impl(const ModelSpec& spec, const FilterOutput& flt,
                  const Derivatives& d) {
  const std::size_t n = flt.eps.size();
  Vector g = Vector::Zero(spec.n_params());
  for (std::size_t t = 0; t < n; ++t) {
    const double ht = flt.h[t];
    const double et = flt.eps[t];
    g += 0.5 * (et * et / ht - 1.0) / ht * d.dh.row(t).transpose();
    g += et / ht * d.dmu.row(t).transpose();
  }
  return g;
}

// Exact QMLE for pure-AR constant-variance models: minimizing the residual
// sum of squares with zero-padded lags is linear least squares.
Vector closed_form_ar(const ModelSpec& spec, const TimeSeries& series) {
  const std::size_t n = series.size();
  const int k = spec.mean_params();
  Vector theta(spec.n_params());
  if (k == 0) {
    double ss = 0.0;
    for (double v : series.values) ss += v * v;
    theta[0] = std::max(ss / static_cast<double>(n), 1e-300);
    return theta;
  }
  Matrix x = Matrix::Zero(n, k);
  Vector y(n);
  for (std::size_t t = 0; t < n; ++t) {
    int col = 0;
    if (spec.intercept) x(t, col++) = 1.0;
    for (int i = 1; i <= spec.p; ++i)
      x(t, col + i - 1) =
          t >= static_cast<std::size_t>(i) ? series.values[t - i] : 0.0;
    y[t] = series.values[t];
  }
  const Matrix xtx = x.transpose() * x;
  const Vector beta = sym_solve(xtx, x.transpose() * y).x;
  const Vector resid = y - x * beta;
  for (int i = 0; i < k; ++i) theta[i] = beta[i];
  theta[k] =
      std::max(resid.squaredNorm() / static_cast<double>(n), 1e-300);
  return theta;
}

Vector starting_values(const ModelSpec& spec, const TimeSeries& series) {
  const std::size_t n = series.size();
  Vector theta(spec.n_params());
  int i = 0;

  Vector resid = Eigen::Map<const Vector>(series.values.data(), n);
  if (spec.mean_params() > 0) {
    // long-AR residuals, then one regression on lagged z and lagged resid
    const int long_p = std::min<int>(static_cast<int>(n) / 4,
                                     spec.p + spec.q + 6);
    ModelSpec sieve{long_p, 0, true, 0, 0};
    const Vector th = closed_form_ar(sieve, series);
    const ParamView pv = unpack(sieve, th);
    FilterOutput sf = run_filter(sieve, pv, series);
    const Vector e = sf.eps;

    const int k = spec.mean_params();
    Matrix x = Matrix::Zero(n, k);
    for (std::size_t t = 0; t < n; ++t) {
      int col = 0;
      if (spec.intercept) x(t, col++) = 1.0;
      for (int j = 1; j <= spec.p; ++j)
        x(t, col++) = t >= static_cast<std::size_t>(j) ? series.values[t - j]
                                                       : 0.0;
      for (int j = 1; j <= spec.q; ++j)
        x(t, col++) = t >= static_cast<std::size_t>(j) ? e[t - j] : 0.0;
    }
    const Vector y = Eigen::Map<const Vector>(series.values.data(), n);
    const Vector beta = sym_solve(x.transpose() * x, x.transpose() * y).x;
    for (int j = 0; j < k; ++j) theta[j] = beta[j];
    resid = y - x * beta;
    i = k;
  }

  double v = resid.squaredNorm() / static_cast<double>(n);
  v = std::max(v, 1e-8);
  if (spec.constant_variance()) {
    theta[i] = v;
  } else if (spec.a == 0) {
    theta[i] = 0.7 * v;
    for (int k2 = 0; k2 < spec.b; ++k2) theta[i + 1 + k2] = 0.3 / spec.b;
  } else {
    theta[i] = 0.1 * v;
    for (int k2 = 0; k2 < spec.b; ++k2) theta[i + 1 + k2] = 0.1 / spec.b;
    for (int k2 = 0; k2 < spec.a; ++k2)
      theta[i + 1 + spec.b + k2] = 0.8 / spec.a;
  }
  return theta;
}

}  // namespace

std::string ModelSpec::to_string() const {
  std::ostringstream os;
  bool first = true;
  const auto sep = [&] {
    if (!first) os << "+";
    first = false;
  };
  if (intercept) {
    sep();
    os << "c";
  }
  if (p > 0 || q > 0) {
    sep();
    if (q == 0)
      os << "ar(" << p << ")";
    else if (p == 0)
      os << "ma(" << q << ")";
    else
      os << "arma(" << p << "," << q << ")";
  }
  sep();
  if (constant_variance())
    os << "const";
  else if (a == 0)
    os << "arch(" << b << ")";
  else
    os << "garch(" << b << "," << a << ")";
  return os.str();
}

ModelSpec model_spec_from_string(const std::string& text) {
  ModelSpec spec;
  std::stringstream ss(text);
  std::string tok;
  bool any = false;
  while (std::getline(ss, tok, '+')) {
    any = true;
    auto grab = [&](const std::string& prefix, int nargs, int& x, int& y) {
      if (tok.rfind(prefix + "(", 0) != 0 || tok.back() != ')') return false;
      std::string args = tok.substr(prefix.size() + 1,
                                    tok.size() - prefix.size() - 2);
      std::stringstream as(args);
      std::string a1, a2;
      if (!std::getline(as, a1, ',')) return false;
      x = std::stoi(a1);
      if (nargs == 2) {
        if (!std::getline(as, a2, ',')) return false;
        y = std::stoi(a2);
      }
      return true;
    };
    int x = 0, y = 0;
    if (tok == "c") {
      spec.intercept = true;
    } else if (tok == "const") {
      // constant variance, the default
    } else if (grab("arma", 2, x, y)) {
      spec.p = x;
      spec.q = y;
    } else if (grab("ar", 1, x, y)) {
      spec.p = x;
    } else if (grab("ma", 1, x, y)) {
      spec.q = x;
    } else if (grab("garch", 2, x, y)) {
      spec.b = x;
      spec.a = y;
    } else if (grab("arch", 1, x, y)) {
      spec.b = x;
    } else {
      throw std::invalid_argument("cannot parse model component: " + tok);
    }
  }
  if (!any) throw std::invalid_argument("empty model string");
  return spec;
}

FilterOutput filter(const ModelSpec& spec, const Vector& theta,
                    const TimeSeries& series) {
  const ParamView v = unpack(spec, theta);
  validate_theta(spec, v);
  return run_filter(spec, v, series);
}

Derivatives model_derivatives(const ModelSpec& spec, const Vector& theta,
                              const TimeSeries& series) {
  const ParamView v = unpack(spec, theta);
  validate_theta(spec, v);
  const FilterOutput flt = run_filter(spec, v, series);
  return run_derivatives(spec, v, series, flt);
}

Vector score(const ModelSpec& spec, const Vector& theta,
             const TimeSeries& series) {
  const ParamView v = unpack(spec, theta);
  const FilterOutput flt = run_filter(spec, v, series);
  const Derivatives d = run_derivatives(spec, v, series, flt);
  return score_impl(spec, flt, d);
}

Matrix information_matrix(const Vector& h, const Matrix& dmu,
                          const Matrix& dh) {
  const std::size_t n = static_cast<std::size_t>(h.size());
  const int l = static_cast<int>(dmu.cols());
  Matrix sig = Matrix::Zero(l, l);
  for (std::size_t t = 0; t < n; ++t) {
    const double ht = h[t];
    sig += 0.5 / (ht * ht) * dh.row(t).transpose() * dh.row(t);
    sig += 1.0 / ht * dmu.row(t).transpose() * dmu.row(t);
  }
  sig /= static_cast<double>(n);
  return 0.5 * (sig + sig.transpose());
}

FittedModel fit_qmle(const ModelSpec& spec, const TimeSeries& series,
                     const FitOptions& options) {
  const std::size_t n = series.size();
  if (n < 10 * static_cast<std::size_t>(spec.n_params()))
    throw std::domain_error("fit_qmle: series too short for model order");

  FittedModel fit;
  fit.spec = spec;

  if (spec.q == 0 && spec.constant_variance()) {
    fit.theta = closed_form_ar(spec, series);
    fit.converged = true;
  } else {
    const Transform tr(spec);
    const Vector theta0 = starting_values(spec, series);
    const Vector x0 = tr.to_unconstrained(theta0);

    const auto objective = [&](const Vector& x, Vector& grad) -> double {
      const Vector theta = tr.to_natural(x);
      const ParamView v = unpack(spec, theta);
      FilterOutput flt;
      try {
        flt = run_filter(spec, v, series);
      } catch (const std::runtime_error&) {
        grad.setZero();
        return std::numeric_limits<double>::infinity();
      }
      const Derivatives d = run_derivatives(spec, v, series, flt);
      const Vector g = score_impl(spec, flt, d);
      grad = -(tr.jacobian(x).transpose() * g) / static_cast<double>(n);
      return -flt.loglik / static_cast<double>(n);
    };

    detail::OptimOptions oo;
    oo.max_iter = options.max_iter;
    oo.grad_tol = 1e-9;
    detail::OptimResult res = detail::minimize_bfgs(objective, x0, oo);
    // one polishing pass with a fresh Hessian if the first run stalled
    if (!res.converged) {
      detail::OptimResult res2 = detail::minimize_bfgs(objective, res.x, oo);
      if (res2.f <= res.f) res = res2;
    }

    fit.theta = tr.to_natural(res.x);
    fit.iterations = res.iterations;
    fit.boundary = res.x.lpNorm<Eigen::Infinity>() > 12.0;
  }

  const ParamView v = unpack(spec, fit.theta);
  const FilterOutput flt = run_filter(spec, v, series);
  const Derivatives d = run_derivatives(spec, v, series, flt);
  fit.eps = flt.eps;
  fit.h = flt.h;
  fit.xi = flt.xi;
  fit.loglik = flt.loglik;
  fit.dmu = d.dmu;
  fit.dh = d.dh;

  if (!fit.converged) {
    const Vector g = score_impl(spec, flt, d);
    // per-observation scale: the mean score must be small relative to the
    // mean log-likelihood magnitude
    const double g_scaled =
        g.lpNorm<Eigen::Infinity>() / static_cast<double>(n);
    const double tol =
        options.grad_tol_scale *
        std::max(1.0, std::fabs(fit.loglik) / static_cast<double>(n));
    fit.converged = g_scaled <= tol || (fit.boundary && g_scaled <= 1e3 * tol);
  }

  fit.sigma = information_matrix(fit.h, fit.dmu, fit.dh);
  const SymSolveResult inv =
      sym_solve(fit.sigma, Matrix::Identity(fit.sigma.rows(), fit.sigma.cols()));
  fit.sigma_inv = 0.5 * (inv.x + inv.x.transpose());
  fit.sigma_regularized = inv.regularized;
  return fit;
}

int select_order_bic(const TimeSeries& series) {
  const std::size_t n = series.size();
  if (n < 20) throw std::domain_error("select_order_bic: need n >= 20");
  const int pmax = static_cast<int>(
      std::floor(8.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
  int best_p = 0;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= pmax; ++p) {
    ModelSpec spec{p, 0, true, 0, 0};
    const Vector theta = closed_form_ar(spec, series);
    const ParamView v = unpack(spec, theta);
    const FilterOutput flt = run_filter(spec, v, series);
    const double bic = -2.0 * flt.loglik +
                       spec.n_params() * std::log(static_cast<double>(n));
    if (bic < best_bic - 1e-12) {
      best_bic = bic;
      best_p = p;
    }
  }
  return best_p;
}

nlohmann::json to_json(const FittedModel& fit) {
  std::vector<double> theta(fit.theta.data(), fit.theta.data() + fit.theta.size());
  return {{"model", fit.spec.to_string()},
          {"theta", theta},
          {"loglik", fit.loglik},
          {"n", fit.n()},
          {"converged", fit.converged},
          {"boundary", fit.boundary},
          {"iterations", fit.iterations}};
}

}  // namespace portes
