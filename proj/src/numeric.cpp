#include "portes/numeric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace portes {

namespace {

// Regularized lower incomplete gamma P(a, x) by series expansion.
// Converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  const double lg = std::lgamma(a);
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - lg);
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
// Used for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double lg = std::lgamma(a);
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double f = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - lg) * f;
}

double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

double chi_square_sf(double x, int df) {
  if (df < 1) throw std::domain_error("chi_square_sf: df must be >= 1");
  if (x < 0.0) throw std::domain_error("chi_square_sf: x must be >= 0");
  if (x == 0.0) return 1.0;
  double q = gamma_q(0.5 * df, 0.5 * x);
  if (q < 0.0) q = 0.0;
  if (q > 1.0) q = 1.0;
  return q;
}

double chi_square_cdf(double x, int df) { return 1.0 - chi_square_sf(x, df); }

SymSolveResult sym_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols())
    throw std::domain_error("sym_solve: matrix not square");
  if (a.rows() != b.rows())
    throw std::domain_error("sym_solve: size mismatch");
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      if (std::fabs(a(i, j) - a(j, i)) >
          1e-12 * std::max(1.0, std::fabs(a(i, j))))
        throw std::domain_error("sym_solve: matrix not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  const double smallest = ev.minCoeff();

  SymSolveResult out;
  Matrix sys = a;
  if (!(smallest > 1e-10 * largest)) {
    const double lambda = 1e-8 * a.trace() / static_cast<double>(a.rows());
    sys += std::max(lambda, 1e-300) * Matrix::Identity(a.rows(), a.cols());
    out.regularized = true;
  }
  out.x = Eigen::LDLT<Matrix>(sys).solve(b);
  return out;
}

void validate(const Innovation& law) {
  if (law.law == Law::StudentT && !(law.df > 4.0))
    throw std::domain_error(
        "student-t innovations need df > 4 (finite fourth moment)");
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s) ^ stream_id;
  for (auto& st : state_) st = splitmix64(h);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() {
  double u;
  do {
    u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  } while (u <= 0.0);
  return u;
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double v1, v2, rsq;
  do {
    v1 = 2.0 * uniform() - 1.0;
    v2 = 2.0 * uniform() - 1.0;
    rsq = v1 * v1 + v2 * v2;
  } while (rsq >= 1.0 || rsq == 0.0);
  const double fac = std::sqrt(-2.0 * std::log(rsq) / rsq);
  cached_normal_ = v1 * fac;
  has_cached_ = true;
  return v2 * fac;
}

double RngStream::gamma(double shape) {
  // Marsaglia-Tsang squeeze; valid for shape >= 1.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::draw(const Innovation& law) {
  switch (law.law) {
    case Law::Normal:
      return normal();
    case Law::StudentT: {
      if (!(law.df > 4.0))
        throw std::domain_error(
            "student-t innovations need df > 4 (finite fourth moment)");
      const double z = normal();
      const double chi2 = 2.0 * gamma(0.5 * law.df);
      const double t = z / std::sqrt(chi2 / law.df);
      return t * std::sqrt((law.df - 2.0) / law.df);
    }
    case Law::SkewNormal: {
      const double k = law.kappa;
      const double delta = k / std::sqrt(1.0 + k * k);
      const double z0 = normal();
      const double z1 = normal();
      const double x = delta * std::fabs(z0) +
                       std::sqrt(1.0 - delta * delta) * z1;
      const double mean = delta * std::sqrt(2.0 / M_PI);
      const double sd = std::sqrt(1.0 - 2.0 * delta * delta / M_PI);
      return (x - mean) / sd;
    }
  }
  throw std::logic_error("unknown innovation law");
}

std::vector<double> RngStream::draw_n(const Innovation& law, std::size_t n) {
  validate(law);
  std::vector<double> out(n);
  for (auto& v : out) v = draw(law);
  return out;
}

std::uint64_t mix_stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                            std::uint64_t d) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s = h ^ b;
  h = splitmix64(s);
  s = h ^ c;
  h = splitmix64(s);
  s = h ^ d;
  return splitmix64(s);
}

}  // namespace portes
