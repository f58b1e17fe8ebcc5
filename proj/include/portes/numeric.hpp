#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace portes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Upper tail probability P(X > x) for X ~ chi-squared with df degrees of
/// freedom. Computed through the regularized incomplete gamma function
/// (series expansion below the shape parameter, continued fraction above).
double chi_square_sf(double x, int df);

/// Lower tail P(X <= x); complement of chi_square_sf.
double chi_square_cdf(double x, int df);

struct SymSolveResult {
  Matrix x;
  bool regularized = false;  // ridge was applied to a near-singular system
};

/// Solves A X = B for symmetric A. Near-singular systems (smallest
/// eigenvalue below 1e-10 times the largest) are ridge-regularized with
/// lambda = 1e-8 * trace(A) / dim and flagged instead of failing.
SymSolveResult sym_solve(const Matrix& a, const Matrix& b);

enum class Law { Normal, StudentT, SkewNormal };

/// Innovation law for simulation and Monte Carlo draws. All three laws are
/// standardized to mean zero and unit variance; Student-t requires df > 4
/// (finite fourth moment).
struct Innovation {
  Law law = Law::Normal;
  double df = 10.0;     // StudentT
  double kappa = 0.0;   // SkewNormal shape
};

void validate(const Innovation& law);

/// Deterministic random stream keyed by (seed, stream_id). Identical keys
/// yield bit-identical draw sequences regardless of process or thread
/// layout. Internally a xoshiro256++ generator seeded via splitmix64.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  double uniform();  // open interval (0, 1)
  double normal();   // standard normal, polar method
  double draw(const Innovation& law);
  std::vector<double> draw_n(const Innovation& law, std::size_t n);

 private:
  double gamma(double shape);  // Marsaglia-Tsang, shape >= 1

  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Mixes integers into a stream id; used to derive disjoint sub-streams
/// from (cell, replication, attempt) coordinates.
std::uint64_t mix_stream_id(std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0, std::uint64_t d = 0);

}  // namespace portes
