#ifndef RFPCA_SPECFUN_HPP
#define RFPCA_SPECFUN_HPP

#include <Eigen/Dense>

namespace rfpca {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Scalar special functions
// ---------------------------------------------------------------------------

/// Digamma function psi(x) = d ln Gamma(x) / dx for x > 0.
///
/// Uses the asymptotic expansion for x >= 6 and the upward recurrence
/// psi(x) = psi(x + 1) - 1/x below that. Absolute error is below 1e-12 for
/// x >= 1e-3. Throws Error(Domain) for x <= 0 or NaN.
double digamma(double x);

/// ln(x) - psi(x), evaluated without the cancellation that the naive
/// difference suffers for large x. Always positive.
double log_minus_digamma(double x);

/// d-variate digamma: sum_{i=1..d} psi(x + (1 - i) / 2). Requires x > (d-1)/2.
double multivariate_digamma(double x, int d);

/// ln Gamma_d(x) = d(d-1)/4 ln(pi) + sum_{i=1..d} ln Gamma(x + (1 - i) / 2).
double log_multivariate_gamma(double x, int d);

struct GammaMoments {
  double mean;
  double mean_log;
};

/// E[tau] and E[ln tau] for tau ~ Gam(shape, rate).
GammaMoments gamma_moments(double shape, double rate);

// ---------------------------------------------------------------------------
// Symmetric positive definite matrices
// ---------------------------------------------------------------------------

/// A symmetric positive definite matrix together with its Cholesky factor.
///
/// Construction symmetrizes inputs whose relative asymmetry is below 1e-12
/// and rejects anything worse. A failed factorization throws
/// NotPositiveDefinite with the offending pivot. An optional diagonal jitter
/// of `jitter_scale * tr(A) / dim` is added before factorizing.
class SpdMatrix {
 public:
  explicit SpdMatrix(const MatrixXd& a, double jitter_scale = 0.0);

  static SpdMatrix identity(Index dim) { return SpdMatrix(MatrixXd::Identity(dim, dim)); }

  Index dim() const { return a_.rows(); }
  const MatrixXd& matrix() const { return a_; }
  /// Lower-triangular L with A = L L'.
  const MatrixXd& cholesky_factor() const { return l_; }
  double logdet() const { return logdet_; }
  double trace() const { return a_.trace(); }

  /// Solves A X = B.
  MatrixXd solve(const MatrixXd& b) const;
  /// L^{-1} B.
  MatrixXd solve_lower(const MatrixXd& b) const;
  /// Explicit inverse. Only for callers that genuinely need the matrix.
  MatrixXd inverse() const;
  /// x' A^{-1} x.
  double inv_quadratic(const VectorXd& x) const;

 private:
  MatrixXd a_;
  MatrixXd l_;
  double logdet_ = 0.0;
};

/// Relative asymmetry max|A - A'| / max(1, max|A|).
double asymmetry(const MatrixXd& a);

struct SpdSolution {
  MatrixXd x;
  double logdet;
};

/// X with A X = B together with ln|A|, both from one Cholesky factorization.
SpdSolution spd_solve_logdet(const SpdMatrix& a, const MatrixXd& b);

// ---------------------------------------------------------------------------
// Eigen decomposition and Wishart moments
// ---------------------------------------------------------------------------

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
///
/// Each eigenvector has its largest-magnitude entry made positive; exact
/// eigenvalue ties keep the order returned by the tridiagonal solver.
struct EigenSystem {
  VectorXd values;
  MatrixXd vectors;
};

EigenSystem sym_eigen(const MatrixXd& a);

struct WishartMoments {
  MatrixXd mean;
  double mean_logdet;
};

/// E[S] and E[ln|S|] for S ~ W_d(scale, dof). Requires dof > d - 1.
WishartMoments wishart_moments(const SpdMatrix& scale, double dof);

/// Dense Kronecker product A (x) B.
MatrixXd kronecker(const MatrixXd& a, const MatrixXd& b);

}  // namespace rfpca

#endif  // RFPCA_SPECFUN_HPP
