#ifndef RFPCA_DISTRIBUTIONS_HPP
#define RFPCA_DISTRIBUTIONS_HPP

#include <cstddef>

#include <Eigen/Dense>

#include "rfpca/dataset.hpp"
#include "rfpca/rng.hpp"
#include "rfpca/specfun.hpp"

namespace rfpca {

// Scale-matrix naming follows the matrix-variate convention: `col_cov` is the
// c x c column covariance and `row_cov` the r x r row covariance, so that
// cov(vec X) is proportional to kron(row_cov, col_cov).

struct MatrixNormalParams {
  MatrixXd mean;
  SpdMatrix col_cov;
  SpdMatrix row_cov;
};

/// Matrix-variate t: vec(X) ~ t_{cr}(vec M, kron(row_cov, col_cov), dof).
struct MatrixTParams {
  MatrixXd mean;
  SpdMatrix col_cov;
  SpdMatrix row_cov;
  double dof;
};

/// Matrix-variate T: the Wishart-mixed matrix normal
/// X | S ~ N(M, S^{-1}, row_cov), S ~ W_c(col_cov^{-1}, dof + c - 1).
struct MatrixTTParams {
  MatrixXd center;
  SpdMatrix col_cov;
  SpdMatrix row_cov;
  double dof;
};

struct MultivariateTParams {
  VectorXd center;
  SpdMatrix scale;
  double dof;
};

struct GammaPosterior {
  double shape;
  double rate;
  double mean() const { return shape / rate; }
};

struct WishartPosterior {
  SpdMatrix scale;
  double dof;
  MatrixXd mean() const { return dof * scale.matrix(); }
};

void validate(const MatrixNormalParams& p);
void validate(const MatrixTParams& p);
void validate(const MatrixTTParams& p);
void validate(const MultivariateTParams& p);

/// tr{col_cov^{-1} (X - M) row_cov^{-1} (X - M)'} via triangular solves.
double residual_trace(const MatrixXd& x, const MatrixXd& mean, const SpdMatrix& col_cov,
                      const SpdMatrix& row_cov);

// Log-densities, normalizing constants included.
double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const SpdMatrix& cov);
double mvt_logpdf(const VectorXd& x, const MultivariateTParams& p);
double matrix_normal_logpdf(const MatrixXd& x, const MatrixNormalParams& p);
double matrix_t_logpdf(const MatrixXd& x, const MatrixTParams& p);
/// Matrix-T log-density; the determinant factor carries the exponent
/// -(dof + c + r - 1) / 2.
double matrix_T_logpdf(const MatrixXd& x, const MatrixTTParams& p);

/// Posterior of the latent weight: Gam((dof + d)/2, (dof + Mahalanobis)/2).
GammaPosterior mvt_posterior_weight(const VectorXd& x, const MultivariateTParams& p);
/// Posterior of the latent weight: Gam((dof + cr)/2, (dof + residual trace)/2).
GammaPosterior matrix_t_posterior_weight(const MatrixXd& x, const MatrixTParams& p);
/// Posterior of the latent precision: W_c([(X-M) row_cov^{-1} (X-M)' + col_cov]^{-1}, dof + c + r - 1).
WishartPosterior matrix_T_posterior(const MatrixXd& x, const MatrixTTParams& p);

// Hierarchical samplers. Each draws in a fixed order from the supplied
// stream, so the output is a pure function of the seed.
MatrixXd sample_wishart(const SpdMatrix& scale, double dof, Rng& rng);
Dataset sample(const MatrixNormalParams& p, std::size_t n, Rng& rng);
Dataset sample(const MatrixTParams& p, std::size_t n, Rng& rng);
Dataset sample(const MatrixTTParams& p, std::size_t n, Rng& rng);
/// N x d, one draw per row.
MatrixXd sample(const MultivariateTParams& p, std::size_t n, Rng& rng);

template <class Params>
auto sample(const Params& p, std::size_t n, RngSeed seed) {
  Rng rng(seed);
  return sample(p, n, rng);
}

}  // namespace rfpca

#endif  // RFPCA_DISTRIBUTIONS_HPP
