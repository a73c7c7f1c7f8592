#include "rfpca/distributions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rfpca/error.hpp"

namespace rfpca {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void check_dof(double dof, const char* who) {
  if (!(dof > 0.0) || !std::isfinite(dof)) {
    throw Error(ErrorKind::Domain, std::string(who) + ": degrees of freedom must be positive");
  }
}

void check_matrix_dims(const MatrixXd& mean, const SpdMatrix& col_cov, const SpdMatrix& row_cov,
                       const char* who) {
  if (mean.rows() != col_cov.dim() || mean.cols() != row_cov.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(who) + ": mean is " + std::to_string(mean.rows()) + "x" +
                    std::to_string(mean.cols()) + " but factors are " +
                    std::to_string(col_cov.dim()) + " and " + std::to_string(row_cov.dim()));
  }
}

void check_observation(const MatrixXd& x, const MatrixXd& mean, const char* who) {
  if (x.rows() != mean.rows() || x.cols() != mean.cols()) {
    throw Error(ErrorKind::DimensionMismatch, std::string(who) + ": observation has wrong shape");
  }
}

// L_c^{-1} (X - M) L_r^{-T}; its squared Frobenius norm is the residual trace.
MatrixXd whitened_residual(const MatrixXd& x, const MatrixXd& mean, const SpdMatrix& col_cov,
                           const SpdMatrix& row_cov) {
  const MatrixXd a = col_cov.solve_lower(x - mean);
  return row_cov.solve_lower(a.transpose()).transpose();
}

Dataset empty_dataset(Index c, Index r, std::size_t n) {
  Dataset out;
  out.rows = c;
  out.cols = r;
  out.samples.reserve(n);
  return out;
}

MatrixXd standard_normal(Index rows, Index cols, Rng& rng) {
  MatrixXd z(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) z(i, j) = rng.normal();
  }
  return z;
}

}  // namespace

void validate(const MatrixNormalParams& p) {
  check_matrix_dims(p.mean, p.col_cov, p.row_cov, "MatrixNormalParams");
}

void validate(const MatrixTParams& p) {
  check_matrix_dims(p.mean, p.col_cov, p.row_cov, "MatrixTParams");
  check_dof(p.dof, "MatrixTParams");
}

void validate(const MatrixTTParams& p) {
  check_matrix_dims(p.center, p.col_cov, p.row_cov, "MatrixTTParams");
  check_dof(p.dof, "MatrixTTParams");
}

void validate(const MultivariateTParams& p) {
  if (p.center.size() != p.scale.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "MultivariateTParams: center/scale size mismatch");
  }
  check_dof(p.dof, "MultivariateTParams");
}

double residual_trace(const MatrixXd& x, const MatrixXd& mean, const SpdMatrix& col_cov,
                      const SpdMatrix& row_cov) {
  check_observation(x, mean, "residual_trace");
  return whitened_residual(x, mean, col_cov, row_cov).squaredNorm();
}

double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const SpdMatrix& cov) {
  if (x.size() != mean.size() || x.size() != cov.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "mvn_logpdf: dimension mismatch");
  }
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * kLogTwoPi + cov.logdet() + cov.inv_quadratic(x - mean));
}

double mvt_logpdf(const VectorXd& x, const MultivariateTParams& p) {
  validate(p);
  if (x.size() != p.center.size()) throw Error(ErrorKind::DimensionMismatch, "mvt_logpdf: dimension mismatch");
  const double d = static_cast<double>(x.size());
  const double nu = p.dof;
  const double maha = p.scale.inv_quadratic(x - p.center);
  return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
         0.5 * d * std::log(std::numbers::pi * nu) - 0.5 * p.scale.logdet() -
         0.5 * (nu + d) * std::log1p(maha / nu);
}

double matrix_normal_logpdf(const MatrixXd& x, const MatrixNormalParams& p) {
  validate(p);
  check_observation(x, p.mean, "matrix_normal_logpdf");
  const double c = static_cast<double>(x.rows());
  const double r = static_cast<double>(x.cols());
  const double delta = whitened_residual(x, p.mean, p.col_cov, p.row_cov).squaredNorm();
  return -0.5 * (c * r * kLogTwoPi + r * p.col_cov.logdet() + c * p.row_cov.logdet() + delta);
}

double matrix_t_logpdf(const MatrixXd& x, const MatrixTParams& p) {
  validate(p);
  check_observation(x, p.mean, "matrix_t_logpdf");
  const double c = static_cast<double>(x.rows());
  const double r = static_cast<double>(x.cols());
  const double d = c * r;
  const double nu = p.dof;
  const double delta = whitened_residual(x, p.mean, p.col_cov, p.row_cov).squaredNorm();
  return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
         0.5 * d * std::log(std::numbers::pi * nu) - 0.5 * r * p.col_cov.logdet() -
         0.5 * c * p.row_cov.logdet() - 0.5 * (nu + d) * std::log1p(delta / nu);
}

double matrix_T_logpdf(const MatrixXd& x, const MatrixTTParams& p) {
  validate(p);
  check_observation(x, p.center, "matrix_T_logpdf");
  const Index ci = x.rows();
  const double c = static_cast<double>(ci);
  const double r = static_cast<double>(x.cols());
  const double nu = p.dof;
  // |I + Sc^{-1} R| = |I + A A'| with A the whitened residual.
  const MatrixXd a = whitened_residual(x, p.center, p.col_cov, p.row_cov);
  MatrixXd g = MatrixXd::Identity(ci, ci);
  g.selfadjointView<Eigen::Lower>().rankUpdate(a);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  const double logdet_g = SpdMatrix(g).logdet();
  const int ic = static_cast<int>(ci);
  return log_multivariate_gamma(0.5 * (nu + c + r - 1.0), ic) -
         log_multivariate_gamma(0.5 * (nu + c - 1.0), ic) -
         0.5 * c * r * std::log(std::numbers::pi) - 0.5 * r * p.col_cov.logdet() -
         0.5 * c * p.row_cov.logdet() - 0.5 * (nu + c + r - 1.0) * logdet_g;
}

GammaPosterior mvt_posterior_weight(const VectorXd& x, const MultivariateTParams& p) {
  validate(p);
  if (x.size() != p.center.size()) {
    throw Error(ErrorKind::DimensionMismatch, "mvt_posterior_weight: dimension mismatch");
  }
  const double d = static_cast<double>(x.size());
  return {0.5 * (p.dof + d), 0.5 * (p.dof + p.scale.inv_quadratic(x - p.center))};
}

GammaPosterior matrix_t_posterior_weight(const MatrixXd& x, const MatrixTParams& p) {
  validate(p);
  check_observation(x, p.mean, "matrix_t_posterior_weight");
  const double d = static_cast<double>(x.size());
  return {0.5 * (p.dof + d), 0.5 * (p.dof + residual_trace(x, p.mean, p.col_cov, p.row_cov))};
}

WishartPosterior matrix_T_posterior(const MatrixXd& x, const MatrixTTParams& p) {
  validate(p);
  check_observation(x, p.center, "matrix_T_posterior");
  const Index c = x.rows();
  // (X - M) Sr^{-1} (X - M)' = Y Y' with Y = (X - M) L_r^{-T}.
  const MatrixXd y = p.row_cov.solve_lower((x - p.center).transpose()).transpose();
  MatrixXd k = p.col_cov.matrix();
  k.selfadjointView<Eigen::Lower>().rankUpdate(y);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  const SpdMatrix kk(k);
  return {SpdMatrix(kk.inverse()),
          p.dof + static_cast<double>(c) + static_cast<double>(x.cols()) - 1.0};
}

MatrixXd sample_wishart(const SpdMatrix& scale, double dof, Rng& rng) {
  const Index d = scale.dim();
  if (!(dof > static_cast<double>(d) - 1.0)) {
    throw Error(ErrorKind::Domain, "sample_wishart: degrees of freedom must exceed dim - 1");
  }
  // Bartlett decomposition: S = (L A)(L A)' with A lower triangular.
  MatrixXd a = MatrixXd::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(dof - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const MatrixXd la = scale.cholesky_factor() * a.triangularView<Eigen::Lower>();
  MatrixXd s = la * la.transpose();
  return 0.5 * (s + s.transpose());
}

Dataset sample(const MatrixNormalParams& p, std::size_t n, Rng& rng) {
  validate(p);
  const Index c = p.mean.rows(), r = p.mean.cols();
  const MatrixXd lr_t = p.row_cov.cholesky_factor().transpose();
  Dataset out = empty_dataset(c, r, n);
  for (std::size_t i = 0; i < n; ++i) {
    const MatrixXd z = standard_normal(c, r, rng);
    out.samples.emplace_back(p.mean + p.col_cov.cholesky_factor() * z * lr_t);
  }
  return out;
}

Dataset sample(const MatrixTParams& p, std::size_t n, Rng& rng) {
  validate(p);
  const Index c = p.mean.rows(), r = p.mean.cols();
  const MatrixXd lr_t = p.row_cov.cholesky_factor().transpose();
  Dataset out = empty_dataset(c, r, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = rng.gamma(0.5 * p.dof, 0.5 * p.dof);
    const MatrixXd z = standard_normal(c, r, rng);
    out.samples.emplace_back(p.mean +
                             (p.col_cov.cholesky_factor() * z * lr_t) / std::sqrt(tau));
  }
  return out;
}

Dataset sample(const MatrixTTParams& p, std::size_t n, Rng& rng) {
  validate(p);
  const Index c = p.center.rows(), r = p.center.cols();
  const SpdMatrix precision_scale(p.col_cov.inverse());
  const double wishart_dof = p.dof + static_cast<double>(c) - 1.0;
  const MatrixXd lr_t = p.row_cov.cholesky_factor().transpose();
  Dataset out = empty_dataset(c, r, n);
  for (std::size_t i = 0; i < n; ++i) {
    const SpdMatrix s(sample_wishart(precision_scale, wishart_dof, rng));
    const MatrixXd z = standard_normal(c, r, rng);
    // B = L_s^{-T} satisfies B B' = S^{-1}.
    const MatrixXd bz = s.cholesky_factor().transpose().triangularView<Eigen::Upper>().solve(z);
    out.samples.emplace_back(p.center + bz * lr_t);
  }
  return out;
}

MatrixXd sample(const MultivariateTParams& p, std::size_t n, Rng& rng) {
  validate(p);
  const Index d = p.center.size();
  MatrixXd out(static_cast<Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = rng.gamma(0.5 * p.dof, 0.5 * p.dof);
    VectorXd z(d);
    for (Index k = 0; k < d; ++k) z(k) = rng.normal();
    out.row(static_cast<Index>(i)) =
        (p.center + p.scale.cholesky_factor() * z / std::sqrt(tau)).transpose();
  }
  return out;
}

}  // namespace rfpca
