#include "rfpca/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "rfpca/error.hpp"

namespace rfpca {

namespace {

constexpr double kAsymptoticFrom = 6.0;

// Tail of the asymptotic series: ln(x) - psi(x) - 1/(2x), x >= 6.
double asymptotic_tail(double x) {
  // Bernoulli terms B_{2k} / (2k x^{2k}).
  static constexpr double kCoef[] = {
      1.0 / 12.0,        -1.0 / 120.0,  1.0 / 252.0, -1.0 / 240.0,
      1.0 / 132.0,       -691.0 / 32760.0, 1.0 / 12.0,  -3617.0 / 8160.0,
      43867.0 / 14364.0, -174611.0 / 6600.0,
  };
  const double inv2 = 1.0 / (x * x);
  double sum = 0.0;
  // Horner in 1/x^2, highest order first.
  for (int k = static_cast<int>(std::size(kCoef)) - 1; k >= 0; --k) {
    sum = sum * inv2 + kCoef[k];
  }
  return sum * inv2;
}

void require_finite_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw Error(ErrorKind::Domain,
                std::string(what) + ": argument must be positive and finite, got " +
                    std::to_string(x));
  }
}

}  // namespace

double digamma(double x) {
  require_finite_positive(x, "digamma");
  double shift = 0.0;
  while (x < kAsymptoticFrom) {
    shift += 1.0 / x;
    x += 1.0;
  }
  return std::log(x) - 0.5 / x - asymptotic_tail(x) - shift;
}

double log_minus_digamma(double x) {
  require_finite_positive(x, "log_minus_digamma");
  if (x >= kAsymptoticFrom) return 0.5 / x + asymptotic_tail(x);
  return std::log(x) - digamma(x);
}

double multivariate_digamma(double x, int d) {
  if (d < 1) throw Error(ErrorKind::Domain, "multivariate_digamma: d must be >= 1");
  if (!(x > 0.5 * (d - 1))) {
    throw Error(ErrorKind::Domain, "multivariate_digamma: requires x > (d-1)/2");
  }
  double sum = 0.0;
  for (int i = 1; i <= d; ++i) sum += digamma(x + 0.5 * (1 - i));
  return sum;
}

double log_multivariate_gamma(double x, int d) {
  if (d < 1) throw Error(ErrorKind::Domain, "log_multivariate_gamma: d must be >= 1");
  if (!(x > 0.5 * (d - 1))) {
    throw Error(ErrorKind::Domain, "log_multivariate_gamma: requires x > (d-1)/2");
  }
  double sum = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int i = 1; i <= d; ++i) sum += std::lgamma(x + 0.5 * (1 - i));
  return sum;
}

GammaMoments gamma_moments(double shape, double rate) {
  require_finite_positive(shape, "gamma_moments(shape)");
  require_finite_positive(rate, "gamma_moments(rate)");
  return {shape / rate, digamma(shape) - std::log(rate)};
}

double asymmetry(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

SpdMatrix::SpdMatrix(const MatrixXd& a, double jitter_scale) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "SpdMatrix: input must be square and non-empty");
  }
  if (!a.allFinite()) throw NotPositiveDefinite(0, "SpdMatrix (non-finite entries)");
  if (asymmetry(a) > 1e-12) {
    throw Error(ErrorKind::Domain, "SpdMatrix: input is not symmetric");
  }
  a_ = 0.5 * (a + a.transpose());
  if (jitter_scale > 0.0) {
    a_.diagonal().array() += jitter_scale * a_.trace() / static_cast<double>(a_.rows());
  }
  Eigen::LLT<MatrixXd> llt(a_);
  if (llt.info() != Eigen::Success) {
    // Recover the failing pivot with an unblocked pass.
    MatrixXd w = a_;
    const Index n = w.rows();
    for (Index j = 0; j < n; ++j) {
      const double d = w(j, j) - w.row(j).head(j).squaredNorm();
      if (!(d > 0.0)) throw NotPositiveDefinite(j, "SpdMatrix");
      w(j, j) = std::sqrt(d);
      for (Index i = j + 1; i < n; ++i) {
        w(i, j) = (w(i, j) - w.row(i).head(j).dot(w.row(j).head(j))) / w(j, j);
      }
    }
    throw NotPositiveDefinite(n - 1, "SpdMatrix");
  }
  l_ = llt.matrixL();
  const auto diag = l_.diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
    Index bad = 0;
    for (Index j = 0; j < diag.size(); ++j) {
      if (!(diag(j) > 0.0)) { bad = j; break; }
    }
    throw NotPositiveDefinite(bad, "SpdMatrix");
  }
  logdet_ = 2.0 * diag.array().log().sum();
}

MatrixXd SpdMatrix::solve(const MatrixXd& b) const {
  if (b.rows() != dim()) throw Error(ErrorKind::DimensionMismatch, "SpdMatrix::solve: row mismatch");
  MatrixXd y = l_.triangularView<Eigen::Lower>().solve(b);
  l_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return y;
}

MatrixXd SpdMatrix::solve_lower(const MatrixXd& b) const {
  if (b.rows() != dim()) throw Error(ErrorKind::DimensionMismatch, "SpdMatrix::solve_lower: row mismatch");
  return l_.triangularView<Eigen::Lower>().solve(b);
}

MatrixXd SpdMatrix::inverse() const {
  MatrixXd inv = solve(MatrixXd::Identity(dim(), dim()));
  return 0.5 * (inv + inv.transpose());
}

double SpdMatrix::inv_quadratic(const VectorXd& x) const {
  if (x.size() != dim()) throw Error(ErrorKind::DimensionMismatch, "SpdMatrix::inv_quadratic");
  return l_.triangularView<Eigen::Lower>().solve(x).squaredNorm();
}

SpdSolution spd_solve_logdet(const SpdMatrix& a, const MatrixXd& b) {
  return {a.solve(b), a.logdet()};
}

EigenSystem sym_eigen(const MatrixXd& a) {
  if (a.rows() != a.cols()) throw Error(ErrorKind::DimensionMismatch, "sym_eigen: matrix not square");
  if (asymmetry(a) > 1e-10) throw Error(ErrorKind::Domain, "sym_eigen: matrix not symmetric");
  const MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::Domain, "sym_eigen: eigen solver did not converge");
  }
  const Index n = sym.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const VectorXd& vals = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return vals(i) > vals(j); });

  EigenSystem out{VectorXd(n), MatrixXd(n, n)};
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = vals(src);
    VectorXd v = solver.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.vectors.col(k) = v;
  }
  return out;
}

WishartMoments wishart_moments(const SpdMatrix& scale, double dof) {
  const Index d = scale.dim();
  if (!(dof > static_cast<double>(d) - 1.0)) {
    throw Error(ErrorKind::Domain, "wishart_moments: degrees of freedom must exceed dim - 1");
  }
  return {dof * scale.matrix(),
          multivariate_digamma(0.5 * dof, static_cast<int>(d)) +
              static_cast<double>(d) * std::numbers::ln2 + scale.logdet()};
}

MatrixXd kronecker(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace rfpca
