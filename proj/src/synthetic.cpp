#include "rfpca/synthetic.hpp"

#include <cmath>
#include <string>

#include "rfpca/distributions.hpp"
#include "rfpca/error.hpp"
#include "rfpca/specfun.hpp"

namespace rfpca {

std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::Domain, "linspace: n must be >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  const double step = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + step * static_cast<double>(i);
  out.back() = b;
  return out;
}

VectorXd planted_vector(Index n, int k) {
  const Index i = 2 * static_cast<Index>(k - 1);
  if (k < 1 || i + 1 >= n) throw Error(ErrorKind::Domain, "planted_vector: index out of range");
  VectorXd u = VectorXd::Zero(n);
  u(i) = 1.0 / std::sqrt(2.0);
  u(i + 1) = -1.0 / std::sqrt(2.0);
  return u;
}

MatrixXd complete_basis(const MatrixXd& leading, Index n) {
  if (leading.size() > 0 && leading.rows() != n) {
    throw Error(ErrorKind::DimensionMismatch, "complete_basis: leading vectors have wrong length");
  }
  MatrixXd basis(n, n);
  Index filled = 0;
  for (Index j = 0; j < leading.cols(); ++j) basis.col(filled++) = leading.col(j).normalized();
  for (Index e = 0; e < n && filled < n; ++e) {
    VectorXd v = VectorXd::Unit(n, e);
    // Two passes of classical Gram-Schmidt keep the columns orthonormal to rounding.
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < filled; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    }
    const double norm = v.norm();
    if (norm > 1e-8) basis.col(filled++) = v / norm;
  }
  if (filled != n) throw Error(ErrorKind::Domain, "complete_basis: leading vectors are dependent");
  return basis;
}

std::size_t outlier_count(std::size_t n, double p) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * p - 1e-9));
}

SyntheticSpec SyntheticSpec::preset(SyntheticFamily family, RngSeed seed) {
  SyntheticSpec s;
  s.family = family;
  s.seed = seed;
  const bool big = family == SyntheticFamily::Data2;
  s.c = big ? 100 : 4;
  s.r = big ? 100 : 10;
  // Leading eigenvalues follow the low-dimensional layout; the tail fills the rest.
  auto col_tail = linspace(0.8, 0.5, static_cast<std::size_t>(big ? 97 : 3));
  auto row_tail = linspace(0.5, 0.3, static_cast<std::size_t>(big ? 97 : 7));
  s.col_eigenvalues = big ? std::vector<double>{5.0, 0.8, 0.65} : std::vector<double>{5.0};
  s.col_eigenvalues.insert(s.col_eigenvalues.end(), col_tail.begin(), col_tail.end());
  s.row_eigenvalues = {4.0, 3.0, 2.0};
  s.row_eigenvalues.insert(s.row_eigenvalues.end(), row_tail.begin(), row_tail.end());
  s.col_planted = planted_vector(s.c, 1);
  s.row_planted.resize(s.r, 3);
  for (int k = 1; k <= 3; ++k) s.row_planted.col(k - 1) = planted_vector(s.r, k);

  switch (family) {
    case SyntheticFamily::Data1:
    case SyntheticFamily::Data2:
      s.n = 500;
      s.dof = 3.0;
      break;
    case SyntheticFamily::Data3:
    case SyntheticFamily::Data3_2:
    case SyntheticFamily::Data3_3:
      s.n = 1000;
      s.contamination = 0.05;
      s.outlier_range = family == SyntheticFamily::Data3     ? std::pair{100.0, 110.0}
                        : family == SyntheticFamily::Data3_2 ? std::pair{100.0, 102.0}
                                                             : std::pair{100000.0, 100002.0};
      break;
    case SyntheticFamily::Custom:
      break;
  }
  return s;
}

void SyntheticSpec::validate() const {
  if (c <= 0 || r <= 0 || n == 0) throw Error(ErrorKind::Domain, "SyntheticSpec: sizes must be positive");
  if (!(contamination >= 0.0) || !(contamination < 1.0)) {
    throw Error(ErrorKind::Domain, "SyntheticSpec: contamination must lie in [0, 1)");
  }
  if (!(dof > 0.0)) throw Error(ErrorKind::Domain, "SyntheticSpec: dof must be positive");
  if (!(outlier_range.second >= outlier_range.first)) {
    throw Error(ErrorKind::Domain, "SyntheticSpec: outlier range is reversed");
  }
  if (col_eigenvalues.size() != static_cast<std::size_t>(c)) {
    throw Error(ErrorKind::DimensionMismatch,
                "SyntheticSpec: " + std::to_string(col_eigenvalues.size()) +
                    " column eigenvalues for c = " + std::to_string(c));
  }
  if (row_eigenvalues.size() != static_cast<std::size_t>(r)) {
    throw Error(ErrorKind::DimensionMismatch,
                "SyntheticSpec: " + std::to_string(row_eigenvalues.size()) +
                    " row eigenvalues for r = " + std::to_string(r));
  }
  for (double v : col_eigenvalues) {
    if (!(v > 0.0)) throw Error(ErrorKind::Domain, "SyntheticSpec: eigenvalues must be positive");
  }
  for (double v : row_eigenvalues) {
    if (!(v > 0.0)) throw Error(ErrorKind::Domain, "SyntheticSpec: eigenvalues must be positive");
  }
}

MatrixXd SyntheticData::separable_covariance() const { return kronecker(row_cov, col_cov); }

namespace {

MatrixXd factor(const std::vector<double>& eig, const MatrixXd& planted, Index n) {
  const MatrixXd u = complete_basis(planted, n);
  const Eigen::Map<const VectorXd> v(eig.data(), n);
  MatrixXd s = u * v.asDiagonal() * u.transpose();
  return 0.5 * (s + s.transpose());
}

}  // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  out.mean = MatrixXd::Zero(spec.c, spec.r);
  out.col_cov = factor(spec.col_eigenvalues, spec.col_planted, spec.c);
  out.row_cov = factor(spec.row_eigenvalues, spec.row_planted, spec.r);
  out.dof = spec.dof;

  Rng rng(spec.seed);
  const SpdMatrix col(out.col_cov), row(out.row_cov);
  out.data = std::isinf(spec.dof) ? sample(MatrixNormalParams{out.mean, col, row}, spec.n, rng)
                                  : sample(MatrixTParams{out.mean, col, row, spec.dof}, spec.n, rng);
  const std::size_t k = outlier_count(spec.n, spec.contamination);
  const auto [lo, hi] = spec.outlier_range;
  for (std::size_t i = 0; i < k; ++i) {
    MatrixXd x(spec.c, spec.r);
    for (Index j = 0; j < spec.r; ++j) {
      for (Index q = 0; q < spec.c; ++q) x(q, j) = rng.uniform(lo, hi);
    }
    out.data.samples.push_back(std::move(x));
  }
  std::vector<bool> truth(spec.n + k, false);
  for (std::size_t i = spec.n; i < truth.size(); ++i) truth[i] = true;
  out.data.outlier_truth = std::move(truth);
  return out;
}

}  // namespace rfpca
