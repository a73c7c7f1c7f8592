#ifndef RFPCA_TEST_SUPPORT_HPP
#define RFPCA_TEST_SUPPORT_HPP

#include <cmath>

#include <Eigen/Dense>

#include "rfpca/rng.hpp"

namespace rfpca::test {

/// Random SPD matrix A A' / n + I / 2 with moderate conditioning.
inline Eigen::MatrixXd random_spd(Eigen::Index n, Rng& rng, double ridge = 0.5) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = rng.normal();
  Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(n);
  s.diagonal().array() += ridge;
  return 0.5 * (s + s.transpose());
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = rng.normal();
  return a;
}

inline Eigen::VectorXd vec(const Eigen::MatrixXd& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

/// Largest principal angle (radians) between the column spans of a and b,
/// from the sine form ||(I - Qa Qa') Qb||_2, which stays accurate near zero.
inline double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(a), qb(b);
  const Eigen::MatrixXd ua = qa.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd ub = qb.householderQ() * Eigen::MatrixXd::Identity(b.rows(), b.cols());
  const Eigen::MatrixXd resid = ub - ua * (ua.transpose() * ub);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
  const double smax = std::min(1.0, svd.singularValues()(0));
  return std::asin(smax);
}

}  // namespace rfpca::test

#endif
