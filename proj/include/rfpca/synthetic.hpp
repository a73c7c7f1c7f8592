#ifndef RFPCA_SYNTHETIC_HPP
#define RFPCA_SYNTHETIC_HPP

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rfpca/dataset.hpp"
#include "rfpca/rng.hpp"

namespace rfpca {

/// n evenly spaced points from a to b inclusive; n = 1 gives {a}.
std::vector<double> linspace(double a, double b, std::size_t n);

/// Planted unit vector u_k (k >= 1) of length n: +-1/sqrt(2) at entries 2k-2, 2k-1.
Eigen::VectorXd planted_vector(Eigen::Index n, int k);

/// Orthonormal n x n basis whose leading columns are `leading` (assumed
/// orthonormal), completed by Gram-Schmidt over e_1, ..., e_n.
Eigen::MatrixXd complete_basis(const Eigen::MatrixXd& leading, Eigen::Index n);

enum class SyntheticFamily { Data1, Data2, Data3, Data3_2, Data3_3, Custom };

/// Recipe for a synthetic matrix dataset.
///
/// Factors are U diag(eigenvalues) U' with U = complete_basis(planted).
/// Observations come from the matrix-t with `dof`, or from the matrix normal
/// when dof is infinite. ceil(N p) outliers with i.i.d. uniform entries over
/// `outlier_range` are appended after the N regular observations.
struct SyntheticSpec {
  SyntheticFamily family = SyntheticFamily::Custom;
  Eigen::Index c = 4;
  Eigen::Index r = 10;
  std::size_t n = 500;
  double dof = std::numeric_limits<double>::infinity();
  double contamination = 0.0;
  std::pair<double, double> outlier_range{100.0, 110.0};
  RngSeed seed{};
  std::vector<double> col_eigenvalues;
  std::vector<double> row_eigenvalues;
  Eigen::MatrixXd col_planted;  // c x k, may be empty
  Eigen::MatrixXd row_planted;  // r x k, may be empty

  /// Preset for a named family with its default size; `n` may be overridden after.
  static SyntheticSpec preset(SyntheticFamily family, RngSeed seed = {});
  void validate() const;
};

struct SyntheticData {
  Dataset data;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd col_cov;
  Eigen::MatrixXd row_cov;
  double dof = std::numeric_limits<double>::infinity();

  /// Sigma_r (x) Sigma_c, the reference covariance used by the robustness metric.
  Eigen::MatrixXd separable_covariance() const;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

/// ceil(N p) with a guard against representation error in N p.
std::size_t outlier_count(std::size_t n, double p);

}  // namespace rfpca

#endif  // RFPCA_SYNTHETIC_HPP
