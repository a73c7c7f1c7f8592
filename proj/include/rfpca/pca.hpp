#ifndef RFPCA_PCA_HPP
#define RFPCA_PCA_HPP

#include <optional>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "rfpca/dataset.hpp"
#include "rfpca/estimators.hpp"

namespace rfpca {

/// PCA and tPCA work on vec(X); the other four keep the matrix structure.
enum class PcaMethod { PCA, tPCA, FPCA, BPCA, TPCA, RFPCA };

std::string_view to_string(PcaMethod method);
/// Case-insensitive; throws Domain on an unknown name.
PcaMethod parse_pca_method(std::string_view name);
bool is_vector_method(PcaMethod method);

struct VectorPcaModel {
  Eigen::MatrixXd basis;        // d x q, orthonormal columns
  Eigen::VectorXd eigenvalues;  // q, descending
  Eigen::VectorXd center;
  PcaMethod method = PcaMethod::PCA;
};

struct MatrixPcaModel {
  Eigen::MatrixXd col_basis;  // c x q_c
  Eigen::VectorXd col_eigenvalues;
  Eigen::MatrixXd row_basis;  // r x q_r
  Eigen::VectorXd row_eigenvalues;
  Eigen::MatrixXd center;
  PcaMethod method = PcaMethod::FPCA;
};

using PcaModel = std::variant<VectorPcaModel, MatrixPcaModel>;

/// Top-q eigenpairs of a symmetric covariance. The kept eigenvalues must be positive.
VectorPcaModel build_vector_pca(const Eigen::MatrixXd& cov, const Eigen::VectorXd& center,
                                Eigen::Index q, PcaMethod method = PcaMethod::PCA);

/// Independent top-q eigendecompositions of the column and row factors.
MatrixPcaModel build_matrix_pca(const Eigen::MatrixXd& col_factor, const Eigen::MatrixXd& row_factor,
                                const Eigen::MatrixXd& center, Eigen::Index q_c, Eigen::Index q_r,
                                PcaMethod method);

/// z = Lambda^{-1/2} U' (x - center).
Eigen::VectorXd transform(const VectorPcaModel& model, const Eigen::VectorXd& x);
/// Z = Lambda_c^{-1/2} U_c' (X - center) U_r Lambda_r^{-1/2}; BPCA skips the whitening.
Eigen::MatrixXd transform(const MatrixPcaModel& model, const Eigen::MatrixXd& x);
/// Adjoint maps back into the data space; reconstruct(transform(.)) is a projection.
Eigen::VectorXd reconstruct(const VectorPcaModel& model, const Eigen::VectorXd& z);
Eigen::MatrixXd reconstruct(const MatrixPcaModel& model, const Eigen::MatrixXd& z);

/// Reduced representation of a c x r observation under either model kind
/// (vector models see vec(X)), returned as a matrix (q x 1 for vector models).
Eigen::MatrixXd transform_observation(const PcaModel& model, const Eigen::MatrixXd& x);

/// Everything a method contributes downstream: its center and the factor(s)
/// its projections and implied covariance are built from.
struct MethodFit {
  PcaMethod method = PcaMethod::PCA;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::MatrixXd center;      // c x r
  Eigen::MatrixXd vector_cov;  // PCA / tPCA: d x d
  Eigen::MatrixXd col_factor;  // matrix methods, in the data orientation
  Eigen::MatrixXd row_factor;
  double dof = 0.0;            // tPCA, TPCA, RFPCA
  std::optional<FitResult> fit;
};

/// Fits `method` on the data. PCA uses the 1/N sample covariance of vec(X),
/// tPCA the multivariate-t ECME scale, BPCA the bilinear scatters, FPCA the
/// matrix-normal CM, TPCA the matrix-T ECME and RFPCA the matrix-t PX-ECME.
MethodFit fit_method(PcaMethod method, const Dataset& data, const FitOptions& opts = {});

/// Projection model from a method fit; q_c/q_r for matrix methods, q for vector ones.
PcaModel build_model(const MethodFit& fit, Eigen::Index q_c, Eigen::Index q_r, Eigen::Index q);

/// Dense cr x cr covariance implied by a method fit:
///   PCA sample covariance, tPCA scale, BPCA S_r (x) S_c / tr(S_c),
///   FPCA and RFPCA Sigma_r (x) Sigma_c, TPCA Sigma_r (x) Sigma_c / nu.
/// Refuses when cr exceeds `cap`.
Eigen::MatrixXd implied_covariance(const MethodFit& fit, Eigen::Index cap = 400);

}  // namespace rfpca

#endif  // RFPCA_PCA_HPP
