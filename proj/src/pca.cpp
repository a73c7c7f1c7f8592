#include "rfpca/pca.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "rfpca/error.hpp"
#include "rfpca/specfun.hpp"

namespace rfpca {

namespace {

struct TopEigen {
  MatrixXd vectors;
  VectorXd values;
};

TopEigen top_eigen(const MatrixXd& a, Index q, const char* who) {
  if (q < 1 || q > a.rows()) {
    throw Error(ErrorKind::Domain, std::string(who) + ": q = " + std::to_string(q) +
                                       " outside [1, " + std::to_string(a.rows()) + "]");
  }
  const EigenSystem es = sym_eigen(a);
  TopEigen out{es.vectors.leftCols(q), es.values.head(q)};
  if (!(out.values(q - 1) > 0.0)) {
    throw Error(ErrorKind::Domain, std::string(who) + ": kept eigenvalues must be positive");
  }
  return out;
}

bool whitened(PcaMethod m) { return m != PcaMethod::BPCA; }

}  // namespace

std::string_view to_string(PcaMethod method) {
  switch (method) {
    case PcaMethod::PCA: return "PCA";
    case PcaMethod::tPCA: return "tPCA";
    case PcaMethod::FPCA: return "FPCA";
    case PcaMethod::BPCA: return "BPCA";
    case PcaMethod::TPCA: return "TPCA";
    case PcaMethod::RFPCA: return "RFPCA";
  }
  return "unknown";
}

PcaMethod parse_pca_method(std::string_view name) {
  // tPCA and TPCA differ only in case, so those two are matched exactly.
  if (name == "tPCA" || name == "tpca") return PcaMethod::tPCA;
  if (name == "TPCA") return PcaMethod::TPCA;
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "pca") return PcaMethod::PCA;
  if (lower == "fpca") return PcaMethod::FPCA;
  if (lower == "bpca") return PcaMethod::BPCA;
  if (lower == "rfpca") return PcaMethod::RFPCA;
  if (lower == "matrix-tpca" || lower == "mtpca") return PcaMethod::TPCA;
  throw Error(ErrorKind::Domain, "unknown PCA method '" + std::string(name) + "'");
}

bool is_vector_method(PcaMethod method) {
  return method == PcaMethod::PCA || method == PcaMethod::tPCA;
}

VectorPcaModel build_vector_pca(const MatrixXd& cov, const VectorXd& center, Index q,
                                PcaMethod method) {
  if (cov.rows() != cov.cols() || cov.rows() != center.size()) {
    throw Error(ErrorKind::DimensionMismatch, "build_vector_pca: covariance and center disagree");
  }
  if (!is_vector_method(method)) {
    throw Error(ErrorKind::Domain, "build_vector_pca: method is not a vector method");
  }
  TopEigen te = top_eigen(cov, q, "build_vector_pca");
  return {std::move(te.vectors), std::move(te.values), center, method};
}

MatrixPcaModel build_matrix_pca(const MatrixXd& col_factor, const MatrixXd& row_factor,
                                const MatrixXd& center, Index q_c, Index q_r, PcaMethod method) {
  if (center.rows() != col_factor.rows() || center.cols() != row_factor.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "build_matrix_pca: factors and center disagree");
  }
  if (is_vector_method(method)) {
    throw Error(ErrorKind::Domain, "build_matrix_pca: method is not a matrix method");
  }
  TopEigen c = top_eigen(col_factor, q_c, "build_matrix_pca (column factor)");
  TopEigen r = top_eigen(row_factor, q_r, "build_matrix_pca (row factor)");
  return {std::move(c.vectors), std::move(c.values), std::move(r.vectors), std::move(r.values),
          center, method};
}

VectorXd transform(const VectorPcaModel& model, const VectorXd& x) {
  if (x.size() != model.center.size()) {
    throw Error(ErrorKind::DimensionMismatch, "transform: input has length " +
                                                  std::to_string(x.size()) + ", model expects " +
                                                  std::to_string(model.center.size()));
  }
  return model.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() *
         (model.basis.transpose() * (x - model.center));
}

MatrixXd transform(const MatrixPcaModel& model, const MatrixXd& x) {
  if (x.rows() != model.center.rows() || x.cols() != model.center.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "transform: input is " + std::to_string(x.rows()) +
                                                  "x" + std::to_string(x.cols()) +
                                                  ", model expects " +
                                                  std::to_string(model.center.rows()) + "x" +
                                                  std::to_string(model.center.cols()));
  }
  MatrixXd z = model.col_basis.transpose() * (x - model.center) * model.row_basis;
  if (whitened(model.method)) {
    z = model.col_eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() * z *
        model.row_eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
  }
  return z;
}

VectorXd reconstruct(const VectorPcaModel& model, const VectorXd& z) {
  if (z.size() != model.eigenvalues.size()) {
    throw Error(ErrorKind::DimensionMismatch, "reconstruct: reduced vector has wrong length");
  }
  return model.center + model.basis * (model.eigenvalues.cwiseSqrt().asDiagonal() * z);
}

MatrixXd reconstruct(const MatrixPcaModel& model, const MatrixXd& z) {
  if (z.rows() != model.col_eigenvalues.size() || z.cols() != model.row_eigenvalues.size()) {
    throw Error(ErrorKind::DimensionMismatch, "reconstruct: reduced matrix has wrong shape");
  }
  MatrixXd core = z;
  if (whitened(model.method)) {
    core = model.col_eigenvalues.cwiseSqrt().asDiagonal() * z *
           model.row_eigenvalues.cwiseSqrt().asDiagonal();
  }
  return model.center + model.col_basis * core * model.row_basis.transpose();
}

MatrixXd transform_observation(const PcaModel& model, const MatrixXd& x) {
  if (const auto* v = std::get_if<VectorPcaModel>(&model)) {
    const Eigen::Map<const VectorXd> flat(x.data(), x.size());
    return transform(*v, VectorXd(flat));
  }
  return transform(std::get<MatrixPcaModel>(model), x);
}

MethodFit fit_method(PcaMethod method, const Dataset& data, const FitOptions& opts) {
  data.validate();
  MethodFit out;
  out.method = method;
  out.rows = data.rows;
  out.cols = data.cols;
  const Index c = data.rows, r = data.cols;
  switch (method) {
    case PcaMethod::PCA: {
      if (data.size() < 2) throw Error(ErrorKind::InsufficientData, "PCA: need at least 2 observations");
      const MatrixXd x = data.vectorized();
      const VectorXd mean = x.colwise().mean();
      const MatrixXd centered = x.rowwise() - mean.transpose();
      out.vector_cov = centered.transpose() * centered / static_cast<double>(x.rows());
      out.vector_cov = 0.5 * (out.vector_cov + out.vector_cov.transpose());
      out.center = Eigen::Map<const MatrixXd>(mean.data(), c, r);
      break;
    }
    case PcaMethod::tPCA: {
      FitResult f = fit_mvt_ecme(data.vectorized(), opts);
      const auto& p = f.multivariate_t();
      out.vector_cov = p.scale.matrix();
      out.center = Eigen::Map<const MatrixXd>(p.center.data(), c, r);
      out.dof = p.dof;
      out.fit = std::move(f);
      break;
    }
    case PcaMethod::BPCA: {
      if (data.size() < 2) throw Error(ErrorKind::InsufficientData, "BPCA: need at least 2 observations");
      const BilinearScatter s = bilinear_scatter(data);
      out.center = s.mean;
      out.col_factor = s.col_scatter;
      out.row_factor = s.row_scatter;
      break;
    }
    case PcaMethod::FPCA: {
      FitResult f = fit_matrix_normal(data, opts);
      const auto& p = f.matrix_normal();
      out.center = p.mean;
      out.col_factor = p.col_cov.matrix();
      out.row_factor = p.row_cov.matrix();
      out.fit = std::move(f);
      break;
    }
    case PcaMethod::TPCA: {
      FitResult f = fit_matrix_T_ecme(data, opts);
      const auto& p = f.matrix_T();
      // A transposed fit models X' with (col, row) swapped.
      out.center = f.transposed ? MatrixXd(p.center.transpose()) : p.center;
      out.col_factor = f.transposed ? p.row_cov.matrix() : p.col_cov.matrix();
      out.row_factor = f.transposed ? p.col_cov.matrix() : p.row_cov.matrix();
      out.dof = p.dof;
      out.fit = std::move(f);
      break;
    }
    case PcaMethod::RFPCA: {
      FitResult f = fit_matrix_t_px_ecme(data, opts);
      const auto& p = f.matrix_t();
      out.center = p.mean;
      out.col_factor = p.col_cov.matrix();
      out.row_factor = p.row_cov.matrix();
      out.dof = p.dof;
      out.fit = std::move(f);
      break;
    }
  }
  return out;
}

PcaModel build_model(const MethodFit& fit, Index q_c, Index q_r, Index q) {
  if (is_vector_method(fit.method)) {
    const Eigen::Map<const VectorXd> center(fit.center.data(), fit.center.size());
    return build_vector_pca(fit.vector_cov, VectorXd(center), q, fit.method);
  }
  return build_matrix_pca(fit.col_factor, fit.row_factor, fit.center, q_c, q_r, fit.method);
}

MatrixXd implied_covariance(const MethodFit& fit, Index cap) {
  const Index d = fit.rows * fit.cols;
  if (d > cap) {
    throw Error(ErrorKind::Domain, "implied_covariance: dimension c*r = " + std::to_string(d) +
                                       " exceeds the cap of " + std::to_string(cap) +
                                       "; compare the factors instead");
  }
  switch (fit.method) {
    case PcaMethod::PCA:
    case PcaMethod::tPCA:
      return fit.vector_cov;
    case PcaMethod::BPCA:
      return kronecker(fit.row_factor, fit.col_factor) / fit.col_factor.trace();
    case PcaMethod::FPCA:
    case PcaMethod::RFPCA:
      return kronecker(fit.row_factor, fit.col_factor);
    case PcaMethod::TPCA:
      return kronecker(fit.row_factor, fit.col_factor) / fit.dof;
  }
  return {};
}

}  // namespace rfpca
