#ifndef RFPCA_ESTIMATORS_HPP
#define RFPCA_ESTIMATORS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rfpca/dataset.hpp"
#include "rfpca/distributions.hpp"

namespace rfpca {

enum class ModelFamily { MatrixNormal, MultivariateT, MatrixT, MatrixTT };
enum class Algorithm { CM, ECME, PXECME };
enum class InitMode { Deterministic, Random };

std::string_view to_string(ModelFamily family);
std::string_view to_string(Algorithm algorithm);

/// Empty until a fit has populated it.
using FittedParams = std::variant<std::monostate, MatrixNormalParams, MultivariateTParams,
                                  MatrixTParams, MatrixTTParams>;

struct FitOptions {
  /// Stop when |1 - L(t-1) / L(t)| < tol.
  double tol = 1e-8;
  int max_iterations = 1000;
  double nu_min = 0.01;
  double nu_max = 1e6;
  InitMode init = InitMode::Deterministic;
  std::uint64_t init_seed = 0;
  /// Starting degrees of freedom for the deterministic initialization.
  double initial_dof = 10.0;
  /// Adds 1e-10 * tr(S) / dim to each updated scale matrix.
  bool jitter = true;
  /// Multivariate t only: floor the scatter eigenvalues at 1e-6 instead of
  /// failing when N <= d.
  bool eigenvalue_floor = false;
  /// Matrix-T only: fit the transposed data when c > r.
  bool auto_transpose = false;
  /// Explicit starting point; overrides `init` when set. Must match the
  /// family being fitted.
  std::optional<FittedParams> start;

  void validate() const;
};

/// Outcome of one maximum-likelihood fit.
///
/// Matrix factors are reported in the gauge tr(col_cov) = c. `weights` holds
/// E[tau_n | X_n] at the final parameters for the two t families;
/// `posterior_precisions` holds E[S_n | X_n] for the matrix-T family.
struct FitResult {
  ModelFamily family = ModelFamily::MatrixNormal;
  Algorithm algorithm = Algorithm::CM;
  FittedParams params;
  double initial_loglik = 0.0;
  /// Observed-data log-likelihood after each iteration.
  std::vector<double> loglik_trace;
  /// Cumulative wall time in seconds at each trace entry.
  std::vector<double> time_trace;
  std::vector<double> weights;
  std::vector<Eigen::MatrixXd> posterior_precisions;
  int iterations = 0;
  double elapsed_seconds = 0.0;
  bool converged = false;
  /// The final degrees of freedom sits on nu_min or nu_max.
  bool nu_at_bound = false;
  /// Matrix-T fitted on transposed observations (params are in that orientation).
  bool transposed = false;

  double final_loglik() const {
    return loglik_trace.empty() ? initial_loglik : loglik_trace.back();
  }
  const MatrixNormalParams& matrix_normal() const { return std::get<MatrixNormalParams>(params); }
  const MultivariateTParams& multivariate_t() const { return std::get<MultivariateTParams>(params); }
  const MatrixTParams& matrix_t() const { return std::get<MatrixTParams>(params); }
  const MatrixTTParams& matrix_T() const { return std::get<MatrixTTParams>(params); }
};

/// Flip-flop conditional maximization for the matrix normal. The mean is the
/// sample mean throughout. Requires N >= 2 and non-constant data.
FitResult fit_matrix_normal(const Dataset& data, const FitOptions& opts = {});

/// ECME for the multivariate t on an N x d matrix (one observation per row).
/// Throws SingularScatter when N <= d unless the eigenvalue floor is enabled.
FitResult fit_mvt_ecme(const Eigen::MatrixXd& data, const FitOptions& opts = {});

/// ECME for the matrix-T distribution.
FitResult fit_matrix_T_ecme(const Dataset& data, const FitOptions& opts = {});

/// ECME for the matrix-t distribution.
FitResult fit_matrix_t_ecme(const Dataset& data, const FitOptions& opts = {});

/// Parameter-expanded ECME for the matrix-t distribution: identical to
/// fit_matrix_t_ecme except that both scale updates are normalized by the
/// weight sum instead of N.
FitResult fit_matrix_t_px_ecme(const Dataset& data, const FitOptions& opts = {});

/// Degrees of freedom for the t family given residual traces `delta` of
/// dimension d = c r: root in [nu_min, nu_max] of the stationarity equation
/// of the observed log-likelihood in nu.
///
/// The left-hand side is scanned on a log grid for sign changes before any
/// bracketing; among the roots that are local maxima (and bounds the
/// likelihood ascends towards) the one with the largest likelihood is
/// returned. All-positive LHS yields nu_max, all-negative yields nu_min.
double solve_nu_matrix_t(std::span<const double> delta, Eigen::Index c, Eigen::Index r,
                         double nu_min, double nu_max);

/// Left-hand side of the nu stationarity equation (2/N dL/dnu).
double nu_equation_lhs(std::span<const double> delta, double d, double nu);

/// Profile log-likelihood of nu given residual traces, up to a nu-free constant.
double t_profile_loglik(std::span<const double> delta, double d, double nu);

/// Maximizes t_profile_loglik over log(nu) in [nu_min, nu_max] by a grid
/// search followed by Brent refinement.
double maximize_nu_profile(std::span<const double> delta, double d, double nu_min, double nu_max);

/// |mean(weights) - 1| for a t-family fit. Zero at an exact ML estimate.
double mean_weight_residual(const FitResult& result);

/// BPCA scatter matrices S_c = 1/N sum (X-Xbar)(X-Xbar)', S_r = 1/N sum (X-Xbar)'(X-Xbar).
struct BilinearScatter {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd col_scatter;
  Eigen::MatrixXd row_scatter;
};
BilinearScatter bilinear_scatter(const Dataset& data);

}  // namespace rfpca

#endif  // RFPCA_ESTIMATORS_HPP
