#include "rfpca/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "rfpca/error.hpp"
#include "rfpca/rng.hpp"
#include "rfpca/specfun.hpp"

namespace rfpca {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kJitter = 1e-10;
constexpr double kEigenFloor = 1e-6;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double jitter_of(const FitOptions& opts) { return opts.jitter ? kJitter : 0.0; }

MatrixXd symmetrized(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Lower triangle is accumulated by rankUpdate; mirror it before use.
void fill_upper(MatrixXd& a) { a.triangularView<Eigen::StrictlyUpper>() = a.transpose(); }

bool relative_change_below(double prev, double next, double tol) {
  if (next == 0.0) return std::abs(prev - next) < tol;
  return std::abs(1.0 - prev / next) < tol;
}

bool at_bound(double nu, const FitOptions& opts) {
  return nu <= opts.nu_min * (1.0 + 1e-9) || nu >= opts.nu_max * (1.0 - 1e-9);
}

double clamp_nu(double nu, const FitOptions& opts) {
  return std::clamp(nu, opts.nu_min, opts.nu_max);
}

// ---------------------------------------------------------------------------
// Input checks and initialization
// ---------------------------------------------------------------------------

void check_dataset(const Dataset& data, const char* who) {
  data.validate();
  if (data.size() < 2) {
    throw Error(ErrorKind::InsufficientData,
                std::string(who) + ": need at least 2 observations, got " +
                    std::to_string(data.size()));
  }
}

// Per-entry RMS deviation from the mean below 1e-13 of the data magnitude.
void check_not_degenerate(double total_variance, double magnitude, Index dim, const char* who) {
  const double rms = std::sqrt(std::max(total_variance, 0.0) / static_cast<double>(dim));
  if (!(rms > 1e-13 * magnitude) || !(total_variance > 0.0)) {
    throw Error(ErrorKind::DegenerateData, std::string(who) + ": data has zero variance");
  }
}

double max_abs(const Dataset& data) {
  double m = 0.0;
  for (const auto& x : data.samples) m = std::max(m, x.cwiseAbs().maxCoeff());
  return m;
}

// Trace-one random SPD matrix G G' + I, normalized.
MatrixXd random_unit_trace_spd(Index n, Rng& rng) {
  MatrixXd g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  MatrixXd w = g * g.transpose() / static_cast<double>(n) + MatrixXd::Identity(n, n);
  return symmetrized(w / w.trace());
}

double random_dof(Rng& rng) { return std::exp(rng.uniform(std::log(2.0), std::log(30.0))); }

struct MatrixStart {
  MatrixXd mean;
  MatrixXd col;
  MatrixXd row;
  double dof;
};

// Column factor in the tr = c gauge and a row factor carrying the total
// variance, so that tr(row (x) col) equals tr(S_c).
MatrixStart matrix_start(const Dataset& data, const BilinearScatter& s, const FitOptions& opts,
                         double row_scale) {
  const double c = static_cast<double>(data.rows);
  const double total = s.col_scatter.trace();
  MatrixStart st{s.mean, c * s.col_scatter / total, s.row_scatter / c * row_scale,
                 clamp_nu(opts.initial_dof, opts)};
  if (opts.init == InitMode::Random) {
    Rng rng(RngSeed{opts.init_seed});
    st.col = 0.5 * c * (s.col_scatter / total + random_unit_trace_spd(data.rows, rng));
    st.row = 0.5 * total / c * row_scale *
             (s.row_scatter / s.row_scatter.trace() + random_unit_trace_spd(data.cols, rng));
    const double spread = 0.5 * std::sqrt(total / static_cast<double>(data.rows * data.cols));
    for (Index j = 0; j < data.cols; ++j) {
      for (Index i = 0; i < data.rows; ++i) st.mean(i, j) += spread * rng.normal();
    }
    st.dof = clamp_nu(random_dof(rng), opts);
  }
  return st;
}

template <class P>
const P& start_as(const FitOptions& opts, const char* who) {
  const P* p = std::get_if<P>(&*opts.start);
  if (p == nullptr) {
    throw Error(ErrorKind::Domain, std::string(who) + ": starting point has the wrong model family");
  }
  validate(*p);
  return *p;
}

void check_start_dims(const MatrixXd& mean, const Dataset& data, const char* who) {
  if (mean.rows() != data.rows || mean.cols() != data.cols) {
    throw Error(ErrorKind::DimensionMismatch, std::string(who) + ": starting point has wrong shape");
  }
}

// ---------------------------------------------------------------------------
// Separable scatter kernels
// ---------------------------------------------------------------------------

// sum_n w_n E_n R^{-1} E_n'
MatrixXd col_scatter(const std::vector<MatrixXd>& e, const std::vector<double>& w,
                     const SpdMatrix& row) {
  const Index c = e.front().rows();
  MatrixXd acc = MatrixXd::Zero(c, c);
  for (std::size_t n = 0; n < e.size(); ++n) {
    const MatrixXd y = row.solve_lower(e[n].transpose());  // L_r^{-1} E'
    acc.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose(), w.empty() ? 1.0 : w[n]);
  }
  fill_upper(acc);
  return acc;
}

// sum_n w_n E_n' C^{-1} E_n
MatrixXd row_scatter(const std::vector<MatrixXd>& e, const std::vector<double>& w,
                     const SpdMatrix& col) {
  const Index r = e.front().cols();
  MatrixXd acc = MatrixXd::Zero(r, r);
  for (std::size_t n = 0; n < e.size(); ++n) {
    const MatrixXd z = col.solve_lower(e[n]);  // L_c^{-1} E
    acc.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose(), w.empty() ? 1.0 : w[n]);
  }
  fill_upper(acc);
  return acc;
}

std::vector<double> residual_traces(const std::vector<MatrixXd>& e, const SpdMatrix& col,
                                    const SpdMatrix& row) {
  std::vector<double> delta(e.size());
  for (std::size_t n = 0; n < e.size(); ++n) {
    const MatrixXd a = col.solve_lower(e[n]);
    delta[n] = row.solve_lower(a.transpose()).squaredNorm();
  }
  return delta;
}

std::vector<MatrixXd> residuals(const Dataset& data, const MatrixXd& mean) {
  std::vector<MatrixXd> e;
  e.reserve(data.size());
  for (const auto& x : data.samples) e.emplace_back(x - mean);
  return e;
}

// Observed log-likelihood of the t family with dimension d and
// scale log-determinant `logdet_scale` (r ln|Sc| + c ln|Sr| for matrices).
double t_loglik(std::span<const double> delta, double d, double nu, double logdet_scale) {
  // Accumulated in extended precision so that near convergence successive
  // values differ by the true increment rather than by summation noise.
  const long double n = static_cast<long double>(delta.size());
  long double tail = 0.0L;
  for (double x : delta) tail += std::log1p(static_cast<long double>(x) / nu);
  const long double per_obs = std::lgamma(0.5L * (nu + d)) - std::lgamma(0.5L * nu) -
                              0.5L * d * std::log(std::numbers::pi_v<long double> * nu) -
                              0.5L * logdet_scale;
  return static_cast<double>(n * per_obs - 0.5L * (nu + d) * tail);
}

void record(FitResult& res, double loglik, Clock::time_point start) {
  res.loglik_trace.push_back(loglik);
  res.time_trace.push_back(seconds_since(start));
}

// Rescales (col, row) to tr(col) = c; returns the factor applied to col.
double apply_gauge(MatrixXd& col, MatrixXd& row) {
  const double a = static_cast<double>(col.rows()) / col.trace();
  col *= a;
  row /= a;
  return a;
}

std::vector<double> t_weights(std::span<const double> delta, double d, double nu) {
  std::vector<double> w(delta.size());
  for (std::size_t n = 0; n < delta.size(); ++n) w[n] = (nu + d) / (nu + delta[n]);
  return w;
}

// log-grid in ln(nu) with roughly eight points per decade
std::vector<double> log_grid(double lo, double hi) {
  const double decades = std::log10(hi / lo);
  const int k = std::max(16, static_cast<int>(std::ceil(8.0 * decades)) + 1);
  std::vector<double> u(static_cast<std::size_t>(k));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < k; ++i) u[static_cast<std::size_t>(i)] = a + (b - a) * i / (k - 1);
  u.back() = b;
  return u;
}

void check_nu_inputs(std::span<const double> delta, double lo, double hi, const char* who) {
  if (delta.empty()) throw Error(ErrorKind::InsufficientData, std::string(who) + ": no residuals");
  for (double x : delta) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorKind::Domain, std::string(who) + ": residual traces must be finite and >= 0");
    }
  }
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw Error(ErrorKind::Domain, std::string(who) + ": requires 0 < nu_min < nu_max");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::MatrixNormal: return "matrix-normal";
    case ModelFamily::MultivariateT: return "multivariate-t";
    case ModelFamily::MatrixT: return "matrix-t";
    case ModelFamily::MatrixTT: return "matrix-T";
  }
  return "unknown";
}

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::CM: return "cm";
    case Algorithm::ECME: return "ecme";
    case Algorithm::PXECME: return "px-ecme";
  }
  return "unknown";
}

void FitOptions::validate() const {
  if (!(tol > 0.0)) throw Error(ErrorKind::Domain, "FitOptions: tol must be positive");
  if (max_iterations < 1) throw Error(ErrorKind::Domain, "FitOptions: max_iterations must be >= 1");
  if (!(nu_min > 0.0) || !(nu_max > nu_min) || !std::isfinite(nu_max)) {
    throw Error(ErrorKind::Domain, "FitOptions: requires 0 < nu_min < nu_max < inf");
  }
  if (!(initial_dof > 0.0) || !std::isfinite(initial_dof)) {
    throw Error(ErrorKind::Domain, "FitOptions: initial_dof must be positive");
  }
}

BilinearScatter bilinear_scatter(const Dataset& data) {
  data.validate();
  if (data.empty()) throw Error(ErrorKind::InsufficientData, "bilinear_scatter: empty dataset");
  MatrixXd mean = MatrixXd::Zero(data.rows, data.cols);
  for (const auto& x : data.samples) mean += x;
  mean /= static_cast<double>(data.size());
  MatrixXd sc = MatrixXd::Zero(data.rows, data.rows);
  MatrixXd sr = MatrixXd::Zero(data.cols, data.cols);
  for (const auto& x : data.samples) {
    const MatrixXd e = x - mean;
    sc.selfadjointView<Eigen::Lower>().rankUpdate(e);
    sr.selfadjointView<Eigen::Lower>().rankUpdate(e.transpose());
  }
  fill_upper(sc);
  fill_upper(sr);
  const double n = static_cast<double>(data.size());
  return {mean, sc / n, sr / n};
}

// ---------------------------------------------------------------------------
// nu solvers
// ---------------------------------------------------------------------------

double nu_equation_lhs(std::span<const double> delta, double d, double nu) {
  double acc = 0.0;
  for (double x : delta) {
    const double t = (d - x) / (nu + x);
    acc += std::log1p(t) - t;
  }
  return log_minus_digamma(0.5 * nu) - log_minus_digamma(0.5 * (nu + d)) +
         acc / static_cast<double>(delta.size());
}

double t_profile_loglik(std::span<const double> delta, double d, double nu) {
  return t_loglik(delta, d, nu, 0.0);
}

double solve_nu_matrix_t(std::span<const double> delta, Index c, Index r, double nu_min,
                         double nu_max) {
  check_nu_inputs(delta, nu_min, nu_max, "solve_nu_matrix_t");
  const double d = static_cast<double>(c * r);
  auto lhs = [&](double u) { return nu_equation_lhs(delta, d, std::exp(u)); };

  const std::vector<double> u = log_grid(nu_min, nu_max);
  std::vector<double> g(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) g[k] = lhs(u[k]);

  // Local maxima of the likelihood: + to - crossings, plus bounds it ascends towards.
  std::vector<double> candidates;
  if (g.front() < 0.0) candidates.push_back(nu_min);
  if (g.back() > 0.0) candidates.push_back(nu_max);
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    if (g[k] == 0.0 && k > 0 && g[k - 1] > 0.0) candidates.push_back(std::exp(u[k]));
    if (g[k] > 0.0 && g[k + 1] < 0.0) {
      std::uintmax_t iters = 100;
      const auto [a, b] = boost::math::tools::toms748_solve(
          lhs, u[k], u[k + 1], g[k], g[k + 1], boost::math::tools::eps_tolerance<double>(50),
          iters);
      candidates.push_back(std::exp(0.5 * (a + b)));
    }
  }
  if (g.back() == 0.0 && g[g.size() - 2] > 0.0) candidates.push_back(nu_max);
  if (candidates.empty()) {
    return std::abs(g.front()) <= std::abs(g.back()) ? nu_min : nu_max;
  }
  double best = candidates.front();
  double best_l = t_profile_loglik(delta, d, best);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double l = t_profile_loglik(delta, d, candidates[i]);
    if (l > best_l) {
      best_l = l;
      best = candidates[i];
    }
  }
  return best;
}

double maximize_nu_profile(std::span<const double> delta, double d, double nu_min, double nu_max) {
  check_nu_inputs(delta, nu_min, nu_max, "maximize_nu_profile");
  auto neg = [&](double u) { return -t_profile_loglik(delta, d, std::exp(u)); };
  const std::vector<double> u = log_grid(nu_min, nu_max);
  std::size_t best = 0;
  double best_v = neg(u[0]);
  for (std::size_t k = 1; k < u.size(); ++k) {
    const double v = neg(u[k]);
    if (v < best_v) {
      best_v = v;
      best = k;
    }
  }
  // A bound wins outright when the likelihood is still ascending towards it.
  if (best + 1 == u.size() && nu_equation_lhs(delta, d, nu_max) >= 0.0) return nu_max;
  if (best == 0 && nu_equation_lhs(delta, d, nu_min) <= 0.0) return nu_min;
  const double a = u[best == 0 ? 0 : best - 1];
  const double b = u[std::min(best + 1, u.size() - 1)];
  std::uintmax_t iters = 200;
  const auto [x, fx] = boost::math::tools::brent_find_minima(neg, a, b, 40, iters);
  return fx < best_v ? std::exp(x) : std::exp(u[best]);
}

double mean_weight_residual(const FitResult& result) {
  if (result.family != ModelFamily::MatrixT && result.family != ModelFamily::MultivariateT) {
    throw Error(ErrorKind::Domain, "mean_weight_residual: requires a t-family fit, got " +
                                       std::string(to_string(result.family)));
  }
  if (result.weights.empty()) throw Error(ErrorKind::Domain, "mean_weight_residual: fit has no weights");
  const double mean = std::accumulate(result.weights.begin(), result.weights.end(), 0.0) /
                      static_cast<double>(result.weights.size());
  return std::abs(mean - 1.0);
}

// ---------------------------------------------------------------------------
// Matrix normal
// ---------------------------------------------------------------------------

FitResult fit_matrix_normal(const Dataset& data, const FitOptions& opts) {
  constexpr const char* who = "fit_matrix_normal";
  opts.validate();
  check_dataset(data, who);
  const auto t0 = Clock::now();
  const Index ci = data.rows, ri = data.cols;
  const double c = static_cast<double>(ci), r = static_cast<double>(ri);
  const double n = static_cast<double>(data.size());
  const BilinearScatter s = bilinear_scatter(data);
  check_not_degenerate(s.col_scatter.trace(), max_abs(data), ci * ri, who);

  MatrixXd col0, row0;
  if (opts.start) {
    const auto& p = start_as<MatrixNormalParams>(opts, who);
    check_start_dims(p.mean, data, who);
    col0 = p.col_cov.matrix();
    row0 = p.row_cov.matrix();
  } else {
    const MatrixStart st = matrix_start(data, s, opts, 1.0);
    col0 = st.col;
    row0 = st.row;
  }
  const double jit = jitter_of(opts);
  SpdMatrix col(col0), row(row0);
  const std::vector<MatrixXd> e = residuals(data, s.mean);
  const std::vector<double> unit;

  auto loglik = [&](const SpdMatrix& sc, const SpdMatrix& sr, double delta_sum) {
    return -0.5 * n * (c * r * std::log(2.0 * std::numbers::pi) + r * sc.logdet() + c * sr.logdet()) -
           0.5 * delta_sum;
  };
  const auto delta = residual_traces(e, col, row);
  FitResult res;
  res.initial_loglik = loglik(col, row, std::accumulate(delta.begin(), delta.end(), 0.0));
  res.family = ModelFamily::MatrixNormal;
  res.algorithm = Algorithm::CM;

  double prev = res.initial_loglik;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    col = SpdMatrix(col_scatter(e, unit, row) / (n * r), jit);
    const MatrixXd rs = row_scatter(e, unit, col);
    row = SpdMatrix(rs / (n * c), jit);
    // sum_n delta_n = tr(Sr^{-1} sum_n E_n' Sc^{-1} E_n)
    const double l = loglik(col, row, row.solve(rs).trace());
    record(res, l, t0);
    res.iterations = it;
    if (relative_change_below(prev, l, opts.tol)) {
      res.converged = true;
      break;
    }
    prev = l;
  }
  MatrixXd cm = col.matrix(), rm = row.matrix();
  apply_gauge(cm, rm);
  res.params = MatrixNormalParams{s.mean, SpdMatrix(cm), SpdMatrix(rm)};
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

// ---------------------------------------------------------------------------
// Multivariate t
// ---------------------------------------------------------------------------

FitResult fit_mvt_ecme(const Eigen::MatrixXd& data, const FitOptions& opts) {
  constexpr const char* who = "fit_mvt_ecme";
  opts.validate();
  const Index ni = data.rows(), di = data.cols();
  if (ni < 2) {
    throw Error(ErrorKind::InsufficientData,
                std::string(who) + ": need at least 2 observations, got " + std::to_string(ni));
  }
  if (di < 1) throw Error(ErrorKind::DimensionMismatch, std::string(who) + ": zero dimension");
  if (!data.allFinite()) throw Error(ErrorKind::Domain, std::string(who) + ": non-finite data");
  if (ni <= di && !opts.eigenvalue_floor) {
    throw Error(ErrorKind::SingularScatter,
                std::string(who) + ": weighted scatter is singular with N = " + std::to_string(ni) +
                    " <= d = " + std::to_string(di));
  }
  const auto t0 = Clock::now();
  const double n = static_cast<double>(ni), d = static_cast<double>(di);
  const MatrixXd xt = data.transpose();  // d x N

  const VectorXd mean0 = xt.rowwise().mean();
  const MatrixXd centered = xt.colwise() - mean0;
  const MatrixXd cov0 = symmetrized(centered * centered.transpose() / n);
  check_not_degenerate(cov0.trace(), data.cwiseAbs().maxCoeff(), di, who);

  const double jit = jitter_of(opts);
  auto make_scale = [&](const MatrixXd& s) {
    if (!opts.eigenvalue_floor) return SpdMatrix(s, jit);
    EigenSystem es = sym_eigen(symmetrized(s));
    const VectorXd v = es.values.cwiseMax(kEigenFloor);
    return SpdMatrix(symmetrized(es.vectors * v.asDiagonal() * es.vectors.transpose()), jit);
  };

  VectorXd mu;
  MatrixXd scale0;
  double nu;
  if (opts.start) {
    const auto& p = start_as<MultivariateTParams>(opts, who);
    if (p.center.size() != di) {
      throw Error(ErrorKind::DimensionMismatch, std::string(who) + ": starting point has wrong size");
    }
    mu = p.center;
    scale0 = p.scale.matrix();
    nu = clamp_nu(p.dof, opts);
  } else if (opts.init == InitMode::Random) {
    Rng rng(RngSeed{opts.init_seed});
    const double total = cov0.trace();
    scale0 = 0.5 * total * (cov0 / total + random_unit_trace_spd(di, rng));
    mu = mean0;
    const double spread = 0.5 * std::sqrt(total / d);
    for (Index i = 0; i < di; ++i) mu(i) += spread * rng.normal();
    nu = clamp_nu(random_dof(rng), opts);
  } else {
    mu = mean0;
    scale0 = cov0;
    nu = clamp_nu(opts.initial_dof, opts);
  }
  SpdMatrix scale = make_scale(scale0);

  auto mahalanobis = [&](const VectorXd& m, const SpdMatrix& s) {
    const MatrixXd z = s.solve_lower(xt.colwise() - m);
    std::vector<double> out(static_cast<std::size_t>(ni));
    for (Index i = 0; i < ni; ++i) out[static_cast<std::size_t>(i)] = z.col(i).squaredNorm();
    return out;
  };

  FitResult res;
  res.family = ModelFamily::MultivariateT;
  res.algorithm = Algorithm::ECME;
  std::vector<double> delta = mahalanobis(mu, scale);
  res.initial_loglik = t_loglik(delta, d, nu, scale.logdet());
  double prev = res.initial_loglik;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const std::vector<double> w = t_weights(delta, d, nu);
    const Eigen::Map<const VectorXd> wv(w.data(), ni);
    mu = xt * wv / wv.sum();
    const MatrixXd c = xt.colwise() - mu;
    const MatrixXd cw = c * wv.cwiseSqrt().asDiagonal();
    MatrixXd s = MatrixXd::Zero(di, di);
    s.selfadjointView<Eigen::Lower>().rankUpdate(cw);
    fill_upper(s);
    scale = make_scale(s / n);
    delta = mahalanobis(mu, scale);

    double nu_new = maximize_nu_profile(delta, d, opts.nu_min, opts.nu_max);
    if (t_profile_loglik(delta, d, nu_new) < t_profile_loglik(delta, d, nu)) nu_new = nu;
    nu = nu_new;

    const double l = t_loglik(delta, d, nu, scale.logdet());
    record(res, l, t0);
    res.iterations = it;
    if (relative_change_below(prev, l, opts.tol)) {
      res.converged = true;
      break;
    }
    prev = l;
  }
  res.weights = t_weights(delta, d, nu);
  res.nu_at_bound = at_bound(nu, opts);
  res.params = MultivariateTParams{mu, scale, nu};
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

// ---------------------------------------------------------------------------
// Matrix t (ECME and PX-ECME)
// ---------------------------------------------------------------------------

namespace {

FitResult fit_matrix_t_impl(const Dataset& data, const FitOptions& opts, bool px,
                            const char* who) {
  opts.validate();
  check_dataset(data, who);
  const auto t0 = Clock::now();
  const Index ci = data.rows, ri = data.cols;
  const double c = static_cast<double>(ci), r = static_cast<double>(ri), d = c * r;
  const double n = static_cast<double>(data.size());
  const BilinearScatter s = bilinear_scatter(data);
  check_not_degenerate(s.col_scatter.trace(), max_abs(data), ci * ri, who);

  MatrixXd mean, col0, row0;
  double nu;
  if (opts.start) {
    const auto& p = start_as<MatrixTParams>(opts, who);
    check_start_dims(p.mean, data, who);
    mean = p.mean;
    col0 = p.col_cov.matrix();
    row0 = p.row_cov.matrix();
    nu = clamp_nu(p.dof, opts);
  } else {
    MatrixStart st = matrix_start(data, s, opts, 1.0);
    // Scale so that the starting covariance nu/(nu-2) Sr (x) Sc matches the scatter.
    if (st.dof > 2.0) st.row *= (st.dof - 2.0) / st.dof;
    mean = std::move(st.mean);
    col0 = std::move(st.col);
    row0 = std::move(st.row);
    nu = st.dof;
  }
  const double jit = jitter_of(opts);
  SpdMatrix col(col0), row(row0);

  FitResult res;
  res.family = ModelFamily::MatrixT;
  res.algorithm = px ? Algorithm::PXECME : Algorithm::ECME;
  std::vector<MatrixXd> e = residuals(data, mean);
  std::vector<double> delta = residual_traces(e, col, row);
  auto logdet_scale = [&] { return r * col.logdet() + c * row.logdet(); };
  res.initial_loglik = t_loglik(delta, d, nu, logdet_scale());
  double prev = res.initial_loglik;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    // E-step
    const std::vector<double> w = t_weights(delta, d, nu);
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    // CMQ-1
    mean.setZero();
    for (std::size_t k = 0; k < data.size(); ++k) mean += w[k] * data.samples[k];
    mean /= wsum;
    e = residuals(data, mean);
    // CMQ-2 and CMQ-3; the parameter-expanded variant divides by sum(w) instead of N.
    const double denom = px ? wsum : n;
    col = SpdMatrix(col_scatter(e, w, row) / (denom * r), jit);
    row = SpdMatrix(row_scatter(e, w, col) / (denom * c), jit);
    // CML-4
    delta = residual_traces(e, col, row);
    double nu_new = solve_nu_matrix_t(delta, ci, ri, opts.nu_min, opts.nu_max);
    if (t_profile_loglik(delta, d, nu_new) < t_profile_loglik(delta, d, nu)) nu_new = nu;
    nu = nu_new;

    const double l = t_loglik(delta, d, nu, logdet_scale());
    record(res, l, t0);
    res.iterations = it;
    if (relative_change_below(prev, l, opts.tol)) {
      res.converged = true;
      break;
    }
    prev = l;
  }
  res.weights = t_weights(delta, d, nu);
  res.nu_at_bound = at_bound(nu, opts);
  MatrixXd cm = col.matrix(), rm = row.matrix();
  apply_gauge(cm, rm);
  res.params = MatrixTParams{mean, SpdMatrix(cm), SpdMatrix(rm), nu};
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

}  // namespace

FitResult fit_matrix_t_ecme(const Dataset& data, const FitOptions& opts) {
  return fit_matrix_t_impl(data, opts, false, "fit_matrix_t_ecme");
}

FitResult fit_matrix_t_px_ecme(const Dataset& data, const FitOptions& opts) {
  return fit_matrix_t_impl(data, opts, true, "fit_matrix_t_px_ecme");
}

// ---------------------------------------------------------------------------
// Matrix T
// ---------------------------------------------------------------------------

namespace {

// Everything the matrix-T iteration needs from one pass over the data at
// fixed (M, Sc, Sr). With K_n = Sc + D_n Sr^{-1} D_n', D_n = X_n - M and
// P_n = K_n^{-1}:
struct TPass {
  std::vector<double> logdet_k;  // ln|K_n|
  MatrixXd p_sum;                // sum P_n
  MatrixXd pd_sum;               // sum P_n D_n
  MatrixXd dpd_sum;              // sum D_n' P_n D_n
};

TPass t_pass(const Dataset& data, const MatrixXd& mean, const SpdMatrix& col,
             const SpdMatrix& row, std::vector<MatrixXd>* precisions) {
  const Index c = data.rows, r = data.cols;
  TPass out{std::vector<double>(data.size()), MatrixXd::Zero(c, c), MatrixXd::Zero(c, r),
            MatrixXd::Zero(r, r)};
  if (precisions) precisions->clear();
  const MatrixXd ident = MatrixXd::Identity(c, c);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const MatrixXd dn = data.samples[k] - mean;
    const MatrixXd yt = row.solve_lower(dn.transpose());  // L_r^{-1} D'
    MatrixXd kn = col.matrix();
    kn.selfadjointView<Eigen::Lower>().rankUpdate(yt.transpose());
    Eigen::LLT<MatrixXd> llt(kn.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite(0, "fit_matrix_T_ecme (K_n)");
    const auto l = llt.matrixL();
    out.logdet_k[k] = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const MatrixXd u = l.solve(dn);  // L_K^{-1} D
    out.dpd_sum.selfadjointView<Eigen::Lower>().rankUpdate(u.transpose());
    out.pd_sum += llt.matrixU().solve(u);
    MatrixXd linv = l.solve(ident);
    MatrixXd pn = MatrixXd::Zero(c, c);
    pn.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose());
    fill_upper(pn);
    out.p_sum += pn;
    if (precisions) precisions->push_back(std::move(pn));
  }
  fill_upper(out.dpd_sum);
  out.p_sum = symmetrized(out.p_sum);
  return out;
}

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Observed log-likelihood from ln|K_n| (one pass) and the factor log-determinants.
double matrix_T_loglik(const TPass& pass, double c, double r, double nu, double ldc, double ldr) {
  const double n = static_cast<double>(pass.logdet_k.size());
  const int ic = static_cast<int>(c);
  const double a = 0.5 * (nu + c + r - 1.0), b = 0.5 * (nu + c - 1.0);
  return n * (log_multivariate_gamma(a, ic) - log_multivariate_gamma(b, ic) -
              0.5 * c * r * std::log(std::numbers::pi) - 0.5 * r * ldc - 0.5 * c * ldr) -
         a * (sum_of(pass.logdet_k) - n * ldc);
}

// Root in nu of psi_c((nu+c+r-1)/2) - psi_c((nu+c-1)/2) = mean_n ln|I + Sc^{-1} R_n|.
// The left side is strictly decreasing in nu, so the root is unique when it exists.
double solve_nu_matrix_T(double mean_g, Index ci, Index ri, double lo, double hi) {
  const double c = static_cast<double>(ci), r = static_cast<double>(ri);
  auto h = [&](double u) {
    const double nu = std::exp(u);
    double acc = 0.0;
    for (Index i = 1; i <= ci; ++i) {
      const double base = 0.5 * (nu + c - static_cast<double>(i));
      acc += digamma(base + 0.5 * r) - digamma(base);
    }
    return acc - mean_g;
  };
  const double ulo = std::log(lo), uhi = std::log(hi);
  const double hlo = h(ulo), hhi = h(uhi);
  if (hlo <= 0.0) return lo;
  if (hhi >= 0.0) return hi;
  std::uintmax_t iters = 100;
  const auto [a, b] = boost::math::tools::toms748_solve(
      h, ulo, uhi, hlo, hhi, boost::math::tools::eps_tolerance<double>(50), iters);
  return std::exp(0.5 * (a + b));
}

}  // namespace

FitResult fit_matrix_T_ecme(const Dataset& input, const FitOptions& opts) {
  constexpr const char* who = "fit_matrix_T_ecme";
  opts.validate();
  check_dataset(input, who);
  const bool transpose = opts.auto_transpose && input.rows > input.cols;
  const Dataset transposed_copy = transpose ? input.transposed() : Dataset{};
  const Dataset& data = transpose ? transposed_copy : input;

  const auto t0 = Clock::now();
  const Index ci = data.rows, ri = data.cols;
  const double c = static_cast<double>(ci), r = static_cast<double>(ri);
  const double n = static_cast<double>(data.size());
  const BilinearScatter s = bilinear_scatter(data);
  check_not_degenerate(s.col_scatter.trace(), max_abs(data), ci * ri, who);

  MatrixXd mean, col0, row0;
  double nu;
  if (opts.start) {
    const auto& p = start_as<MatrixTTParams>(opts, who);
    check_start_dims(p.center, data, who);
    mean = p.center;
    col0 = p.col_cov.matrix();
    row0 = p.row_cov.matrix();
    nu = clamp_nu(p.dof, opts);
  } else {
    MatrixStart st = matrix_start(data, s, opts, 1.0);
    // Covariance of the matrix-T is Sr (x) Sc / (nu - 2).
    if (st.dof > 2.0) st.row *= st.dof - 2.0;
    mean = std::move(st.mean);
    col0 = std::move(st.col);
    row0 = std::move(st.row);
    nu = st.dof;
  }
  const double jit = jitter_of(opts);
  SpdMatrix col(col0), row(row0);

  FitResult res;
  res.family = ModelFamily::MatrixTT;
  res.algorithm = Algorithm::ECME;
  res.transposed = transpose;
  TPass pass = t_pass(data, mean, col, row, nullptr);
  res.initial_loglik = matrix_T_loglik(pass, c, r, nu, col.logdet(), row.logdet());
  double prev = res.initial_loglik;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    // E-step: E[S_n | X_n] = (nu + c + r - 1) P_n.
    const double es_factor = nu + c + r - 1.0;
    const SpdMatrix p_sum(pass.p_sum);
    // CMQ-1: M~ = (sum P_n)^{-1} sum P_n X_n, with sum P_n X_n = sum P_n D_n + (sum P_n) M.
    const MatrixXd shift = p_sum.solve(pass.pd_sum);
    const MatrixXd new_mean = mean + shift;
    // CMQ-2: Sc~^{-1} = sum E[S_n] / (N (nu + c - 1)).
    col = SpdMatrix(p_sum.inverse() * (n * (nu + c - 1.0) / es_factor), jit);
    // CMQ-3: sum (X_n - M~)' P_n (X_n - M~) expanded around the old mean.
    MatrixXd q = pass.dpd_sum - pass.pd_sum.transpose() * shift -
                 shift.transpose() * pass.pd_sum + shift.transpose() * pass.p_sum * shift;
    row = SpdMatrix(symmetrized(q) * (es_factor / (n * c)), jit);
    mean = new_mean;
    // CML-4 at the new (M, Sc, Sr); the same pass is the next E-step.
    pass = t_pass(data, mean, col, row, nullptr);
    const double mean_g = sum_of(pass.logdet_k) / n - col.logdet();
    double nu_new = solve_nu_matrix_T(mean_g, ci, ri, opts.nu_min, opts.nu_max);
    const double ldc = col.logdet(), ldr = row.logdet();
    if (matrix_T_loglik(pass, c, r, nu_new, ldc, ldr) < matrix_T_loglik(pass, c, r, nu, ldc, ldr)) {
      nu_new = nu;
    }
    nu = nu_new;

    const double l = matrix_T_loglik(pass, c, r, nu, ldc, ldr);
    record(res, l, t0);
    res.iterations = it;
    if (relative_change_below(prev, l, opts.tol)) {
      res.converged = true;
      break;
    }
    prev = l;
  }
  res.nu_at_bound = at_bound(nu, opts);
  MatrixXd cm = col.matrix(), rm = row.matrix();
  const double a = apply_gauge(cm, rm);
  const SpdMatrix gcol(cm), grow(rm);
  // K_n scales with the gauge factor, so E[S_n] scales with its inverse.
  t_pass(data, mean, col, row, &res.posterior_precisions);
  for (auto& p : res.posterior_precisions) p *= (nu + c + r - 1.0) / a;
  res.params = MatrixTTParams{mean, gcol, grow, nu};
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

}  // namespace rfpca
