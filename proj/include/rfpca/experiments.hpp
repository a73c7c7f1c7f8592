#ifndef RFPCA_EXPERIMENTS_HPP
#define RFPCA_EXPERIMENTS_HPP

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rfpca/dataset.hpp"
#include "rfpca/estimators.hpp"
#include "rfpca/pca.hpp"
#include "rfpca/synthetic.hpp"

namespace rfpca {

/// Metric names an ExperimentRecord may carry.
std::span<const std::string_view> metric_registry();
bool is_registered_metric(std::string_view name);

/// One measured value. `value` is empty (NA) when the run failed.
struct ExperimentRecord {
  std::string condition;  // e.g. "p=0.03", "N=500"
  std::string method;
  std::string metric;
  std::optional<double> value;
  std::size_t replicate = 0;
  double wall_seconds = 0.0;
  int iterations = 0;

  ExperimentRecord() = default;
  /// Throws Domain when `metric` is not registered.
  ExperimentRecord(std::string condition, std::string method, std::string metric,
                   std::optional<double> value, std::size_t replicate = 0,
                   double wall_seconds = 0.0, int iterations = 0);
};

/// CSV with header condition,method,metric,replicate,value,wall_seconds,iterations; NA for no value.
void write_records_csv(std::span<const ExperimentRecord> records, const std::filesystem::path& path);
void write_records_csv(std::span<const ExperimentRecord> records, std::ostream& out);
std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path);

/// Mean and sample sd over the non-NA replicates of one (condition, method, metric).
struct SummaryRow {
  std::string condition;
  std::string method;
  std::string metric;
  std::optional<double> mean;
  std::optional<double> sd;
  std::size_t count = 0;
  std::size_t na_count = 0;
};

/// Rows sorted by (condition, method, metric); independent of record order.
std::vector<SummaryRow> summarize(std::span<const ExperimentRecord> records);
void write_summary_csv(std::span<const SummaryRow> rows, std::ostream& out);
/// Mean of one cell; empty when the cell is missing or all NA.
std::optional<double> summary_mean(std::span<const SummaryRow> rows, std::string_view condition,
                                   std::string_view method, std::string_view metric);

/// Worker count for parallel replicates: RFPCA_THREADS if set (a positive
/// integer, Domain otherwise), else the hardware concurrency.
std::size_t thread_count();

/// Calls body(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t threads = thread_count());

/// ||a - b||_F.
double fnorm_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Sum over test observations of the family log-density (0 for an empty set).
/// Multivariate-t parameters score vec(X).
double test_loglik(const FittedParams& params, const Dataset& test);
/// As above, transposing the test data when the fit itself was transposed.
double test_loglik(const FitResult& fit, const Dataset& test);

struct ConvergenceRace {
  FitResult ecme;
  FitResult px_ecme;
};

/// Fits matrix-t ECME and PX-ECME on the synthetic data with identical
/// options, hence from the identical starting point.
ConvergenceRace run_convergence_race(const SyntheticSpec& spec, const FitOptions& opts);
/// CSV with header algorithm,iteration,loglik,seconds; iteration 0 is the start.
void write_race_csv(const ConvergenceRace& race, std::ostream& out);

struct RobustnessConfig {
  std::vector<double> contamination{0.0, 0.02, 0.03, 0.07, 0.09};
  std::vector<PcaMethod> methods{PcaMethod::PCA, PcaMethod::tPCA, PcaMethod::FPCA,
                                 PcaMethod::BPCA, PcaMethod::TPCA, PcaMethod::RFPCA};
  std::size_t replicates = 10;
  std::size_t n = 1000;
  RngSeed seed{1};
  FitOptions fit;
};

/// fnorm_distance between Sigma_r (x) Sigma_c of Data3-style data and each
/// method's implied covariance, one record per (p, method, replicate).
/// Fit failures become NA records. Replicate i uses replicate_seed(seed, i)
/// for every p and method.
std::vector<ExperimentRecord> run_robustness_table(const RobustnessConfig& config);

struct AccuracyConfig {
  std::vector<std::size_t> sizes{50, 100, 200, 500, 1000};
  std::vector<PcaMethod> methods{PcaMethod::tPCA, PcaMethod::FPCA, PcaMethod::TPCA, PcaMethod::RFPCA};
  std::size_t replicates = 20;
  std::size_t test_size = 1000;
  double dof = 3.0;
  RngSeed seed{1};
  FitOptions fit;
};

/// Test log-likelihood on Data1-shaped matrix-t data with the given dof.
/// Method "truth" scores the generating parameters. Replicate i trains on
/// replicate_seed(seed, i) and tests on an independent stream shared by all sizes.
std::vector<ExperimentRecord> run_accuracy_sweep(const AccuracyConfig& config);

struct TimingConfig {
  std::vector<std::size_t> sizes{200, 500, 1000, 2000};
  std::vector<PcaMethod> methods{PcaMethod::FPCA, PcaMethod::TPCA, PcaMethod::RFPCA};
  Eigen::Index c = 100;
  Eigen::Index r = 100;
  /// Timed iterations after the warm-up iteration.
  int iterations = 3;
  /// Each cell reports the fastest of this many runs.
  std::size_t repeats = 1;
  RngSeed seed{1};
};

/// One seconds_per_iteration record per (size, method), run serially. The
/// first iteration (including initialization) is excluded from the timing.
std::vector<ExperimentRecord> run_timing_benchmark(const TimingConfig& config);

/// Matrix-t (RFPCA) and vec multivariate-t (tPCA) weight ranges over the
/// planted outliers and the normal observations of one synthetic dataset.
std::vector<ExperimentRecord> run_outlier_experiment(const SyntheticSpec& spec, const FitOptions& opts = {});

/// k-nearest-neighbour misclassification rate in the reduced space of `model`,
/// with distances ||Z - Z'||_F. Ties in the vote go to the label with the
/// nearest member. Both sets need labels; an empty training set is an error.
double knn_classify(const Dataset& train, const Dataset& test, const PcaModel& model, std::size_t k = 1);

/// Predicted labels, exposed for inspection.
std::vector<int> knn_predict(const Dataset& train, const Dataset& test, const PcaModel& model,
                             std::size_t k = 1);

}  // namespace rfpca

#endif  // RFPCA_EXPERIMENTS_HPP
