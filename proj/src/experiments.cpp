#include "rfpca/experiments.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "rfpca/distributions.hpp"
#include "rfpca/error.hpp"
#include "rfpca/outliers.hpp"

namespace rfpca {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::array<std::string_view, 10> kMetrics{
    "fnorm_distance",    "test_loglik",        "seconds_per_iteration", "final_loglik",
    "iterations",        "error_rate",         "min_normal_weight",     "max_outlier_weight",
    "mean_weight_residual",    "wall_seconds"};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string condition_label(const char* name, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s=%g", name, v);
  return buf;
}

void check_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorKind::Domain, std::string("record ") + what + " '" + s + "' contains a separator");
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
bool parse_field(const std::string& s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

MatrixXd vec_of(const MatrixXd& x) { return Eigen::Map<const VectorXd>(x.data(), x.size()); }

// Log-likelihood of held-out data under a method's own model: PCA is the
// Gaussian with its sample covariance; BPCA has no likelihood.
double method_test_loglik(const MethodFit& fit, const Dataset& test) {
  if (fit.fit) return test_loglik(*fit.fit, test);
  if (fit.method == PcaMethod::PCA) {
    const VectorXd center = vec_of(fit.center);
    const SpdMatrix cov(fit.vector_cov);
    double sum = 0.0;
    for (const MatrixXd& x : test.samples) sum += mvn_logpdf(vec_of(x), center, cov);
    return sum;
  }
  throw Error(ErrorKind::UnsupportedModel,
              std::string(to_string(fit.method)) + " has no likelihood to evaluate");
}

SyntheticSpec data1_shaped(std::size_t n, double dof, RngSeed seed) {
  SyntheticSpec s = SyntheticSpec::preset(SyntheticFamily::Data1, seed);
  s.family = SyntheticFamily::Custom;
  s.n = n;
  s.dof = dof;
  return s;
}

}  // namespace

std::span<const std::string_view> metric_registry() { return kMetrics; }

bool is_registered_metric(std::string_view name) {
  return std::find(kMetrics.begin(), kMetrics.end(), name) != kMetrics.end();
}

ExperimentRecord::ExperimentRecord(std::string condition_, std::string method_, std::string metric_,
                                   std::optional<double> value_, std::size_t replicate_,
                                   double wall_seconds_, int iterations_)
    : condition(std::move(condition_)),
      method(std::move(method_)),
      metric(std::move(metric_)),
      value(value_),
      replicate(replicate_),
      wall_seconds(wall_seconds_),
      iterations(iterations_) {
  if (!is_registered_metric(metric)) throw Error(ErrorKind::Domain, "unregistered metric '" + metric + "'");
}

void write_records_csv(std::span<const ExperimentRecord> records, std::ostream& out) {
  out << "condition,method,metric,replicate,value,wall_seconds,iterations\n";
  for (const ExperimentRecord& r : records) {
    check_field(r.condition, "condition");
    check_field(r.method, "method");
    out << r.condition << ',' << r.method << ',' << r.metric << ',' << r.replicate << ','
        << (r.value ? fmt_double(*r.value) : "NA") << ',' << fmt_double(r.wall_seconds) << ','
        << r.iterations << '\n';
  }
}

void write_records_csv(std::span<const ExperimentRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
  write_records_csv(records, out);
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, path.string() + ": cannot open for reading");
  const std::string p = path.string();
  std::string line;
  if (!std::getline(in, line)) throw FormatError(p, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "condition,method,metric,replicate,value,wall_seconds,iterations") {
    throw FormatError(p, 1, "unexpected header '" + line + "'");
  }
  std::vector<ExperimentRecord> out;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) throw FormatError(p, ln, "expected 7 fields, found " + std::to_string(f.size()));
    std::size_t rep;
    double wall;
    int iters;
    std::optional<double> value;
    if (f[4] != "NA") {
      double v;
      if (!parse_field(f[4], v)) throw FormatError(p, ln, "value '" + f[4] + "' is not a number");
      value = v;
    }
    if (!parse_field(f[3], rep)) throw FormatError(p, ln, "replicate '" + f[3] + "' is not an index");
    if (!parse_field(f[5], wall)) throw FormatError(p, ln, "wall_seconds '" + f[5] + "' is not a number");
    if (!parse_field(f[6], iters)) throw FormatError(p, ln, "iterations '" + f[6] + "' is not an integer");
    if (!is_registered_metric(f[2])) throw FormatError(p, ln, "unregistered metric '" + f[2] + "'");
    out.emplace_back(f[0], f[1], f[2], value, rep, wall, iters);
  }
  return out;
}

std::vector<SummaryRow> summarize(std::span<const ExperimentRecord> records) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::pair<std::vector<double>, std::size_t>> cells;
  for (const ExperimentRecord& r : records) {
    auto& cell = cells[{r.condition, r.method, r.metric}];
    if (r.value) cell.first.push_back(*r.value);
    else ++cell.second;
  }
  std::vector<SummaryRow> out;
  for (auto& [key, cell] : cells) {
    auto& [values, na] = cell;
    // Sorting makes the floating-point sums independent of record order.
    std::sort(values.begin(), values.end());
    SummaryRow row{std::get<0>(key), std::get<1>(key), std::get<2>(key), {}, {}, values.size(), na};
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      const double mean = sum / static_cast<double>(values.size());
      row.mean = mean;
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        row.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_summary_csv(std::span<const SummaryRow> rows, std::ostream& out) {
  out << "condition,method,metric,mean,sd,count,na_count\n";
  for (const SummaryRow& r : rows) {
    out << r.condition << ',' << r.method << ',' << r.metric << ','
        << (r.mean ? fmt_double(*r.mean) : "NA") << ',' << (r.sd ? fmt_double(*r.sd) : "NA") << ','
        << r.count << ',' << r.na_count << '\n';
  }
}

std::optional<double> summary_mean(std::span<const SummaryRow> rows, std::string_view condition,
                                   std::string_view method, std::string_view metric) {
  for (const SummaryRow& r : rows) {
    if (r.condition == condition && r.method == method && r.metric == metric) return r.mean;
  }
  return std::nullopt;
}

std::size_t thread_count() {
  if (const char* env = std::getenv("RFPCA_THREADS"); env && *env) {
    const std::string s(env);
    std::size_t n = 0;
    if (!parse_field(s, n) || n == 0) {
      throw Error(ErrorKind::Domain, "RFPCA_THREADS must be a positive integer, got '" + s + "'");
    }
    return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t threads) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n || first_error) return;
        i = next++;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double fnorm_distance(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "fnorm_distance: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return (a - b).norm();
}

double test_loglik(const FittedParams& params, const Dataset& test) {
  if (test.empty()) return 0.0;
  test.validate();
  auto check_shape = [&](const MatrixXd& m) {
    if (m.rows() != test.rows || m.cols() != test.cols) {
      throw Error(ErrorKind::DimensionMismatch,
                  "test_loglik: model is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                      ", test data is " + std::to_string(test.rows) + "x" + std::to_string(test.cols));
    }
  };
  double sum = 0.0;
  if (const auto* p = std::get_if<MatrixNormalParams>(&params)) {
    check_shape(p->mean);
    for (const MatrixXd& x : test.samples) sum += matrix_normal_logpdf(x, *p);
  } else if (const auto* p = std::get_if<MatrixTParams>(&params)) {
    check_shape(p->mean);
    for (const MatrixXd& x : test.samples) sum += matrix_t_logpdf(x, *p);
  } else if (const auto* p = std::get_if<MatrixTTParams>(&params)) {
    check_shape(p->center);
    for (const MatrixXd& x : test.samples) sum += matrix_T_logpdf(x, *p);
  } else if (const auto* p = std::get_if<MultivariateTParams>(&params)) {
    if (p->center.size() != test.rows * test.cols) {
      throw Error(ErrorKind::DimensionMismatch,
                  "test_loglik: model has dimension " + std::to_string(p->center.size()) +
                      ", test data has c*r = " + std::to_string(test.rows * test.cols));
    }
    for (const MatrixXd& x : test.samples) sum += mvt_logpdf(vec_of(x), *p);
  } else {
    throw Error(ErrorKind::Domain, "test_loglik: empty parameters");
  }
  return sum;
}

double test_loglik(const FitResult& fit, const Dataset& test) {
  return fit.transposed ? test_loglik(fit.params, test.transposed()) : test_loglik(fit.params, test);
}

ConvergenceRace run_convergence_race(const SyntheticSpec& spec, const FitOptions& opts) {
  const SyntheticData sd = make_synthetic(spec);
  return {fit_matrix_t_ecme(sd.data, opts), fit_matrix_t_px_ecme(sd.data, opts)};
}

void write_race_csv(const ConvergenceRace& race, std::ostream& out) {
  out << "algorithm,iteration,loglik,seconds\n";
  for (const FitResult* f : {&race.ecme, &race.px_ecme}) {
    const std::string_view name = to_string(f->algorithm);
    out << name << ",0," << fmt_double(f->initial_loglik) << ",0\n";
    for (std::size_t t = 0; t < f->loglik_trace.size(); ++t) {
      out << name << ',' << t + 1 << ',' << fmt_double(f->loglik_trace[t]) << ','
          << fmt_double(f->time_trace[t]) << '\n';
    }
  }
}

std::vector<ExperimentRecord> run_robustness_table(const RobustnessConfig& config) {
  const std::size_t np = config.contamination.size();
  std::vector<std::vector<ExperimentRecord>> cells(np * config.replicates);
  parallel_for(cells.size(), [&](std::size_t task) {
    const std::size_t ip = task / config.replicates, rep = task % config.replicates;
    const double p = config.contamination[ip];
    SyntheticSpec spec = SyntheticSpec::preset(SyntheticFamily::Data3, replicate_seed(config.seed, rep));
    spec.n = config.n;
    spec.contamination = p;
    const SyntheticData sd = make_synthetic(spec);
    const MatrixXd truth = sd.separable_covariance();
    const std::string cond = condition_label("p", p);
    for (PcaMethod m : config.methods) {
      const auto t0 = Clock::now();
      std::optional<double> dist;
      int iters = 0;
      try {
        const MethodFit fit = fit_method(m, sd.data, config.fit);
        dist = fnorm_distance(truth, implied_covariance(fit));
        if (fit.fit) iters = fit.fit->iterations;
      } catch (const Error&) {
        // Recorded as NA.
      }
      cells[task].emplace_back(cond, std::string(to_string(m)), "fnorm_distance", dist, rep,
                               seconds_since(t0), iters);
    }
  });
  std::vector<ExperimentRecord> out;
  for (auto& c : cells) std::move(c.begin(), c.end(), std::back_inserter(out));
  return out;
}

std::vector<ExperimentRecord> run_accuracy_sweep(const AccuracyConfig& config) {
  const std::size_t ns = config.sizes.size();
  std::vector<std::vector<ExperimentRecord>> cells(ns * config.replicates);
  const RngSeed test_base{config.seed.value ^ 0x9e3779b97f4a7c15ULL};
  parallel_for(cells.size(), [&](std::size_t task) {
    const std::size_t is = task / config.replicates, rep = task % config.replicates;
    const std::size_t n = config.sizes[is];
    const SyntheticData train = make_synthetic(data1_shaped(n, config.dof, replicate_seed(config.seed, rep)));
    const SyntheticData test =
        make_synthetic(data1_shaped(config.test_size, config.dof, replicate_seed(test_base, rep)));
    const std::string cond = condition_label("N", static_cast<double>(n));
    const MatrixTParams truth{train.mean, SpdMatrix(train.col_cov), SpdMatrix(train.row_cov), train.dof};
    cells[task].emplace_back(cond, "truth", "test_loglik", test_loglik(FittedParams{truth}, test.data), rep);
    for (PcaMethod m : config.methods) {
      const auto t0 = Clock::now();
      std::optional<double> ll;
      int iters = 0;
      try {
        const MethodFit fit = fit_method(m, train.data, config.fit);
        ll = method_test_loglik(fit, test.data);
        if (fit.fit) iters = fit.fit->iterations;
      } catch (const Error&) {
      }
      cells[task].emplace_back(cond, std::string(to_string(m)), "test_loglik", ll, rep, seconds_since(t0),
                               iters);
    }
  });
  std::vector<ExperimentRecord> out;
  for (auto& c : cells) std::move(c.begin(), c.end(), std::back_inserter(out));
  return out;
}

std::vector<ExperimentRecord> run_timing_benchmark(const TimingConfig& config) {
  if (config.iterations < 1) throw Error(ErrorKind::Domain, "run_timing_benchmark: need at least 1 timed iteration");
  std::vector<ExperimentRecord> out;
  FitOptions opts;
  opts.tol = std::numeric_limits<double>::min();  // in practice runs the full budget
  opts.max_iterations = config.iterations + 1;
  for (std::size_t n : config.sizes) {
    SyntheticSpec spec = SyntheticSpec::preset(SyntheticFamily::Data2, config.seed);
    if (config.c != spec.c || config.r != spec.r) {
      spec.family = SyntheticFamily::Custom;
      spec.c = config.c;
      spec.r = config.r;
      spec.col_eigenvalues = linspace(1.0, 0.5, static_cast<std::size_t>(config.c));
      spec.row_eigenvalues = linspace(1.0, 0.5, static_cast<std::size_t>(config.r));
      spec.col_planted.resize(0, 0);
      spec.row_planted.resize(0, 0);
    }
    spec.n = n;
    const SyntheticData sd = make_synthetic(spec);
    const std::string cond = condition_label("N", static_cast<double>(n));
    for (PcaMethod m : config.methods) {
      double best = std::numeric_limits<double>::infinity();
      double wall = 0.0;
      int iters = 0;
      for (std::size_t rep = 0; rep < std::max<std::size_t>(1, config.repeats); ++rep) {
        const auto t0 = Clock::now();
        const MethodFit fit = fit_method(m, sd.data, opts);
        const double total = seconds_since(t0);
        double per = total;
        if (fit.fit && fit.fit->time_trace.size() >= 2) {
          const auto& tt = fit.fit->time_trace;
          per = (tt.back() - tt.front()) / static_cast<double>(tt.size() - 1);
          iters = fit.fit->iterations;
        }
        if (per < best) {
          best = per;
          wall = total;
        }
      }
      out.emplace_back(cond, std::string(to_string(m)), "seconds_per_iteration", best, 0, wall, iters);
    }
  }
  return out;
}

std::vector<ExperimentRecord> run_outlier_experiment(const SyntheticSpec& spec, const FitOptions& opts) {
  const SyntheticData sd = make_synthetic(spec);
  if (!sd.data.outlier_truth) throw Error(ErrorKind::Domain, "run_outlier_experiment: no planted outliers");
  std::string cond;
  switch (spec.family) {
    case SyntheticFamily::Data1: cond = "Data1"; break;
    case SyntheticFamily::Data2: cond = "Data2"; break;
    case SyntheticFamily::Data3: cond = "Data3"; break;
    case SyntheticFamily::Data3_2: cond = "Data3-2"; break;
    case SyntheticFamily::Data3_3: cond = "Data3-3"; break;
    case SyntheticFamily::Custom: cond = condition_label("p", spec.contamination); break;
  }
  std::vector<ExperimentRecord> out;
  for (PcaMethod m : {PcaMethod::RFPCA, PcaMethod::tPCA}) {
    const auto t0 = Clock::now();
    std::optional<double> min_normal, max_outlier;
    int iters = 0;
    try {
      const FitResult fit = m == PcaMethod::RFPCA ? fit_matrix_t_px_ecme(sd.data, opts)
                                                  : fit_mvt_ecme(sd.data.vectorized(), opts);
      iters = fit.iterations;
      const OutlierReport rep = score(sd.data, fit);
      for (std::size_t i = 0; i < rep.weights.size(); ++i) {
        const double w = rep.weights[i];
        if ((*sd.data.outlier_truth)[i]) max_outlier = std::max(max_outlier.value_or(w), w);
        else min_normal = std::min(min_normal.value_or(w), w);
      }
    } catch (const Error&) {
    }
    const double wall = seconds_since(t0);
    out.emplace_back(cond, std::string(to_string(m)), "min_normal_weight", min_normal, 0, wall, iters);
    out.emplace_back(cond, std::string(to_string(m)), "max_outlier_weight", max_outlier, 0, wall, iters);
  }
  return out;
}

std::vector<int> knn_predict(const Dataset& train, const Dataset& test, const PcaModel& model, std::size_t k) {
  if (train.empty()) throw Error(ErrorKind::InsufficientData, "knn: empty training set");
  if (!train.labels) throw Error(ErrorKind::Domain, "knn: training set has no labels");
  if (k == 0) throw Error(ErrorKind::Domain, "knn: k must be at least 1");
  train.validate();
  test.validate();
  std::vector<MatrixXd> z_train;
  z_train.reserve(train.size());
  for (const MatrixXd& x : train.samples) z_train.push_back(transform_observation(model, x));
  k = std::min(k, train.size());

  std::vector<int> pred(test.size());
  std::vector<std::pair<double, std::size_t>> dist(train.size());
  for (std::size_t j = 0; j < test.size(); ++j) {
    const MatrixXd z = transform_observation(model, test.samples[j]);
    for (std::size_t i = 0; i < train.size(); ++i) dist[i] = {(z - z_train[i]).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    // Votes per label; among equal counts the label seen first (nearest) wins.
    std::vector<std::pair<int, std::size_t>> votes;
    for (std::size_t i = 0; i < k; ++i) {
      const int label = (*train.labels)[dist[i].second];
      auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == label; });
      if (it == votes.end()) votes.emplace_back(label, 1);
      else ++it->second;
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    pred[j] = best->first;
  }
  return pred;
}

double knn_classify(const Dataset& train, const Dataset& test, const PcaModel& model, std::size_t k) {
  if (!test.labels) throw Error(ErrorKind::Domain, "knn: test set has no labels");
  if (test.empty()) throw Error(ErrorKind::InsufficientData, "knn: empty test set");
  const std::vector<int> pred = knn_predict(train, test, model, k);
  std::size_t wrong = 0;
  for (std::size_t j = 0; j < pred.size(); ++j) wrong += pred[j] != (*test.labels)[j];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

}  // namespace rfpca
