// Command-line front end: simulate, fit, transform, detect, classify, bench, report.
//
// Exit codes: 0 success, 2 invalid input or arguments, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfpca/error.hpp"
#include "rfpca/estimators.hpp"
#include "rfpca/experiments.hpp"
#include "rfpca/io.hpp"
#include "rfpca/outliers.hpp"
#include "rfpca/pca.hpp"
#include "rfpca/synthetic.hpp"

namespace {

using namespace rfpca;
using Eigen::MatrixXd;

constexpr int kValidation = 2;
constexpr int kNumerical = 3;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Writes to `path`, or to stdout when it is empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error(ErrorKind::Io, path + ": cannot open for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void write_matrix_csv(const MatrixXd& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, path + ": cannot open for writing");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
    out << '\n';
  }
}

SyntheticFamily parse_family(const std::string& s) {
  static const std::map<std::string, SyntheticFamily> names{
      {"data1", SyntheticFamily::Data1},     {"data2", SyntheticFamily::Data2},
      {"data3", SyntheticFamily::Data3},     {"data3-2", SyntheticFamily::Data3_2},
      {"data3-3", SyntheticFamily::Data3_3}, {"custom", SyntheticFamily::Custom}};
  return names.at(s);
}

struct SimulateArgs {
  std::string family = "data1";
  std::optional<std::size_t> n;
  std::optional<long> c, r;
  std::optional<double> dof, p, lo, hi;
  std::uint64_t seed = 1;
  std::string out;
};

int run_simulate(const SimulateArgs& a) {
  const SyntheticFamily fam = parse_family(a.family);
  SyntheticSpec s = SyntheticSpec::preset(fam == SyntheticFamily::Custom ? SyntheticFamily::Data1 : fam,
                                          RngSeed{a.seed});
  if (fam == SyntheticFamily::Custom) {
    s.family = SyntheticFamily::Custom;
    s.c = a.c.value_or(s.c);
    s.r = a.r.value_or(s.r);
    // A custom shape gets the Data1 spectra layout without planted vectors.
    if (s.c != 4 || s.r != 10) {
      s.col_eigenvalues = linspace(1.0, 0.5, static_cast<std::size_t>(s.c));
      s.row_eigenvalues = linspace(1.0, 0.5, static_cast<std::size_t>(s.r));
      s.col_planted.resize(0, 0);
      s.row_planted.resize(0, 0);
    }
  } else if (a.c || a.r) {
    throw Error(ErrorKind::Domain, "--c/--r apply to --family custom only");
  }
  if (a.n) s.n = *a.n;
  if (a.dof) s.dof = *a.dof;
  if (a.p) s.contamination = *a.p;
  if (a.lo) s.outlier_range.first = *a.lo;
  if (a.hi) s.outlier_range.second = *a.hi;
  const SyntheticData sd = make_synthetic(s);
  save_dataset(sd.data, a.out);
  return 0;
}

struct FitArgs {
  std::string data;
  std::string model = "mt";
  std::string algo;
  double tol = 1e-8;
  int tmax = 1000;
  std::optional<std::uint64_t> seed;
  bool standardize = false;
  std::string out;
  std::string trace;
  std::string params;
};

FitResult do_fit(const std::string& model, std::string algo, const Dataset& d, const FitOptions& o) {
  if (algo.empty()) algo = model == "mn" ? "cm" : model == "mt" ? "px-ecme" : "ecme";
  if (model == "mn" && algo == "cm") return fit_matrix_normal(d, o);
  if (model == "mvt" && algo == "ecme") return fit_mvt_ecme(d.vectorized(), o);
  if (model == "mT" && algo == "ecme") return fit_matrix_T_ecme(d, o);
  if (model == "mt" && algo == "ecme") return fit_matrix_t_ecme(d, o);
  if (model == "mt" && algo == "px-ecme") return fit_matrix_t_px_ecme(d, o);
  throw Error(ErrorKind::Domain, "model '" + model + "' has no algorithm '" + algo + "'");
}

int run_fit(const FitArgs& a) {
  const Dataset d = load_dataset(a.data, a.standardize);
  FitOptions o;
  o.tol = a.tol;
  o.max_iterations = a.tmax;
  if (a.seed) {
    o.init = InitMode::Random;
    o.init_seed = *a.seed;
  }
  const FitResult f = do_fit(a.model, a.algo, d, o);

  Output out(a.out);
  std::ostream& s = out.stream();
  s << "key,value\n";
  s << "family," << to_string(f.family) << "\nalgorithm," << to_string(f.algorithm) << '\n';
  s << "iterations," << f.iterations << "\nconverged," << (f.converged ? 1 : 0) << '\n';
  s << "initial_loglik," << fmt(f.initial_loglik) << "\nfinal_loglik," << fmt(f.final_loglik()) << '\n';
  s << "elapsed_seconds," << fmt(f.elapsed_seconds) << '\n';
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (requires { p.dof; }) {
          s << "dof," << fmt(p.dof) << "\nnu_at_bound," << (f.nu_at_bound ? 1 : 0) << '\n';
        }
        if constexpr (std::is_same_v<P, MultivariateTParams> || std::is_same_v<P, MatrixTParams>) {
          s << "mean_weight_residual," << fmt(mean_weight_residual(f)) << '\n';
        }
        if (a.params.empty()) return;
        if constexpr (std::is_same_v<P, MultivariateTParams>) {
          write_matrix_csv(p.center, a.params + "_center.csv");
          write_matrix_csv(p.scale.matrix(), a.params + "_scale.csv");
        } else if constexpr (!std::is_same_v<P, std::monostate>) {
          if constexpr (std::is_same_v<P, MatrixTTParams>) write_matrix_csv(p.center, a.params + "_mean.csv");
          else write_matrix_csv(p.mean, a.params + "_mean.csv");
          write_matrix_csv(p.col_cov.matrix(), a.params + "_col_cov.csv");
          write_matrix_csv(p.row_cov.matrix(), a.params + "_row_cov.csv");
        }
      },
      f.params);
  if (f.transposed) s << "transposed,1\n";

  if (!a.trace.empty()) {
    std::ofstream t(a.trace, std::ios::binary);
    if (!t) throw Error(ErrorKind::Io, a.trace + ": cannot open for writing");
    t << "iteration,loglik,seconds\n0," << fmt(f.initial_loglik) << ",0\n";
    for (std::size_t i = 0; i < f.loglik_trace.size(); ++i) {
      t << i + 1 << ',' << fmt(f.loglik_trace[i]) << ',' << fmt(f.time_trace[i]) << '\n';
    }
  }
  return 0;
}

struct TransformArgs {
  std::string data;
  std::string method = "RFPCA";
  std::optional<long> qc, qr, q;
  std::optional<std::string> apply;
  std::string out;
};

int run_transform(const TransformArgs& a) {
  const PcaMethod m = parse_pca_method(a.method);
  const Dataset train = load_dataset(a.data);
  if (is_vector_method(m) ? !a.q : !(a.qc && a.qr)) {
    throw Error(ErrorKind::Domain, is_vector_method(m) ? "vector methods need --q" : "matrix methods need --qc and --qr");
  }
  const MethodFit fit = fit_method(m, train);
  const PcaModel model = build_model(fit, a.qc.value_or(0), a.qr.value_or(0), a.q.value_or(0));
  const Dataset target = a.apply ? load_dataset(*a.apply) : train;
  Output out(a.out);
  for (const MatrixXd& x : target.samples) {
    const MatrixXd z = transform_observation(model, x);
    bool first = true;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        out.stream() << (first ? "" : ",") << fmt(z(i, j));
        first = false;
      }
    }
    out.stream() << '\n';
  }
  return 0;
}

struct DetectArgs {
  std::string data;
  std::string model = "mt";
  double threshold = 0.5;
  std::string out;
};

int run_detect(const DetectArgs& a) {
  const Dataset d = load_dataset(a.data);
  const FitResult f = a.model == "mvt" ? fit_mvt_ecme(d.vectorized()) : fit_matrix_t_px_ecme(d);
  const OutlierReport rep = score(d, f, a.threshold);
  export_weight_scatter(rep, a.out.empty() ? std::string("/dev/stdout") : a.out);
  return 0;
}

struct ClassifyArgs {
  std::string train, test;
  std::vector<std::string> methods{"PCA", "tPCA", "FPCA", "BPCA", "TPCA", "RFPCA"};
  long qc = 0, qr = 0, q = 0;
  std::size_t k = 1;
  std::string out;
};

int run_classify(const ClassifyArgs& a) {
  const Dataset train = load_dataset(a.train), test = load_dataset(a.test);
  std::vector<ExperimentRecord> recs;
  for (const std::string& name : a.methods) {
    const PcaMethod m = parse_pca_method(name);
    const long q = a.q ? a.q : a.qc * a.qr;
    std::optional<double> err;
    try {
      const MethodFit fit = fit_method(m, train);
      err = knn_classify(train, test, build_model(fit, a.qc, a.qr, q), a.k);
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      std::cerr << name << ": " << e.what() << '\n';
    }
    recs.emplace_back("k=" + std::to_string(a.k), std::string(to_string(m)), "error_rate", err);
  }
  Output out(a.out);
  write_records_csv(recs, out.stream());
  return 0;
}

struct BenchArgs {
  std::string suite;
  std::size_t replicates = 10;
  std::uint64_t seed = 1;
  std::string out;
  std::string trace;
  std::vector<std::size_t> sizes;
};

int run_bench(const BenchArgs& a) {
  std::vector<ExperimentRecord> recs;
  if (a.suite == "convergence") {
    for (std::size_t i = 0; i < a.replicates; ++i) {
      FitOptions o;
      o.init = InitMode::Random;
      o.init_seed = replicate_seed(RngSeed{a.seed}, i).value;
      const ConvergenceRace race =
          run_convergence_race(SyntheticSpec::preset(SyntheticFamily::Data1, replicate_seed(RngSeed{a.seed}, i)), o);
      for (const FitResult* f : {&race.ecme, &race.px_ecme}) {
        const std::string alg(to_string(f->algorithm));
        recs.emplace_back("Data1", alg, "iterations", f->iterations, i, f->elapsed_seconds, f->iterations);
        recs.emplace_back("Data1", alg, "final_loglik", f->final_loglik(), i, f->elapsed_seconds, f->iterations);
      }
      if (i == 0 && !a.trace.empty()) {
        std::ofstream t(a.trace, std::ios::binary);
        if (!t) throw Error(ErrorKind::Io, a.trace + ": cannot open for writing");
        write_race_csv(race, t);
      }
    }
  } else if (a.suite == "accuracy") {
    AccuracyConfig cfg;
    cfg.replicates = a.replicates;
    cfg.seed = RngSeed{a.seed};
    if (!a.sizes.empty()) cfg.sizes = a.sizes;
    recs = run_accuracy_sweep(cfg);
  } else if (a.suite == "robustness") {
    RobustnessConfig cfg;
    cfg.replicates = a.replicates;
    cfg.seed = RngSeed{a.seed};
    recs = run_robustness_table(cfg);
  } else if (a.suite == "outliers") {
    for (SyntheticFamily fam : {SyntheticFamily::Data3, SyntheticFamily::Data3_2, SyntheticFamily::Data3_3}) {
      const auto r = run_outlier_experiment(SyntheticSpec::preset(fam, RngSeed{a.seed}));
      recs.insert(recs.end(), r.begin(), r.end());
    }
  } else if (a.suite == "timing") {
    TimingConfig cfg;
    cfg.seed = RngSeed{a.seed};
    if (!a.sizes.empty()) cfg.sizes = a.sizes;
    recs = run_timing_benchmark(cfg);
  }
  Output out(a.out);
  write_records_csv(recs, out.stream());
  return 0;
}

struct ReportArgs {
  std::string records;
  std::string out;
};

int run_report(const ReportArgs& a) {
  const auto recs = read_records_csv(a.records);
  Output out(a.out);
  write_summary_csv(summarize(recs), out.stream());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust matrix PCA: fitting, projection, outlier scoring and benchmarks"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--family", sim.family)->check(CLI::IsMember({"data1", "data2", "data3", "data3-2", "data3-3", "custom"}));
  simulate->add_option("--n", sim.n, "Regular observations");
  simulate->add_option("--c", sim.c)->check(CLI::PositiveNumber);
  simulate->add_option("--r", sim.r)->check(CLI::PositiveNumber);
  simulate->add_option("--dof", sim.dof, "inf for matrix-normal data");
  simulate->add_option("--p", sim.p, "Outlier proportion");
  simulate->add_option("--lo", sim.lo, "Outlier range low end");
  simulate->add_option("--hi", sim.hi, "Outlier range high end");
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--out", sim.out, "Manifest path")->required();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a model and print a key,value summary");
  fit->add_option("--data", fa.data, "Dataset manifest")->required();
  fit->add_option("--model", fa.model)->check(CLI::IsMember({"mn", "mt", "mT", "mvt"}));
  fit->add_option("--algo", fa.algo)->check(CLI::IsMember({"cm", "ecme", "px-ecme"}));
  fit->add_option("--tol", fa.tol)->check(CLI::PositiveNumber);
  fit->add_option("--tmax", fa.tmax)->check(CLI::PositiveNumber);
  fit->add_option("--seed", fa.seed, "Random initialization seed (deterministic start when omitted)");
  fit->add_flag("--standardize", fa.standardize, "Z-score each variable on load");
  fit->add_option("--out", fa.out);
  fit->add_option("--trace", fa.trace, "Write the log-likelihood trace CSV here");
  fit->add_option("--params", fa.params, "Write <prefix>_mean.csv, _col_cov.csv, _row_cov.csv (or _center, _scale)");

  TransformArgs ta;
  auto* transform = app.add_subcommand("transform", "Reduced representations, one flattened row per observation");
  transform->add_option("--data", ta.data, "Training manifest")->required();
  transform->add_option("--method", ta.method);
  transform->add_option("--qc", ta.qc)->check(CLI::PositiveNumber);
  transform->add_option("--qr", ta.qr)->check(CLI::PositiveNumber);
  transform->add_option("--q", ta.q)->check(CLI::PositiveNumber);
  transform->add_option("--apply", ta.apply, "Project this dataset instead of the training data");
  transform->add_option("--out", ta.out);

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Outlier weights from a matrix-t (or vec multivariate-t) fit");
  detect->add_option("--data", da.data)->required();
  detect->add_option("--model", da.model)->check(CLI::IsMember({"mt", "mvt"}));
  detect->add_option("--threshold", da.threshold)->check(CLI::Range(0.0, std::numeric_limits<double>::max()));
  detect->add_option("--out", da.out);

  ClassifyArgs ca;
  auto* classify = app.add_subcommand("classify", "k-NN error rate in each method's reduced space");
  classify->add_option("--train", ca.train)->required();
  classify->add_option("--test", ca.test)->required();
  classify->add_option("--methods", ca.methods);
  classify->add_option("--qc", ca.qc)->check(CLI::PositiveNumber);
  classify->add_option("--qr", ca.qr)->check(CLI::PositiveNumber);
  classify->add_option("--q", ca.q, "Vector-method dimension (default qc*qr)")->check(CLI::PositiveNumber);
  classify->add_option("--k", ca.k)->check(CLI::PositiveNumber);
  classify->add_option("--out", ca.out);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite and write experiment records");
  bench->add_option("--suite", ba.suite)->required()->check(
      CLI::IsMember({"convergence", "accuracy", "robustness", "outliers", "timing"}));
  bench->add_option("--replicates", ba.replicates)->check(CLI::PositiveNumber);
  bench->add_option("--seed", ba.seed);
  bench->add_option("--sizes", ba.sizes, "Sample sizes (accuracy, timing)");
  bench->add_option("--trace", ba.trace, "Convergence: first race's traces CSV");
  bench->add_option("--out", ba.out);

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Aggregate experiment records into a summary table");
  report->add_option("--records", ra.records)->required();
  report->add_option("--out", ra.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidation;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*fit) return run_fit(fa);
    if (*transform) return run_transform(ta);
    if (*detect) return run_detect(da);
    if (*classify) return run_classify(ca);
    if (*bench) return run_bench(ba);
    if (*report) return run_report(ra);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_numerical() ? kNumerical : kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return 0;
}
