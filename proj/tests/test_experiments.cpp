#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rfpca/error.hpp"
#include "rfpca/experiments.hpp"
#include "rfpca/io.hpp"
#include "rfpca/synthetic.hpp"
#include "test_support.hpp"

using namespace rfpca;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("rfpca_exp_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an rfpca::Error");
  return ErrorKind::Domain;
}

std::size_t line_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.line();
  }
  FAIL("expected a FormatError");
  return 0;
}

Dataset labelled_blobs(std::size_t per_class, std::uint64_t seed) {
  Rng rng(RngSeed{seed});
  Dataset d{3, 2, {}, std::vector<int>{}, {}};
  for (int label = 0; label < 3; ++label) {
    for (std::size_t i = 0; i < per_class; ++i) {
      MatrixXd x = test::random_matrix(3, 2, rng) * 0.3;
      x(label, 0) += 3.0;
      d.samples.push_back(x);
      d.labels->push_back(label);
    }
  }
  return d;
}

}  // namespace

TEST_CASE("linspace") {
  CHECK(linspace(0.8, 0.5, 3) == std::vector<double>{0.8, 0.65, 0.5});
  CHECK(linspace(5, 5, 4) == std::vector<double>{5, 5, 5, 5});
  CHECK(linspace(2.5, 9.0, 1) == std::vector<double>{2.5});
  const auto v = linspace(0.5, 0.3, 7);
  REQUIRE(v.size() == 7);
  CHECK(v.front() == 0.5);
  CHECK(v.back() == 0.3);
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] - v[i - 1] == doctest::Approx(-1.0 / 30).epsilon(1e-12));
  CHECK(kind_of([] { linspace(0, 1, 0); }) == ErrorKind::Domain);
}

TEST_CASE("make_synthetic") {
  SUBCASE("Data1 layout") {
    const SyntheticSpec s = SyntheticSpec::preset(SyntheticFamily::Data1, RngSeed{1});
    CHECK(s.c == 4);
    CHECK(s.r == 10);
    CHECK(s.n == 500);
    CHECK(s.dof == 3.0);
    CHECK(s.col_eigenvalues == std::vector<double>{5, 0.8, 0.65, 0.5});
    const std::vector<double> row{4, 3, 2, 0.5, 0.5 - 1.0 / 30, 0.5 - 2.0 / 30, 0.4, 0.4 - 1.0 / 30,
                                  0.4 - 2.0 / 30, 0.3};
    REQUIRE(s.row_eigenvalues.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(s.row_eigenvalues[i] == doctest::Approx(row[i]).epsilon(1e-14));
    const SyntheticData sd = make_synthetic(s);
    CHECK(sd.data.size() == 500);
    // Leading eigenvectors are the planted ones.
    const EigenSystem ec = sym_eigen(sd.col_cov);
    CHECK(std::abs(ec.vectors.col(0).dot(planted_vector(4, 1))) == doctest::Approx(1.0).epsilon(1e-12));
    const EigenSystem er = sym_eigen(sd.row_cov);
    for (int k = 1; k <= 3; ++k) {
      CHECK(std::abs(er.vectors.col(k - 1).dot(planted_vector(10, k))) == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (Eigen::Index i = 0; i < 10; ++i) CHECK(er.values(i) == doctest::Approx(row[static_cast<std::size_t>(i)]));
  }
  SUBCASE("planted vector") {
    const VectorXd u2 = planted_vector(10, 2);
    CHECK(u2.norm() == doctest::Approx(1.0));
    CHECK(u2(2) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(std::abs(u2(3)) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(u2.cwiseAbs().sum() == doctest::Approx(std::sqrt(2.0)));
  }
  SUBCASE("contamination appends outliers") {
    SyntheticSpec s = SyntheticSpec::preset(SyntheticFamily::Data3, RngSeed{2});
    s.contamination = 0.03;
    const SyntheticData sd = make_synthetic(s);
    CHECK(sd.data.size() == 1030);
    REQUIRE(sd.data.outlier_truth);
    for (std::size_t i = 0; i < sd.data.size(); ++i) CHECK((*sd.data.outlier_truth)[i] == (i >= 1000));
    for (std::size_t i = 1000; i < 1030; ++i) {
      CHECK(sd.data.samples[i].minCoeff() >= 100.0);
      CHECK(sd.data.samples[i].maxCoeff() < 110.0);
    }
    CHECK(outlier_count(1000, 0.07) == 70);
    CHECK(outlier_count(500, 0.001) == 1);
  }
  SUBCASE("p = 0 gives all normal") {
    SyntheticSpec s = SyntheticSpec::preset(SyntheticFamily::Data3, RngSeed{3});
    s.contamination = 0.0;
    const SyntheticData sd = make_synthetic(s);
    CHECK(sd.data.size() == 1000);
    CHECK(std::none_of(sd.data.outlier_truth->begin(), sd.data.outlier_truth->end(), [](bool b) { return b; }));
  }
  SUBCASE("deterministic under seed") {
    const auto a = make_synthetic(SyntheticSpec::preset(SyntheticFamily::Data1, RngSeed{9}));
    const auto b = make_synthetic(SyntheticSpec::preset(SyntheticFamily::Data1, RngSeed{9}));
    const auto c = make_synthetic(SyntheticSpec::preset(SyntheticFamily::Data1, RngSeed{10}));
    CHECK(a.data.vectorized() == b.data.vectorized());
    CHECK(a.data.vectorized() != c.data.vectorized());
  }
  SUBCASE("eigenvalue count must match the dimension") {
    SyntheticSpec s = SyntheticSpec::preset(SyntheticFamily::Data1, RngSeed{1});
    s.col_eigenvalues.pop_back();
    CHECK(kind_of([&] { make_synthetic(s); }) == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("fnorm_distance") {
  Rng rng(RngSeed{4});
  const MatrixXd a = test::random_matrix(20, 20, rng);
  CHECK(fnorm_distance(a, a) == 0.0);
  MatrixXd b = a;
  b(3, 7) += 0.25;
  CHECK(fnorm_distance(a, b) == doctest::Approx(0.25).epsilon(1e-12));
  const MatrixXd c = test::random_matrix(20, 20, rng);
  double ss = 0.0;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) ss += (a(i, j) - c(i, j)) * (a(i, j) - c(i, j));
  CHECK(fnorm_distance(a, c) == doctest::Approx(std::sqrt(ss)).epsilon(1e-14));
  CHECK(kind_of([&] { fnorm_distance(a, MatrixXd::Zero(20, 19)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("test_loglik") {
  Rng rng(RngSeed{5});
  const MatrixXd sc = test::random_spd(3, rng), sr = test::random_spd(2, rng);
  const MatrixXd m = test::random_matrix(3, 2, rng);
  const MatrixTParams mt{m, SpdMatrix(sc), SpdMatrix(sr), 4.5};
  const FittedParams p{mt};
  CHECK(test_loglik(p, Dataset{}) == 0.0);

  const MatrixXd x = test::random_matrix(3, 2, rng);
  Dataset copies{3, 2, std::vector<MatrixXd>(7, x), {}, {}};
  CHECK(test_loglik(p, copies) == doctest::Approx(7 * matrix_t_logpdf(x, mt)).epsilon(1e-13));

  // The matrix-t and the vec multivariate t with the same implied parameters agree.
  const Eigen::Map<const VectorXd> vm(m.data(), m.size());
  const FittedParams v{MultivariateTParams{vm, SpdMatrix(kronecker(sr, sc)), 4.5}};
  Dataset d{3, 2, {}, {}, {}};
  for (int i = 0; i < 30; ++i) d.samples.push_back(test::random_matrix(3, 2, rng));
  CHECK(test_loglik(v, d) == doctest::Approx(test_loglik(p, d)).epsilon(1e-12));

  Dataset wrong{2, 3, {test::random_matrix(2, 3, rng)}, {}, {}};
  CHECK(kind_of([&] { test_loglik(p, wrong); }) == ErrorKind::DimensionMismatch);
  Dataset small{2, 2, {test::random_matrix(2, 2, rng)}, {}, {}};
  CHECK(kind_of([&] { test_loglik(v, small); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { test_loglik(FittedParams{}, d); }) == ErrorKind::Domain);
}

TEST_CASE("knn_classify") {
  const Dataset train = labelled_blobs(10, 11), test = labelled_blobs(10, 12);
  const MethodFit fit = fit_method(PcaMethod::FPCA, train);
  const PcaModel model = build_model(fit, 2, 2, 0);

  SUBCASE("test equal to train gives zero error") { CHECK(knn_classify(train, train, model) == 0.0); }
  SUBCASE("single training point predicts its label everywhere") {
    Dataset one{3, 2, {train.samples[15]}, std::vector<int>{(*train.labels)[15]}, {}};
    for (int p : knn_predict(one, test, model)) CHECK(p == (*train.labels)[15]);
    CHECK(knn_classify(one, test, model) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("matches an exhaustive scan") {
    const std::vector<int> pred = knn_predict(train, test, model);
    for (std::size_t j = 0; j < test.size(); ++j) {
      const MatrixXd z = transform_observation(model, test.samples[j]);
      double best = 1e300;
      int label = -1;
      for (std::size_t i = 0; i < train.size(); ++i) {
        const double dist = (z - transform_observation(model, train.samples[i])).norm();
        if (dist < best) best = dist, label = (*train.labels)[i];
      }
      CHECK(pred[j] == label);
    }
    CHECK(knn_classify(train, test, model) < 0.1);
  }
  SUBCASE("vector models and k > 1") {
    const PcaModel vmodel = build_model(fit_method(PcaMethod::PCA, train), 0, 0, 3);
    CHECK(knn_classify(train, test, vmodel, 3) < 0.1);
    // k beyond the training size votes over everything; the three-way tie goes to the nearest.
    CHECK(knn_classify(train, test, vmodel, 1000) == knn_classify(train, test, vmodel, 1));
  }
  SUBCASE("errors") {
    Dataset empty{3, 2, {}, std::vector<int>{}, {}};
    CHECK(kind_of([&] { knn_classify(empty, test, model); }) == ErrorKind::InsufficientData);
    Dataset unlabeled = train;
    unlabeled.labels.reset();
    CHECK(kind_of([&] { knn_classify(unlabeled, test, model); }) == ErrorKind::Domain);
    CHECK(kind_of([&] { knn_classify(train, test, model, 0); }) == ErrorKind::Domain);
  }
}

TEST_CASE("dataset IO") {
  const fs::path dir = scratch_dir("io");
  SUBCASE("roundtrip is exact") {
    SyntheticSpec s = SyntheticSpec::preset(SyntheticFamily::Data3, RngSeed{6});
    s.n = 40;
    Dataset d = make_synthetic(s).data;
    d.samples[0](1, 2) = 0.1 + 0.2;
    d.samples[1](0, 0) = -1.0 / 3.0;
    d.samples[2](3, 9) = 1e-300;
    d.labels = std::vector<int>(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) (*d.labels)[i] = static_cast<int>(i % 4) - 1;
    save_dataset(d, dir / "set.json");
    const Dataset back = load_dataset(dir / "set.json");
    CHECK(back.rows == 4);
    CHECK(back.cols == 10);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.samples[i] == d.samples[i]);
    CHECK(back.labels == d.labels);
    CHECK(back.outlier_truth == d.outlier_truth);
    // Saving again reproduces identical text.
    save_dataset(back, dir / "again.json");
    CHECK(read_text(dir / "set.csv") == read_text(dir / "again.csv"));
  }
  SUBCASE("row-major value order") {
    write_text(dir / "m.json", R"({"c": 2, "r": 3, "n": 1, "data": "m.csv"})");
    write_text(dir / "m.csv", "1,2,3,4,5,6\n");
    const Dataset d = load_dataset(dir / "m.json");
    CHECK(d.samples[0](0, 2) == 3.0);
    CHECK(d.samples[0](1, 0) == 4.0);
    CHECK(!d.labels);
    CHECK(!d.outlier_truth);
  }
  SUBCASE("n mismatch names both counts") {
    write_text(dir / "m.json", R"({"c": 1, "r": 2, "n": 3, "data": "m.csv"})");
    write_text(dir / "m.csv", "1,2\n3,4\n");
    try {
      load_dataset(dir / "m.json");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string w = e.what();
      CHECK(w.find("2 entries") != std::string::npos);
      CHECK(w.find("n = 3") != std::string::npos);
    }
  }
  SUBCASE("distinct errors with line numbers") {
    write_text(dir / "m.json", R"({"c": 1, "r": 2, "n": 3, "data": "m.csv"})");
    write_text(dir / "m.csv", "1,2\n3,4,5\n6,7\n");
    CHECK(line_of([&] { load_dataset(dir / "m.json"); }) == 2);
    write_text(dir / "m.csv", "1,2\n3,4\n6,x\n");
    CHECK(line_of([&] { load_dataset(dir / "m.json"); }) == 3);
    write_text(dir / "bad.json", "{\n  \"c\": 1,\n  \"r\" 2\n}\n");
    CHECK(line_of([&] { load_dataset(dir / "bad.json"); }) == 3);
    write_text(dir / "nor.json", R"({"c": 1, "n": 3, "data": "m.csv"})");
    CHECK(kind_of([&] { load_dataset(dir / "nor.json"); }) == ErrorKind::Format);
    write_text(dir / "lab.json", R"({"c": 1, "r": 2, "n": 2, "data": "ok.csv", "labels": "lab.txt"})");
    write_text(dir / "ok.csv", "1,2\n3,4\n");
    write_text(dir / "lab.txt", "1\nfoo\n");
    CHECK(line_of([&] { load_dataset(dir / "lab.json"); }) == 2);
    write_text(dir / "miss.json", R"({"c": 1, "r": 2, "n": 2, "data": "absent.csv"})");
    CHECK(kind_of([&] { load_dataset(dir / "miss.json"); }) == ErrorKind::Io);
    CHECK(kind_of([&] { load_dataset(dir / "nothing.json"); }) == ErrorKind::Io);
  }
  SUBCASE("standardization") {
    write_text(dir / "z.json", R"({"c": 1, "r": 2, "n": 4, "data": "z.csv"})");
    write_text(dir / "z.csv", "1,7\n2,7\n3,7\n4,7\n");
    const Dataset d = load_dataset(dir / "z.json", true);
    double mean = 0.0, ss = 0.0;
    for (const auto& x : d.samples) mean += x(0, 0);
    for (const auto& x : d.samples) ss += x(0, 0) * x(0, 0);
    CHECK(mean == doctest::Approx(0.0));
    CHECK(ss / 4 == doctest::Approx(1.0));
    for (const auto& x : d.samples) CHECK(x(0, 1) == 0.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("experiment records") {
  CHECK(kind_of([] { ExperimentRecord("p=0", "RFPCA", "no_such_metric", 1.0); }) == ErrorKind::Domain);
  const std::vector<ExperimentRecord> recs{
      {"p=0", "RFPCA", "fnorm_distance", 1.5, 0, 0.25, 12},
      {"p=0", "RFPCA", "fnorm_distance", 2.5, 1, 0.5, 9},
      {"p=0", "tPCA", "fnorm_distance", std::nullopt, 0},
      {"p=0", "tPCA", "fnorm_distance", 3.0, 1},
      {"p=0", "PCA", "fnorm_distance", std::nullopt, 0},
  };
  const fs::path dir = scratch_dir("records");
  write_records_csv(recs, dir / "r.csv");
  const auto back = read_records_csv(dir / "r.csv");
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].condition == recs[i].condition);
    CHECK(back[i].method == recs[i].method);
    CHECK(back[i].value == recs[i].value);
    CHECK(back[i].replicate == recs[i].replicate);
    CHECK(back[i].wall_seconds == recs[i].wall_seconds);
    CHECK(back[i].iterations == recs[i].iterations);
  }
  const auto rows = summarize(recs);
  CHECK(summary_mean(rows, "p=0", "RFPCA", "fnorm_distance") == 2.0);
  CHECK(summary_mean(rows, "p=0", "tPCA", "fnorm_distance") == 3.0);
  CHECK(!summary_mean(rows, "p=0", "PCA", "fnorm_distance"));
  CHECK(!summary_mean(rows, "p=1", "PCA", "fnorm_distance"));
  // Order independence.
  std::vector<ExperimentRecord> shuffled(recs.rbegin(), recs.rend());
  std::ostringstream a, b;
  write_summary_csv(rows, a);
  write_summary_csv(summarize(shuffled), b);
  CHECK(a.str() == b.str());
  write_text(dir / "bad.csv", "condition,method,metric,replicate,value,wall_seconds,iterations\np,m,test_loglik,0,zz,0,0\n");
  CHECK(line_of([&] { read_records_csv(dir / "bad.csv"); }) == 2);
  fs::remove_all(dir);
}

TEST_CASE("parallel_for") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 4);
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 3) throw Error(ErrorKind::Domain, "boom");
                  }, 3),
                  Error);
  CHECK(thread_count() >= 1);
}

TEST_CASE("convergence race on Data1") {
  FitOptions o;
  o.init = InitMode::Random;
  o.init_seed = 17;
  const ConvergenceRace race = run_convergence_race(SyntheticSpec::preset(SyntheticFamily::Data1, RngSeed{8}), o);
  CHECK(race.px_ecme.iterations <= race.ecme.iterations);
  CHECK(race.ecme.initial_loglik == race.px_ecme.initial_loglik);
  const double a = race.ecme.final_loglik(), b = race.px_ecme.final_loglik();
  CHECK(std::abs(a - b) / std::abs(a) < 1e-6);
  for (const FitResult* f : {&race.ecme, &race.px_ecme}) {
    double prev = f->initial_loglik;
    for (double l : f->loglik_trace) {
      CHECK(l >= prev - 1e-9 * std::abs(prev));
      prev = l;
    }
  }
  std::ostringstream csv;
  write_race_csv(race, csv);
  const std::string s = csv.str();
  CHECK(s.rfind("algorithm,iteration,loglik,seconds\necme,0,", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) ==
        3 + race.ecme.loglik_trace.size() + race.px_ecme.loglik_trace.size());
}

TEST_CASE("harnesses are reproducible and well formed") {
  SUBCASE("robustness") {
    RobustnessConfig cfg;
    cfg.contamination = {0.0, 0.03};
    cfg.replicates = 2;
    cfg.n = 300;
    cfg.methods = {PcaMethod::PCA, PcaMethod::BPCA, PcaMethod::RFPCA};
    const auto a = run_robustness_table(cfg);
    CHECK(a.size() == 2 * 2 * 3);
    const auto b = run_robustness_table(cfg);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value == b[i].value);
    const auto rows = summarize(a);
    CHECK(*summary_mean(rows, "p=0", "RFPCA", "fnorm_distance") < 5.0);
    CHECK(*summary_mean(rows, "p=0.03", "RFPCA", "fnorm_distance") < 10.0);
    CHECK(*summary_mean(rows, "p=0.03", "PCA", "fnorm_distance") > 1000.0);
  }
  SUBCASE("tPCA with N <= cr is recorded as NA") {
    RobustnessConfig cfg;
    cfg.contamination = {0.0};
    cfg.replicates = 1;
    cfg.n = 40;
    cfg.methods = {PcaMethod::tPCA};
    const auto recs = run_robustness_table(cfg);
    REQUIRE(recs.size() == 1);
    CHECK(!recs[0].value);
  }
  SUBCASE("accuracy") {
    AccuracyConfig cfg;
    cfg.sizes = {100};
    cfg.replicates = 2;
    cfg.test_size = 200;
    const auto recs = run_accuracy_sweep(cfg);
    CHECK(recs.size() == 2 * (1 + cfg.methods.size()));
    const auto rows = summarize(recs);
    const double truth = *summary_mean(rows, "N=100", "truth", "test_loglik");
    for (PcaMethod m : cfg.methods) {
      CHECK(*summary_mean(rows, "N=100", to_string(m), "test_loglik") < truth);
    }
  }
  SUBCASE("timing records one row per method and size") {
    TimingConfig cfg;
    cfg.c = 5;
    cfg.r = 6;
    cfg.sizes = {30, 60};
    cfg.iterations = 2;
    const auto recs = run_timing_benchmark(cfg);
    CHECK(recs.size() == 2 * cfg.methods.size());
    for (const auto& r : recs) {
      CHECK(r.metric == "seconds_per_iteration");
      CHECK(*r.value > 0.0);
      CHECK(r.iterations == 3);
    }
  }
  SUBCASE("outlier experiment") {
    const auto recs = run_outlier_experiment(SyntheticSpec::preset(SyntheticFamily::Data3, RngSeed{4}));
    CHECK(recs.size() == 4);
    const auto rows = summarize(recs);
    CHECK(*summary_mean(rows, "Data3", "RFPCA", "max_outlier_weight") <
          *summary_mean(rows, "Data3", "RFPCA", "min_normal_weight"));
  }
}

TEST_CASE("on nu = 30 data the likelihood-based methods agree within 2% at N = 1000") {
  AccuracyConfig cfg;
  cfg.sizes = {1000};
  cfg.replicates = 3;
  cfg.dof = 30.0;
  const auto rows = summarize(run_accuracy_sweep(cfg));
  std::vector<double> means;
  for (PcaMethod m : cfg.methods) means.push_back(*summary_mean(rows, "N=1000", to_string(m), "test_loglik"));
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  CHECK((*hi - *lo) / std::abs(*hi) < 0.02);
}
